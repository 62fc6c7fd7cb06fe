#pragma once

// The emulator core. A Machine is a single-owner state machine: one thread
// advances it. Other threads may only post() control commands, which the
// owner drains between microwords.

#include "mr/adder.hpp"
#include "mr/devices.hpp"
#include "mr/isa.hpp"
#include "mr/microcode.hpp"
#include "mr/word.hpp"

#include <array>
#include <atomic>
#include <bitset>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mr {

class ConfigError : public Error {
public:
    using Error::Error;
};

/// The one machine this emulator models. Geometry and timing are fixed;
/// only device rates may vary.
struct MachineConfig {
    unsigned word_bits = kWordBits;
    unsigned memory_words = kMemoryWords;
    unsigned plane_rows = 32;
    unsigned plane_columns = 32;
    unsigned planes = kWordBits;
    bool single_sided_planes = true;
    unsigned instruction_count = isa::kOpcodeCount;
    unsigned short_cycle_us = micro::kShortCycleUs;
    unsigned long_cycle_us = micro::kLongCycleUs;
    dev::DeviceRates rates;

    /// Throws ConfigError on any departure from the machine's fixed values.
    void validate() const;
};

inline constexpr unsigned kPlaneCount = kWordBits;
inline constexpr unsigned kPlaneSide = 32;

enum class Status : std::uint8_t { halted, running, paused };
std::string_view to_string(Status s);
std::optional<Status> parse_status(std::string_view s);

enum class Phase : std::uint8_t { fetch, execute };

struct MachineState {
    Word acc;
    Word ir;
    Word mdr;
    Address pc = 0;
    Address mar = 0;
    bool overflow = false;
    Status status = Status::halted;
    Phase phase = Phase::fetch;
    std::uint64_t sim_time_us = 0;
    std::uint64_t instructions = 0;
    std::array<Word, kMemoryWords> memory{};
    std::bitset<kMemoryWords> breakpoints;

    std::vector<Address> breakpoint_list() const;
    bool operator==(const MachineState&) const = default;
};

/// One 32x32 core plane: bit (x, y) is bit `plane` of word y*32 + x.
struct PlaneView {
    unsigned plane = 0;
    std::array<std::uint32_t, kPlaneSide> rows{};  // bit x of rows[y]

    bool lit(unsigned x, unsigned y) const { return ((rows.at(y) >> x) & 1u) != 0; }
};

struct MicroStepReport {
    Phase phase = Phase::fetch;
    unsigned duration_us = 0;
    std::uint64_t device_us = 0;
};

struct StepReport {
    Address pc = 0;  // where the instruction was fetched from
    Word instruction;
    unsigned microwords = 0;
    std::array<MicroStepReport, 2> micro{};
    std::uint64_t microcode_us = 0;
    std::uint64_t device_us = 0;
    Status status = Status::running;
    std::optional<std::string> warning;

    std::uint64_t elapsed_us() const { return microcode_us + device_us; }
};

enum class StopReason : std::uint8_t {
    halted,
    breakpoint,
    program_pause,
    instruction_limit,
    time_limit,
    stop_requested,
};
std::string_view to_string(StopReason r);

struct RunLimits {
    std::uint64_t max_instructions = 10'000'000;
    std::uint64_t max_sim_us = 3'600'000'000ull;
};

struct RunReport {
    StopReason reason = StopReason::halted;
    std::uint64_t instructions = 0;
    std::uint64_t elapsed_us = 0;
};

/// A device error or similar fault raised while executing. The machine is
/// left halted and consistent.
class MachineFault : public Error {
public:
    using Error::Error;
};

namespace cmd {
struct SetBreakpoint {
    Address addr;
};
struct ClearBreakpoint {
    Address addr;
};
struct Stop {};
struct MountTape {
    unsigned channel;
    dev::TapeImage tape;
};
} // namespace cmd

using ControlCommand = std::variant<cmd::SetBreakpoint, cmd::ClearBreakpoint, cmd::Stop, cmd::MountTape>;

class Machine {
public:
    explicit Machine(MachineConfig cfg = {}, isa::IsaTable table = isa::default_isa_table(),
                     micro::MicroRom rom = micro::default_rom());

    Machine(const Machine&) = delete;
    Machine& operator=(const Machine&) = delete;

    /// Clears memory and registers, status halted, simulated time zero.
    /// Breakpoints and devices are left alone.
    void reset();

    /// Operator start: leaves the halted/paused state so stepping may begin.
    void start();

    /// Operator stop between instructions: running becomes paused.
    void pause();

    /// Applies the fetch microword and then the execute microword. Throws
    /// MachineFault if the machine is halted.
    StepReport step_instruction();

    /// Applies exactly one microword.
    MicroStepReport step_micro();

    /// Runs until HLT, a breakpoint, a program pause, a stop command or a
    /// limit. Limits must be non-zero.
    RunReport run(RunLimits limits);

    void set_breakpoint(Address addr);
    void clear_breakpoint(Address addr);

    /// Deposits the tape's words from address 0 upward without executing any
    /// instruction. Charges the transfer time of the reader on `channel`.
    void boot_load(const dev::TapeImage& tape, unsigned channel = dev::kBootChannel);

    /// Boots from whatever tape is mounted on `channel`.
    void boot_from_reader(unsigned channel = dev::kBootChannel);

    PlaneView plane_view(unsigned plane) const;

    void deposit(Address addr, Word w);
    Word examine(Address addr) const;
    void set_pc(Address addr);

    const MachineState& state() const { return state_; }
    MachineState snapshot() const { return state_; }
    std::uint64_t memory_checksum() const;

    dev::DeviceBank& devices() { return devices_; }
    const dev::DeviceBank& devices() const { return devices_; }
    const isa::IsaTable& isa() const { return table_; }
    const micro::MicroRom& rom() const { return rom_; }
    const MachineConfig& config() const { return config_; }
    const logic::LogicNetwork& adder_network() const { return alu_.network(); }

    /// Called after every instruction completes, from the owning thread.
    void set_trace(std::function<void(const StepReport&)> hook) { trace_ = std::move(hook); }

    /// Thread-safe. Takes effect at the next microword boundary.
    void post(ControlCommand command);

    /// Applies queued control commands. Owner thread only.
    void drain_commands();

private:
    MicroStepReport apply(const micro::MicroWord& w, Phase phase);
    void apply_command(ControlCommand& c);
    std::uint32_t alu_add(std::uint32_t a, std::uint32_t b, bool carry_in);

    MachineConfig config_;
    isa::IsaTable table_;
    micro::MicroRom rom_;
    logic::AdderCircuit alu_;
    dev::DeviceBank devices_;
    MachineState state_;

    bool skip_breakpoint_once_ = false;
    bool stop_requested_ = false;
    std::optional<std::string> pending_warning_;
    StepReport current_;
    std::function<void(const StepReport&)> trace_;

    std::mutex queue_mutex_;
    std::deque<ControlCommand> queue_;
    std::atomic<bool> queue_pending_{false};
};

/// Two's-complement reference arithmetic used as the independent oracle for
/// the gate-level ALU.
struct HostAlu {
    static std::uint32_t add(std::uint32_t a, std::uint32_t b) { return (a + b) & kWordMask; }
    static std::uint32_t sub(std::uint32_t a, std::uint32_t b) { return (a - b) & kWordMask; }
};

// State snapshot text format: registers in octal, 1024 memory words as 32
// lines of 32 six-digit octal words, simulated time in microseconds.
std::string format_state(const MachineState& s);
MachineState parse_state(std::string_view text);

} // namespace mr
