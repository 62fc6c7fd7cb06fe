#pragma once

// Diode-matrix control store: one shared fetch row plus one execute row per
// opcode. Each row is the set of control lines it asserts (a diode present at
// that row/column crossing) and a 4 or 8 microsecond duration.

#include "mr/isa.hpp"
#include "mr/word.hpp"

#include <array>
#include <bitset>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mr::micro {

enum class ControlLine : std::uint8_t {
    MEM_READ,
    MEM_WRITE,
    ALU_ADD,
    ALU_SUB,
    ALU_AND,
    ALU_IOR,
    ALU_XOR,
    ALU_SHL,
    ALU_SHR,
    ACC_LOAD,
    ACC_CLEAR,
    ACC_COMPLEMENT,
    MAR_FROM_PC,
    MAR_FROM_ADDR,
    MDR_TO_ACC,
    ACC_TO_MDR,
    IR_LOAD,
    PC_INCREMENT,
    PC_FROM_ADDR,
    COND_ZERO,
    COND_NEG,
    COND_OVF,
    ADDR_FIELD_WRITE,
    IO_STROBE,
    HALT,
    BREAK,
};

inline constexpr std::size_t kControlLineCount = 26;

std::string_view to_string(ControlLine line);
std::optional<ControlLine> parse_control_line(std::string_view text);

inline constexpr unsigned kShortCycleUs = 4;
inline constexpr unsigned kLongCycleUs = 8;

struct MicroWord {
    std::bitset<kControlLineCount> lines;
    unsigned duration_us = kShortCycleUs;

    bool asserts(ControlLine l) const { return lines.test(static_cast<std::size_t>(l)); }
    MicroWord& set(ControlLine l)
    {
        lines.set(static_cast<std::size_t>(l));
        return *this;
    }
    bool operator==(const MicroWord&) const = default;
};

struct MicroRom {
    MicroWord fetch;
    std::array<MicroWord, isa::kOpcodeCount> execute;

    bool operator==(const MicroRom&) const = default;
};

struct Diagnostic {
    enum class Severity { error, warning };

    Severity severity = Severity::error;
    int line = 0;     // source line, 0 when the ROM did not come from text
    std::string row;  // "FETCH" or the opcode number
    std::string message;

    std::string to_string() const;
};

class RomError : public Error {
public:
    explicit RomError(std::vector<Diagnostic> diagnostics);
    const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

private:
    std::vector<Diagnostic> diagnostics_;
};

/// Parses the ROM text format:
///   FETCH|<opcode>  dur=<4|8>  LINE LINE ...    # comment
/// Throws RomError listing every problem found, each with its line number.
/// Warnings alone do not prevent loading.
MicroRom load_rom(std::string_view text);

/// Structural lint. Empty iff every invariant holds and no rule fires.
std::vector<Diagnostic> validate_rom(const MicroRom& rom);

/// Execute durations that disagree with the instruction table's duration
/// classes.
std::vector<Diagnostic> check_against_isa(const MicroRom& rom, const isa::IsaTable& table);

/// fetch.duration + execute[opcode].duration.
unsigned microstep_cost(const MicroRom& rom, unsigned opcode);

/// Canonical text rendering, mnemonics as trailing comments when a table is
/// given.
std::string write_rom(const MicroRom& rom, const isa::IsaTable* table = nullptr);

std::string_view default_rom_text();
const MicroRom& default_rom();

} // namespace mr::micro
