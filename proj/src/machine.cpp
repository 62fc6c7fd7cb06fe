#include "mr/machine.hpp"

namespace mr {

using micro::ControlLine;
using L = micro::ControlLine;

void MachineConfig::validate() const
{
    auto require = [](bool ok, const char* what) {
        if (!ok)
            throw ConfigError(std::string("machine configuration: ") + what);
    };
    require(word_bits == 18, "word length must be 18 bits");
    require(memory_words == 1024, "core memory must hold 1024 words");
    require(plane_rows == 32 && plane_columns == 32, "core planes must be 32x32");
    require(planes == word_bits, "one core plane per word bit (18 planes)");
    require(plane_rows * plane_columns == memory_words, "plane geometry must cover memory exactly");
    require(single_sided_planes, "core planes are single-sided");
    require(instruction_count == 32, "the instruction set has 32 instructions");
    require(short_cycle_us == 4 && long_cycle_us == 8, "microinstruction cycles are 4 and 8 us");
    for (unsigned r : {rates.teletype_cps, rates.reader_cps, rates.fast_reader_cps})
        require(r > 0, "device rates must be positive");
}

std::string_view to_string(Status s)
{
    switch (s) {
    case Status::halted: return "halted";
    case Status::running: return "running";
    case Status::paused: return "paused";
    }
    return "?";
}

std::optional<Status> parse_status(std::string_view s)
{
    for (Status st : {Status::halted, Status::running, Status::paused})
        if (to_string(st) == s)
            return st;
    return std::nullopt;
}

std::string_view to_string(StopReason r)
{
    switch (r) {
    case StopReason::halted: return "halted";
    case StopReason::breakpoint: return "breakpoint";
    case StopReason::program_pause: return "program_pause";
    case StopReason::instruction_limit: return "instruction_limit";
    case StopReason::time_limit: return "time_limit";
    case StopReason::stop_requested: return "stop_requested";
    }
    return "?";
}

std::vector<Address> MachineState::breakpoint_list() const
{
    std::vector<Address> out;
    for (std::size_t a = 0; a < kMemoryWords; ++a)
        if (breakpoints.test(a))
            out.push_back(static_cast<Address>(a));
    return out;
}

namespace {

MachineConfig validated(MachineConfig cfg)
{
    cfg.validate();
    return cfg;
}

micro::MicroRom checked_rom(micro::MicroRom rom, const isa::IsaTable& table)
{
    auto diags = micro::validate_rom(rom);
    std::erase_if(diags, [](const auto& d) { return d.severity != micro::Diagnostic::Severity::error; });
    auto cross = micro::check_against_isa(rom, table);
    diags.insert(diags.end(), cross.begin(), cross.end());
    if (!diags.empty())
        throw micro::RomError(std::move(diags));
    return rom;
}

} // namespace

Machine::Machine(MachineConfig cfg, isa::IsaTable table, micro::MicroRom rom)
    : config_(validated(cfg)),
      table_(std::move(table)),
      rom_(checked_rom(std::move(rom), table_)),
      alu_(logic::build_lookahead_adder(kWordBits, logic::kDefaultGroupSize), kWordBits),
      devices_(config_.rates)
{
    if (auto problems = table_.validate(); !problems.empty())
        throw isa::IsaError("instruction table: " + problems.front());
}

void Machine::reset()
{
    const auto bps = state_.breakpoints;
    state_ = MachineState{};
    state_.breakpoints = bps;
    skip_breakpoint_once_ = false;
    stop_requested_ = false;
    current_ = StepReport{};
}

void Machine::start()
{
    state_.status = Status::running;
}

void Machine::pause()
{
    if (state_.status == Status::running)
        state_.status = Status::paused;
}

std::uint32_t Machine::alu_add(std::uint32_t a, std::uint32_t b, bool carry_in)
{
    return alu_.add(a, b, carry_in).sum;
}

MicroStepReport Machine::apply(const micro::MicroWord& w, Phase phase)
{
    MachineState& s = state_;
    MicroStepReport rep{phase, w.duration_us, 0};
    const Word acc_in = s.acc;
    const unsigned channel = isa::decode(s.ir).modifier;

    if (w.asserts(L::MAR_FROM_PC))
        s.mar = s.pc;
    if (w.asserts(L::MAR_FROM_ADDR))
        s.mar = s.ir.address_field();
    if (w.asserts(L::MEM_READ))
        s.mdr = s.memory[s.mar];  // destructive read and rewrite share the cycle
    if (w.asserts(L::IR_LOAD))
        s.ir = s.mdr;
    if (w.asserts(L::PC_INCREMENT))
        s.pc = static_cast<Address>((s.pc + 1) & kAddressMask);
    if (w.asserts(L::ACC_TO_MDR))
        s.mdr = s.acc;

    // Accumulator: at most one source per microword, all 18 bits at once.
    const std::uint32_t a = acc_in.value();
    const std::uint32_t m = s.mdr.value();
    if (w.asserts(L::ACC_CLEAR)) {
        s.acc = Word(0);
    } else if (w.asserts(L::ACC_COMPLEMENT)) {
        s.acc = Word(~a);
    } else if (w.asserts(L::MDR_TO_ACC)) {
        s.acc = s.mdr;
    } else if (w.asserts(L::ACC_LOAD)) {
        if (w.asserts(L::ALU_ADD) || w.asserts(L::ALU_SUB)) {
            const bool sub = w.asserts(L::ALU_SUB);
            const std::uint32_t operand = sub ? (~m & kWordMask) : m;
            const std::uint32_t r = alu_add(a, operand, sub);
            if (((a ^ operand) & kSignBit) == 0 && ((a ^ r) & kSignBit) != 0)
                s.overflow = true;
            s.acc = Word(r);
        } else if (w.asserts(L::ALU_AND)) {
            s.acc = Word(a & m);
        } else if (w.asserts(L::ALU_IOR)) {
            s.acc = Word(a | m);
        } else if (w.asserts(L::ALU_XOR)) {
            s.acc = Word(a ^ m);
        } else if (w.asserts(L::ALU_SHL)) {
            if (w.asserts(L::COND_OVF) && (((a >> 17) ^ (a >> 16)) & 1u) != 0)
                s.overflow = true;
            s.acc = Word(a << 1);
        } else if (w.asserts(L::ALU_SHR)) {
            const std::uint32_t fill = (w.asserts(L::COND_NEG) && acc_in.negative()) ? kSignBit : 0;
            s.acc = Word((a >> 1) | fill);
        } else if (w.asserts(L::IO_STROBE)) {
            dev::Frame f = 0;
            rep.device_us += devices_.transfer(channel, dev::Direction::input, f);
            s.acc = Word(f);
        }
    }

    if (w.asserts(L::PC_FROM_ADDR)) {
        bool take = true;
        if (w.asserts(L::COND_ZERO))
            take = acc_in.value() == 0;
        else if (w.asserts(L::COND_NEG))
            take = acc_in.negative();
        else if (w.asserts(L::COND_OVF)) {
            take = s.overflow;
            s.overflow = false;
        }
        if (take)
            s.pc = s.ir.address_field();
    }

    if (w.asserts(L::MEM_WRITE)) {
        if (w.asserts(L::ADDR_FIELD_WRITE)) {
            // Only the ten address planes are driven.
            const std::uint32_t old = s.memory[s.mar].value();
            s.memory[s.mar] = Word((old & ~kAddressMask) | (s.acc.value() & kAddressMask));
        } else {
            s.memory[s.mar] = s.mdr;
        }
    }

    if (w.asserts(L::IO_STROBE) && !w.asserts(L::ACC_LOAD)) {
        if (w.asserts(L::ACC_TO_MDR)) {
            rep.device_us += devices_.punch_word(channel, s.mdr);
        } else {
            dev::Frame f = static_cast<dev::Frame>(s.acc.value() & dev::kFrameMask);
            rep.device_us += devices_.transfer(channel, dev::Direction::output, f);
        }
    }

    if (w.asserts(L::HALT))
        s.status = Status::halted;
    else if (w.asserts(L::BREAK))
        s.status = Status::paused;

    s.sim_time_us += rep.duration_us + rep.device_us;
    return rep;
}

MicroStepReport Machine::step_micro()
{
    if (state_.status == Status::halted)
        throw MachineFault("machine is halted");

    if (state_.phase == Phase::fetch) {
        current_ = StepReport{};
        current_.pc = state_.pc;
        skip_breakpoint_once_ = false;
        MicroStepReport rep = apply(rom_.fetch, Phase::fetch);
        current_.instruction = state_.ir;
        current_.micro[0] = rep;
        current_.microwords = 1;
        current_.microcode_us = rep.duration_us;
        state_.phase = Phase::execute;
        return rep;
    }

    const unsigned op = isa::decode(state_.ir).opcode;
    const isa::OpcodeInfo& info = table_[op];
    if (info.semantic == isa::Semantic::spare)
        current_.warning = "spare opcode " + std::to_string(op) + " (" + info.mnemonic + ") executed as NOP at "
                           + address_to_string(current_.pc);
    MicroStepReport rep;
    try {
        rep = apply(rom_.execute[op], Phase::execute);
    } catch (const dev::DeviceError& e) {
        state_.sim_time_us += rom_.execute[op].duration_us;
        state_.phase = Phase::fetch;
        state_.status = Status::halted;
        ++state_.instructions;
        throw MachineFault(std::string("I/O fault at ") + address_to_string(current_.pc) + ": " + e.what());
    }
    current_.micro[current_.microwords++] = rep;
    current_.microcode_us += rep.duration_us;
    current_.device_us += rep.device_us;
    current_.status = state_.status;
    state_.phase = Phase::fetch;
    ++state_.instructions;
    if (trace_)
        trace_(current_);
    return rep;
}

StepReport Machine::step_instruction()
{
    if (state_.status == Status::halted)
        throw MachineFault("machine is halted");
    if (state_.phase == Phase::fetch)
        step_micro();
    step_micro();
    return current_;
}

RunReport Machine::run(RunLimits limits)
{
    if (limits.max_instructions == 0 || limits.max_sim_us == 0)
        throw MachineFault("run limits must be non-zero");
    if (state_.status == Status::halted)
        throw MachineFault("machine is halted");
    state_.status = Status::running;
    stop_requested_ = false;

    RunReport report;
    const std::uint64_t t0 = state_.sim_time_us;
    auto pause = [&](StopReason why) {
        state_.status = Status::paused;
        report.reason = why;
    };
    for (;;) {
        if (queue_pending_.load(std::memory_order_acquire))
            drain_commands();
        if (stop_requested_) {
            stop_requested_ = false;
            pause(StopReason::stop_requested);
            break;
        }
        if (state_.phase == Phase::fetch) {
            if (state_.breakpoints.test(state_.pc) && !skip_breakpoint_once_) {
                skip_breakpoint_once_ = true;
                pause(StopReason::breakpoint);
                break;
            }
            if (report.instructions >= limits.max_instructions) {
                pause(StopReason::instruction_limit);
                break;
            }
            if (state_.sim_time_us - t0 >= limits.max_sim_us) {
                pause(StopReason::time_limit);
                break;
            }
        }
        step_micro();
        if (state_.phase == Phase::fetch) {
            ++report.instructions;
            if (state_.status == Status::halted) {
                report.reason = StopReason::halted;
                break;
            }
            if (state_.status == Status::paused) {
                report.reason = StopReason::program_pause;
                break;
            }
        }
    }
    report.elapsed_us = state_.sim_time_us - t0;
    return report;
}

void Machine::set_breakpoint(Address addr)
{
    if (addr >= kMemoryWords)
        throw MachineFault("breakpoint address out of range");
    state_.breakpoints.set(addr);
}

void Machine::clear_breakpoint(Address addr)
{
    if (addr >= kMemoryWords)
        throw MachineFault("breakpoint address out of range");
    state_.breakpoints.reset(addr);
}

void Machine::boot_load(const dev::TapeImage& tape, unsigned channel)
{
    if (state_.status != Status::halted)
        throw MachineFault("boot requires a halted machine");
    const auto& spec = devices_.spec(channel);
    if (!spec || spec->function != dev::Function::read)
        throw MachineFault("boot channel " + std::to_string(channel) + " is not a tape reader");
    if (tape.frames.empty())
        throw MachineFault("boot tape is empty");
    const std::vector<Word> words = dev::decode_tape(tape);
    if (words.size() > kMemoryWords)
        throw MachineFault("boot tape holds " + std::to_string(words.size()) + " words; core holds 1024");
    for (std::size_t i = 0; i < words.size(); ++i)
        state_.memory[i] = words[i];
    state_.pc = 0;
    state_.phase = Phase::fetch;
    skip_breakpoint_once_ = false;
    state_.sim_time_us += tape.frames.size() * dev::frame_time_us(spec->rate_cps);
}

void Machine::boot_from_reader(unsigned channel)
{
    if (state_.status != Status::halted)
        throw MachineFault("boot requires a halted machine");
    boot_load(devices_.take_tape(channel), channel);
}

PlaneView Machine::plane_view(unsigned plane) const
{
    if (plane >= kPlaneCount)
        throw MachineFault("plane " + std::to_string(plane) + " out of range (0..17)");
    PlaneView v;
    v.plane = plane;
    for (unsigned y = 0; y < kPlaneSide; ++y) {
        std::uint32_t row = 0;
        for (unsigned x = 0; x < kPlaneSide; ++x)
            row |= static_cast<std::uint32_t>(state_.memory[y * kPlaneSide + x].bit(plane)) << x;
        v.rows[y] = row;
    }
    return v;
}

void Machine::deposit(Address addr, Word w)
{
    if (addr >= kMemoryWords)
        throw MachineFault("deposit address out of range");
    state_.memory[addr] = w;
}

Word Machine::examine(Address addr) const
{
    if (addr >= kMemoryWords)
        throw MachineFault("examine address out of range");
    return state_.memory[addr];
}

void Machine::set_pc(Address addr)
{
    if (addr >= kMemoryWords)
        throw MachineFault("pc out of range");
    state_.pc = addr;
    state_.phase = Phase::fetch;
    skip_breakpoint_once_ = false;
}

std::uint64_t Machine::memory_checksum() const
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (Word w : state_.memory) {
        for (int shift : {16, 8, 0}) {
            h ^= (w.value() >> shift) & 0xffu;
            h *= 0x100000001b3ull;
        }
    }
    return h;
}

void Machine::post(ControlCommand command)
{
    if (auto* b = std::get_if<cmd::SetBreakpoint>(&command); b && b->addr >= kMemoryWords)
        throw MachineFault("breakpoint address out of range");
    if (auto* b = std::get_if<cmd::ClearBreakpoint>(&command); b && b->addr >= kMemoryWords)
        throw MachineFault("breakpoint address out of range");
    if (auto* m = std::get_if<cmd::MountTape>(&command)) {
        const auto& spec = devices_.spec(m->channel);
        if (!spec || spec->function != dev::Function::read)
            throw MachineFault("channel " + std::to_string(m->channel) + " is not a tape reader");
    }
    std::lock_guard lock(queue_mutex_);
    queue_.push_back(std::move(command));
    queue_pending_.store(true, std::memory_order_release);
}

void Machine::drain_commands()
{
    std::deque<ControlCommand> batch;
    {
        std::lock_guard lock(queue_mutex_);
        batch.swap(queue_);
        queue_pending_.store(false, std::memory_order_release);
    }
    for (auto& c : batch)
        apply_command(c);
}

void Machine::apply_command(ControlCommand& c)
{
    std::visit(
        [this](auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, cmd::SetBreakpoint>)
                state_.breakpoints.set(x.addr);
            else if constexpr (std::is_same_v<T, cmd::ClearBreakpoint>)
                state_.breakpoints.reset(x.addr);
            else if constexpr (std::is_same_v<T, cmd::Stop>)
                stop_requested_ = true;
            else if constexpr (std::is_same_v<T, cmd::MountTape>)
                devices_.mount(x.channel, std::move(x.tape));
        },
        c);
}

} // namespace mr
