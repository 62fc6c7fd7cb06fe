#include "mr/machine.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>
#include <thread>

using namespace mr;

namespace {

Word ins(std::string_view mnemonic, unsigned address = 0, unsigned modifier = 0)
{
    const auto op = isa::default_isa_table().find(mnemonic);
    REQUIRE(op);
    return isa::encode({*op, static_cast<std::uint8_t>(modifier), static_cast<Address>(address)});
}

// Loads `program` at address 0 and leaves the machine started at pc 0.
void load(Machine& m, std::initializer_list<Word> program)
{
    m.reset();
    Address a = 0;
    for (Word w : program)
        m.deposit(a++, w);
    m.start();
}

} // namespace

TEST_CASE("config accepts only the one machine")
{
    CHECK_NOTHROW(MachineConfig{}.validate());
    auto rejects = [](auto mutate) {
        MachineConfig c;
        mutate(c);
        CHECK_THROWS_AS(c.validate(), ConfigError);
    };
    rejects([](MachineConfig& c) { c.word_bits = 36; });
    rejects([](MachineConfig& c) { c.memory_words = 2048; });
    rejects([](MachineConfig& c) { c.plane_rows = 64; });
    rejects([](MachineConfig& c) { c.plane_columns = 16; });
    rejects([](MachineConfig& c) { c.planes = 36; });
    rejects([](MachineConfig& c) { c.single_sided_planes = false; });
    rejects([](MachineConfig& c) { c.instruction_count = 64; });
    rejects([](MachineConfig& c) { c.short_cycle_us = 5; });
    rejects([](MachineConfig& c) { c.long_cycle_us = 10; });
    MachineConfig faster;
    faster.rates.teletype_cps = 50;
    CHECK_NOTHROW(faster.validate());
    CHECK(MachineConfig{}.plane_rows * MachineConfig{}.plane_columns == MachineConfig{}.memory_words);
}

TEST_CASE("reset then step executes HLT in 12 us")
{
    Machine m;
    m.reset();
    CHECK(m.state().status == Status::halted);
    CHECK_THROWS_AS(m.step_instruction(), MachineFault);
    m.start();
    const StepReport r = m.step_instruction();
    CHECK(r.instruction == Word(0));
    CHECK(r.microwords == 2);
    CHECK(r.elapsed_us() == 12);
    CHECK(m.state().status == Status::halted);
    CHECK(m.state().sim_time_us == 12);
    CHECK(m.state().pc == 1);
}

TEST_CASE("reset leaves every plane dark and is repeatable")
{
    Machine m;
    m.deposit(5, Word(0777777));
    m.reset();
    for (unsigned p = 0; p < kPlaneCount; ++p)
        for (auto row : m.plane_view(p).rows)
            CHECK(row == 0);
    const MachineState first = m.snapshot();
    m.reset();
    CHECK(m.snapshot() == first);
}

TEST_CASE("ADD example")
{
    Machine m;
    load(m, {ins("LDA", 0143), ins("ADD", 0144)});
    m.deposit(0143, Word(5));
    m.deposit(0144, Word(7));
    m.step_instruction();
    const StepReport r = m.step_instruction();
    CHECK(m.state().acc == Word(12));
    CHECK(!m.state().overflow);
    CHECK(r.elapsed_us() == 16);
}

TEST_CASE("JPZ taken on zero and not taken otherwise")
{
    Machine m;
    load(m, {ins("JPZ", 0200)});
    StepReport r = m.step_instruction();
    CHECK(m.state().pc == 0200);
    CHECK(r.elapsed_us() == 12);

    load(m, {ins("LDA", 010), ins("JPZ", 0200)});
    m.deposit(010, Word(1));
    m.step_instruction();
    r = m.step_instruction();
    CHECK(m.state().pc == 2);
    CHECK(r.elapsed_us() == 12);
}

TEST_CASE("signed overflow sets the flag and JOV takes and clears it")
{
    Machine m;
    load(m, {ins("LDA", 010), ins("ADD", 011), ins("JOV", 0300)});
    m.deposit(010, Word(0377777));
    m.deposit(011, Word(1));
    m.step_instruction();
    m.step_instruction();
    CHECK(m.state().overflow);
    CHECK(m.state().acc == Word(0400000));
    m.step_instruction();
    CHECK(m.state().pc == 0300);
    CHECK(!m.state().overflow);
}

TEST_CASE("instruction semantics")
{
    Machine m;
    auto run_acc = [&](std::initializer_list<Word> prog, Word a, Word operand) {
        load(m, prog);
        m.deposit(01000, a);
        m.deposit(01001, operand);
        while (m.state().status == Status::running)
            m.step_instruction();
        return m.state().acc;
    };
    const Word x(0452525), y(0333000);
    CHECK(run_acc({ins("LDA", 01000), ins("SUB", 01001), ins("HLT")}, Word(5), Word(7)) == Word::from_signed(-2));
    CHECK(run_acc({ins("LDA", 01000), ins("AND", 01001), ins("HLT")}, x, y).value() == (x.value() & y.value()));
    CHECK(run_acc({ins("LDA", 01000), ins("IOR", 01001), ins("HLT")}, x, y).value() == (x.value() | y.value()));
    CHECK(run_acc({ins("LDA", 01000), ins("XOR", 01001), ins("HLT")}, x, y).value() == (x.value() ^ y.value()));
    CHECK(run_acc({ins("LDA", 01000), ins("CMA"), ins("HLT")}, x, y).value() == (~x.value() & kWordMask));
    CHECK(run_acc({ins("LDA", 01000), ins("CLA"), ins("HLT")}, x, y) == Word(0));
    CHECK(run_acc({ins("LDA", 01000), ins("SHR"), ins("HLT")}, Word(0400002), y) == Word(0600001));
    CHECK(run_acc({ins("LDA", 01000), ins("LSR"), ins("HLT")}, Word(0400002), y) == Word(0200001));
    CHECK(run_acc({ins("LDA", 01000), ins("LSL"), ins("HLT")}, Word(0600001), y) == Word(0400002));
    CHECK(!m.state().overflow);
    CHECK(run_acc({ins("LDA", 01000), ins("SHL"), ins("HLT")}, Word(0200000), y) == Word(0400000));
    CHECK(m.state().overflow);
    CHECK(run_acc({ins("LDA", 01000), ins("STA", 01001), ins("LDA", 01001), ins("HLT")}, x, y) == x);
    CHECK(m.examine(01001) == x);

    load(m, {ins("LDA", 01000), ins("JPN", 0100)});
    m.deposit(01000, Word(0400000));
    m.step_instruction();
    m.step_instruction();
    CHECK(m.state().pc == 0100);
}

TEST_CASE("every opcode costs one fetch and one execute microword of 12 or 16 us")
{
    for (unsigned op = 0; op < isa::kOpcodeCount; ++op) {
        Machine m;
        m.reset();
        m.deposit(0, isa::encode({static_cast<std::uint8_t>(op), 0, 0200}));
        if (m.isa()[op].operand == isa::OperandClass::device) {
            const bool reads = m.isa()[op].semantic == isa::Semantic::read_device;
            const unsigned ch = reads ? 4 : m.isa()[op].semantic == isa::Semantic::punch_word ? 2 : 0;
            m.deposit(0, isa::encode({static_cast<std::uint8_t>(op), static_cast<std::uint8_t>(ch), 0}));
            if (reads)
                m.devices().mount(4, dev::TapeImage{{1}, dev::Provenance::imported, {}});
        }
        m.start();
        const StepReport r = m.step_instruction();
        CHECK(r.microwords == 2);
        CHECK(r.micro[0].phase == Phase::fetch);
        CHECK(r.micro[1].phase == Phase::execute);
        CHECK_MESSAGE((r.microcode_us == 12 || r.microcode_us == 16), "opcode " << op);
        CHECK(r.microcode_us == micro::microstep_cost(m.rom(), op));
        CHECK(m.state().sim_time_us == r.microcode_us + r.device_us);
    }
}

TEST_CASE("gate-level ADD and SUB equal host arithmetic on random operands")
{
    Machine m;
    std::mt19937 rng(62500);
    std::uniform_int_distribution<std::uint32_t> word(0, kWordMask);
    load(m, {ins("LDA", 0100), ins("ADD", 0101), ins("STA", 0102), ins("LDA", 0100), ins("SUB", 0101),
             ins("HLT")});
    const MachineState program = m.snapshot();
    for (int i = 0; i < 10'000; ++i) {
        const std::uint32_t a = word(rng), b = word(rng);
        m.reset();
        for (Address k = 0; k < 6; ++k)
            m.deposit(k, program.memory[k]);
        m.deposit(0100, Word(a));
        m.deposit(0101, Word(b));
        m.start();
        m.run({});
        REQUIRE(m.state().status == Status::halted);
        CHECK(m.examine(0102).value() == HostAlu::add(a, b));
        CHECK(m.state().acc.value() == HostAlu::sub(a, b));
        CHECK(m.examine(0102).value() == oracle::add(a, b, false, kWordBits).sum);
    }
}

TEST_CASE("one million consecutive ADDs take sixteen simulated seconds")
{
    Machine m;
    m.reset();
    for (Address a = 0; a < kMemoryWords; ++a)
        m.deposit(a, ins("ADD", 01777));
    m.start();
    const RunReport r = m.run({1'000'000, ~0ull});
    CHECK(r.reason == StopReason::instruction_limit);
    CHECK(r.instructions == 1'000'000);
    CHECK(m.state().sim_time_us == 16'000'000);
    CHECK(r.elapsed_us == 16'000'000);
    CHECK(1'000'000ull * 1'000'000 / m.state().sim_time_us == 62'500);
    CHECK(m.state().status == Status::paused);
}

TEST_CASE("run limits")
{
    Machine m;
    load(m, {ins("JMP", 0)});
    CHECK_THROWS_AS(m.run({0, 100}), MachineFault);
    CHECK_THROWS_AS(m.run({100, 0}), MachineFault);
    RunReport r = m.run({500, ~0ull});
    CHECK(r.reason == StopReason::instruction_limit);
    CHECK(r.instructions == 500);
    CHECK(m.state().sim_time_us == 500 * 12);
    r = m.run({~0ull, 1200});
    CHECK(r.reason == StopReason::time_limit);
    CHECK(r.elapsed_us == 1200);
    // Resuming after a limit continues from the same place.
    r = m.run({1, ~0ull});
    CHECK(r.instructions == 1);
    CHECK(m.state().pc == 0);

    Machine h;
    h.reset();
    CHECK_THROWS_AS(h.run({}), MachineFault);
}

TEST_CASE("sim time never decreases across steps")
{
    Machine m;
    load(m, {ins("LDA", 010), ins("ADD", 010), ins("SHL"), ins("JPN", 6), ins("JMP", 1), ins("HLT"), ins("HLT")});
    m.deposit(010, Word(3));
    std::uint64_t last = 0;
    while (m.state().status == Status::running) {
        m.step_micro();
        CHECK(m.state().sim_time_us >= last);
        CHECK(m.state().pc < kMemoryWords);
        CHECK(m.state().mar < kMemoryWords);
        last = m.state().sim_time_us;
    }
}

TEST_CASE("step_micro alternates fetch and execute")
{
    Machine m;
    load(m, {ins("ADD", 010), ins("HLT")});
    CHECK(m.step_micro().phase == Phase::fetch);
    CHECK(m.state().phase == Phase::execute);
    CHECK(m.state().instructions == 0);
    CHECK(m.step_micro().phase == Phase::execute);
    CHECK(m.state().phase == Phase::fetch);
    CHECK(m.state().instructions == 1);
    CHECK(m.state().sim_time_us == 16);
    // A step_instruction after a lone fetch completes that instruction only.
    m.step_micro();
    const StepReport r = m.step_instruction();
    CHECK(r.instruction == Word(0));
    CHECK(r.microwords == 2);
}

TEST_CASE("trace hook sees every instruction")
{
    Machine m;
    std::vector<StepReport> seen;
    m.set_trace([&](const StepReport& r) { seen.push_back(r); });
    load(m, {ins("CLA"), ins("NOP"), ins("X24"), ins("HLT")});
    m.run({});
    REQUIRE(seen.size() == 4);
    CHECK(seen[0].pc == 0);
    CHECK(seen[3].pc == 3);
    CHECK(!seen[1].warning);
    REQUIRE(seen[2].warning);
    CHECK(seen[2].warning->find("spare opcode 24") != std::string::npos);
    CHECK(seen[3].status == Status::halted);
}

TEST_CASE("breakpoints fire before the watched fetch")
{
    Machine m;
    // 0: ADD ONE  1: JMP 0   with a counter in the accumulator.
    load(m, {ins("ADD", 010), ins("JMP", 0)});
    m.deposit(010, Word(1));
    SUBCASE("never reached")
    {
        m.set_breakpoint(0500);
        CHECK(m.run({100, ~0ull}).reason == StopReason::instruction_limit);
    }
    SUBCASE("loop head pauses each iteration with memory unchanged")
    {
        m.set_breakpoint(1);
        m.set_breakpoint(1);  // idempotent
        const auto sum = m.memory_checksum();
        for (unsigned i = 1; i <= 5; ++i) {
            const RunReport r = m.run({});
            CHECK(r.reason == StopReason::breakpoint);
            CHECK(m.state().pc == 1);
            CHECK(m.state().phase == Phase::fetch);
            CHECK(m.state().acc == Word(i));
            CHECK(m.state().status == Status::paused);
            CHECK(m.memory_checksum() == sum);
        }
    }
    SUBCASE("clear during pause then resume runs past")
    {
        m.set_breakpoint(1);
        CHECK(m.run({}).reason == StopReason::breakpoint);
        m.clear_breakpoint(1);
        const RunReport r = m.run({50, ~0ull});
        CHECK(r.reason == StopReason::instruction_limit);
        CHECK(r.instructions == 50);
    }
    CHECK_THROWS_AS(m.set_breakpoint(kMemoryWords), MachineFault);
    CHECK_THROWS_AS(m.post(cmd::SetBreakpoint{kMemoryWords}), MachineFault);
}

TEST_CASE("breakpoints survive reset and the BPT instruction pauses")
{
    Machine m;
    m.set_breakpoint(7);
    m.reset();
    CHECK(m.state().breakpoints.test(7));
    CHECK(m.state().breakpoint_list() == std::vector<Address>{7});
    load(m, {ins("NOP"), ins("BPT"), ins("HLT")});
    const RunReport r = m.run({});
    CHECK(r.reason == StopReason::program_pause);
    CHECK(m.state().pc == 2);
    m.run({});
    CHECK(m.state().status == Status::halted);
}

TEST_CASE("hot breakpoint posted from another thread stops a running machine")
{
    Machine m;
    load(m, {ins("ADD", 010), ins("JMP", 0)});
    m.deposit(010, Word(1));
    const auto sum = m.memory_checksum();
    RunReport r;
    std::thread owner([&] { r = m.run({50'000'000, ~0ull}); });
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    m.post(cmd::SetBreakpoint{1});
    owner.join();
    CHECK(r.reason == StopReason::breakpoint);
    CHECK(m.state().pc == 1);
    CHECK(m.memory_checksum() == sum);

    m.post(cmd::ClearBreakpoint{1});
    std::thread again([&] { r = m.run({50'000'000, ~0ull}); });
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    m.post(cmd::Stop{});
    again.join();
    CHECK(r.reason == StopReason::stop_requested);
    CHECK(!m.state().breakpoints.test(1));
    CHECK(m.state().status == Status::paused);
}

TEST_CASE("boot deposits tape words verbatim without executing")
{
    Machine m;
    m.reset();
    m.deposit(3, Word(0111111));
    m.deposit(01777, Word(0222222));
    const Word words[] = {Word(0123456), Word(0777777), Word(0)};
    m.boot_load(dev::encode_tape(words));
    CHECK(m.state().instructions == 0);
    CHECK(m.state().status == Status::halted);
    CHECK(m.state().pc == 0);
    CHECK(m.examine(0) == words[0]);
    CHECK(m.examine(1) == words[1]);
    CHECK(m.examine(2) == words[2]);
    CHECK(m.examine(3) == Word(0111111));
    CHECK(m.examine(01777) == Word(0222222));
    CHECK(m.state().sim_time_us == 12 * dev::frame_time_us(200));
    CHECK(testutil::matches_golden("boot_state.txt", format_state(m.state())));
}

TEST_CASE("boot errors")
{
    Machine m;
    m.reset();
    CHECK_THROWS_WITH_AS(m.boot_load(dev::TapeImage{}), "boot tape is empty", MachineFault);
    const std::vector<Word> big(kMemoryWords + 1);
    CHECK_THROWS_AS(m.boot_load(dev::encode_tape(big)), MachineFault);
    CHECK_THROWS_AS(m.boot_load(dev::TapeImage{{1, 2, 3}, dev::Provenance::imported, {}}), dev::TapeError);
    const Word one[] = {Word(1)};
    CHECK_THROWS_AS(m.boot_load(dev::encode_tape(one), 0), MachineFault);
    m.start();
    CHECK_THROWS_AS(m.boot_load(dev::encode_tape(one)), MachineFault);
    const std::vector<Word> full(kMemoryWords, Word(5));
    m.reset();
    CHECK_NOTHROW(m.boot_load(dev::encode_tape(full)));
}

TEST_CASE("boot from the mounted reader charges its rate")
{
    Machine m(MachineConfig{}, isa::default_isa_table(), micro::default_rom());
    m.reset();
    const Word words[] = {ins("HLT")};
    m.devices().mount(3, dev::encode_tape(words));
    m.boot_from_reader(3);
    CHECK(m.state().sim_time_us == 4 * dev::frame_time_us(20));
    CHECK(m.devices().remaining(3) == 0);
}

TEST_CASE("SAS patches only the address field")
{
    Machine m;
    load(m, {ins("LDA", 010), ins("SAS", 0200), ins("HLT")});
    m.deposit(010, Word(042));
    m.deposit(0200, ins("JMP", 0));
    m.step_instruction();
    const StepReport r = m.step_instruction();
    CHECK(m.examine(0200) == ins("JMP", 042));
    CHECK(r.elapsed_us() == 16);

    // Idempotent when the field already matches.
    load(m, {ins("LDA", 010), ins("SAS", 0200), ins("HLT")});
    m.deposit(010, Word(042));
    m.deposit(0200, ins("JMP", 042));
    m.run({});
    CHECK(m.examine(0200) == ins("JMP", 042));
}

TEST_CASE("SAS never touches bits 17..10 of its target")
{
    std::mt19937 rng(8);
    std::uniform_int_distribution<std::uint32_t> word(0, kWordMask);
    Machine m;
    for (int i = 0; i < 500; ++i) {
        const Word acc(word(rng)), target(word(rng));
        load(m, {ins("LDA", 010), ins("SAS", 0200), ins("HLT")});
        m.deposit(010, acc);
        m.deposit(0200, target);
        m.run({});
        const auto after = m.examine(0200).value();
        CHECK((after & ~kAddressMask & kWordMask) == (target.value() & ~kAddressMask & kWordMask));
        CHECK((after & kAddressMask) == (acc.value() & kAddressMask));
    }
}

TEST_CASE("plane view examples")
{
    Machine m;
    m.reset();
    m.deposit(0, Word(1));
    CHECK(m.plane_view(0).lit(0, 0));
    unsigned lit = 0;
    for (auto row : m.plane_view(0).rows)
        lit += static_cast<unsigned>(std::popcount(row));
    CHECK(lit == 1);
    for (unsigned p = 1; p < kPlaneCount; ++p)
        CHECK(!m.plane_view(p).lit(0, 0));

    m.deposit(33, Word(2));
    CHECK(m.plane_view(1).lit(1, 1));
    CHECK(!m.plane_view(0).lit(1, 1));
    CHECK_THROWS_AS(m.plane_view(18), MachineFault);
}

TEST_CASE("plane views and memory are a bijection")
{
    Machine m;
    m.reset();
    std::mt19937 rng(32);
    std::uniform_int_distribution<std::uint32_t> word(0, kWordMask);
    for (Address a = 0; a < kMemoryWords; ++a)
        m.deposit(a, Word(word(rng)));
    std::array<std::uint32_t, kMemoryWords> rebuilt{};
    for (unsigned p = 0; p < kPlaneCount; ++p) {
        const PlaneView v = m.plane_view(p);
        for (unsigned y = 0; y < kPlaneSide; ++y)
            for (unsigned x = 0; x < kPlaneSide; ++x) {
                CHECK(v.lit(x, y) == m.examine(static_cast<Address>(y * 32 + x)).bit(p));
                rebuilt[y * 32 + x] |= static_cast<std::uint32_t>(v.lit(x, y)) << p;
            }
    }
    for (Address a = 0; a < kMemoryWords; ++a)
        CHECK(rebuilt[a] == m.examine(a).value());
}

TEST_CASE("device instructions")
{
    Machine m;
    m.reset();
    m.devices().mount(4, dev::TapeImage{{021, 3}, dev::Provenance::imported, {}});
    load(m, {ins("RDC", 0, 4), ins("WRC", 0, 0), ins("PUN", 0, 2), ins("RDC", 0, 4), ins("RDC", 0, 4)});
    m.devices().mount(4, dev::TapeImage{{021, 3}, dev::Provenance::imported, {}});
    StepReport r = m.step_instruction();
    CHECK(m.state().acc == Word(021));
    CHECK(r.device_us == dev::frame_time_us(200));
    CHECK(r.microcode_us == 12);
    r = m.step_instruction();
    CHECK(m.devices().output_frames(0) == std::vector<dev::Frame>{021});
    CHECK(r.device_us == dev::frame_time_us(10));
    r = m.step_instruction();
    CHECK(dev::decode_tape(m.devices().punched_tape(2)) == std::vector<Word>{Word(021)});
    CHECK(r.device_us == 4 * dev::frame_time_us(10));
    m.step_instruction();
    CHECK(m.state().acc == Word(3));
    const auto t = m.state().sim_time_us;
    CHECK_THROWS_AS(m.step_instruction(), MachineFault);
    CHECK(m.state().status == Status::halted);
    CHECK(m.state().sim_time_us == t + 12);

    load(m, {ins("WRC", 0, 6)});
    CHECK_THROWS_WITH_AS(m.step_instruction(), doctest::Contains("not assigned"), MachineFault);
}

TEST_CASE("mount through the command queue")
{
    Machine m;
    m.reset();
    const Word words[] = {ins("HLT")};
    m.post(cmd::MountTape{4, dev::encode_tape(words)});
    CHECK(m.devices().remaining(4) == 0);
    m.drain_commands();
    CHECK(m.devices().remaining(4) == 4);
    CHECK_THROWS_AS(m.post(cmd::MountTape{0, {}}), MachineFault);
}

TEST_CASE("state text round-trips")
{
    Machine m;
    load(m, {ins("LDA", 010), ins("ADD", 010), ins("BPT"), ins("HLT")});
    m.deposit(010, Word(0377777));
    m.set_breakpoint(3);
    m.set_breakpoint(01777);
    m.run({});
    const std::string text = format_state(m.state());
    const MachineState back = parse_state(text);
    CHECK(back == m.state());
    CHECK(format_state(back) == text);
    CHECK_THROWS_AS(parse_state("garbage"), Error);
    CHECK_THROWS_AS(parse_state(text.substr(0, text.size() / 2)), Error);
}

TEST_CASE("identical inputs give bit-identical states")
{
    auto run_once = [] {
        Machine m;
        m.reset();
        const Word prog[] = {ins("LDA", 010), ins("ADD", 011), ins("STA", 011), ins("SHL"), ins("JPN", 6),
                             ins("JMP", 1), ins("HLT"), ins("HLT"), Word(3), Word(5)};
        m.boot_load(dev::encode_tape(prog));
        m.set_breakpoint(2);
        m.start();
        std::vector<std::string> states;
        for (int i = 0; i < 6; ++i) {
            m.run({});
            states.push_back(format_state(m.state()));
            if (m.state().status == Status::halted)
                break;
        }
        return states;
    };
    CHECK(run_once() == run_once());
}
