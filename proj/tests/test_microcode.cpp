#include "mr/microcode.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>

using namespace mr;
using namespace mr::micro;
using L = ControlLine;

namespace {

std::string default_text() { return std::string(default_rom_text()); }

std::string replace_line(std::string text, const std::string& prefix, const std::string& line)
{
    const auto pos = text.find("\n" + prefix);
    REQUIRE(pos != std::string::npos);
    const auto end = text.find('\n', pos + 1);
    text.replace(pos + 1, end - pos - 1, line);
    return text;
}

std::vector<Diagnostic> load_errors(const std::string& text)
{
    try {
        load_rom(text);
    } catch (const RomError& e) {
        return e.diagnostics();
    }
    return {};
}

bool has_message(const std::vector<Diagnostic>& ds, std::string_view needle,
                 Diagnostic::Severity sev = Diagnostic::Severity::error)
{
    return std::any_of(ds.begin(), ds.end(), [&](const Diagnostic& d) {
        return d.severity == sev && d.message.find(needle) != std::string::npos;
    });
}

} // namespace

TEST_CASE("shipped ROM loads clean")
{
    const auto text = testutil::read(testutil::source_dir() / "data" / "default.rom");
    CHECK(text == default_text());
    const MicroRom rom = load_rom(text);
    CHECK(rom == default_rom());
    CHECK(validate_rom(rom).empty());
    CHECK(check_against_isa(rom, isa::default_isa_table()).empty());
}

TEST_CASE("a ROM with 31 execute rows names the missing opcode")
{
    const std::string text = replace_line(default_text(), "31 ", "# row removed");
    const auto errs = load_errors(text);
    REQUIRE(!errs.empty());
    CHECK(has_message(errs, "missing execute row for opcode 31"));
}

TEST_CASE("a memory row with the short cycle is rejected with its line")
{
    const std::string text = replace_line(default_text(), "3 ", "3      dur=4  MEM_READ MAR_FROM_ADDR MDR_TO_ACC");
    const auto errs = load_errors(text);
    REQUIRE(!errs.empty());
    CHECK(has_message(errs, "core access requires the 8 us cycle"));
    CHECK(errs.front().line > 0);
    CHECK(errs.front().row == "3");
}

TEST_CASE("long cycle without core access is rejected")
{
    const auto errs = load_errors(replace_line(default_text(), "9 ", "9      dur=8  PC_FROM_ADDR"));
    CHECK(has_message(errs, "8 us cycle without core access"));
}

TEST_CASE("halt that also jumps is a warning")
{
    MicroRom rom = default_rom();
    rom.execute[0].set(L::PC_FROM_ADDR);
    const auto ds = validate_rom(rom);
    CHECK(has_message(ds, "halt also jumps", Diagnostic::Severity::warning));
    CHECK(!std::any_of(ds.begin(), ds.end(), [](const Diagnostic& d) { return d.severity == Diagnostic::Severity::error; }));
    // Warnings do not prevent loading.
    CHECK_NOTHROW(load_rom(replace_line(default_text(), "0 ", "0      dur=4  HALT PC_FROM_ADDR")));
}

TEST_CASE("fetch without PC_INCREMENT is an error")
{
    MicroRom rom = default_rom();
    rom.fetch.lines.reset(static_cast<std::size_t>(L::PC_INCREMENT));
    CHECK(has_message(validate_rom(rom), "fetch must assert PC_INCREMENT"));
}

TEST_CASE("lint rules")
{
    auto with = [](unsigned op, std::initializer_list<L> lines, unsigned dur) {
        MicroRom rom = default_rom();
        rom.execute[op] = MicroWord{};
        rom.execute[op].duration_us = dur;
        for (L l : lines)
            rom.execute[op].set(l);
        return validate_rom(rom);
    };
    CHECK(has_message(with(1, {L::MEM_READ, L::MEM_WRITE, L::MAR_FROM_ADDR}, 8), "MEM_READ and MEM_WRITE"));
    CHECK(has_message(with(1, {L::MEM_READ, L::ALU_ADD, L::ALU_SUB, L::ACC_LOAD, L::MAR_FROM_ADDR}, 8),
                      "more than one ALU"));
    CHECK(has_message(with(1, {L::MEM_READ, L::ALU_ADD, L::MAR_FROM_ADDR}, 8), "never latched"));
    CHECK(has_message(with(1, {L::MEM_READ}, 8), "without a MAR source"));
    CHECK(has_message(with(1, {L::MEM_READ, L::MAR_FROM_ADDR, L::MAR_FROM_PC}, 8), "two MAR sources"));
    CHECK(has_message(with(8, {L::ADDR_FIELD_WRITE}, 4), "ADDR_FIELD_WRITE without MEM_WRITE"));
    CHECK(has_message(with(10, {L::PC_FROM_ADDR, L::COND_ZERO, L::COND_NEG}, 4), "more than one condition"));
    CHECK(has_message(with(9, {L::PC_FROM_ADDR, L::PC_INCREMENT}, 4), "two PC sources"));
    CHECK(has_message(with(3, {L::MEM_READ, L::MAR_FROM_ADDR, L::MDR_TO_ACC, L::ACC_CLEAR}, 8),
                      "more than one accumulator source"));
    CHECK(has_message(with(3, {L::MEM_READ, L::MAR_FROM_ADDR, L::MDR_TO_ACC, L::IR_LOAD}, 8), "reload IR"));
    CHECK(has_message(with(23, {L::HALT, L::BREAK}, 4), "HALT and BREAK", Diagnostic::Severity::warning));
    CHECK(has_message(with(13, {L::ACC_LOAD}, 4), "nothing to load", Diagnostic::Severity::warning));
    CHECK(has_message(with(3, {L::MDR_TO_ACC}, 4), "stale MDR", Diagnostic::Severity::warning));
    CHECK(has_message(with(22, {L::COND_ZERO}, 4), "no effect", Diagnostic::Severity::warning));
}

TEST_CASE("loader syntax errors")
{
    CHECK(has_message(load_errors("FETCH dur=8 MEM_READ MAR_FROM_PC IR_LOAD PC_INCREMENT BOGUS\n"), "unknown control line"));
    CHECK(has_message(load_errors("FETCH MEM_READ\n"), "missing dur"));
    CHECK(has_message(load_errors("FETCH dur=6 MEM_READ\n"), "duration must be 4 or 8"));
    CHECK(has_message(load_errors("32 dur=4\n"), "row label"));
    const std::string dup = default_text() + "5 dur=4\n";
    CHECK(has_message(load_errors(dup), "duplicate execute row for opcode 5"));
    CHECK(has_message(load_errors(default_text() + "FETCH dur=8 MEM_READ MAR_FROM_PC IR_LOAD PC_INCREMENT\n"),
                      "duplicate FETCH"));
    CHECK(has_message(load_errors("0 dur=4 HALT\n"), "missing FETCH row"));
}

TEST_CASE("microstep costs")
{
    const auto& rom = default_rom();
    const auto& t = isa::default_isa_table();
    CHECK(microstep_cost(rom, *t.find("ADD")) == 16);
    CHECK(1'000'000 / microstep_cost(rom, *t.find("ADD")) == 62500);
    CHECK(microstep_cost(rom, *t.find("JMP")) == 12);
    CHECK(microstep_cost(rom, *t.find("HLT")) == 12);
}

TEST_CASE("every instruction is one fetch and one execute microword costing 12 or 16 us")
{
    const auto& rom = default_rom();
    CHECK(rom.fetch.duration_us == 8);
    for (unsigned op = 0; op < isa::kOpcodeCount; ++op) {
        const auto cost = microstep_cost(rom, op);
        CHECK((cost == 12 || cost == 16));
        const auto& w = rom.execute[op];
        const bool core = w.asserts(L::MEM_READ) || w.asserts(L::MEM_WRITE);
        CHECK(core == (w.duration_us == 8));
        CHECK(!w.asserts(L::IR_LOAD));
    }
}

TEST_CASE("ROM text round-trips through the writer")
{
    const auto text = write_rom(default_rom(), &isa::default_isa_table());
    CHECK(load_rom(text) == default_rom());
    CHECK(load_rom(write_rom(default_rom())) == default_rom());
}

TEST_CASE("ISA cross-check flags disagreeing durations")
{
    MicroRom rom = default_rom();
    rom.execute[9] = MicroWord{};
    rom.execute[9].duration_us = 8;
    rom.execute[9].set(L::MEM_READ).set(L::MAR_FROM_ADDR).set(L::PC_FROM_ADDR);
    const auto ds = check_against_isa(rom, isa::default_isa_table());
    REQUIRE(ds.size() == 1);
    CHECK(ds[0].row == "9");
}

TEST_CASE("control line names round-trip")
{
    for (std::size_t i = 0; i < kControlLineCount; ++i) {
        const auto l = static_cast<ControlLine>(i);
        CHECK(parse_control_line(to_string(l)) == l);
    }
    CHECK(!parse_control_line("MEM_READX"));
}
