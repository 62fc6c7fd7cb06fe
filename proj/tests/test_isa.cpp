#include "mr/isa.hpp"
#include "mr/toolchain.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <set>

using namespace mr;
using namespace mr::isa;

namespace {

std::string replace_row(std::string text, const std::string& from, const std::string& to)
{
    const auto pos = text.find(from);
    REQUIRE(pos != std::string::npos);
    text.replace(pos, from.size(), to);
    return text;
}

} // namespace

TEST_CASE("words reduce mod 2^18 and render as six octal digits")
{
    CHECK(Word(01000000).value() == 0);
    CHECK(Word(01000001).value() == 1);
    CHECK(Word::from_signed(-1).value() == 0777777);
    CHECK(Word::from_signed(-131072).value() == 0400000);
    CHECK(Word(0400000).to_signed() == -131072);
    CHECK(Word(0377777).to_signed() == 131071);
    CHECK(to_string(Word(0)) == "000000");
    CHECK(to_string(Word(0144)) == "000144");
    CHECK(to_string(Word(0777777)) == "777777");
    CHECK(address_to_string(01777) == "1777");
}

TEST_CASE("octal parsing")
{
    CHECK(parse_octal("0144") == 0144u);
    CHECK(parse_octal("777777") == 0777777u);
    CHECK(!parse_octal(""));
    CHECK(!parse_octal("8"));
    CHECK(!parse_octal("12a"));
    CHECK(!parse_octal("-1"));
}

TEST_CASE("encode HLT is the all-zero word")
{
    CHECK(encode({0, 0, 0}).value() == 0);
}

TEST_CASE("encode follows the declared bit layout")
{
    // opcode 1 in bits 17..13, address 100 = 0o144 in bits 9..0.
    const Word w = encode({1, 0, 100});
    CHECK(w.value() == oracle::pack_instruction(1, 0, 100));
    CHECK(w.bit(13));
    CHECK(w.bit(6));
    CHECK(w.bit(5));
    CHECK(w.bit(2));
    for (unsigned b : {0u, 1u, 3u, 4u, 7u, 8u, 9u, 10u, 11u, 12u, 14u, 15u, 16u, 17u})
        CHECK_MESSAGE(!w.bit(b), "bit " << b);
    CHECK(to_string(w) == "020144");
}

TEST_CASE("encode rejects out-of-range fields")
{
    CHECK_THROWS_AS(encode({32, 0, 0}), IsaError);
    CHECK_THROWS_AS(encode({0, 8, 0}), IsaError);
    CHECK_THROWS_AS(encode({0, 0, 1024}), IsaError);
    CHECK_NOTHROW(encode({31, 7, 1023}));
}

TEST_CASE("decode and encode are inverse over all 2^18 words")
{
    unsigned bad = 0;
    for (std::uint32_t v = 0; v <= kWordMask; ++v) {
        const Instruction in = decode(Word(v));
        if (encode(in).value() != v)
            ++bad;
        if (in.opcode != (v >> 13) || in.modifier != ((v >> 10) & 7) || in.address != (v & 01777))
            ++bad;
    }
    CHECK(bad == 0);
}

TEST_CASE("decode is total")
{
    const Instruction zero = decode(Word(0));
    CHECK(zero.opcode == 0);
    CHECK(zero.address == 0);
    CHECK(default_isa_table()[zero.opcode].semantic == Semantic::halt);
    const Instruction top = decode(Word(0760000));
    CHECK(top.opcode == 31);
    CHECK(default_isa_table()[top.opcode].mnemonic == "X31");
}

TEST_CASE("disassembly examples")
{
    const auto& t = default_isa_table();
    CHECK(disassemble(Word(0), t) == "HLT");
    CHECK(disassemble(encode({1, 0, 0144}), t) == "ADD 0144");
    CHECK(disassemble(encode({*t.find("WRC"), 3, 0}), t) == "WRC 3");
    // Unused fields set: not an instruction the assembler would produce.
    CHECK(disassemble(encode({0, 0, 5}), t) == "DATA 000005");
    CHECK(disassemble(encode({1, 2, 0144}), t) == "DATA 024144");
    CHECK(disassemble(encode({*t.find("WRC"), 0, 1}), t) == "DATA " + to_string(encode({*t.find("WRC"), 0, 1})));
}

TEST_CASE("assemble-line then disassemble is the identity for every opcode at address 0")
{
    const auto& t = default_isa_table();
    for (unsigned op = 0; op < kOpcodeCount; ++op) {
        const Word w = encode({static_cast<std::uint8_t>(op), 0, 0});
        const std::string text = disassemble(w, t);
        CHECK_MESSAGE(toolchain::assemble_line(text, t) == w, text);
        CHECK(disassemble(toolchain::assemble_line(text, t), t) == text);
    }
}

TEST_CASE("disassembly round-trips through the assembler for every word")
{
    const auto& t = default_isa_table();
    unsigned bad = 0;
    for (std::uint32_t v = 0; v <= kWordMask; v += 7)
        if (toolchain::assemble_line(disassemble(Word(v), t), t) != Word(v))
            ++bad;
    CHECK(bad == 0);
}

TEST_CASE("shipped table satisfies the structural invariants")
{
    const auto& t = default_isa_table();
    CHECK(t.validate().empty());
    std::set<std::string> names;
    unsigned halts = 0;
    for (const auto& e : t.entries()) {
        names.insert(e.mnemonic);
        halts += e.semantic == Semantic::halt;
        CHECK(e.semantic != Semantic::jump_to_subroutine);
    }
    CHECK(t.entries().size() == 32);
    CHECK(names.size() == 32);
    CHECK(halts == 1);
}

TEST_CASE("shipped table file equals the built-in table")
{
    const auto text = testutil::read(testutil::source_dir() / "data" / "default.isa");
    CHECK(text == default_isa_text());
    CHECK(load_isa_table(write_isa_table(default_isa_table())).entries().size() == 32);
    const auto again = load_isa_table(write_isa_table(default_isa_table()));
    for (unsigned i = 0; i < kOpcodeCount; ++i) {
        CHECK(again[i].mnemonic == default_isa_table()[i].mnemonic);
        CHECK(again[i].semantic == default_isa_table()[i].semantic);
        CHECK(again[i].operand == default_isa_table()[i].operand);
        CHECK(again[i].duration_us == default_isa_table()[i].duration_us);
    }
}

TEST_CASE("table loader errors")
{
    const std::string base = write_isa_table(default_isa_table());
    auto error_of = [](const std::string& text) {
        try {
            load_isa_table(text);
        } catch (const IsaError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    SUBCASE("subroutine jump rejected")
    {
        const auto msg = error_of(replace_row(base, "X24  none  4  spare", "JSR  memory  4  jump_to_subroutine"));
        CHECK(msg.find("jump-to-subroutine") != std::string::npos);
    }
    SUBCASE("duplicate mnemonic")
    {
        CHECK(error_of(replace_row(base, "X24  none", "ADD  none")).find("duplicate mnemonic") != std::string::npos);
    }
    SUBCASE("second halt")
    {
        CHECK(error_of(replace_row(base, "X24  none  4  spare", "HLT2  none  4  halt")).find("exactly one halt") !=
              std::string::npos);
    }
    SUBCASE("missing row")
    {
        const auto pos = base.find("31  X31");
        CHECK(error_of(base.substr(0, pos)).find("missing row for opcode 31") != std::string::npos);
    }
    SUBCASE("malformed rows name the line")
    {
        CHECK(error_of("0 HLT none 4\n").find("line 1") != std::string::npos);
        CHECK(error_of("0 HLT none 5 halt\n").find("duration") != std::string::npos);
        CHECK(error_of("# c\n0 HLT bogus 4 halt\n").find("line 2") != std::string::npos);
        CHECK(error_of("32 HLT none 4 halt\n").find("out of range") != std::string::npos);
        CHECK(error_of("0 HLT none 4 halt\n0 HLT none 4 halt\n").find("duplicate row") != std::string::npos);
    }
    SUBCASE("directive names are reserved")
    {
        CHECK(error_of(replace_row(base, "X24  none", "ORG  none")).find("directive") != std::string::npos);
    }
}
