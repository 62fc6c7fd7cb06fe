#include "mr/devices.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace mr;
using namespace mr::dev;

namespace {

std::string what_of(auto&& fn)
{
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "no error";
}

bool contains(const std::string& s, std::string_view needle) { return s.find(needle) != std::string::npos; }

} // namespace

TEST_CASE("word 000000 packs to four blank frames")
{
    const Word w[] = {Word(0)};
    CHECK(encode_tape(w).frames == std::vector<Frame>{0, 0, 0, 0});
}

TEST_CASE("word 777777 packs to a three-bit leading frame and three full frames")
{
    const Word w[] = {Word(0777777)};
    const auto frames = encode_tape(w).frames;
    CHECK(frames == std::vector<Frame>{7, 31, 31, 31});
    CHECK(oracle::unpack_tape(frames) == std::vector<std::uint32_t>{0777777});
}

TEST_CASE("packing agrees with the bit-string unpacker on single bits")
{
    for (unsigned b = 0; b < kWordBits; ++b) {
        const Word w[] = {Word(1u << b)};
        const auto frames = encode_tape(w).frames;
        REQUIRE(frames.size() == 4);
        CHECK(oracle::unpack_tape(frames).at(0) == (1u << b));
        CHECK(frames[0] <= 7);
    }
}

TEST_CASE("decode inverts encode on random word lists")
{
    std::mt19937 rng(1957);
    std::uniform_int_distribution<std::uint32_t> word(0, kWordMask);
    std::uniform_int_distribution<std::size_t> len(0, 64);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<Word> ws(len(rng));
        std::vector<std::uint32_t> raw;
        for (auto& w : ws) {
            w = Word(word(rng));
            raw.push_back(w.value());
        }
        const TapeImage img = encode_tape(ws);
        REQUIRE(img.frames.size() == ws.size() * 4);
        CHECK(decode_tape(img) == ws);
        CHECK(oracle::unpack_tape(img.frames) == raw);
        for (Frame f : img.frames)
            CHECK(f < 32);
    }
}

TEST_CASE("decode rejects ragged and out-of-range frames with their position")
{
    TapeImage ragged{{0, 0, 0, 0, 1, 2}, Provenance::imported, {}};
    CHECK_THROWS_AS(decode_tape(ragged), TapeError);
    CHECK(contains(what_of([&] { decode_tape(ragged); }), "6 frames"));

    TapeImage wide{{0, 0, 0, 0, 0, 0, 32, 0}, Provenance::imported, {}};
    try {
        decode_tape(wide);
        FAIL("expected TapeError");
    } catch (const TapeError& e) {
        CHECK(e.frame() == 6u);
    }

    TapeImage lead{{0, 0, 0, 0, 8, 0, 0, 0}, Provenance::imported, {}};
    try {
        decode_tape(lead);
        FAIL("expected TapeError");
    } catch (const TapeError& e) {
        CHECK(e.frame() == 4u);
    }
}

TEST_CASE("MRT1 bytes round-trip and bad magic is rejected")
{
    const Word ws[] = {Word(0123456), Word(0777777), Word(0)};
    const TapeImage img = encode_tape(ws);
    const std::string bytes = to_mrt_bytes(img);
    CHECK(bytes.substr(0, 4) == "MRT1");
    CHECK(bytes.size() == 4 + 12);
    CHECK(from_mrt_bytes(bytes).frames == img.frames);
    CHECK_THROWS_AS(from_mrt_bytes("MRT2\x01"), TapeError);
    CHECK_THROWS_AS(from_mrt_bytes(""), TapeError);
    // Only the low five bits of each byte are significant.
    CHECK(from_mrt_bytes(std::string("MRT1") + char(0xE3)).frames == std::vector<Frame>{3});

    const auto path = std::filesystem::temp_directory_path() / "mr_test_devices.mrt";
    write_tape_file(path, img);
    CHECK(read_tape_file(path).frames == img.frames);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_tape_file(path), TapeError);
}

TEST_CASE("'0' encodes to its figures frame and back")
{
    const auto frames = encode_text("0");
    CHECK(frames == std::vector<Frame>{kFiguresShift, 22});
    CHECK(decode_text(frames) == "0");
}

TEST_CASE("full repertoire round-trips through encode and print")
{
    const std::string rep(text_repertoire());
    CHECK(decode_text(encode_text(rep)) == rep);
    for (char c : rep) {
        const std::string one(1, c);
        CHECK(decode_text(encode_text(one)) == one);
        // Mixed with a letter and a figure on either side.
        const std::string mixed = "A" + one + "1" + one + "Z";
        CHECK(decode_text(encode_text(mixed)) == mixed);
    }
}

TEST_CASE("shift frames are only emitted on a change of shift")
{
    CHECK(encode_text("AB").size() == 2);
    CHECK(encode_text("12").size() == 3);
    CHECK(encode_text("A1A").size() == 5);
    CHECK(encode_text("1 2").size() == 4);
}

TEST_CASE("characters outside the repertoire are named")
{
    CHECK(contains(what_of([] { encode_text("HI!"); }), "'!'"));
    CHECK(contains(what_of([] { encode_text("a"); }), "'a'"));
    CHECK(contains(what_of([] { encode_text(std::string(1, '\t')); }), "byte 9"));
}

TEST_CASE("frames with no character in the current shift are rejected")
{
    TextDecoder d;
    CHECK(d.feed(kBlankFrame) == std::nullopt);
    CHECK(d.feed(kFiguresShift) == std::nullopt);
    CHECK(d.shift() == Shift::figures);
    CHECK_THROWS_AS(d.feed(5), CodecError);
    CHECK_THROWS_AS(d.feed(32), CodecError);
    CHECK(d.feed(kLettersShift) == std::nullopt);
    CHECK(d.feed(5) == 'S');
}

TEST_CASE("default roster")
{
    const auto r = default_roster();
    REQUIRE(r.size() == 5);
    CHECK(r[0].model == "Olivetti T2CN");
    CHECK(r[0].kind == DeviceKind::teletype_print);
    CHECK(r[1].model == "Olivetti T2CN-PF");
    CHECK(r[1].function == Function::print);
    CHECK(r[2].model == "Olivetti T2CN-PF");
    CHECK(r[2].function == Function::punch);
    CHECK(r[3].model == "Olivetti T2TA10");
    CHECK(r[3].kind == DeviceKind::tape_reader);
    CHECK(r[4].model == "Ferranti TR5");
    CHECK(r[4].kind == DeviceKind::fast_tape_reader);
    for (unsigned i = 0; i < r.size(); ++i)
        CHECK(r[i].id == i);

    DeviceBank bank;
    for (unsigned ch = 5; ch < kChannelCount; ++ch) {
        CHECK(!bank.spec(ch));
        Frame f = 0;
        CHECK(contains(what_of([&] { bank.transfer(ch, Direction::output, f); }), "not assigned"));
    }
}

TEST_CASE("reading a one-frame tape then reading again hits end of tape")
{
    DeviceBank bank;
    bank.mount(4, TapeImage{{21}, Provenance::imported, {}});
    Frame f = 0;
    CHECK(bank.transfer(4, Direction::input, f) == frame_time_us(200));
    CHECK(f == 21);
    CHECK(bank.remaining(4) == 0);
    CHECK_THROWS_AS(bank.transfer(4, Direction::input, f), EndOfTape);
}

TEST_CASE("printing 10 frames at 10 cps takes one second")
{
    DeviceBank bank(DeviceRates{10, 20, 200});
    std::uint64_t us = 0;
    for (Frame f : encode_text("HELLO WRLD")) {
        Frame p = f;
        us += bank.transfer(0, Direction::output, p);
    }
    CHECK(us == 1'000'000);
    CHECK(bank.printed_text(0) == "HELLO WRLD");
}

TEST_CASE("frame time rounds up and rejects zero")
{
    CHECK(frame_time_us(10) == 100'000);
    CHECK(frame_time_us(200) == 5'000);
    CHECK(frame_time_us(3) == 333'334);
    CHECK_THROWS_AS(frame_time_us(0), DeviceError);
}

TEST_CASE("direction must match the device")
{
    DeviceBank bank;
    Frame f = 1;
    CHECK(contains(what_of([&] { bank.transfer(3, Direction::output, f); }), "cannot write to reader"));
    CHECK(contains(what_of([&] { bank.transfer(0, Direction::input, f); }), "cannot read"));
    CHECK(contains(what_of([&] { bank.transfer(3, Direction::input, f); }), "no tape mounted"));
    CHECK_THROWS_AS(bank.mount(0, TapeImage{}), DeviceError);
    CHECK_THROWS_AS(bank.punch_word(0, Word(1)), DeviceError);
}

TEST_CASE("punching a word produces a boot-loadable tape")
{
    DeviceBank bank;
    CHECK(bank.punch_word(2, Word(0123456)) == 4 * frame_time_us(10));
    bank.punch_word(2, Word(0654321));
    const TapeImage punched = bank.punched_tape(2);
    CHECK(punched.provenance == Provenance::punched);
    CHECK(decode_tape(punched) == std::vector<Word>{Word(0123456), Word(0654321)});
    bank.clear_outputs();
    CHECK(bank.output_frames(2).empty());
}

TEST_CASE("take_tape returns the unread rest and status reports positions")
{
    DeviceBank bank;
    bank.mount(3, TapeImage{{1, 2, 3, 4, 5}, Provenance::assembled, "x"});
    Frame f = 0;
    bank.transfer(3, Direction::input, f);
    auto st = bank.status();
    REQUIRE(st.size() == 5);
    CHECK(st[3].mounted);
    CHECK(st[3].frames_total == 5);
    CHECK(st[3].frames_remaining == 4);
    CHECK(bank.take_tape(3).frames == std::vector<Frame>{2, 3, 4, 5});
    CHECK(bank.remaining(3) == 0);
    bank.unmount(3);
    CHECK(!bank.status()[3].mounted);
    CHECK_THROWS_AS(bank.take_tape(3), DeviceError);
}
