#pragma once

// Paper tape media and the four I/O devices of the machine.
//
// Tape word packing: each 18-bit word occupies four 5-bit frames, most
// significant first. The first frame holds word bits 17..15 in its low three
// bits (its top two bits are always zero); the next three frames hold bits
// 14..10, 9..5 and 4..0.
//
//   frame 0: 0 0 w17 w16 w15
//   frame 1: w14 .. w10
//   frame 2: w9  .. w5
//   frame 3: w4  .. w0

#include "mr/word.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mr::dev {

using Frame = std::uint8_t;

inline constexpr unsigned kFrameBits = 5;
inline constexpr Frame kFrameMask = 037;
inline constexpr unsigned kFramesPerWord = 4;
inline constexpr unsigned kChannelCount = 8;

enum class Provenance : std::uint8_t { assembled, punched, imported };
std::string_view to_string(Provenance p);

struct TapeImage {
    std::vector<Frame> frames;
    Provenance provenance = Provenance::imported;
    std::string note;
};

class TapeError : public Error {
public:
    TapeError(const std::string& msg, std::optional<std::size_t> frame = std::nullopt)
        : Error(msg), frame_(frame)
    {
    }
    /// Index of the offending frame, when there is one.
    std::optional<std::size_t> frame() const { return frame_; }

private:
    std::optional<std::size_t> frame_;
};

TapeImage encode_tape(std::span<const Word> words, Provenance provenance = Provenance::assembled,
                      std::string note = {});

/// Rejects ragged frame counts and out-of-range frames, naming the position.
std::vector<Word> decode_tape(const TapeImage& image);

// MRT1 file: the magic bytes "MRT1" followed by one byte per frame. Only the
// low five bits of each byte are significant.
inline constexpr std::string_view kTapeMagic = "MRT1";

std::string to_mrt_bytes(const TapeImage& image);
TapeImage from_mrt_bytes(std::string_view bytes);
TapeImage read_tape_file(const std::filesystem::path& path);
void write_tape_file(const std::filesystem::path& path, const TapeImage& image);

// ---------------------------------------------------------------------------
// Character code: an invented 5-bit, two-shift teleprinter code laid out after
// ITA2. Letters shift: A-Z. Figures shift: 0-9, '-', '.'. Space, CR and LF
// print in either shift. Frame 0 is blank tape and prints nothing.

class CodecError : public Error {
public:
    using Error::Error;
};

inline constexpr Frame kBlankFrame = 0;
inline constexpr Frame kFiguresShift = 27;
inline constexpr Frame kLettersShift = 31;

enum class Shift : std::uint8_t { letters, figures };

/// Every character the code can carry.
std::string_view text_repertoire();

/// Encodes starting from the letters shift, inserting shift frames as needed.
/// Throws CodecError naming the first character outside the repertoire.
std::vector<Frame> encode_text(std::string_view text);

class TextDecoder {
public:
    /// The character printed by `frame`, or nullopt for shifts and blank tape.
    std::optional<char> feed(Frame frame);
    Shift shift() const { return shift_; }

private:
    Shift shift_ = Shift::letters;
};

std::string decode_text(std::span<const Frame> frames);

// ---------------------------------------------------------------------------
// Devices

enum class DeviceKind : std::uint8_t { teletype_print, teletype_print_punch, tape_reader, fast_tape_reader };
enum class Function : std::uint8_t { print, punch, read };
enum class Direction : std::uint8_t { input, output };

std::string_view to_string(DeviceKind k);
std::string_view to_string(Function f);

/// Transfer rates. None of these are documented historical values; they are
/// plausible defaults and every timing test pins them explicitly.
struct DeviceRates {
    unsigned teletype_cps = 10;
    unsigned reader_cps = 20;
    unsigned fast_reader_cps = 200;
};

struct ChannelSpec {
    unsigned id = 0;
    DeviceKind kind = DeviceKind::teletype_print;
    Function function = Function::print;
    std::string model;
    unsigned rate_cps = 10;
};

/// Channel 0: T2CN printer, 1: T2CN-PF printer, 2: T2CN-PF punch,
/// 3: T2TA10 reader, 4: TR5 fast reader. Channels 5-7 are unassigned.
std::vector<ChannelSpec> default_roster(const DeviceRates& rates = {});

/// Microseconds to move one frame at `rate_cps`, rounded up.
std::uint64_t frame_time_us(unsigned rate_cps);

inline constexpr unsigned kBootChannel = 4;

class DeviceError : public Error {
public:
    using Error::Error;
};

class EndOfTape : public DeviceError {
public:
    using DeviceError::DeviceError;
};

struct ChannelStatus {
    ChannelSpec spec;
    bool mounted = false;
    std::size_t frames_total = 0;
    std::size_t frames_remaining = 0;
    std::size_t frames_output = 0;
};

class DeviceBank {
public:
    explicit DeviceBank(DeviceRates rates = {});

    const DeviceRates& rates() const { return rates_; }
    const std::optional<ChannelSpec>& spec(unsigned channel) const;

    /// Moves one frame. Input fills `payload`; output consumes its low five
    /// bits. Returns the transfer time in microseconds.
    std::uint64_t transfer(unsigned channel, Direction dir, Frame& payload);

    /// Punches a whole word as four frames in tape packing order.
    std::uint64_t punch_word(unsigned channel, Word w);

    void mount(unsigned channel, TapeImage tape);
    void unmount(unsigned channel);

    /// Takes the rest of the tape mounted on a reader, as the boot path does.
    TapeImage take_tape(unsigned channel);

    std::size_t remaining(unsigned channel) const;
    const std::vector<Frame>& output_frames(unsigned channel) const;
    std::string printed_text(unsigned channel) const;
    TapeImage punched_tape(unsigned channel) const;
    void clear_outputs();

    std::vector<ChannelStatus> status() const;

private:
    struct Unit {
        ChannelSpec spec;
        bool mounted = false;
        TapeImage medium;
        std::size_t position = 0;
        std::vector<Frame> output;
    };

    Unit& unit(unsigned channel);
    const Unit& unit(unsigned channel) const;

    DeviceRates rates_;
    std::array<std::optional<Unit>, kChannelCount> units_;
    std::array<std::optional<ChannelSpec>, kChannelCount> specs_;
};

} // namespace mr::dev
