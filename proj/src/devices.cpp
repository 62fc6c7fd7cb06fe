#include "mr/devices.hpp"

#include <fstream>
#include <iterator>

namespace mr::dev {

std::string_view to_string(Provenance p)
{
    switch (p) {
    case Provenance::assembled: return "assembled";
    case Provenance::punched: return "punched";
    case Provenance::imported: return "imported";
    }
    return "?";
}

TapeImage encode_tape(std::span<const Word> words, Provenance provenance, std::string note)
{
    TapeImage image{{}, provenance, std::move(note)};
    image.frames.reserve(words.size() * kFramesPerWord);
    for (Word w : words) {
        const std::uint32_t v = w.value();
        image.frames.push_back(static_cast<Frame>((v >> 15) & 07));
        image.frames.push_back(static_cast<Frame>((v >> 10) & kFrameMask));
        image.frames.push_back(static_cast<Frame>((v >> 5) & kFrameMask));
        image.frames.push_back(static_cast<Frame>(v & kFrameMask));
    }
    return image;
}

std::vector<Word> decode_tape(const TapeImage& image)
{
    const auto& f = image.frames;
    if (f.size() % kFramesPerWord != 0)
        throw TapeError("ragged tape: " + std::to_string(f.size()) + " frames is not a multiple of 4; "
                            + "the last word starts at frame " + std::to_string(f.size() - f.size() % 4),
                        f.size() - f.size() % kFramesPerWord);
    std::vector<Word> words;
    words.reserve(f.size() / kFramesPerWord);
    for (std::size_t i = 0; i < f.size(); i += kFramesPerWord) {
        for (std::size_t k = 0; k < kFramesPerWord; ++k)
            if (f[i + k] > kFrameMask)
                throw TapeError("frame " + std::to_string(i + k) + " exceeds 5 bits", i + k);
        if (f[i] > 07)
            throw TapeError("frame " + std::to_string(i) + " is a word's leading frame but has bits above 3 set",
                            i);
        words.emplace_back((std::uint32_t{f[i]} << 15) | (std::uint32_t{f[i + 1]} << 10)
                           | (std::uint32_t{f[i + 2]} << 5) | f[i + 3]);
    }
    return words;
}

std::string to_mrt_bytes(const TapeImage& image)
{
    std::string out(kTapeMagic);
    out.reserve(kTapeMagic.size() + image.frames.size());
    for (Frame f : image.frames)
        out.push_back(static_cast<char>(f & kFrameMask));
    return out;
}

TapeImage from_mrt_bytes(std::string_view bytes)
{
    if (bytes.substr(0, kTapeMagic.size()) != kTapeMagic)
        throw TapeError("not an MRT1 tape image (bad magic)");
    TapeImage image;
    image.provenance = Provenance::imported;
    image.frames.reserve(bytes.size() - kTapeMagic.size());
    for (char c : bytes.substr(kTapeMagic.size()))
        image.frames.push_back(static_cast<Frame>(static_cast<unsigned char>(c) & kFrameMask));
    return image;
}

TapeImage read_tape_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw TapeError("cannot open tape file " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    TapeImage image = from_mrt_bytes(bytes);
    image.note = path.filename().string();
    return image;
}

void write_tape_file(const std::filesystem::path& path, const TapeImage& image)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw TapeError("cannot write tape file " + path.string());
    const std::string bytes = to_mrt_bytes(image);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// ---------------------------------------------------------------------------
// Text codec

namespace {

constexpr Frame kLineFeed = 2;
constexpr Frame kSpace = 4;
constexpr Frame kCarriageReturn = 8;

// Index = frame; '\0' = no character in that shift.
constexpr std::array<char, 32> kLetters{
    '\0', 'E', '\n', 'A', ' ', 'S', 'I', 'U', '\r', 'D', 'R', 'J', 'N', 'F', 'C', 'K',
    'T',  'Z', 'L',  'W', 'H', 'Y', 'P', 'Q', 'O',  'B', 'G', '\0', 'M', 'X', 'V', '\0',
};
constexpr std::array<char, 32> kFigures{
    '\0', '3', '\n', '-', ' ', '\0', '8', '7', '\r', '\0', '4', '\0', '\0', '\0', '\0', '\0',
    '5',  '\0', '\0', '2', '\0', '6', '0', '1', '9',  '\0', '\0', '\0', '.', '\0', '\0', '\0',
};

constexpr std::string_view kRepertoire = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-. \r\n";

std::string describe(char c)
{
    const auto u = static_cast<unsigned char>(c);
    if (u >= 0x20 && u < 0x7f)
        return std::string("'") + c + "'";
    return "byte " + std::to_string(u);
}

} // namespace

std::string_view text_repertoire() { return kRepertoire; }

std::vector<Frame> encode_text(std::string_view text)
{
    std::vector<Frame> out;
    Shift shift = Shift::letters;
    for (char c : text) {
        if (c == '\n' || c == '\r' || c == ' ') {
            out.push_back(c == '\n' ? kLineFeed : c == '\r' ? kCarriageReturn : kSpace);
            continue;
        }
        std::optional<Frame> letter, figure;
        for (Frame f = 1; f < 32; ++f) {
            if (kLetters[f] == c)
                letter = f;
            if (kFigures[f] == c)
                figure = f;
        }
        if (letter) {
            if (shift != Shift::letters) {
                out.push_back(kLettersShift);
                shift = Shift::letters;
            }
            out.push_back(*letter);
        } else if (figure) {
            if (shift != Shift::figures) {
                out.push_back(kFiguresShift);
                shift = Shift::figures;
            }
            out.push_back(*figure);
        } else {
            throw CodecError("character " + describe(c) + " is not in the teleprinter repertoire");
        }
    }
    return out;
}

std::optional<char> TextDecoder::feed(Frame frame)
{
    if (frame > kFrameMask)
        throw CodecError("frame " + std::to_string(frame) + " exceeds 5 bits");
    if (frame == kBlankFrame)
        return std::nullopt;
    if (frame == kLettersShift) {
        shift_ = Shift::letters;
        return std::nullopt;
    }
    if (frame == kFiguresShift) {
        shift_ = Shift::figures;
        return std::nullopt;
    }
    const char c = shift_ == Shift::letters ? kLetters[frame] : kFigures[frame];
    if (c == '\0')
        throw CodecError("frame " + to_octal(frame, 2) + " has no character in the "
                         + (shift_ == Shift::letters ? "letters" : "figures") + " shift");
    return c;
}

std::string decode_text(std::span<const Frame> frames)
{
    TextDecoder dec;
    std::string out;
    for (Frame f : frames)
        if (auto c = dec.feed(f))
            out.push_back(*c);
    return out;
}

// ---------------------------------------------------------------------------
// Devices

std::string_view to_string(DeviceKind k)
{
    switch (k) {
    case DeviceKind::teletype_print: return "teletype_print";
    case DeviceKind::teletype_print_punch: return "teletype_print_punch";
    case DeviceKind::tape_reader: return "tape_reader";
    case DeviceKind::fast_tape_reader: return "fast_tape_reader";
    }
    return "?";
}

std::string_view to_string(Function f)
{
    switch (f) {
    case Function::print: return "print";
    case Function::punch: return "punch";
    case Function::read: return "read";
    }
    return "?";
}

std::vector<ChannelSpec> default_roster(const DeviceRates& r)
{
    return {
        {0, DeviceKind::teletype_print, Function::print, "Olivetti T2CN", r.teletype_cps},
        {1, DeviceKind::teletype_print_punch, Function::print, "Olivetti T2CN-PF", r.teletype_cps},
        {2, DeviceKind::teletype_print_punch, Function::punch, "Olivetti T2CN-PF", r.teletype_cps},
        {3, DeviceKind::tape_reader, Function::read, "Olivetti T2TA10", r.reader_cps},
        {4, DeviceKind::fast_tape_reader, Function::read, "Ferranti TR5", r.fast_reader_cps},
    };
}

std::uint64_t frame_time_us(unsigned rate_cps)
{
    if (rate_cps == 0)
        throw DeviceError("device rate must be positive");
    return (1'000'000ull + rate_cps - 1) / rate_cps;
}

DeviceBank::DeviceBank(DeviceRates rates) : rates_(rates)
{
    for (const ChannelSpec& s : default_roster(rates)) {
        frame_time_us(s.rate_cps);
        specs_[s.id] = s;
        units_[s.id] = Unit{s, false, {}, 0, {}};
    }
}

const std::optional<ChannelSpec>& DeviceBank::spec(unsigned channel) const
{
    static const std::optional<ChannelSpec> none;
    return channel < kChannelCount ? specs_[channel] : none;
}

DeviceBank::Unit& DeviceBank::unit(unsigned channel)
{
    if (channel >= kChannelCount || !units_[channel])
        throw DeviceError("channel " + std::to_string(channel) + " is not assigned to a device");
    return *units_[channel];
}

const DeviceBank::Unit& DeviceBank::unit(unsigned channel) const
{
    if (channel >= kChannelCount || !units_[channel])
        throw DeviceError("channel " + std::to_string(channel) + " is not assigned to a device");
    return *units_[channel];
}

std::uint64_t DeviceBank::transfer(unsigned channel, Direction dir, Frame& payload)
{
    Unit& u = unit(channel);
    const std::string who = "channel " + std::to_string(channel) + " (" + u.spec.model + ")";
    if (dir == Direction::input) {
        if (u.spec.function != Function::read)
            throw DeviceError("cannot read from " + who);
        if (!u.mounted)
            throw DeviceError("no tape mounted on " + who);
        if (u.position >= u.medium.frames.size())
            throw EndOfTape("end of tape on " + who);
        payload = u.medium.frames[u.position++] & kFrameMask;
    } else {
        if (u.spec.function == Function::read)
            throw DeviceError("cannot write to reader " + who);
        u.output.push_back(payload & kFrameMask);
    }
    return frame_time_us(u.spec.rate_cps);
}

std::uint64_t DeviceBank::punch_word(unsigned channel, Word w)
{
    Unit& u = unit(channel);
    if (u.spec.function != Function::punch)
        throw DeviceError("channel " + std::to_string(channel) + " (" + u.spec.model + ") has no punch");
    const Word one[1] = {w};
    const TapeImage frames = encode_tape(one);
    u.output.insert(u.output.end(), frames.frames.begin(), frames.frames.end());
    return kFramesPerWord * frame_time_us(u.spec.rate_cps);
}

void DeviceBank::mount(unsigned channel, TapeImage tape)
{
    Unit& u = unit(channel);
    if (u.spec.function != Function::read)
        throw DeviceError("channel " + std::to_string(channel) + " (" + u.spec.model + ") is not a reader");
    u.medium = std::move(tape);
    u.position = 0;
    u.mounted = true;
}

void DeviceBank::unmount(unsigned channel)
{
    Unit& u = unit(channel);
    u.mounted = false;
    u.medium = {};
    u.position = 0;
}

TapeImage DeviceBank::take_tape(unsigned channel)
{
    Unit& u = unit(channel);
    if (!u.mounted)
        throw DeviceError("no tape mounted on channel " + std::to_string(channel));
    TapeImage rest{{u.medium.frames.begin() + static_cast<std::ptrdiff_t>(u.position), u.medium.frames.end()},
                   u.medium.provenance, u.medium.note};
    u.position = u.medium.frames.size();
    return rest;
}

std::size_t DeviceBank::remaining(unsigned channel) const
{
    const Unit& u = unit(channel);
    return u.mounted ? u.medium.frames.size() - u.position : 0;
}

const std::vector<Frame>& DeviceBank::output_frames(unsigned channel) const { return unit(channel).output; }

std::string DeviceBank::printed_text(unsigned channel) const { return decode_text(unit(channel).output); }

TapeImage DeviceBank::punched_tape(unsigned channel) const
{
    const Unit& u = unit(channel);
    return TapeImage{u.output, Provenance::punched, "punched on channel " + std::to_string(channel)};
}

void DeviceBank::clear_outputs()
{
    for (auto& u : units_)
        if (u)
            u->output.clear();
}

std::vector<ChannelStatus> DeviceBank::status() const
{
    std::vector<ChannelStatus> out;
    for (const auto& u : units_) {
        if (!u)
            continue;
        out.push_back(ChannelStatus{u->spec, u->mounted, u->mounted ? u->medium.frames.size() : 0,
                                    u->mounted ? u->medium.frames.size() - u->position : 0, u->output.size()});
    }
    return out;
}

} // namespace mr::dev
