#include "mr/word.hpp"

namespace mr {

std::string to_octal(std::uint32_t v, int digits)
{
    std::string out(static_cast<std::size_t>(digits), '0');
    for (int i = digits - 1; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = static_cast<char>('0' + (v & 7u));
        v >>= 3;
    }
    return out;
}

std::optional<std::uint32_t> parse_octal(std::string_view text)
{
    if (text.empty() || text.size() > 11)
        return std::nullopt;
    std::uint64_t v = 0;
    for (char c : text) {
        if (c < '0' || c > '7')
            return std::nullopt;
        v = v * 8 + static_cast<std::uint64_t>(c - '0');
    }
    if (v > 0xffffffffull)
        return std::nullopt;
    return static_cast<std::uint32_t>(v);
}

} // namespace mr
