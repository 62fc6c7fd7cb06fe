#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mr {

inline constexpr unsigned kWordBits = 18;
inline constexpr std::uint32_t kWordMask = (1u << kWordBits) - 1;
inline constexpr std::uint32_t kSignBit = 1u << (kWordBits - 1);
inline constexpr unsigned kMemoryWords = 1024;
inline constexpr std::uint32_t kAddressMask = kMemoryWords - 1;

using Address = std::uint16_t;

/// Base for every error raised by the emulator and its toolchain.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An 18-bit machine word. Values are reduced mod 2^18 on construction;
/// negative numbers are two's complement.
class Word {
public:
    constexpr Word() = default;
    constexpr explicit Word(std::uint32_t v) : value_(v & kWordMask) {}

    static constexpr Word from_signed(std::int64_t v)
    {
        return Word(static_cast<std::uint32_t>(static_cast<std::uint64_t>(v) & kWordMask));
    }

    constexpr std::uint32_t value() const { return value_; }
    constexpr bool negative() const { return (value_ & kSignBit) != 0; }
    constexpr bool bit(unsigned i) const { return ((value_ >> i) & 1u) != 0; }
    constexpr std::int32_t to_signed() const
    {
        return negative() ? static_cast<std::int32_t>(value_) - static_cast<std::int32_t>(1u << kWordBits)
                          : static_cast<std::int32_t>(value_);
    }
    constexpr Address address_field() const { return static_cast<Address>(value_ & kAddressMask); }

    constexpr auto operator<=>(const Word&) const = default;

private:
    std::uint32_t value_ = 0;
};

/// Zero-padded octal rendering of the low `digits * 3` bits.
std::string to_octal(std::uint32_t v, int digits);

/// Canonical word rendering: six octal digits.
inline std::string to_string(Word w) { return to_octal(w.value(), 6); }

/// Address rendering: four octal digits.
inline std::string address_to_string(Address a) { return to_octal(a, 4); }

/// Parses an unsigned octal literal. Empty input, non-octal digits and values
/// that do not fit in 32 bits yield nullopt.
std::optional<std::uint32_t> parse_octal(std::string_view text);

} // namespace mr
