#pragma once

// Reconstructed instruction set. Word layout, most significant first:
//
//   17      13 12   10 9              0
//   [ opcode  ][ mod  ][    address    ]
//
// The opcode table below is a reconstruction, not a historical record. It can
// be replaced at run time by loading an alternative table file.

#include "mr/word.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mr::isa {

inline constexpr unsigned kOpcodeCount = 32;
inline constexpr unsigned kOpcodeShift = 13;
inline constexpr unsigned kModifierShift = 10;
inline constexpr std::uint32_t kOpcodeMask = 037;
inline constexpr std::uint32_t kModifierMask = 07;

class IsaError : public Error {
public:
    using Error::Error;
};

struct Instruction {
    std::uint8_t opcode = 0;
    std::uint8_t modifier = 0;
    Address address = 0;

    bool operator==(const Instruction&) const = default;
};

/// Throws IsaError if a field is out of range.
Word encode(const Instruction& instr);
Instruction decode(Word w);

enum class OperandClass : std::uint8_t { memory, device, none };

enum class Semantic : std::uint8_t {
    halt,
    add,
    subtract,
    load,
    store,
    and_mask,
    inclusive_or,
    exclusive_or,
    address_substitute,
    jump,
    jump_if_zero,
    jump_if_negative,
    jump_if_overflow,
    clear,
    complement,
    shift_left,
    shift_right,
    logical_shift_left,
    logical_shift_right,
    read_device,
    write_device,
    punch_word,
    no_operation,
    breakpoint,
    spare,
    // Present so that alternative tables can be rejected for containing one.
    jump_to_subroutine,
};

std::string_view to_string(OperandClass c);
std::string_view to_string(Semantic s);
std::optional<OperandClass> parse_operand_class(std::string_view text);
std::optional<Semantic> parse_semantic(std::string_view text);

struct OpcodeInfo {
    std::string mnemonic;
    OperandClass operand = OperandClass::none;
    unsigned duration_us = 4;  // execute microinstruction duration class
    Semantic semantic = Semantic::spare;
};

class IsaTable {
public:
    explicit IsaTable(std::array<OpcodeInfo, kOpcodeCount> entries);

    const OpcodeInfo& operator[](unsigned opcode) const { return entries_.at(opcode); }
    std::optional<unsigned> find(std::string_view mnemonic) const;
    const std::array<OpcodeInfo, kOpcodeCount>& entries() const { return entries_; }

    /// Structural problems: duplicate mnemonics, halt count, bad durations,
    /// subroutine-jump entries. Empty means valid.
    std::vector<std::string> validate() const;

private:
    std::array<OpcodeInfo, kOpcodeCount> entries_;
};

/// Table file: one line per opcode, `index mnemonic class duration semantic`,
/// `#` comments. Throws IsaError with the line number on any problem.
IsaTable load_isa_table(std::string_view text);
std::string write_isa_table(const IsaTable& table);

std::string_view default_isa_text();
const IsaTable& default_isa_table();

/// One-line rendering that the assembler reads back to the same word. Words
/// whose unused fields are non-zero come out as `DATA oooooo`.
std::string disassemble(Word w, const IsaTable& table);

} // namespace mr::isa
