#pragma once

// Two-pass symbolic assembler, region disassembler and the arithmetic
// subroutine library.
//
// The original machine had only a simple program loader; this assembler is a
// modern convenience for writing programs against the reconstructed
// instruction set.
//
// Source syntax (.mra), one statement per line:
//
//   [label:]  MNEMONIC [operand]   ; comment
//   [label:]  DATA expr
//   label:    EQU expr
//             ORG expr
//             END [expr]
//
// Numbers are octal. An expression is a sum of terms, each a number, a label
// or `*` (the current location), joined by + or -, with an optional leading
// minus.

#include "mr/devices.hpp"
#include "mr/isa.hpp"
#include "mr/word.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mr {
class Machine;
}

namespace mr::toolchain {

struct AsmDiagnostic {
    int line = 0;
    std::string message;
};

class AsmError : public Error {
public:
    explicit AsmError(std::vector<AsmDiagnostic> diagnostics, const std::string& source_name = "<source>");
    const std::vector<AsmDiagnostic>& diagnostics() const { return diagnostics_; }

private:
    std::vector<AsmDiagnostic> diagnostics_;
};

struct ListingLine {
    int line = 0;
    std::optional<Address> address;
    std::optional<Word> word;
    bool is_code = false;  // an instruction rather than DATA
    std::string source;
};

struct AssemblyOutput {
    /// Words from address 0 to the highest assembled address; unassigned
    /// addresses are zero.
    dev::TapeImage tape;
    Address origin = 0;  // lowest assembled address
    std::vector<std::pair<Address, Word>> words;  // address order
    std::vector<ListingLine> listing;
    std::map<std::string, std::int64_t> symbols;
    std::optional<Address> start;

    std::int64_t symbol(const std::string& name) const;

    /// Fixed columns: 4-digit address, 6-digit word, source text.
    std::string listing_text() const;
    std::string symbol_table_text() const;
};

AssemblyOutput assemble(std::string_view source, const isa::IsaTable& table = isa::default_isa_table(),
                        const std::string& source_name = "<source>");
AssemblyOutput assemble_file(const std::filesystem::path& path,
                             const isa::IsaTable& table = isa::default_isa_table());

/// Assembles one label-free statement to its word.
Word assemble_line(std::string_view statement, const isa::IsaTable& table = isa::default_isa_table());

/// Re-assemblable source for memory[first, first + count): an ORG line, one
/// statement per word with its address and octal value as a comment, END.
std::string disassemble_region(std::span<const Word> memory, Address first, std::size_t count,
                               const isa::IsaTable& table = isa::default_isa_table());

// ---------------------------------------------------------------------------
// Subroutine linkage

struct LinkageReport {
    bool uses_subroutine_jump = false;   // any word decodes to such an opcode
    std::vector<Address> patched_exits;  // SAS operands
    bool all_exits_are_jumps = true;     // every SAS target assembles to a JMP
};

LinkageReport scan_linkage(const AssemblyOutput& program, const isa::IsaTable& table = isa::default_isa_table());

// ---------------------------------------------------------------------------
// Arithmetic library

/// Directory holding the shipped .mra sources (lib/, fixtures/). Overridable
/// with the MR_DATA_DIR environment variable.
std::filesystem::path data_dir();

AssemblyOutput load_arith_library();

struct ArithResult {
    std::int32_t a = 0;
    std::int32_t b = 0;
    std::int32_t product = 0;
    std::int32_t quotient = 0;
    std::int32_t remainder = 0;
    bool divide_by_zero = false;
    std::uint64_t instructions = 0;
    std::uint64_t sim_us = 0;
};

/// Boots the library once, then for each operand pair deposits the operands,
/// runs the driver (multiply then divide) to its halt and reads the result
/// cells.
std::vector<ArithResult> run_subroutine_suite(Machine& machine, const AssemblyOutput& library,
                                              std::span<const std::pair<std::int32_t, std::int32_t>> operands);

} // namespace mr::toolchain
