#include "mr/isa.hpp"

#include <set>
#include <sstream>

namespace mr::isa {

Word encode(const Instruction& instr)
{
    if (instr.opcode > kOpcodeMask)
        throw IsaError("opcode " + std::to_string(instr.opcode) + " out of range");
    if (instr.modifier > kModifierMask)
        throw IsaError("modifier " + std::to_string(instr.modifier) + " out of range");
    if (instr.address > kAddressMask)
        throw IsaError("address " + std::to_string(instr.address) + " out of range");
    return Word((std::uint32_t{instr.opcode} << kOpcodeShift)
                | (std::uint32_t{instr.modifier} << kModifierShift) | instr.address);
}

Instruction decode(Word w)
{
    const std::uint32_t v = w.value();
    return Instruction{static_cast<std::uint8_t>((v >> kOpcodeShift) & kOpcodeMask),
                       static_cast<std::uint8_t>((v >> kModifierShift) & kModifierMask),
                       static_cast<Address>(v & kAddressMask)};
}

namespace {

constexpr std::array<std::pair<OperandClass, std::string_view>, 3> kClassNames{{
    {OperandClass::memory, "memory"},
    {OperandClass::device, "device"},
    {OperandClass::none, "none"},
}};

constexpr std::array<std::pair<Semantic, std::string_view>, 26> kSemanticNames{{
    {Semantic::halt, "halt"},
    {Semantic::add, "add"},
    {Semantic::subtract, "subtract"},
    {Semantic::load, "load"},
    {Semantic::store, "store"},
    {Semantic::and_mask, "and"},
    {Semantic::inclusive_or, "ior"},
    {Semantic::exclusive_or, "xor"},
    {Semantic::address_substitute, "address_substitute"},
    {Semantic::jump, "jump"},
    {Semantic::jump_if_zero, "jump_zero"},
    {Semantic::jump_if_negative, "jump_negative"},
    {Semantic::jump_if_overflow, "jump_overflow"},
    {Semantic::clear, "clear"},
    {Semantic::complement, "complement"},
    {Semantic::shift_left, "shift_left"},
    {Semantic::shift_right, "shift_right"},
    {Semantic::logical_shift_left, "logical_shift_left"},
    {Semantic::logical_shift_right, "logical_shift_right"},
    {Semantic::read_device, "read_device"},
    {Semantic::write_device, "write_device"},
    {Semantic::punch_word, "punch_word"},
    {Semantic::no_operation, "nop"},
    {Semantic::breakpoint, "breakpoint"},
    {Semantic::spare, "spare"},
    {Semantic::jump_to_subroutine, "jump_to_subroutine"},
}};

constexpr std::string_view kDefaultIsa = R"(# Reconstructed instruction table (REVISABLE, not a historical record).
# index  mnemonic  operand  exec-us  semantic
 0  HLT  none    4  halt
 1  ADD  memory  8  add
 2  SUB  memory  8  subtract
 3  LDA  memory  8  load
 4  STA  memory  8  store
 5  AND  memory  8  and
 6  IOR  memory  8  ior
 7  XOR  memory  8  xor
 8  SAS  memory  8  address_substitute
 9  JMP  memory  4  jump
10  JPZ  memory  4  jump_zero
11  JPN  memory  4  jump_negative
12  JOV  memory  4  jump_overflow
13  CLA  none    4  clear
14  CMA  none    4  complement
15  SHL  none    4  shift_left
16  SHR  none    4  shift_right
17  LSL  none    4  logical_shift_left
18  LSR  none    4  logical_shift_right
19  RDC  device  4  read_device
20  WRC  device  4  write_device
21  PUN  device  4  punch_word
22  NOP  none    4  nop
23  BPT  none    4  breakpoint
24  X24  none    4  spare
25  X25  none    4  spare
26  X26  none    4  spare
27  X27  none    4  spare
28  X28  none    4  spare
29  X29  none    4  spare
30  X30  none    4  spare
31  X31  none    4  spare
)";

} // namespace

std::string_view to_string(OperandClass c)
{
    for (const auto& [k, n] : kClassNames)
        if (k == c)
            return n;
    return "?";
}

std::string_view to_string(Semantic s)
{
    for (const auto& [k, n] : kSemanticNames)
        if (k == s)
            return n;
    return "?";
}

std::optional<OperandClass> parse_operand_class(std::string_view text)
{
    for (const auto& [k, n] : kClassNames)
        if (n == text)
            return k;
    return std::nullopt;
}

std::optional<Semantic> parse_semantic(std::string_view text)
{
    for (const auto& [k, n] : kSemanticNames)
        if (n == text)
            return k;
    return std::nullopt;
}

IsaTable::IsaTable(std::array<OpcodeInfo, kOpcodeCount> entries) : entries_(std::move(entries)) {}

std::optional<unsigned> IsaTable::find(std::string_view mnemonic) const
{
    for (unsigned i = 0; i < kOpcodeCount; ++i)
        if (entries_[i].mnemonic == mnemonic)
            return i;
    return std::nullopt;
}

std::vector<std::string> IsaTable::validate() const
{
    std::vector<std::string> problems;
    std::set<std::string> seen;
    unsigned halts = 0;
    for (unsigned i = 0; i < kOpcodeCount; ++i) {
        const OpcodeInfo& e = entries_[i];
        const std::string where = "opcode " + std::to_string(i) + ": ";
        if (e.mnemonic.empty())
            problems.push_back(where + "empty mnemonic");
        else if (!seen.insert(e.mnemonic).second)
            problems.push_back(where + "duplicate mnemonic " + e.mnemonic);
        if (e.mnemonic == "DATA" || e.mnemonic == "ORG" || e.mnemonic == "EQU" || e.mnemonic == "END")
            problems.push_back(where + "mnemonic " + e.mnemonic + " collides with a directive");
        if (e.duration_us != 4 && e.duration_us != 8)
            problems.push_back(where + "duration must be 4 or 8 us");
        if (e.semantic == Semantic::halt)
            ++halts;
        if (e.semantic == Semantic::jump_to_subroutine)
            problems.push_back(where + "jump-to-subroutine instructions are not part of this machine");
    }
    if (halts != 1)
        problems.push_back("table must contain exactly one halt, found " + std::to_string(halts));
    if (entries_[0].semantic != Semantic::halt)
        problems.push_back("opcode 0 must be the halt so that cleared memory stops the machine");
    return problems;
}

IsaTable load_isa_table(std::string_view text)
{
    std::array<OpcodeInfo, kOpcodeCount> entries{};
    std::array<bool, kOpcodeCount> present{};
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& msg) {
        return IsaError("isa table line " + std::to_string(line_no) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        std::istringstream tokens(line);
        std::vector<std::string> tok;
        for (std::string t; tokens >> t;)
            tok.push_back(t);
        if (tok.empty())
            continue;
        if (tok.size() != 5)
            throw fail("expected `index mnemonic class duration semantic`");
        unsigned index = 0;
        try {
            std::size_t used = 0;
            index = static_cast<unsigned>(std::stoul(tok[0], &used));
            if (used != tok[0].size())
                throw fail("bad index '" + tok[0] + "'");
        } catch (const std::logic_error&) {
            throw fail("bad index '" + tok[0] + "'");
        }
        if (index >= kOpcodeCount)
            throw fail("index " + std::to_string(index) + " out of range");
        if (present[index])
            throw fail("duplicate row for opcode " + std::to_string(index));
        auto cls = parse_operand_class(tok[2]);
        if (!cls)
            throw fail("unknown operand class '" + tok[2] + "'");
        if (tok[3] != "4" && tok[3] != "8")
            throw fail("duration must be 4 or 8");
        auto sem = parse_semantic(tok[4]);
        if (!sem)
            throw fail("unknown semantic '" + tok[4] + "'");
        present[index] = true;
        entries[index] = OpcodeInfo{tok[1], *cls, static_cast<unsigned>(std::stoul(tok[3])), *sem};
    }
    for (unsigned i = 0; i < kOpcodeCount; ++i)
        if (!present[i])
            throw IsaError("isa table: missing row for opcode " + std::to_string(i));
    IsaTable table(std::move(entries));
    if (auto problems = table.validate(); !problems.empty())
        throw IsaError("isa table: " + problems.front());
    return table;
}

std::string write_isa_table(const IsaTable& table)
{
    std::ostringstream out;
    out << "# index  mnemonic  operand  exec-us  semantic\n";
    for (unsigned i = 0; i < kOpcodeCount; ++i) {
        const OpcodeInfo& e = table[i];
        out << (i < 10 ? " " : "") << i << "  " << e.mnemonic << "  " << to_string(e.operand) << "  "
            << e.duration_us << "  " << to_string(e.semantic) << '\n';
    }
    return out.str();
}

std::string_view default_isa_text() { return kDefaultIsa; }

const IsaTable& default_isa_table()
{
    static const IsaTable table = load_isa_table(kDefaultIsa);
    return table;
}

std::string disassemble(Word w, const IsaTable& table)
{
    const Instruction in = decode(w);
    const OpcodeInfo& info = table[in.opcode];
    switch (info.operand) {
    case OperandClass::memory:
        if (in.modifier == 0)
            return info.mnemonic + " " + address_to_string(in.address);
        break;
    case OperandClass::device:
        if (in.address == 0)
            return info.mnemonic + " " + std::to_string(in.modifier);
        break;
    case OperandClass::none:
        if (in.modifier == 0 && in.address == 0)
            return info.mnemonic;
        break;
    }
    return "DATA " + to_string(w);
}

} // namespace mr::isa
