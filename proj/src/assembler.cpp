#include "mr/toolchain.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace mr::toolchain {

namespace {

std::string join_diagnostics(const std::vector<AsmDiagnostic>& diags, const std::string& name)
{
    std::string out;
    for (const auto& d : diags) {
        if (!out.empty())
            out += '\n';
        out += name + ":" + std::to_string(d.line) + ": " + d.message;
    }
    return out;
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool is_identifier(std::string_view s)
{
    if (s.empty() || !is_ident_start(s.front()))
        return false;
    return std::all_of(s.begin(), s.end(), is_ident_char);
}

std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

std::string upper(std::string_view s)
{
    std::string out(s);
    for (char& c : out)
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

struct Statement {
    int line = 0;
    std::string label;
    std::string op;  // upper-cased; empty for label-only lines
    std::string operand;
};

enum class Kind { none, org, equ, data, end, instruction };

Kind kind_of(const std::string& op, const isa::IsaTable& table)
{
    if (op.empty())
        return Kind::none;
    if (op == "ORG")
        return Kind::org;
    if (op == "EQU")
        return Kind::equ;
    if (op == "DATA")
        return Kind::data;
    if (op == "END")
        return Kind::end;
    if (table.find(op))
        return Kind::instruction;
    throw AsmDiagnostic{0, "unknown mnemonic '" + op + "'"};
}

// Throws AsmDiagnostic (line filled in by the caller).
Statement split_statement(std::string_view text)
{
    Statement st;
    if (auto semi = text.find(';'); semi != std::string_view::npos)
        text = text.substr(0, semi);
    text = trim(text);
    if (text.empty())
        return st;

    auto first_end = std::find_if(text.begin(), text.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
    std::string_view first = text.substr(0, static_cast<std::size_t>(first_end - text.begin()));
    if (auto colon = first.find(':'); colon != std::string_view::npos) {
        // A label may be glued to the mnemonic ("L:ADD 0100").
        std::string_view label = first.substr(0, colon);
        if (!is_identifier(label))
            throw AsmDiagnostic{0, "bad label '" + std::string(label) + "'"};
        st.label = std::string(label);
        text = trim(text.substr(colon + 1));
        if (text.empty())
            return st;
        first_end = std::find_if(text.begin(), text.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
        first = text.substr(0, static_cast<std::size_t>(first_end - text.begin()));
    }
    st.op = upper(first);
    st.operand = std::string(trim(text.substr(first.size())));
    return st;
}

using SymbolTable = std::map<std::string, std::int64_t>;

// Evaluates `term (+|- term)*` with an optional leading sign. Throws
// AsmDiagnostic; `undefined` receives the first unknown symbol instead of
// throwing when it is non-null.
std::int64_t evaluate(std::string_view expr, std::int64_t location, const SymbolTable& symbols,
                      std::string* undefined = nullptr)
{
    expr = trim(expr);
    if (expr.empty())
        throw AsmDiagnostic{0, "missing operand"};
    std::size_t i = 0;
    auto skip = [&] {
        while (i < expr.size() && std::isspace(static_cast<unsigned char>(expr[i])))
            ++i;
    };
    std::int64_t total = 0;
    bool first = true;
    while (true) {
        skip();
        int sign = 1;
        if (i < expr.size() && (expr[i] == '+' || expr[i] == '-')) {
            sign = expr[i] == '-' ? -1 : 1;
            ++i;
            skip();
        } else if (!first) {
            throw AsmDiagnostic{0, "expected + or - in expression '" + std::string(expr) + "'"};
        }
        if (i >= expr.size())
            throw AsmDiagnostic{0, "expression ends early: '" + std::string(expr) + "'"};
        std::int64_t term = 0;
        const char c = expr[i];
        if (c == '*') {
            term = location;
            ++i;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            while (j < expr.size() && is_ident_char(expr[j]))
                ++j;
            const std::string_view digits = expr.substr(i, j - i);
            auto v = parse_octal(digits);
            if (!v)
                throw AsmDiagnostic{0, "bad octal number '" + std::string(digits) + "'"};
            term = *v;
            i = j;
        } else if (is_ident_start(c)) {
            std::size_t j = i;
            while (j < expr.size() && is_ident_char(expr[j]))
                ++j;
            const std::string name(expr.substr(i, j - i));
            auto it = symbols.find(name);
            if (it == symbols.end()) {
                if (!undefined)
                    throw AsmDiagnostic{0, "undefined label '" + name + "'"};
                if (undefined->empty())
                    *undefined = name;
            } else {
                term = it->second;
            }
            i = j;
        } else {
            throw AsmDiagnostic{0, "unexpected '" + std::string(1, c) + "' in expression"};
        }
        total += sign * term;
        first = false;
        skip();
        if (i >= expr.size())
            return total;
    }
}

Word encode_statement(const Statement& st, Kind kind, std::int64_t location, const SymbolTable& symbols,
                      const isa::IsaTable& table)
{
    if (kind == Kind::data) {
        const auto v = evaluate(st.operand, location, symbols);
        if (v < -static_cast<std::int64_t>(kSignBit) || v > static_cast<std::int64_t>(kWordMask))
            throw AsmDiagnostic{0, "DATA value out of range for an 18-bit word"};
        return Word::from_signed(v);
    }
    const unsigned opcode = *table.find(st.op);
    const auto& info = table[opcode];
    isa::Instruction instr;
    instr.opcode = static_cast<std::uint8_t>(opcode);
    switch (info.operand) {
    case isa::OperandClass::memory: {
        const auto v = evaluate(st.operand, location, symbols);
        if (v < 0 || v > static_cast<std::int64_t>(kAddressMask))
            throw AsmDiagnostic{0, st.op + " address " + std::to_string(v) + " outside 0..1777"};
        instr.address = static_cast<Address>(v);
        break;
    }
    case isa::OperandClass::device: {
        const auto v = evaluate(st.operand, location, symbols);
        if (v < 0 || v > static_cast<std::int64_t>(isa::kModifierMask))
            throw AsmDiagnostic{0, st.op + " channel must be 0..7"};
        instr.modifier = static_cast<std::uint8_t>(v);
        break;
    }
    case isa::OperandClass::none:
        if (!st.operand.empty())
            throw AsmDiagnostic{0, st.op + " takes no operand"};
        break;
    }
    return isa::encode(instr);
}

} // namespace

AsmError::AsmError(std::vector<AsmDiagnostic> diagnostics, const std::string& source_name)
    : Error(join_diagnostics(diagnostics, source_name)), diagnostics_(std::move(diagnostics))
{
}

std::int64_t AssemblyOutput::symbol(const std::string& name) const
{
    auto it = symbols.find(name);
    if (it == symbols.end())
        throw Error("no symbol '" + name + "'");
    return it->second;
}

std::string AssemblyOutput::listing_text() const
{
    std::string out;
    for (const auto& l : listing) {
        if (l.address && l.word)
            out += address_to_string(*l.address) + "  " + to_string(*l.word) + "  ";
        else if (l.address)
            out += address_to_string(*l.address) + "          ";
        else
            out += std::string(14, ' ');
        out += l.source;
        // Keep blank source lines free of trailing spaces.
        while (!out.empty() && out.back() == ' ')
            out.pop_back();
        out += '\n';
    }
    return out;
}

std::string AssemblyOutput::symbol_table_text() const
{
    std::string out;
    for (const auto& [name, value] : symbols) {
        std::string padded = name;
        if (padded.size() < 8)
            padded.resize(8, ' ');
        out += padded + " " + to_string(Word::from_signed(value)) + '\n';
    }
    return out;
}

AssemblyOutput assemble(std::string_view source, const isa::IsaTable& table, const std::string& source_name)
{
    std::vector<AsmDiagnostic> diags;
    std::vector<std::string> lines;
    {
        std::istringstream in{std::string(source)};
        for (std::string l; std::getline(in, l);) {
            if (!l.empty() && l.back() == '\r')
                l.pop_back();
            lines.push_back(std::move(l));
        }
    }

    struct Parsed {
        Statement st;
        Kind kind = Kind::none;
        std::int64_t location = 0;
        bool ok = false;
    };
    std::vector<Parsed> parsed(lines.size());
    SymbolTable symbols;
    std::map<std::string, int> defined_on;
    std::int64_t location = 0;
    bool ended = false;
    std::optional<std::size_t> end_index;

    auto define = [&](const std::string& name, std::int64_t value, int line) {
        if (auto it = defined_on.find(name); it != defined_on.end()) {
            diags.push_back({line, "duplicate label '" + name + "' (first defined on line " +
                                       std::to_string(it->second) + ")"});
            return;
        }
        defined_on[name] = line;
        symbols[name] = value;
    };

    // Pass 1: locations and symbols.
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const int line_no = static_cast<int>(i) + 1;
        auto& p = parsed[i];
        try {
            p.st = split_statement(lines[i]);
            p.st.line = line_no;
            if (ended) {
                if (!p.st.label.empty() || !p.st.op.empty())
                    diags.push_back({line_no, "statement after END"});
                continue;
            }
            p.kind = kind_of(p.st.op, table);
            p.location = location;
            if (!p.st.label.empty() && p.kind != Kind::equ)
                define(p.st.label, location, line_no);
            switch (p.kind) {
            case Kind::none:
                break;
            case Kind::org: {
                std::string undefined;
                const auto v = evaluate(p.st.operand, location, symbols, &undefined);
                if (!undefined.empty())
                    throw AsmDiagnostic{0, "ORG operand uses '" + undefined + "' before it is defined"};
                if (v < 0 || v > static_cast<std::int64_t>(kAddressMask))
                    throw AsmDiagnostic{0, "ORG address outside 0..1777"};
                location = v;
                if (!p.st.label.empty())
                    symbols[p.st.label] = v;
                break;
            }
            case Kind::equ: {
                if (p.st.label.empty())
                    throw AsmDiagnostic{0, "EQU needs a label"};
                std::string undefined;
                const auto v = evaluate(p.st.operand, location, symbols, &undefined);
                if (!undefined.empty())
                    throw AsmDiagnostic{0, "EQU operand uses '" + undefined + "' before it is defined"};
                define(p.st.label, v, line_no);
                break;
            }
            case Kind::data:
            case Kind::instruction:
                if (location > static_cast<std::int64_t>(kAddressMask))
                    throw AsmDiagnostic{0, "program runs past address 1777"};
                ++location;
                break;
            case Kind::end:
                ended = true;
                end_index = i;
                break;
            }
            p.ok = true;
        } catch (AsmDiagnostic& d) {
            d.line = line_no;
            diags.push_back(std::move(d));
        } catch (const isa::IsaError& e) {
            diags.push_back({line_no, e.what()});
        }
    }
    if (!ended)
        diags.push_back({static_cast<int>(lines.size()), "missing END"});

    // Pass 2: encode.
    AssemblyOutput out;
    std::map<Address, std::pair<Word, int>> image;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto& p = parsed[i];
        ListingLine ll;
        ll.line = static_cast<int>(i) + 1;
        ll.source = lines[i];
        if (p.ok && (p.kind == Kind::data || p.kind == Kind::instruction)) {
            const auto addr = static_cast<Address>(p.location);
            try {
                const Word w = encode_statement(p.st, p.kind, p.location, symbols, table);
                if (auto it = image.find(addr); it != image.end())
                    throw AsmDiagnostic{0, "address " + address_to_string(addr) + " already assigned on line " +
                                               std::to_string(it->second.second)};
                image[addr] = {w, ll.line};
                ll.address = addr;
                ll.word = w;
                ll.is_code = p.kind == Kind::instruction;
            } catch (AsmDiagnostic& d) {
                d.line = ll.line;
                diags.push_back(std::move(d));
            } catch (const isa::IsaError& e) {
                diags.push_back({ll.line, e.what()});
            }
        } else if (p.ok && p.kind == Kind::org) {
            ll.address = static_cast<Address>(evaluate(p.st.operand, p.location, symbols));
        } else if (p.ok && p.kind == Kind::end && !p.st.operand.empty()) {
            try {
                const auto v = evaluate(p.st.operand, p.location, symbols);
                if (v < 0 || v > static_cast<std::int64_t>(kAddressMask))
                    throw AsmDiagnostic{0, "END start address outside 0..1777"};
                out.start = static_cast<Address>(v);
                ll.address = *out.start;
            } catch (AsmDiagnostic& d) {
                d.line = ll.line;
                diags.push_back(std::move(d));
            }
        }
        out.listing.push_back(std::move(ll));
    }
    (void)end_index;

    if (!diags.empty()) {
        std::stable_sort(diags.begin(), diags.end(),
                         [](const AsmDiagnostic& a, const AsmDiagnostic& b) { return a.line < b.line; });
        throw AsmError(std::move(diags), source_name);
    }

    out.symbols = std::move(symbols);
    for (const auto& [addr, entry] : image)
        out.words.emplace_back(addr, entry.first);
    if (!image.empty()) {
        out.origin = image.begin()->first;
        // The boot loader deposits from address 0, so the tape always starts there.
        std::vector<Word> words(static_cast<std::size_t>(image.rbegin()->first) + 1);
        for (const auto& [addr, entry] : image)
            words[addr] = entry.first;
        out.tape = dev::encode_tape(words, dev::Provenance::assembled, source_name);
    } else {
        out.tape.provenance = dev::Provenance::assembled;
        out.tape.note = source_name;
    }
    return out;
}

AssemblyOutput assemble_file(const std::filesystem::path& path, const isa::IsaTable& table)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return assemble(ss.str(), table, path.filename().string());
}

Word assemble_line(std::string_view statement, const isa::IsaTable& table)
{
    try {
        const Statement st = split_statement(statement);
        if (!st.label.empty())
            throw AsmDiagnostic{0, "labels are not allowed here"};
        const Kind k = kind_of(st.op, table);
        if (k != Kind::data && k != Kind::instruction)
            throw AsmDiagnostic{0, "expected an instruction or DATA"};
        return encode_statement(st, k, 0, {}, table);
    } catch (AsmDiagnostic& d) {
        d.line = 1;
        throw AsmError({std::move(d)}, "<line>");
    } catch (const isa::IsaError& e) {
        throw AsmError({{1, e.what()}}, "<line>");
    }
}

std::string disassemble_region(std::span<const Word> memory, Address first, std::size_t count,
                               const isa::IsaTable& table)
{
    if (static_cast<std::size_t>(first) + count > memory.size())
        throw Error("region runs past the end of memory");
    std::string out = "        ORG  " + address_to_string(first) + '\n';
    for (std::size_t i = 0; i < count; ++i) {
        const auto addr = static_cast<Address>(first + i);
        const Word w = memory[addr];
        std::string text = isa::disassemble(w, table);
        // "MNEM operand" -> "MNEM operand" with the operand in its own column.
        if (auto sp = text.find(' '); sp != std::string::npos && sp < 5)
            text.insert(sp, 5 - sp, ' ');
        std::string line = "        " + text;
        if (line.size() < 32)
            line.resize(32, ' ');
        else
            line += ' ';
        out += line + "; " + address_to_string(addr) + ' ' + to_string(w) + '\n';
    }
    out += "        END\n";
    return out;
}

LinkageReport scan_linkage(const AssemblyOutput& program, const isa::IsaTable& table)
{
    LinkageReport r;
    std::map<Address, std::pair<Word, bool>> cells;  // word, is_code
    for (const auto& l : program.listing)
        if (l.address && l.word)
            cells[*l.address] = {*l.word, l.is_code};
    for (const auto& [addr, cell] : cells) {
        if (!cell.second)
            continue;
        const auto instr = isa::decode(cell.first);
        const auto sem = table[instr.opcode].semantic;
        if (sem == isa::Semantic::jump_to_subroutine)
            r.uses_subroutine_jump = true;
        if (sem == isa::Semantic::address_substitute) {
            r.patched_exits.push_back(instr.address);
            auto it = cells.find(instr.address);
            if (it == cells.end() || !it->second.second ||
                table[isa::decode(it->second.first).opcode].semantic != isa::Semantic::jump)
                r.all_exits_are_jumps = false;
        }
    }
    std::sort(r.patched_exits.begin(), r.patched_exits.end());
    r.patched_exits.erase(std::unique(r.patched_exits.begin(), r.patched_exits.end()), r.patched_exits.end());
    return r;
}

} // namespace mr::toolchain
