#include "mr/microcode.hpp"

#include <map>
#include <sstream>

namespace mr::micro {

namespace {

using L = ControlLine;

constexpr std::array<std::string_view, kControlLineCount> kLineNames{
    "MEM_READ",   "MEM_WRITE",      "ALU_ADD",     "ALU_SUB",       "ALU_AND",      "ALU_IOR",
    "ALU_XOR",    "ALU_SHL",        "ALU_SHR",     "ACC_LOAD",      "ACC_CLEAR",    "ACC_COMPLEMENT",
    "MAR_FROM_PC", "MAR_FROM_ADDR", "MDR_TO_ACC",  "ACC_TO_MDR",    "IR_LOAD",      "PC_INCREMENT",
    "PC_FROM_ADDR", "COND_ZERO",    "COND_NEG",    "COND_OVF",      "ADDR_FIELD_WRITE", "IO_STROBE",
    "HALT",       "BREAK",
};

constexpr std::string_view kDefaultRom = R"(# Diode matrix control store. One row per microinstruction; each line name is
# one diode fitted at that row. Removing a diode means deleting its token.
# Rows that touch core memory take the 8 us cycle, all others 4 us.
FETCH  dur=8  MEM_READ MAR_FROM_PC IR_LOAD PC_INCREMENT
0      dur=4  HALT                                    # HLT
1      dur=8  MEM_READ ALU_ADD ACC_LOAD MAR_FROM_ADDR  # ADD
2      dur=8  MEM_READ ALU_SUB ACC_LOAD MAR_FROM_ADDR  # SUB
3      dur=8  MEM_READ MAR_FROM_ADDR MDR_TO_ACC        # LDA
4      dur=8  MEM_WRITE MAR_FROM_ADDR ACC_TO_MDR       # STA
5      dur=8  MEM_READ ALU_AND ACC_LOAD MAR_FROM_ADDR  # AND
6      dur=8  MEM_READ ALU_IOR ACC_LOAD MAR_FROM_ADDR  # IOR
7      dur=8  MEM_READ ALU_XOR ACC_LOAD MAR_FROM_ADDR  # XOR
8      dur=8  MEM_WRITE MAR_FROM_ADDR ADDR_FIELD_WRITE # SAS
9      dur=4  PC_FROM_ADDR                            # JMP
10     dur=4  PC_FROM_ADDR COND_ZERO                  # JPZ
11     dur=4  PC_FROM_ADDR COND_NEG                   # JPN
12     dur=4  PC_FROM_ADDR COND_OVF                   # JOV
13     dur=4  ACC_CLEAR                               # CLA
14     dur=4  ACC_COMPLEMENT                          # CMA
15     dur=4  ALU_SHL ACC_LOAD COND_OVF               # SHL
16     dur=4  ALU_SHR ACC_LOAD COND_NEG               # SHR
17     dur=4  ALU_SHL ACC_LOAD                        # LSL
18     dur=4  ALU_SHR ACC_LOAD                        # LSR
19     dur=4  ACC_LOAD IO_STROBE                      # RDC
20     dur=4  IO_STROBE                               # WRC
21     dur=4  ACC_TO_MDR IO_STROBE                    # PUN
22     dur=4                                          # NOP
23     dur=4  BREAK                                   # BPT
24     dur=4                                          # X24
25     dur=4                                          # X25
26     dur=4                                          # X26
27     dur=4                                          # X27
28     dur=4                                          # X28
29     dur=4                                          # X29
30     dur=4                                          # X30
31     dur=4                                          # X31
)";

Diagnostic error_at(int line, std::string row, std::string msg)
{
    return Diagnostic{Diagnostic::Severity::error, line, std::move(row), std::move(msg)};
}

Diagnostic warning_at(int line, std::string row, std::string msg)
{
    return Diagnostic{Diagnostic::Severity::warning, line, std::move(row), std::move(msg)};
}

void lint_row(const MicroWord& w, const std::string& row, int line, bool is_fetch,
              std::vector<Diagnostic>& out)
{
    const bool reads = w.asserts(L::MEM_READ);
    const bool writes = w.asserts(L::MEM_WRITE);
    if (reads && writes)
        out.push_back(error_at(line, row, "MEM_READ and MEM_WRITE both asserted"));
    if (w.duration_us != kShortCycleUs && w.duration_us != kLongCycleUs)
        out.push_back(error_at(line, row, "duration must be 4 or 8 us"));
    else if ((reads || writes) != (w.duration_us == kLongCycleUs))
        out.push_back(error_at(line, row,
                               (reads || writes) ? "core access requires the 8 us cycle"
                                                 : "8 us cycle without core access"));

    int alu = 0;
    for (L l : {L::ALU_ADD, L::ALU_SUB, L::ALU_AND, L::ALU_IOR, L::ALU_XOR, L::ALU_SHL, L::ALU_SHR})
        alu += w.asserts(l) ? 1 : 0;
    if (alu > 1)
        out.push_back(error_at(line, row, "more than one ALU function asserted"));
    if (alu == 1 && !w.asserts(L::ACC_LOAD))
        out.push_back(error_at(line, row, "ALU result is never latched (ACC_LOAD missing)"));

    const bool io_input = w.asserts(L::IO_STROBE) && w.asserts(L::ACC_LOAD) && alu == 0;
    int acc_sources = (alu == 1 ? 1 : 0) + (io_input ? 1 : 0) + (w.asserts(L::MDR_TO_ACC) ? 1 : 0)
                      + (w.asserts(L::ACC_CLEAR) ? 1 : 0) + (w.asserts(L::ACC_COMPLEMENT) ? 1 : 0);
    if (acc_sources > 1)
        out.push_back(error_at(line, row, "more than one accumulator source"));
    if (w.asserts(L::ACC_LOAD) && alu == 0 && !w.asserts(L::IO_STROBE))
        out.push_back(warning_at(line, row, "ACC_LOAD with nothing to load"));

    if (w.asserts(L::MAR_FROM_PC) && w.asserts(L::MAR_FROM_ADDR))
        out.push_back(error_at(line, row, "two MAR sources"));
    if ((reads || writes) && !w.asserts(L::MAR_FROM_PC) && !w.asserts(L::MAR_FROM_ADDR))
        out.push_back(error_at(line, row, "core access without a MAR source"));
    if (w.asserts(L::ADDR_FIELD_WRITE) && !writes)
        out.push_back(error_at(line, row, "ADDR_FIELD_WRITE without MEM_WRITE"));
    if (w.asserts(L::MDR_TO_ACC) && !reads)
        out.push_back(warning_at(line, row, "MDR_TO_ACC without MEM_READ loads a stale MDR"));

    int conds = 0;
    for (L l : {L::COND_ZERO, L::COND_NEG, L::COND_OVF})
        conds += w.asserts(l) ? 1 : 0;
    if (conds > 1)
        out.push_back(error_at(line, row, "more than one condition line"));
    const bool shift = w.asserts(L::ALU_SHL) || w.asserts(L::ALU_SHR);
    if (conds == 1 && !w.asserts(L::PC_FROM_ADDR) && !shift)
        out.push_back(warning_at(line, row, "condition line has no effect"));
    if (w.asserts(L::PC_INCREMENT) && w.asserts(L::PC_FROM_ADDR))
        out.push_back(error_at(line, row, "two PC sources"));

    if (w.asserts(L::HALT) && w.asserts(L::PC_FROM_ADDR))
        out.push_back(warning_at(line, row, "halt also jumps"));
    if (w.asserts(L::HALT) && w.asserts(L::BREAK))
        out.push_back(warning_at(line, row, "HALT and BREAK both asserted"));

    if (is_fetch) {
        for (L l : {L::MEM_READ, L::IR_LOAD, L::MAR_FROM_PC, L::PC_INCREMENT})
            if (!w.asserts(l))
                out.push_back(error_at(line, row, "fetch must assert " + std::string(to_string(l))));
        for (L l : {L::HALT, L::BREAK, L::MEM_WRITE, L::IO_STROBE, L::PC_FROM_ADDR})
            if (w.asserts(l))
                out.push_back(error_at(line, row, "fetch must not assert " + std::string(to_string(l))));
    } else if (w.asserts(L::IR_LOAD)) {
        out.push_back(error_at(line, row, "execute rows must not reload IR"));
    }
}

std::vector<Diagnostic> validate_with_lines(const MicroRom& rom, int fetch_line,
                                            const std::array<int, isa::kOpcodeCount>& lines)
{
    std::vector<Diagnostic> out;
    lint_row(rom.fetch, "FETCH", fetch_line, true, out);
    for (unsigned op = 0; op < isa::kOpcodeCount; ++op)
        lint_row(rom.execute[op], std::to_string(op), lines[op], false, out);
    return out;
}

} // namespace

std::string_view to_string(ControlLine line) { return kLineNames.at(static_cast<std::size_t>(line)); }

std::optional<ControlLine> parse_control_line(std::string_view text)
{
    for (std::size_t i = 0; i < kLineNames.size(); ++i)
        if (kLineNames[i] == text)
            return static_cast<ControlLine>(i);
    return std::nullopt;
}

std::string Diagnostic::to_string() const
{
    std::string s = severity == Severity::error ? "error" : "warning";
    if (line > 0)
        s += ": line " + std::to_string(line);
    s += " [" + row + "]: " + message;
    return s;
}

RomError::RomError(std::vector<Diagnostic> diagnostics)
    : Error([&] {
          std::string msg = "microcode ROM rejected";
          for (const auto& d : diagnostics)
              msg += "\n  " + d.to_string();
          return msg;
      }()),
      diagnostics_(std::move(diagnostics))
{
}

MicroRom load_rom(std::string_view text)
{
    MicroRom rom;
    std::vector<Diagnostic> errors;
    int fetch_line = 0;
    std::array<int, isa::kOpcodeCount> row_line{};
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
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

        const std::string& label = tok[0];
        MicroWord* target = nullptr;
        if (label == "FETCH") {
            if (fetch_line != 0) {
                errors.push_back(error_at(line_no, label, "duplicate FETCH row (first at line "
                                                              + std::to_string(fetch_line) + ")"));
                continue;
            }
            fetch_line = line_no;
            target = &rom.fetch;
        } else {
            unsigned op = 0;
            bool ok = !label.empty() && label.size() <= 2;
            for (char c : label)
                ok = ok && c >= '0' && c <= '9';
            if (ok)
                op = static_cast<unsigned>(std::stoul(label));
            if (!ok || op >= isa::kOpcodeCount) {
                errors.push_back(error_at(line_no, label, "row label must be FETCH or an opcode 0..31"));
                continue;
            }
            if (row_line[op] != 0) {
                errors.push_back(error_at(line_no, label, "duplicate execute row for opcode "
                                                              + std::to_string(op) + " (first at line "
                                                              + std::to_string(row_line[op]) + ")"));
                continue;
            }
            row_line[op] = line_no;
            target = &rom.execute[op];
        }

        if (tok.size() < 2 || tok[1].rfind("dur=", 0) != 0) {
            errors.push_back(error_at(line_no, label, "missing dur=<4|8>"));
            continue;
        }
        const std::string dur = tok[1].substr(4);
        if (dur == "4")
            target->duration_us = kShortCycleUs;
        else if (dur == "8")
            target->duration_us = kLongCycleUs;
        else
            errors.push_back(error_at(line_no, label, "duration must be 4 or 8, got '" + dur + "'"));
        for (std::size_t i = 2; i < tok.size(); ++i) {
            auto l = parse_control_line(tok[i]);
            if (!l) {
                errors.push_back(error_at(line_no, label, "unknown control line '" + tok[i] + "'"));
                continue;
            }
            if (target->asserts(*l))
                errors.push_back(error_at(line_no, label, "control line " + tok[i] + " listed twice"));
            target->set(*l);
        }
    }
    if (fetch_line == 0)
        errors.push_back(error_at(0, "FETCH", "missing FETCH row"));
    for (unsigned op = 0; op < isa::kOpcodeCount; ++op)
        if (row_line[op] == 0)
            errors.push_back(error_at(0, std::to_string(op), "missing execute row for opcode " + std::to_string(op)));
    if (!errors.empty())
        throw RomError(std::move(errors));

    auto lint = validate_with_lines(rom, fetch_line, row_line);
    std::erase_if(lint, [](const Diagnostic& d) { return d.severity != Diagnostic::Severity::error; });
    if (!lint.empty())
        throw RomError(std::move(lint));
    return rom;
}

std::vector<Diagnostic> validate_rom(const MicroRom& rom)
{
    return validate_with_lines(rom, 0, {});
}

std::vector<Diagnostic> check_against_isa(const MicroRom& rom, const isa::IsaTable& table)
{
    std::vector<Diagnostic> out;
    for (unsigned op = 0; op < isa::kOpcodeCount; ++op)
        if (rom.execute[op].duration_us != table[op].duration_us)
            out.push_back(error_at(0, std::to_string(op),
                                   table[op].mnemonic + ": ROM duration "
                                       + std::to_string(rom.execute[op].duration_us)
                                       + " us disagrees with table class "
                                       + std::to_string(table[op].duration_us) + " us"));
    return out;
}

unsigned microstep_cost(const MicroRom& rom, unsigned opcode)
{
    return rom.fetch.duration_us + rom.execute.at(opcode).duration_us;
}

std::string write_rom(const MicroRom& rom, const isa::IsaTable* table)
{
    std::ostringstream out;
    auto row = [&](const std::string& label, const MicroWord& w, const std::string& comment) {
        std::string text = label;
        text.resize(7, ' ');
        text += "dur=" + std::to_string(w.duration_us);
        for (std::size_t i = 0; i < kControlLineCount; ++i)
            if (w.lines.test(i))
                text += "  " + std::string(kLineNames[i]);
        if (!comment.empty()) {
            if (text.size() < 48)
                text.resize(48, ' ');
            text += "  # " + comment;
        }
        out << text << '\n';
    };
    row("FETCH", rom.fetch, "");
    for (unsigned op = 0; op < isa::kOpcodeCount; ++op)
        row(std::to_string(op), rom.execute[op], table ? (*table)[op].mnemonic : "");
    return out.str();
}

std::string_view default_rom_text() { return kDefaultRom; }

const MicroRom& default_rom()
{
    static const MicroRom rom = load_rom(kDefaultRom);
    return rom;
}

} // namespace mr::micro
