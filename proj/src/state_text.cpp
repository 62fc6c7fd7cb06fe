#include "mr/machine.hpp"

#include <sstream>

namespace mr {

std::string format_state(const MachineState& s)
{
    std::ostringstream out;
    out << "MR-STATE 1\n";
    out << "PC " << address_to_string(s.pc) << '\n';
    out << "ACC " << to_string(s.acc) << '\n';
    out << "IR " << to_string(s.ir) << '\n';
    out << "MAR " << address_to_string(s.mar) << '\n';
    out << "MDR " << to_string(s.mdr) << '\n';
    out << "OVF " << (s.overflow ? 1 : 0) << '\n';
    out << "STATUS " << to_string(s.status) << '\n';
    out << "PHASE " << (s.phase == Phase::fetch ? "fetch" : "execute") << '\n';
    out << "SIM_TIME_US " << s.sim_time_us << '\n';
    out << "INSTRUCTIONS " << s.instructions << '\n';
    out << "BREAKPOINTS";
    for (Address a : s.breakpoint_list())
        out << ' ' << address_to_string(a);
    out << '\n';
    out << "MEMORY\n";
    for (unsigned row = 0; row < kMemoryWords / 32; ++row) {
        out << address_to_string(static_cast<Address>(row * 32)) << ':';
        for (unsigned col = 0; col < 32; ++col)
            out << ' ' << to_string(s.memory[row * 32 + col]);
        out << '\n';
    }
    out << "END\n";
    return out.str();
}

MachineState parse_state(std::string_view text)
{
    MachineState s;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& msg) { return Error("state line " + std::to_string(line_no) + ": " + msg); };
    auto octal = [&](const std::string& tok, std::uint32_t limit) {
        auto v = parse_octal(tok);
        if (!v || *v > limit)
            throw fail("bad octal value '" + tok + "'");
        return *v;
    };
    auto next = [&]() {
        if (!std::getline(in, line))
            throw fail("unexpected end of state text");
        ++line_no;
        return std::istringstream(line);
    };
    auto field = [&](const char* key) {
        auto ls = next();
        std::string k, v;
        ls >> k >> v;
        if (k != key || v.empty())
            throw fail(std::string("expected ") + key);
        return v;
    };

    {
        auto ls = next();
        std::string magic, version;
        ls >> magic >> version;
        if (magic != "MR-STATE" || version != "1")
            throw fail("not an MR-STATE 1 snapshot");
    }
    s.pc = static_cast<Address>(octal(field("PC"), kAddressMask));
    s.acc = Word(octal(field("ACC"), kWordMask));
    s.ir = Word(octal(field("IR"), kWordMask));
    s.mar = static_cast<Address>(octal(field("MAR"), kAddressMask));
    s.mdr = Word(octal(field("MDR"), kWordMask));
    const std::string ovf = field("OVF");
    if (ovf != "0" && ovf != "1")
        throw fail("OVF must be 0 or 1");
    s.overflow = ovf == "1";
    const auto status = parse_status(field("STATUS"));
    if (!status)
        throw fail("unknown status");
    s.status = *status;
    const std::string phase = field("PHASE");
    if (phase != "fetch" && phase != "execute")
        throw fail("unknown phase");
    s.phase = phase == "fetch" ? Phase::fetch : Phase::execute;
    try {
        s.sim_time_us = std::stoull(field("SIM_TIME_US"));
        s.instructions = std::stoull(field("INSTRUCTIONS"));
    } catch (const std::logic_error&) {
        throw fail("bad counter");
    }
    {
        auto ls = next();
        std::string k;
        ls >> k;
        if (k != "BREAKPOINTS")
            throw fail("expected BREAKPOINTS");
        for (std::string a; ls >> a;)
            s.breakpoints.set(octal(a, kAddressMask));
    }
    {
        auto ls = next();
        std::string k;
        ls >> k;
        if (k != "MEMORY")
            throw fail("expected MEMORY");
    }
    for (unsigned row = 0; row < kMemoryWords / 32; ++row) {
        auto ls = next();
        std::string label;
        ls >> label;
        if (label != address_to_string(static_cast<Address>(row * 32)) + ":")
            throw fail("expected memory row " + address_to_string(static_cast<Address>(row * 32)));
        for (unsigned col = 0; col < 32; ++col) {
            std::string w;
            if (!(ls >> w))
                throw fail("memory row is short");
            s.memory[row * 32 + col] = Word(octal(w, kWordMask));
        }
    }
    auto ls = next();
    std::string k;
    ls >> k;
    if (k != "END")
        throw fail("expected END");
    return s;
}

} // namespace mr
