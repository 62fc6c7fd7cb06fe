#include "mr/adder.hpp"

#include <sstream>

namespace mr::logic {

std::string write_netlist(const LogicNetwork& net)
{
    std::ostringstream out;
    out << "# netlist: " << net.input_count() << " inputs, " << net.gate_count() << " gates, depth "
        << gate_depth(net) << "\n";
    out << "INPUT";
    for (std::size_t i = 0; i < net.input_count(); ++i)
        out << ' ' << net.name(static_cast<NodeId>(i));
    out << '\n';
    for (const auto& o : net.outputs())
        out << "OUTPUT " << o.name << ' ' << net.name(o.node) << '\n';
    for (std::size_t g = 0; g < net.gate_count(); ++g) {
        const auto id = static_cast<NodeId>(net.input_count() + g);
        const Gate& gate = net.gates()[g];
        out << net.name(id) << ' ' << to_string(gate.kind);
        for (NodeId in : gate.inputs)
            out << ' ' << net.name(in);
        out << '\n';
    }
    return out.str();
}

LogicNetwork parse_netlist(std::string_view text)
{
    LogicNetwork::Builder b;
    std::vector<std::pair<std::string, std::string>> outputs;
    std::unordered_map<std::string, NodeId> ids;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& msg) -> NetworkError {
        return NetworkError("netlist line " + std::to_string(line_no) + ": " + msg);
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
        try {
            if (tok[0] == "INPUT") {
                if (tok.size() < 2)
                    throw fail("INPUT needs at least one name");
                for (std::size_t i = 1; i < tok.size(); ++i)
                    ids[tok[i]] = b.input(tok[i]);
            } else if (tok[0] == "OUTPUT") {
                if (tok.size() != 3)
                    throw fail("OUTPUT takes a name and a node");
                outputs.emplace_back(tok[1], tok[2]);
            } else {
                if (tok.size() < 3)
                    throw fail("gate line needs id, kind and inputs");
                auto kind = parse_gate_kind(tok[1]);
                if (!kind)
                    throw fail("unknown gate kind '" + tok[1] + "'");
                std::vector<NodeId> ins;
                for (std::size_t i = 2; i < tok.size(); ++i) {
                    auto it = ids.find(tok[i]);
                    if (it == ids.end())
                        throw fail("input '" + tok[i] + "' is not defined above");
                    ins.push_back(it->second);
                }
                ids[tok[0]] = b.gate(*kind, std::move(ins), tok[0]);
            }
        } catch (const NetworkError& e) {
            const std::string what = e.what();
            if (what.rfind("netlist line", 0) == 0)
                throw;
            throw fail(what);
        }
    }
    for (const auto& [name, node] : outputs) {
        auto it = ids.find(node);
        if (it == ids.end())
            throw NetworkError("netlist: output '" + name + "' references undefined node '" + node + "'");
        b.output(name, it->second);
    }
    return std::move(b).build();
}

} // namespace mr::logic
