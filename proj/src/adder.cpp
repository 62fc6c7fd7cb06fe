#include "mr/adder.hpp"

#include <algorithm>
#include <random>

namespace mr::logic {

std::string_view to_string(GateKind kind)
{
    switch (kind) {
    case GateKind::And: return "AND";
    case GateKind::Or: return "OR";
    case GateKind::Not: return "NOT";
    }
    return "?";
}

std::optional<GateKind> parse_gate_kind(std::string_view text)
{
    if (text == "AND")
        return GateKind::And;
    if (text == "OR")
        return GateKind::Or;
    if (text == "NOT")
        return GateKind::Not;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// LogicNetwork

std::optional<NodeId> LogicNetwork::find(std::string_view name) const
{
    auto it = index_.find(std::string(name));
    if (it == index_.end())
        return std::nullopt;
    return it->second;
}

std::optional<std::size_t> LogicNetwork::find_output(std::string_view name) const
{
    for (std::size_t i = 0; i < outputs_.size(); ++i)
        if (outputs_[i].name == name)
            return i;
    return std::nullopt;
}

std::vector<std::string> LogicNetwork::unused_inputs() const
{
    std::vector<bool> live(node_count(), false);
    for (const auto& o : outputs_)
        live[o.node] = true;
    for (std::size_t id = node_count(); id-- > input_count_;) {
        if (!live[id])
            continue;
        for (NodeId in : gates_[id - input_count_].inputs)
            live[in] = true;
    }
    std::vector<std::string> unused;
    for (std::size_t id = 0; id < input_count_; ++id)
        if (!live[id])
            unused.push_back(names_[id]);
    return unused;
}

LogicNetwork LogicNetwork::with_gate_kind(NodeId gate_node, GateKind kind) const
{
    if (is_input(gate_node) || gate_node >= node_count())
        throw NetworkError("node " + std::to_string(gate_node) + " is not a gate");
    LogicNetwork copy = *this;
    copy.gates_[gate_node - input_count_].kind = kind;
    copy.check_invariants();
    return copy;
}

void LogicNetwork::check_invariants() const
{
    if (names_.size() != input_count_ + gates_.size())
        throw NetworkError("node table out of sync with gate list");
    if (index_.size() != names_.size())
        throw NetworkError("duplicate node name");
    for (std::size_t g = 0; g < gates_.size(); ++g) {
        const NodeId self = static_cast<NodeId>(input_count_ + g);
        const Gate& gate = gates_[g];
        if (gate.kind == GateKind::Not && gate.inputs.size() != 1)
            throw NetworkError("NOT gate '" + names_[self] + "' must have exactly one input");
        if (gate.kind != GateKind::Not && gate.inputs.size() < 2)
            throw NetworkError(std::string(to_string(gate.kind)) + " gate '" + names_[self]
                               + "' needs fan-in >= 2");
        for (NodeId in : gate.inputs)
            if (in >= self)
                throw NetworkError("gate '" + names_[self] + "' references a later node");
    }
    for (const auto& o : outputs_)
        if (o.node >= names_.size())
            throw NetworkError("output '" + o.name + "' references an undefined node");
    for (std::size_t i = 0; i < outputs_.size(); ++i)
        for (std::size_t j = i + 1; j < outputs_.size(); ++j)
            if (outputs_[i].name == outputs_[j].name)
                throw NetworkError("duplicate output '" + outputs_[i].name + "'");
}

// ---------------------------------------------------------------------------
// Builder

NodeId LogicNetwork::Builder::add_node(std::string name)
{
    const auto id = static_cast<NodeId>(net_.names_.size());
    if (name.empty())
        name = "n" + std::to_string(id);
    if (!net_.index_.emplace(name, id).second)
        throw NetworkError("node '" + name + "' defined twice");
    net_.names_.push_back(std::move(name));
    return id;
}

NodeId LogicNetwork::Builder::input(std::string name)
{
    if (!net_.gates_.empty())
        throw NetworkError("input '" + name + "' declared after the first gate");
    NodeId id = add_node(std::move(name));
    ++net_.input_count_;
    return id;
}

NodeId LogicNetwork::Builder::gate(GateKind kind, std::vector<NodeId> inputs, std::string name)
{
    const auto next = static_cast<NodeId>(net_.names_.size());
    for (NodeId in : inputs)
        if (in >= next)
            throw NetworkError("gate input " + std::to_string(in) + " is not yet defined");
    if (kind == GateKind::Not && inputs.size() != 1)
        throw NetworkError("NOT gate must have exactly one input");
    if (kind != GateKind::Not && inputs.size() < 2)
        throw NetworkError(std::string(to_string(kind)) + " gate needs fan-in >= 2");
    NodeId id = add_node(std::move(name));
    net_.gates_.push_back(Gate{kind, std::move(inputs)});
    return id;
}

NodeId LogicNetwork::Builder::and_of(std::vector<NodeId> inputs, std::string name)
{
    if (inputs.size() == 1)
        return inputs.front();
    return gate(GateKind::And, std::move(inputs), std::move(name));
}

NodeId LogicNetwork::Builder::or_of(std::vector<NodeId> inputs, std::string name)
{
    if (inputs.size() == 1)
        return inputs.front();
    return gate(GateKind::Or, std::move(inputs), std::move(name));
}

NodeId LogicNetwork::Builder::not_of(NodeId input, std::string name)
{
    return gate(GateKind::Not, {input}, std::move(name));
}

void LogicNetwork::Builder::output(std::string name, NodeId node)
{
    if (node >= net_.names_.size())
        throw NetworkError("output '" + name + "' references an undefined node");
    for (const auto& o : net_.outputs_)
        if (o.name == name)
            throw NetworkError("duplicate output '" + name + "'");
    net_.outputs_.push_back(LogicNetwork::Output{std::move(name), node});
}

LogicNetwork LogicNetwork::Builder::build() &&
{
    net_.check_invariants();
    return std::move(net_);
}

// ---------------------------------------------------------------------------
// Evaluation

LaneEvaluator::LaneEvaluator(const LogicNetwork& net) : input_count_(net.input_count())
{
    for (const auto& o : net.outputs())
        output_nodes_.push_back(o.node);
    kinds_.reserve(net.gate_count());
    offsets_.reserve(net.gate_count() + 1);
    offsets_.push_back(0);
    for (const Gate& g : net.gates()) {
        kinds_.push_back(g.kind);
        fanin_.insert(fanin_.end(), g.inputs.begin(), g.inputs.end());
        offsets_.push_back(static_cast<std::uint32_t>(fanin_.size()));
    }
    values_.resize(net.node_count());
}

void LaneEvaluator::run(std::span<const std::uint64_t> inputs, std::span<std::uint64_t> outputs)
{
    const std::size_t n_in = input_count_;
    if (inputs.size() != n_in || outputs.size() != output_nodes_.size())
        throw NetworkError("lane evaluator: port count mismatch");
    std::copy(inputs.begin(), inputs.end(), values_.begin());
    std::uint64_t* v = values_.data();
    const NodeId* fan = fanin_.data();
    for (std::size_t g = 0; g < kinds_.size(); ++g) {
        const std::uint32_t lo = offsets_[g];
        const std::uint32_t hi = offsets_[g + 1];
        std::uint64_t acc;
        switch (kinds_[g]) {
        case GateKind::And:
            acc = ~std::uint64_t{0};
            for (std::uint32_t k = lo; k < hi; ++k)
                acc &= v[fan[k]];
            break;
        case GateKind::Or:
            acc = 0;
            for (std::uint32_t k = lo; k < hi; ++k)
                acc |= v[fan[k]];
            break;
        case GateKind::Not:
        default:
            acc = ~v[fan[lo]];
            break;
        }
        v[n_in + g] = acc;
    }
    for (std::size_t i = 0; i < output_nodes_.size(); ++i)
        outputs[i] = v[output_nodes_[i]];
}

EvalResult evaluate(const LogicNetwork& net, const std::map<std::string, bool>& assignment)
{
    std::vector<std::uint64_t> in(net.input_count(), 0);
    std::vector<bool> seen(net.input_count(), false);
    std::string unknown;
    for (const auto& [name, bit] : assignment) {
        auto id = net.find(name);
        if (!id || !net.is_input(*id)) {
            unknown += (unknown.empty() ? "" : ", ") + name;
            continue;
        }
        in[*id] = bit ? 1 : 0;
        seen[*id] = true;
    }
    if (!unknown.empty())
        throw NetworkError("assignment names unknown inputs: " + unknown);
    std::string missing;
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i])
            missing += (missing.empty() ? "" : ", ") + net.name(static_cast<NodeId>(i));
    if (!missing.empty())
        throw NetworkError("assignment is missing inputs: " + missing);

    std::vector<std::uint64_t> out(net.outputs().size());
    LaneEvaluator(net).run(in, out);

    EvalResult result;
    for (std::size_t i = 0; i < out.size(); ++i)
        result.outputs[net.outputs()[i].name] = (out[i] & 1u) != 0;
    result.unused_inputs = net.unused_inputs();
    return result;
}

unsigned gate_depth(const LogicNetwork& net)
{
    std::vector<unsigned> depth(net.node_count(), 0);
    for (std::size_t g = 0; g < net.gate_count(); ++g) {
        unsigned d = 0;
        for (NodeId in : net.gates()[g].inputs)
            d = std::max(d, depth[in]);
        depth[net.input_count() + g] = d + 1;
    }
    unsigned deepest = 0;
    for (const auto& o : net.outputs())
        deepest = std::max(deepest, depth[o.node]);
    return deepest;
}

// ---------------------------------------------------------------------------
// Adder generators

namespace {

struct BitSignals {
    NodeId g, p, h;
};

void declare_ports(LogicNetwork::Builder& b, unsigned width, std::vector<NodeId>& a,
                   std::vector<NodeId>& bb, NodeId& cin)
{
    for (unsigned i = 0; i < width; ++i)
        a.push_back(b.input("a" + std::to_string(i)));
    for (unsigned i = 0; i < width; ++i)
        bb.push_back(b.input("b" + std::to_string(i)));
    cin = b.input("cin");
}

BitSignals bit_signals(LogicNetwork::Builder& b, unsigned i, NodeId a, NodeId bb)
{
    const std::string n = std::to_string(i);
    NodeId g = b.and_of({a, bb}, "g" + n);
    NodeId p = b.or_of({a, bb}, "p" + n);
    NodeId ng = b.not_of(g, "ng" + n);
    NodeId h = b.and_of({p, ng}, "h" + n);
    return {g, p, h};
}

// XOR from AND/OR/NOT: (h OR c) AND NOT (h AND c).
NodeId sum_bit(LogicNetwork::Builder& b, unsigned i, NodeId h, NodeId c)
{
    const std::string n = std::to_string(i);
    NodeId o = b.or_of({h, c}, "so" + n);
    NodeId a = b.and_of({h, c}, "sa" + n);
    NodeId na = b.not_of(a, "sn" + n);
    return b.and_of({o, na}, "x" + n);
}

void check_width(unsigned width)
{
    if (width == 0)
        throw NetworkError("adder width must be at least 1");
    if (width > 31)
        throw NetworkError("adder width must be at most 31");
}

// OR over terms AND(p[hi], ..., p[lo], base) for each lo, plus the plain
// generate of the top bit: the flat two-level carry expression.
NodeId flat_carry(LogicNetwork::Builder& b, const std::string& name,
                  const std::vector<NodeId>& gen, const std::vector<NodeId>& prop,
                  std::size_t first, std::size_t last, NodeId base)
{
    std::vector<NodeId> terms;
    std::size_t t = 0;
    for (std::size_t k = last + 1; k-- > first;) {
        if (k == last) {
            terms.push_back(gen[k]);
        } else {
            std::vector<NodeId> ins;
            for (std::size_t j = last; j > k; --j)
                ins.push_back(prop[j]);
            ins.push_back(gen[k]);
            terms.push_back(b.and_of(std::move(ins), name + "_t" + std::to_string(t)));
        }
        ++t;
    }
    std::vector<NodeId> ins;
    for (std::size_t j = last + 1; j-- > first;)
        ins.push_back(prop[j]);
    ins.push_back(base);
    terms.push_back(b.and_of(std::move(ins), name + "_t" + std::to_string(t)));
    return b.or_of(std::move(terms), name);
}

} // namespace

LogicNetwork build_ripple_adder(unsigned width)
{
    check_width(width);
    LogicNetwork::Builder b;
    std::vector<NodeId> a, bb;
    NodeId carry;
    declare_ports(b, width, a, bb, carry);

    std::vector<NodeId> sums;
    for (unsigned i = 0; i < width; ++i) {
        BitSignals s = bit_signals(b, i, a[i], bb[i]);
        sums.push_back(sum_bit(b, i, s.h, carry));
        NodeId pc = b.and_of({s.p, carry}, "pc" + std::to_string(i));
        carry = b.or_of({s.g, pc}, "c" + std::to_string(i + 1));
    }
    for (unsigned i = 0; i < width; ++i)
        b.output("s" + std::to_string(i), sums[i]);
    b.output("cout", carry);
    return std::move(b).build();
}

LogicNetwork build_lookahead_adder(unsigned width, unsigned group_size)
{
    check_width(width);
    if (group_size == 0 || group_size > width)
        throw NetworkError("group size " + std::to_string(group_size) + " invalid for width "
                           + std::to_string(width));
    LogicNetwork::Builder b;
    std::vector<NodeId> a, bb;
    NodeId cin;
    declare_ports(b, width, a, bb, cin);

    std::vector<NodeId> g, p, h;
    for (unsigned i = 0; i < width; ++i) {
        BitSignals s = bit_signals(b, i, a[i], bb[i]);
        g.push_back(s.g);
        p.push_back(s.p);
        h.push_back(s.h);
    }

    const unsigned groups = (width + group_size - 1) / group_size;
    std::vector<NodeId> group_g, group_p;
    for (unsigned k = 0; k < groups; ++k) {
        const unsigned lo = k * group_size;
        const unsigned hi = std::min(width, lo + group_size) - 1;
        const std::string n = std::to_string(k);
        // Group generate: OR of g[j] AND p[j+1..hi].
        std::vector<NodeId> terms;
        for (unsigned j = hi + 1; j-- > lo;) {
            std::vector<NodeId> ins;
            for (unsigned m = hi; m > j; --m)
                ins.push_back(p[m]);
            ins.push_back(g[j]);
            terms.push_back(b.and_of(std::move(ins), "Gt" + n + "_" + std::to_string(hi - j)));
        }
        group_g.push_back(b.or_of(std::move(terms), "G" + n));
        std::vector<NodeId> ps(p.begin() + lo, p.begin() + hi + 1);
        group_p.push_back(b.and_of(std::move(ps), "P" + n));
    }

    // Group carries, flat over all lower groups: C[k+1] from G/P of groups 0..k.
    std::vector<NodeId> group_c{cin};
    for (unsigned k = 0; k < groups; ++k)
        group_c.push_back(flat_carry(b, "C" + std::to_string(k + 1), group_g, group_p, 0, k, cin));

    // Carries inside each group start from that group's incoming carry.
    std::vector<NodeId> carry(width + 1);
    for (unsigned k = 0; k < groups; ++k) {
        const unsigned lo = k * group_size;
        const unsigned hi = std::min(width, lo + group_size) - 1;
        carry[lo] = group_c[k];
        for (unsigned i = lo + 1; i <= hi; ++i)
            carry[i] = flat_carry(b, "c" + std::to_string(i), g, p, lo, i - 1, group_c[k]);
    }
    carry[width] = group_c[groups];

    std::vector<NodeId> sums;
    for (unsigned i = 0; i < width; ++i)
        sums.push_back(sum_bit(b, i, h[i], carry[i]));
    for (unsigned i = 0; i < width; ++i)
        b.output("s" + std::to_string(i), sums[i]);
    b.output("cout", carry[width]);
    return std::move(b).build();
}

LogicNetwork build_flawed_adder6()
{
    LogicNetwork good = build_lookahead_adder(6, 3);
    auto node = good.find(kFlawedGateName);
    if (!node)
        throw NetworkError("flaw fixture gate missing");
    return good.with_gate_kind(*node, GateKind::Or);
}

// ---------------------------------------------------------------------------
// Ports and circuits

AdderPorts AdderPorts::bind(const LogicNetwork& net, unsigned width)
{
    if (width == 0)
        throw NetworkError("adder width must be at least 1");
    if (net.input_count() != 2 * width + 1)
        throw NetworkError("expected " + std::to_string(2 * width + 1) + " inputs for width "
                           + std::to_string(width) + ", found " + std::to_string(net.input_count()));
    if (net.outputs().size() != width + 1)
        throw NetworkError("expected " + std::to_string(width + 1) + " outputs for width "
                           + std::to_string(width) + ", found "
                           + std::to_string(net.outputs().size()));
    AdderPorts ports;
    ports.width = width;
    auto input_named = [&](const std::string& n) {
        auto id = net.find(n);
        if (!id || !net.is_input(*id))
            throw NetworkError("adder port '" + n + "' missing");
        return *id;
    };
    auto output_named = [&](const std::string& n) {
        auto idx = net.find_output(n);
        if (!idx)
            throw NetworkError("adder output '" + n + "' missing");
        return *idx;
    };
    for (unsigned i = 0; i < width; ++i) {
        ports.a.push_back(input_named("a" + std::to_string(i)));
        ports.b.push_back(input_named("b" + std::to_string(i)));
        ports.sum.push_back(output_named("s" + std::to_string(i)));
    }
    ports.carry_in = input_named("cin");
    ports.carry_out = output_named("cout");
    return ports;
}

AdderCircuit::AdderCircuit(LogicNetwork net, unsigned width)
    : net_(std::move(net)),
      ports_(AdderPorts::bind(net_, width)),
      eval_(net_),
      in_(net_.input_count()),
      out_(net_.outputs().size())
{
}

AddResult AdderCircuit::add(std::uint32_t a, std::uint32_t b, bool carry_in)
{
    for (unsigned i = 0; i < ports_.width; ++i) {
        in_[ports_.a[i]] = (a >> i) & 1u;
        in_[ports_.b[i]] = (b >> i) & 1u;
    }
    in_[ports_.carry_in] = carry_in ? 1u : 0u;
    eval_.run(in_, out_);
    std::uint32_t sum = 0;
    for (unsigned i = 0; i < ports_.width; ++i)
        sum |= static_cast<std::uint32_t>(out_[ports_.sum[i]] & 1u) << i;
    return {sum, (out_[ports_.carry_out] & 1u) != 0};
}

// ---------------------------------------------------------------------------
// Equivalence checking

namespace {

struct Vector {
    std::uint32_t a, b;
    bool cin;
};

class BatchChecker {
public:
    BatchChecker(const LogicNetwork& net, unsigned width, EquivalenceReport& report)
        : ports_(AdderPorts::bind(net, width)),
          eval_(net),
          in_(net.input_count()),
          out_(net.outputs().size()),
          report_(report)
    {
        batch_.reserve(64);
    }

    void push(Vector v)
    {
        batch_.push_back(v);
        if (batch_.size() == 64)
            flush();
    }

    void flush()
    {
        if (batch_.empty())
            return;
        std::fill(in_.begin(), in_.end(), 0);
        for (std::size_t lane = 0; lane < batch_.size(); ++lane) {
            const Vector& v = batch_[lane];
            for (unsigned i = 0; i < ports_.width; ++i) {
                in_[ports_.a[i]] |= static_cast<std::uint64_t>((v.a >> i) & 1u) << lane;
                in_[ports_.b[i]] |= static_cast<std::uint64_t>((v.b >> i) & 1u) << lane;
            }
            in_[ports_.carry_in] |= static_cast<std::uint64_t>(v.cin) << lane;
        }
        eval_.run(in_, out_);
        const std::uint64_t mask = (std::uint64_t{1} << ports_.width) - 1;
        for (std::size_t lane = 0; lane < batch_.size(); ++lane) {
            const Vector& v = batch_[lane];
            const std::uint64_t total = std::uint64_t{v.a} + v.b + (v.cin ? 1 : 0);
            std::uint32_t got = 0;
            for (unsigned i = 0; i < ports_.width; ++i)
                got |= static_cast<std::uint32_t>((out_[ports_.sum[i]] >> lane) & 1u) << i;
            const bool got_c = ((out_[ports_.carry_out] >> lane) & 1u) != 0;
            const auto want = static_cast<std::uint32_t>(total & mask);
            const bool want_c = ((total >> ports_.width) & 1u) != 0;
            if (got != want || got_c != want_c)
                report_.counterexamples.push_back({v.a, v.b, v.cin, want, want_c, got, got_c});
        }
        report_.vectors_checked += batch_.size();
        batch_.clear();
    }

private:
    AdderPorts ports_;
    LaneEvaluator eval_;
    std::vector<std::uint64_t> in_;
    std::vector<std::uint64_t> out_;
    std::vector<Vector> batch_;
    EquivalenceReport& report_;
};

} // namespace

EquivalenceReport check_equivalence(const LogicNetwork& net, unsigned width, std::uint64_t seed,
                                    std::size_t random_vectors)
{
    EquivalenceReport report;
    report.width = width;
    BatchChecker checker(net, width, report);
    const std::uint32_t mask = width >= 32 ? ~0u : (1u << width) - 1;

    if (width <= 8) {
        report.exhaustive = true;
        for (std::uint32_t a = 0; a <= mask; ++a)
            for (std::uint32_t b = 0; b <= mask; ++b)
                for (int c = 0; c < 2; ++c)
                    checker.push({a, b, c != 0});
        checker.flush();
        return report;
    }

    std::uint32_t alt = 0;
    for (unsigned i = 0; i < width; i += 2)
        alt |= 1u << i;
    const std::vector<std::uint32_t> corners{0, mask, 1, alt, ~alt & mask, mask >> 1, (mask >> 1) + 1};
    for (int c = 0; c < 2; ++c) {
        for (std::uint32_t x : corners)
            for (std::uint32_t y : corners)
                checker.push({x, y, c != 0});
        for (unsigned i = 0; i < width; ++i) {
            checker.push({1u << i, 1u << i, c != 0});
            checker.push({mask, 1u << i, c != 0});
            checker.push({(1u << i) - 1, 1, c != 0});
        }
    }
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < random_vectors; ++i) {
        const std::uint64_t r = rng();
        checker.push({static_cast<std::uint32_t>(r) & mask, static_cast<std::uint32_t>(r >> 32) & mask,
                      ((rng() & 1u) != 0)});
    }
    checker.flush();
    return report;
}

} // namespace mr::logic
