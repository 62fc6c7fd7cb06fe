#pragma once

// Gate-level combinational networks and the adder generators that model the
// arithmetic element. Networks are immutable once built; evaluation never
// mutates them, so a network may be shared freely across threads.

#include "mr/word.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mr::logic {

enum class GateKind : std::uint8_t { And, Or, Not };

std::string_view to_string(GateKind kind);
std::optional<GateKind> parse_gate_kind(std::string_view text);

using NodeId = std::uint32_t;

struct Gate {
    GateKind kind;
    std::vector<NodeId> inputs;
};

class NetworkError : public Error {
public:
    using Error::Error;
};

/// A directed acyclic network of AND/OR/NOT gates. Node ids [0, input_count)
/// are primary inputs; the remaining ids are gates in topological order, each
/// referring only to lower ids.
class LogicNetwork {
public:
    class Builder;

    struct Output {
        std::string name;
        NodeId node;
    };

    std::size_t node_count() const { return names_.size(); }
    std::size_t input_count() const { return input_count_; }
    std::size_t gate_count() const { return gates_.size(); }

    bool is_input(NodeId id) const { return id < input_count_; }
    const Gate& gate(NodeId id) const { return gates_.at(id - input_count_); }
    const std::vector<Gate>& gates() const { return gates_; }
    const std::string& name(NodeId id) const { return names_.at(id); }
    std::optional<NodeId> find(std::string_view name) const;

    const std::vector<Output>& outputs() const { return outputs_; }
    std::optional<std::size_t> find_output(std::string_view name) const;

    /// Primary inputs that no output depends on.
    std::vector<std::string> unused_inputs() const;

    /// Copy of this network with one gate's kind replaced. Used to build
    /// mutation fixtures; fan-in rules are re-checked.
    LogicNetwork with_gate_kind(NodeId gate_node, GateKind kind) const;

    /// Throws NetworkError if any structural invariant is broken.
    void check_invariants() const;

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, NodeId> index_;
    std::size_t input_count_ = 0;
    std::vector<Gate> gates_;
    std::vector<Output> outputs_;
};

class LogicNetwork::Builder {
public:
    /// Inputs must all be declared before the first gate.
    NodeId input(std::string name);
    NodeId gate(GateKind kind, std::vector<NodeId> inputs, std::string name = {});

    NodeId and_of(std::vector<NodeId> inputs, std::string name = {});
    NodeId or_of(std::vector<NodeId> inputs, std::string name = {});
    NodeId not_of(NodeId input, std::string name = {});

    void output(std::string name, NodeId node);

    LogicNetwork build() &&;

private:
    NodeId add_node(std::string name);

    LogicNetwork net_;
};

struct EvalResult {
    std::map<std::string, bool> outputs;
    /// Inputs that were supplied but cannot influence any output.
    std::vector<std::string> unused_inputs;
};

/// Evaluates the network for one named assignment. Missing or unknown input
/// names are rejected.
EvalResult evaluate(const LogicNetwork& net, const std::map<std::string, bool>& assignment);

/// Evaluates 64 assignments at once, one per bit lane. Holds scratch space, so
/// one evaluator per thread.
class LaneEvaluator {
public:
    explicit LaneEvaluator(const LogicNetwork& net);

    /// `inputs` has one lane word per primary input; `outputs` receives one
    /// lane word per declared output.
    void run(std::span<const std::uint64_t> inputs, std::span<std::uint64_t> outputs);

private:
    std::size_t input_count_;
    std::vector<NodeId> output_nodes_;
    std::vector<GateKind> kinds_;
    std::vector<std::uint32_t> offsets_;
    std::vector<NodeId> fanin_;
    std::vector<std::uint64_t> values_;
};

/// Longest input-to-output path counted in gates. Inputs have depth 0.
unsigned gate_depth(const LogicNetwork& net);

// Adder generators. Ports: inputs a0..a{w-1}, b0..b{w-1}, cin; outputs
// s0..s{w-1}, cout. Bit 0 is least significant.

LogicNetwork build_ripple_adder(unsigned width);
LogicNetwork build_lookahead_adder(unsigned width, unsigned group_size);

/// Depth of the one-bit full adder both generators emit:
///   g = a AND b, p = a OR b                  level 1
///   h = p AND NOT g                          levels 2-3
///   s = (h OR c) AND NOT (h AND c)           levels 4-6
///   cout = g OR (p AND c)                    levels 2-3
inline constexpr unsigned kFullAdderDepth = 6;

/// Lookahead grouping used for the machine's 18-bit arithmetic element.
inline constexpr unsigned kDefaultGroupSize = 6;

/// Resolved port nodes of an adder-shaped network.
struct AdderPorts {
    unsigned width = 0;
    std::vector<NodeId> a;
    std::vector<NodeId> b;
    NodeId carry_in = 0;
    std::vector<std::size_t> sum;  // indices into outputs()
    std::size_t carry_out = 0;

    /// Throws NetworkError if the network does not have exactly the adder
    /// port shape for `width`.
    static AdderPorts bind(const LogicNetwork& net, unsigned width);
};

struct AddResult {
    std::uint32_t sum;
    bool carry_out;
};

/// An adder network bound to its ports, evaluated one operand pair at a time.
/// Not thread-safe (owns evaluator scratch).
class AdderCircuit {
public:
    AdderCircuit(LogicNetwork net, unsigned width);

    AddResult add(std::uint32_t a, std::uint32_t b, bool carry_in);

    const LogicNetwork& network() const { return net_; }
    unsigned width() const { return ports_.width; }

private:
    LogicNetwork net_;
    AdderPorts ports_;
    LaneEvaluator eval_;
    std::vector<std::uint64_t> in_;
    std::vector<std::uint64_t> out_;
};

struct Counterexample {
    std::uint32_t a;
    std::uint32_t b;
    bool carry_in;
    std::uint32_t expected_sum;
    bool expected_carry;
    std::uint32_t actual_sum;
    bool actual_carry;
};

struct EquivalenceReport {
    unsigned width = 0;
    bool exhaustive = false;
    std::uint64_t vectors_checked = 0;
    std::vector<Counterexample> counterexamples;

    bool equivalent() const { return counterexamples.empty(); }
};

/// Compares an adder-shaped network against host arithmetic. Widths up to 8
/// are checked exhaustively; wider networks get structured corner cases plus
/// `random_vectors` seeded random vectors.
EquivalenceReport check_equivalence(const LogicNetwork& net, unsigned width,
                                    std::uint64_t seed = 1957, std::size_t random_vectors = 8192);

/// The width-6 lookahead adder with one carry-term AND gate miswired as OR,
/// standing in for a blueprint that "looks right" but does not add.
LogicNetwork build_flawed_adder6();
inline constexpr std::string_view kFlawedGateName = "c2_t1";

// Netlist text format:
//   # comment
//   INPUT a0 a1 ...           (one or more names, may repeat)
//   OUTPUT <name> <node>      (one per line)
//   <node> AND|OR|NOT <in>... (one gate per line, topological order)
std::string write_netlist(const LogicNetwork& net);
LogicNetwork parse_netlist(std::string_view text);

} // namespace mr::logic
