#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "moecov/common.hpp"

namespace moecov {

/// Node kinds of the kernel expression language. Every node produces a
/// scalar, so the grammar is closed under arbitrary composition: terminals
/// are functions of one input pair (x, x'), operators combine scalars.
enum class NodeKind : std::uint8_t {
    // terminals
    DistanceR,    ///< scaled Euclidean distance ||x - x'|| / theta_l
    DotProductS,  ///< shifted scaled dot product (x - s·1)·(x' - s·1) / theta_l
    HyperConst,   ///< learnable positive constant
    WhiteNoise,   ///< theta_c when x and x' are the same sample, else 0
    LiteralOne,   ///< the literal 1
    // operators
    Add,
    Mul,
    ExpNeg,  ///< exp(-a)
    Square,
    Sqrt,
    Sin,
};

inline constexpr std::array<NodeKind, 5> kTerminalKinds = {
    NodeKind::DistanceR, NodeKind::DotProductS, NodeKind::HyperConst,
    NodeKind::WhiteNoise, NodeKind::LiteralOne};

inline constexpr std::array<NodeKind, 6> kOperatorKinds = {
    NodeKind::Add, NodeKind::Mul, NodeKind::ExpNeg,
    NodeKind::Square, NodeKind::Sqrt, NodeKind::Sin};

constexpr int arity(NodeKind k) {
    switch (k) {
        case NodeKind::Add:
        case NodeKind::Mul:
            return 2;
        case NodeKind::ExpNeg:
        case NodeKind::Square:
        case NodeKind::Sqrt:
        case NodeKind::Sin:
            return 1;
        default:
            return 0;
    }
}

constexpr bool is_terminal(NodeKind k) { return arity(k) == 0; }
constexpr bool is_operator(NodeKind k) { return arity(k) > 0; }

constexpr std::string_view node_name(NodeKind k) {
    switch (k) {
        case NodeKind::DistanceR: return "r";
        case NodeKind::DotProductS: return "s";
        case NodeKind::HyperConst: return "hp";
        case NodeKind::WhiteNoise: return "wn";
        case NodeKind::LiteralOne: return "1";
        case NodeKind::Add: return "add";
        case NodeKind::Mul: return "mul";
        case NodeKind::ExpNeg: return "expneg";
        case NodeKind::Square: return "square";
        case NodeKind::Sqrt: return "sqrt";
        case NodeKind::Sin: return "sin";
    }
    return "?";
}

/// Number of free hyperparameters introduced by one node of this kind.
constexpr int slot_count(NodeKind k) {
    switch (k) {
        case NodeKind::DistanceR: return 1;   // lengthscale
        case NodeKind::DotProductS: return 2; // lengthscale, shift
        case NodeKind::HyperConst: return 1;
        case NodeKind::WhiteNoise: return 1;
        default: return 0;
    }
}

struct Node {
    NodeKind kind = NodeKind::LiteralOne;
    friend bool operator==(const Node&, const Node&) = default;
};

/// Kernel expression stored as a preorder (depth-first) node sequence.
/// A subtree is always a contiguous range, which keeps subtree extraction
/// and replacement (the variation operators) cheap and allocation-light.
class KernelExpr {
public:
    /// Default expression: the literal 1.
    KernelExpr() : nodes_{Node{NodeKind::LiteralOne}} {}

    explicit KernelExpr(std::vector<Node> preorder) : nodes_(std::move(preorder)) {
        if (!well_formed(nodes_))
            throw std::invalid_argument("malformed preorder node sequence");
    }

    static bool well_formed(const std::vector<Node>& nodes) {
        if (nodes.empty()) return false;
        std::size_t need = 1;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (need == 0) return false;  // trailing nodes after a complete tree
            need += static_cast<std::size_t>(arity(nodes[i].kind));
            --need;
        }
        return need == 0;
    }

    const std::vector<Node>& nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }
    NodeKind kind_at(std::size_t i) const { return nodes_.at(i).kind; }

    /// One-past-the-end index of the subtree rooted at `i`.
    std::size_t subtree_end(std::size_t i) const {
        std::size_t need = 1, j = i;
        while (need > 0) {
            need += static_cast<std::size_t>(arity(nodes_[j].kind));
            --need;
            ++j;
        }
        return j;
    }

    /// Depth of each node; the root has depth 0.
    std::vector<int> node_depths() const {
        std::vector<int> depths(nodes_.size(), 0);
        // pending child counts per open operator, preorder walk
        std::vector<std::pair<int, int>> stack;  // (depth of children, children left)
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            int d = 0;
            if (!stack.empty()) {
                d = stack.back().first;
                if (--stack.back().second == 0) stack.pop_back();
            }
            depths[i] = d;
            int a = arity(nodes_[i].kind);
            if (a > 0) stack.emplace_back(d + 1, a);
        }
        return depths;
    }

    int depth() const {
        int best = 0;
        for (int d : node_depths()) best = std::max(best, d);
        return best;
    }

    KernelExpr subtree(std::size_t i) const {
        return KernelExpr(std::vector<Node>(nodes_.begin() + static_cast<std::ptrdiff_t>(i),
                                            nodes_.begin() + static_cast<std::ptrdiff_t>(subtree_end(i))));
    }

    /// Copy with the subtree at `i` replaced by `sub`.
    KernelExpr replaced(std::size_t i, const KernelExpr& sub) const {
        std::vector<Node> out;
        out.reserve(nodes_.size() + sub.size());
        out.insert(out.end(), nodes_.begin(), nodes_.begin() + static_cast<std::ptrdiff_t>(i));
        out.insert(out.end(), sub.nodes_.begin(), sub.nodes_.end());
        out.insert(out.end(), nodes_.begin() + static_cast<std::ptrdiff_t>(subtree_end(i)), nodes_.end());
        return KernelExpr(std::move(out));
    }

    /// New tree `op(a, b)` for a binary op, or `op(a)` for a unary op.
    static KernelExpr combine(NodeKind op, const KernelExpr& a, const KernelExpr& b) {
        if (arity(op) != 2) throw std::invalid_argument("combine needs a binary operator");
        std::vector<Node> out;
        out.reserve(1 + a.size() + b.size());
        out.push_back(Node{op});
        out.insert(out.end(), a.nodes_.begin(), a.nodes_.end());
        out.insert(out.end(), b.nodes_.begin(), b.nodes_.end());
        return KernelExpr(std::move(out));
    }

    friend bool operator==(const KernelExpr&, const KernelExpr&) = default;

private:
    std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// hyperparameter slots

enum class SlotRole : std::uint8_t {
    Lengthscale,
    Shift,
    Constant,
    Noise,
    Amplitude,  // used by the fixed baseline kernels
    Alpha,
    Gamma,
    Period,
};

constexpr std::string_view slot_role_name(SlotRole r) {
    switch (r) {
        case SlotRole::Lengthscale: return "lengthscale";
        case SlotRole::Shift: return "shift";
        case SlotRole::Constant: return "constant";
        case SlotRole::Noise: return "noise";
        case SlotRole::Amplitude: return "amplitude";
        case SlotRole::Alpha: return "alpha";
        case SlotRole::Gamma: return "gamma";
        case SlotRole::Period: return "period";
    }
    return "?";
}

inline constexpr double kDefaultSlotLo = 1e-3;
inline constexpr double kDefaultSlotHi = 1e3;

struct SlotDescriptor {
    SlotRole role = SlotRole::Constant;
    double lo = kDefaultSlotLo;
    double hi = kDefaultSlotHi;
    /// For expression-tree slots: the owning node. Unset for baseline kernels.
    std::optional<NodeKind> node_kind;
    std::size_t node_index = 0;
};

/// Slots in preorder node order; within a DotProductS node the lengthscale
/// precedes the shift. The returned order defines the layout of every theta
/// vector paired with this expression.
inline std::vector<SlotDescriptor> hyperparam_slots(const KernelExpr& expr) {
    std::vector<SlotDescriptor> slots;
    for (std::size_t i = 0; i < expr.size(); ++i) {
        NodeKind k = expr.kind_at(i);
        switch (k) {
            case NodeKind::DistanceR:
                slots.push_back({SlotRole::Lengthscale, kDefaultSlotLo, kDefaultSlotHi, k, i});
                break;
            case NodeKind::DotProductS:
                slots.push_back({SlotRole::Lengthscale, kDefaultSlotLo, kDefaultSlotHi, k, i});
                slots.push_back({SlotRole::Shift, kDefaultSlotLo, kDefaultSlotHi, k, i});
                break;
            case NodeKind::HyperConst:
                slots.push_back({SlotRole::Constant, kDefaultSlotLo, kDefaultSlotHi, k, i});
                break;
            case NodeKind::WhiteNoise:
                slots.push_back({SlotRole::Noise, kDefaultSlotLo, kDefaultSlotHi, k, i});
                break;
            default:
                break;
        }
    }
    return slots;
}

// ---------------------------------------------------------------------------
// random generation

struct GrammarConfig {
    int max_depth = 8;  ///< root has depth 0; nodes at max_depth must be terminals
    std::array<double, kTerminalKinds.size()> terminal_weights = {1, 1, 1, 1, 1};
    std::array<double, kOperatorKinds.size()> operator_weights = {1, 1, 1, 1, 1, 1};

    void validate() const {
        if (max_depth < 1) throw std::invalid_argument("max_depth must be >= 1");
        check_weights();
    }

    void check_weights() const {
        double t = 0, o = 0;
        for (double w : terminal_weights) {
            if (w < 0) throw std::invalid_argument("negative terminal weight");
            t += w;
        }
        for (double w : operator_weights) {
            if (w < 0) throw std::invalid_argument("negative operator weight");
            o += w;
        }
        if (t <= 0) throw std::invalid_argument("at least one terminal weight must be positive");
        (void)o;  // all-zero operator weights are allowed: generation emits terminals only
    }
};

namespace detail {

template <std::size_t N>
std::size_t pick_weighted(const std::array<double, N>& w, double total, RandomSource& rng) {
    double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    double acc = 0;
    for (std::size_t i = 0; i < N; ++i) {
        acc += w[i];
        if (u < acc) return i;
    }
    // numerical edge: fall back to the last positive weight
    for (std::size_t i = N; i-- > 0;)
        if (w[i] > 0) return i;
    return 0;
}

inline void grow_node(std::vector<Node>& out, int depth, const GrammarConfig& cfg,
                      RandomSource& rng) {
    double tw = 0, ow = 0;
    for (double w : cfg.terminal_weights) tw += w;
    for (double w : cfg.operator_weights) ow += w;

    NodeKind kind;
    bool must_terminal = depth >= cfg.max_depth || ow <= 0;
    if (must_terminal) {
        kind = kTerminalKinds[pick_weighted(cfg.terminal_weights, tw, rng)];
    } else {
        double u = std::uniform_real_distribution<double>(0.0, tw + ow)(rng);
        if (u < tw) {
            kind = kTerminalKinds[pick_weighted(cfg.terminal_weights, tw, rng)];
        } else {
            kind = kOperatorKinds[pick_weighted(cfg.operator_weights, ow, rng)];
        }
    }
    out.push_back(Node{kind});
    for (int c = 0; c < arity(kind); ++c) grow_node(out, depth + 1, cfg, rng);
}

}  // namespace detail

/// Grow-style generation: node kinds are drawn from the combined weight
/// table until the depth budget is exhausted, at which point only terminals
/// are eligible. max_depth = 0 therefore yields a single terminal node.
inline KernelExpr gen_random_tree(const GrammarConfig& cfg, RandomSource& rng) {
    if (cfg.max_depth < 0) throw std::invalid_argument("max_depth must be >= 0");
    cfg.check_weights();
    std::vector<Node> nodes;
    detail::grow_node(nodes, 0, cfg, rng);
    return KernelExpr(std::move(nodes));
}

// ---------------------------------------------------------------------------
// serialization

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, std::size_t position)
        : std::runtime_error(message + " (at position " + std::to_string(position) + ")"),
          position_(position) {}

    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

/// Functional text form, e.g. "mul(hp, expneg(square(r)))".
inline std::string serialize(const KernelExpr& expr) {
    std::string out;
    out.reserve(expr.size() * 6);
    // iterative preorder printer driven by pending-children counts
    std::vector<int> pending;
    for (std::size_t i = 0; i < expr.size(); ++i) {
        NodeKind k = expr.kind_at(i);
        out += node_name(k);
        if (arity(k) > 0) {
            out += '(';
            pending.push_back(arity(k));
        } else {
            while (!pending.empty() && --pending.back() == 0) {
                out += ')';
                pending.pop_back();
            }
            if (!pending.empty()) out += ", ";
        }
    }
    return out;
}

namespace detail {

struct Parser {
    std::string_view text;
    std::size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t' ||
                                     text[pos] == '\n' || text[pos] == '\r'))
            ++pos;
    }

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos); }

    std::string_view read_name() {
        std::size_t start = pos;
        while (pos < text.size() &&
               ((text[pos] >= 'a' && text[pos] <= 'z') || (text[pos] >= '0' && text[pos] <= '9')))
            ++pos;
        if (pos == start) fail("expected a node name");
        return text.substr(start, pos - start);
    }

    void expect(char c) {
        if (pos >= text.size() || text[pos] != c)
            fail(std::string("expected '") + c + "'");
        ++pos;
    }

    void parse_expr(std::vector<Node>& out) {
        skip_ws();
        std::size_t name_pos = pos;
        std::string_view name = read_name();
        std::optional<NodeKind> kind;
        for (NodeKind k : kTerminalKinds)
            if (node_name(k) == name) kind = k;
        for (NodeKind k : kOperatorKinds)
            if (node_name(k) == name) kind = k;
        if (!kind) throw ParseError("unknown node name '" + std::string(name) + "'", name_pos);
        out.push_back(Node{*kind});
        int a = arity(*kind);
        if (a > 0) {
            skip_ws();
            expect('(');
            for (int c = 0; c < a; ++c) {
                if (c > 0) {
                    skip_ws();
                    expect(',');
                }
                parse_expr(out);
            }
            skip_ws();
            expect(')');
        }
    }
};

}  // namespace detail

/// Inverse of serialize(). Throws ParseError (with a character position)
/// on malformed input; trailing non-whitespace is an error.
inline KernelExpr parse_expr(std::string_view text) {
    detail::Parser p{text};
    std::vector<Node> nodes;
    p.parse_expr(nodes);
    p.skip_ws();
    if (p.pos != text.size()) p.fail("trailing characters after expression");
    return KernelExpr(std::move(nodes));
}

}  // namespace moecov
