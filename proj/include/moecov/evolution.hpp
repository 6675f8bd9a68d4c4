#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "moecov/metrics.hpp"
#include "moecov/nsga2.hpp"

namespace moecov {

struct MOECovConfig {
    int population_size = 38;   ///< offspring produced per generation
    int generations = 65;       ///< evaluated offspring batches in total
    int num_parents = 9;        ///< survivors kept by environmental selection
    double p_mutation = 0.4;
    double p_crossover = 0.6;
    double restart_threshold = 1e-5;   ///< minimum relative improvement to keep going
    int improvement_objectives = 2;    ///< leading objectives watched for improvement
    GrammarConfig grammar;
    FitnessOptions fitness;
    bool select_by_bic = false;  ///< final winner by BIC instead of mean LML
    std::uint64_t seed = 0;

    void validate() const {
        if (population_size < 1) throw std::invalid_argument("population_size must be >= 1");
        if (generations < 1) throw std::invalid_argument("generations must be >= 1");
        if (num_parents < 1 || num_parents > population_size)
            throw std::invalid_argument("need 1 <= num_parents <= population_size");
        if (p_mutation < 0 || p_crossover < 0 ||
            std::abs(p_mutation + p_crossover - 1.0) > 1e-9)
            throw std::invalid_argument("p_mutation + p_crossover must equal 1");
        if (!(restart_threshold > 0)) throw std::invalid_argument("restart_threshold must be > 0");
        if (improvement_objectives < 1 || improvement_objectives > 3)
            throw std::invalid_argument("improvement_objectives must be 1..3");
        grammar.validate();
    }
};

// ---------------------------------------------------------------------------
// variation operators

inline constexpr int kVariationAttempts = 10;

namespace detail {

inline std::size_t pick_node(const KernelExpr& e, RandomSource& rng) {
    return std::uniform_int_distribution<std::size_t>(0, e.size() - 1)(rng);
}

inline NodeKind pick_terminal(const GrammarConfig& cfg, RandomSource& rng) {
    double tw = 0;
    for (double w : cfg.terminal_weights) tw += w;
    return kTerminalKinds[pick_weighted(cfg.terminal_weights, tw, rng)];
}

inline NodeKind pick_operator(const GrammarConfig& cfg, RandomSource& rng) {
    double ow = 0;
    for (double w : cfg.operator_weights) ow += w;
    if (ow <= 0) {
        // degenerate config: fall back to a uniform operator choice
        return kOperatorKinds[rng() % kOperatorKinds.size()];
    }
    return kOperatorKinds[pick_weighted(cfg.operator_weights, ow, rng)];
}

/// Wraps a random subtree in a fresh operator node; for a binary operator
/// the other argument is a random terminal and the side is random.
inline std::optional<KernelExpr> mutate_insert(const KernelExpr& k, const GrammarConfig& cfg,
                                               RandomSource& rng) {
    for (int attempt = 0; attempt < kVariationAttempts; ++attempt) {
        std::size_t pos = pick_node(k, rng);
        NodeKind op = pick_operator(cfg, rng);
        KernelExpr sub = k.subtree(pos);
        KernelExpr wrapped = [&] {
            if (arity(op) == 1) {
                std::vector<Node> nodes{Node{op}};
                auto s = sub.nodes();
                nodes.insert(nodes.end(), s.begin(), s.end());
                return KernelExpr(std::move(nodes));
            }
            KernelExpr filler(std::vector<Node>{Node{pick_terminal(cfg, rng)}});
            bool sub_left = std::uniform_int_distribution<int>(0, 1)(rng) == 0;
            return sub_left ? KernelExpr::combine(op, sub, filler)
                            : KernelExpr::combine(op, filler, sub);
        }();
        KernelExpr out = k.replaced(pos, wrapped);
        if (out.depth() <= cfg.max_depth) return out;
    }
    return std::nullopt;
}

/// Replaces an operator node's subtree by one of its children.
inline std::optional<KernelExpr> mutate_shrink(const KernelExpr& k, RandomSource& rng) {
    std::vector<std::size_t> ops;
    for (std::size_t i = 0; i < k.size(); ++i)
        if (is_operator(k.kind_at(i))) ops.push_back(i);
    if (ops.empty()) return std::nullopt;
    std::size_t pos = ops[std::uniform_int_distribution<std::size_t>(0, ops.size() - 1)(rng)];
    int a = arity(k.kind_at(pos));
    int child = std::uniform_int_distribution<int>(0, a - 1)(rng);
    std::size_t child_pos = pos + 1;
    for (int c = 0; c < child; ++c) child_pos = k.subtree_end(child_pos);
    return k.replaced(pos, k.subtree(child_pos));
}

/// Replaces a random subtree by a freshly grown one that fits the
/// remaining depth budget at that position.
inline KernelExpr mutate_uniform(const KernelExpr& k, const GrammarConfig& cfg,
                                 RandomSource& rng) {
    std::size_t pos = pick_node(k, rng);
    GrammarConfig local = cfg;
    local.max_depth = cfg.max_depth - k.node_depths()[pos];
    return k.replaced(pos, gen_random_tree(local, rng));
}

/// Swaps one operator for another of the same arity, in place.
inline std::optional<KernelExpr> mutate_node_replacement(const KernelExpr& k, RandomSource& rng) {
    std::vector<std::size_t> ops;
    for (std::size_t i = 0; i < k.size(); ++i)
        if (is_operator(k.kind_at(i))) ops.push_back(i);
    if (ops.empty()) return std::nullopt;
    std::size_t pos = ops[std::uniform_int_distribution<std::size_t>(0, ops.size() - 1)(rng)];
    NodeKind cur = k.kind_at(pos);
    std::vector<NodeKind> alts;
    for (NodeKind cand : kOperatorKinds)
        if (cand != cur && arity(cand) == arity(cur)) alts.push_back(cand);
    if (alts.empty()) return std::nullopt;
    NodeKind pick = alts[std::uniform_int_distribution<std::size_t>(0, alts.size() - 1)(rng)];
    std::vector<Node> nodes = k.nodes();
    nodes[pos].kind = pick;
    return KernelExpr(std::move(nodes));
}

}  // namespace detail

/// Joins a random subtree of each parent under a random Add or Mul. Draws
/// are retried while the child exceeds the depth cap; after the attempt
/// limit the first parent is returned unchanged.
inline KernelExpr crossover(const KernelExpr& k1, const KernelExpr& k2, int max_depth,
                            RandomSource& rng) {
    for (int attempt = 0; attempt < kVariationAttempts; ++attempt) {
        std::size_t i1 = detail::pick_node(k1, rng);
        std::size_t i2 = detail::pick_node(k2, rng);
        NodeKind op = std::uniform_int_distribution<int>(0, 1)(rng) == 0 ? NodeKind::Add
                                                                         : NodeKind::Mul;
        KernelExpr child = KernelExpr::combine(op, k1.subtree(i1), k2.subtree(i2));
        if (child.depth() <= max_depth) return child;
    }
    return k1;
}

/// Applies one mutation drawn uniformly from the operators applicable to
/// this tree: insert (always), uniform subtree replacement (always),
/// shrink and node replacement (only when an operator node exists). Falls
/// back to an unchanged copy if the drawn operator cannot produce a tree
/// within the depth cap.
inline KernelExpr mutate(const KernelExpr& k, const GrammarConfig& cfg, RandomSource& rng) {
    enum Op { Insert, Shrink, Uniform, NodeReplacement };
    std::vector<Op> applicable{Insert, Uniform};
    bool has_op = false;
    for (std::size_t i = 0; i < k.size(); ++i)
        if (is_operator(k.kind_at(i))) { has_op = true; break; }
    if (has_op) {
        applicable.push_back(Shrink);
        applicable.push_back(NodeReplacement);
    }
    Op op = applicable[std::uniform_int_distribution<std::size_t>(0, applicable.size() - 1)(rng)];
    std::optional<KernelExpr> out;
    switch (op) {
        case Insert: out = detail::mutate_insert(k, cfg, rng); break;
        case Shrink: out = detail::mutate_shrink(k, rng); break;
        case Uniform: out = detail::mutate_uniform(k, cfg, rng); break;
        case NodeReplacement: out = detail::mutate_node_replacement(k, rng); break;
    }
    return out ? *out : k;
}

/// Produces `count` offspring from the selected parents: each child comes
/// from mutation with probability p_mutation, otherwise from crossover of
/// two uniformly drawn parents.
inline std::vector<KernelExpr> variate(const std::vector<EvaluatedIndividual>& parents,
                                       int count, const MOECovConfig& cfg, RandomSource& rng) {
    if (parents.empty()) throw std::invalid_argument("variate: no parents");
    std::uniform_int_distribution<std::size_t> pick(0, parents.size() - 1);
    std::vector<KernelExpr> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        if (u < cfg.p_mutation) {
            out.push_back(mutate(parents[pick(rng)].expr, cfg.grammar, rng));
        } else {
            const KernelExpr& a = parents[pick(rng)].expr;
            const KernelExpr& b = parents[pick(rng)].expr;
            out.push_back(crossover(a, b, cfg.grammar.max_depth, rng));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// the generational loop

/// Componentwise relative improvement (prev - cur) / |cur|, with the edge
/// cases pinned: equal values (including both infinite) improve by 0; a
/// current value of exactly 0 improves by +inf if prev was above it, else
/// 0; escaping an infinite prev is +inf; landing on an infinite cur is
/// -inf.
inline std::vector<double> relative_improvement(const std::vector<double>& prev,
                                                const std::vector<double>& cur) {
    if (prev.size() != cur.size())
        throw std::invalid_argument("relative_improvement: size mismatch");
    std::vector<double> out(prev.size());
    for (std::size_t i = 0; i < prev.size(); ++i) {
        double p = prev[i], c = cur[i];
        if (p == c) out[i] = 0.0;
        else if (c == 0.0) out[i] = (p > 0.0) ? kInfinity : 0.0;
        else if (!std::isfinite(c)) out[i] = -kInfinity;
        else if (!std::isfinite(p)) out[i] = kInfinity;
        else out[i] = (p - c) / std::abs(c);
    }
    return out;
}

struct MOECovResult {
    std::optional<EvaluatedIndividual> best;       ///< empty when every kernel faulted
    std::vector<EvaluatedIndividual> archive;      ///< every individual ever evaluated
    int restarts = 0;                              ///< stagnation restarts taken
};

/// Winner among all archived individuals: highest mean training LML, or
/// lowest BIC when by_bic is set; faulted individuals are skipped and ties
/// go to the earliest. Returns nullopt when nothing viable exists.
inline std::optional<EvaluatedIndividual> select_best(
    const std::vector<EvaluatedIndividual>& archive, bool by_bic = false) {
    const EvaluatedIndividual* best = nullptr;
    for (const auto& ind : archive) {
        if (ind.fitness.faulted()) continue;
        if (!std::isfinite(ind.mean_lml)) continue;
        if (!best) {
            best = &ind;
            continue;
        }
        if (by_bic ? (ind.bic_value < best->bic_value) : (ind.mean_lml > best->mean_lml))
            best = &ind;
    }
    if (!best) return std::nullopt;
    return *best;
}

namespace detail {

inline std::vector<ObjectiveVector> objective_table(const std::vector<EvaluatedIndividual>& pop) {
    std::vector<ObjectiveVector> out;
    out.reserve(pop.size());
    for (const auto& ind : pop) {
        auto o = ind.fitness.objectives();
        out.emplace_back(o.begin(), o.end());
    }
    return out;
}

}  // namespace detail

/// The full evolutionary run. Each generation evaluates the offspring
/// batch, appends it to the archive, and checks the relative improvement
/// of the population's best point over the tracked best-so-far (first
/// `improvement_objectives` components). While any component improves
/// beyond the restart threshold, survivors are selected and varied; the
/// tracked values are smoothed toward the current best by averaging
/// (taking an infinite tracked component straight to the current value, so
/// a restart cannot poison later comparisons). On stagnation the
/// population is reseeded randomly and tracking resets to infinity. After
/// the last generation the winner is picked from the archive by mean LML
/// (or BIC).
inline MOECovResult moecov_run(const MOECovConfig& cfg, const Dataset& data, const Clock& clock) {
    cfg.validate();
    RandomSource rng(cfg.seed);
    const std::size_t O = static_cast<std::size_t>(cfg.improvement_objectives);

    MOECovResult result;
    result.archive.reserve(static_cast<std::size_t>(cfg.generations) *
                           static_cast<std::size_t>(cfg.population_size));

    auto evaluate_batch = [&](const std::vector<KernelExpr>& exprs, int generation) {
        std::vector<EvaluatedIndividual> evaluated;
        evaluated.reserve(exprs.size());
        for (const KernelExpr& e : exprs) {
            EvaluatedIndividual ind = evaluate_fitness(e, data, cfg.fitness, rng, clock);
            ind.generation = generation;
            evaluated.push_back(std::move(ind));
            result.archive.push_back(evaluated.back());
        }
        return evaluated;
    };

    auto random_batch = [&] {
        std::vector<KernelExpr> exprs;
        exprs.reserve(static_cast<std::size_t>(cfg.population_size));
        for (int i = 0; i < cfg.population_size; ++i)
            exprs.push_back(gen_random_tree(cfg.grammar, rng));
        return exprs;
    };

    std::vector<KernelExpr> offspring = random_batch();
    std::vector<EvaluatedIndividual> survivors;
    std::vector<double> tracked(O, kInfinity);

    for (int gen = 1; gen < cfg.generations; ++gen) {
        std::vector<EvaluatedIndividual> evaluated = evaluate_batch(offspring, gen - 1);

        std::vector<EvaluatedIndividual> population = survivors;
        population.insert(population.end(), evaluated.begin(), evaluated.end());

        auto objectives = detail::objective_table(population);
        std::size_t best_idx = nsga2_select(objectives, 1).front();
        std::vector<double> current(objectives[best_idx].begin(),
                                    objectives[best_idx].begin() + static_cast<std::ptrdiff_t>(O));

        std::vector<double> improvement = relative_improvement(tracked, current);
        double most = -kInfinity;
        for (double v : improvement) most = std::max(most, v);

        if (most > cfg.restart_threshold) {
            std::vector<std::size_t> keep =
                nsga2_select(objectives, static_cast<std::size_t>(cfg.num_parents));
            survivors.clear();
            for (std::size_t i : keep) survivors.push_back(population[i]);
            offspring = variate(survivors, cfg.population_size, cfg, rng);
            for (std::size_t i = 0; i < O; ++i)
                tracked[i] = std::isfinite(tracked[i]) ? 0.5 * (tracked[i] + current[i])
                                                       : current[i];
        } else {
            survivors.clear();
            offspring = random_batch();
            tracked.assign(O, kInfinity);
            ++result.restarts;
        }
    }

    evaluate_batch(offspring, cfg.generations - 1);
    result.best = select_best(result.archive, cfg.select_by_bic);
    return result;
}

}  // namespace moecov
