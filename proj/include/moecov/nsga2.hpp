#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "moecov/common.hpp"

namespace moecov {

using ObjectiveVector = std::vector<double>;

/// Pareto dominance for minimization: a dominates b when a is nowhere
/// worse and somewhere strictly better.
inline bool dominates(const ObjectiveVector& a, const ObjectiveVector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dominates: objective count mismatch");
    bool strictly = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > b[i]) return false;
        if (a[i] < b[i]) strictly = true;
    }
    return strictly;
}

/// Fronts of mutually non-dominated points, best front first. Every index
/// appears in exactly one front; within a front, indices stay ascending.
inline std::vector<std::vector<std::size_t>> fast_nondominated_sort(
    const std::vector<ObjectiveVector>& points) {
    const std::size_t n = points.size();
    std::vector<std::vector<std::size_t>> dominated_by(n);
    std::vector<int> domination_count(n, 0);
    std::vector<std::vector<std::size_t>> fronts;

    std::vector<std::size_t> current;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            if (dominates(points[i], points[j]))
                dominated_by[i].push_back(j);
            else if (dominates(points[j], points[i]))
                ++domination_count[i];
        }
        if (domination_count[i] == 0) current.push_back(i);
    }
    while (!current.empty()) {
        fronts.push_back(current);
        std::vector<std::size_t> next;
        for (std::size_t i : fronts.back()) {
            for (std::size_t j : dominated_by[i]) {
                if (--domination_count[j] == 0) next.push_back(j);
            }
        }
        std::sort(next.begin(), next.end());
        current = std::move(next);
    }
    return fronts;
}

/// Crowding distance of each member of one front. Boundary points of every
/// objective get +inf; interior points accumulate normalized gaps between
/// their neighbours. Objectives with zero or non-finite range contribute
/// nothing (identical points end up with distance 0 unless they sit on a
/// boundary).
inline std::vector<double> crowding_distance(const std::vector<ObjectiveVector>& front) {
    const std::size_t n = front.size();
    std::vector<double> dist(n, 0.0);
    if (n == 0) return dist;
    if (n <= 2) return std::vector<double>(n, kInfinity);
    const std::size_t m = front[0].size();

    std::vector<std::size_t> order(n);
    for (std::size_t obj = 0; obj < m; ++obj) {
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return front[a][obj] < front[b][obj];
        });
        dist[order.front()] = kInfinity;
        dist[order.back()] = kInfinity;
        double range = front[order.back()][obj] - front[order.front()][obj];
        if (!std::isfinite(range) || range <= 0) continue;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            double gap = front[order[i + 1]][obj] - front[order[i - 1]][obj];
            if (dist[order[i]] != kInfinity) dist[order[i]] += gap / range;
        }
    }
    return dist;
}

/// Environmental selection: whole fronts are taken while they fit; the
/// front that straddles the cut is ranked by descending crowding distance
/// (ties broken by lower index, making the result deterministic). Returns
/// `count` selected indices into `points`.
inline std::vector<std::size_t> nsga2_select(const std::vector<ObjectiveVector>& points,
                                             std::size_t count) {
    if (count > points.size())
        throw std::invalid_argument("nsga2_select: count exceeds population size");
    std::vector<std::size_t> selected;
    selected.reserve(count);
    for (const auto& front : fast_nondominated_sort(points)) {
        if (selected.size() == count) break;
        if (selected.size() + front.size() <= count) {
            selected.insert(selected.end(), front.begin(), front.end());
            continue;
        }
        std::vector<ObjectiveVector> members;
        members.reserve(front.size());
        for (std::size_t i : front) members.push_back(points[i]);
        std::vector<double> crowd = crowding_distance(members);
        std::vector<std::size_t> order(front.size());
        for (std::size_t i = 0; i < front.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return crowd[a] > crowd[b]; });
        for (std::size_t i = 0; selected.size() < count; ++i) selected.push_back(front[order[i]]);
    }
    return selected;
}

}  // namespace moecov
