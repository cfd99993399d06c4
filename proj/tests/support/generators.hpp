#pragma once

// Deterministic random instances for property tests. Everything is driven by
// a caller-owned mt19937_64 so failures replay exactly.

#include <optional>
#include <random>
#include <vector>

#include "bdeu/dag.hpp"
#include "bdeu/dataset.hpp"

namespace gen {

inline bdeu::CategoricalDataset random_dataset(std::mt19937_64& rng, int n, int max_rows,
                                               int max_arity) {
    std::uniform_int_distribution<int> rows_dist(1, max_rows);
    std::uniform_int_distribution<int> arity_dist(2, max_arity);
    const int n_rows = rows_dist(rng);
    std::vector<int> arities(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        arities[static_cast<std::size_t>(i)] = arity_dist(rng);
    std::vector<std::vector<int>> rows(static_cast<std::size_t>(n_rows),
                                       std::vector<int>(static_cast<std::size_t>(n)));
    for (auto& row : rows)
        for (int i = 0; i < n; ++i)
            row[static_cast<std::size_t>(i)] =
                std::uniform_int_distribution<int>(0, arities[static_cast<std::size_t>(i)] - 1)(rng);
    return bdeu::CategoricalDataset(std::move(arities), rows);
}

// Random DAG via a random variable order; each variable picks a random
// subset of its predecessors as parents.
inline bdeu::Dag random_dag(std::mt19937_64& rng, int n,
                            std::optional<int> max_parents = std::nullopt) {
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        order[static_cast<std::size_t>(i)] = i;
    std::shuffle(order.begin(), order.end(), rng);
    bdeu::Dag dag(n);
    std::vector<int> predecessors;
    for (int v : order) {
        std::vector<int> parents;
        for (int p : predecessors) {
            if (max_parents && static_cast<int>(parents.size()) >= *max_parents)
                break;
            if (std::uniform_int_distribution<int>(0, 1)(rng))
                parents.push_back(p);
        }
        dag.set_parents(v, parents);
        predecessors.push_back(v);
    }
    return dag;
}

} // namespace gen
