#pragma once

// Independent reference evaluations used only by tests. These deliberately
// avoid the library's scoring paths: counting is done by per-configuration
// row scans and the score follows the product formula term by term with
// std::lgamma.

#include <cmath>
#include <vector>

#include "bdeu/dag.hpp"
#include "bdeu/dataset.hpp"

namespace oracle {

// Direct evaluation of one family's marginal-likelihood factor:
//   prod_j  G(a/q) / G(a/q + N_j.)  *  prod_k  G(a/(q r) + N_jk) / G(a/(q r))
// in log space, enumerating parent configurations with an odometer and
// counting matching rows by a full scan per configuration.
inline double direct_local_log(const bdeu::CategoricalDataset& data, int child,
                               const std::vector<int>& parents, double alpha) {
    const int r = data.arity(child);
    double q = 1.0;
    for (int p : parents)
        q *= data.arity(p);
    const double a_config = alpha / q;
    const double a_cell = alpha / (q * r);

    std::vector<int> config(parents.size(), 0);
    double total = 0.0;
    while (true) {
        std::vector<long long> hist(static_cast<std::size_t>(r), 0);
        long long in_config = 0;
        for (long long t = 0; t < data.row_count(); ++t) {
            bool match = true;
            for (std::size_t idx = 0; idx < parents.size(); ++idx) {
                if (data.code(t, parents[idx]) != config[idx]) {
                    match = false;
                    break;
                }
            }
            if (match) {
                ++in_config;
                ++hist[static_cast<std::size_t>(data.code(t, child))];
            }
        }
        total += std::lgamma(a_config) - std::lgamma(a_config + static_cast<double>(in_config));
        for (int k = 0; k < r; ++k)
            total += std::lgamma(a_cell + static_cast<double>(hist[static_cast<std::size_t>(k)])) -
                     std::lgamma(a_cell);

        std::size_t idx = 0;
        for (; idx < parents.size(); ++idx) {
            if (++config[idx] < data.arity(parents[idx]))
                break;
            config[idx] = 0;
        }
        if (idx == parents.size())
            break;
    }
    return total;
}

inline double direct_total_log(const bdeu::CategoricalDataset& data, const bdeu::Dag& dag,
                               double alpha) {
    double total = 0.0;
    for (int i = 0; i < dag.node_count(); ++i)
        total += direct_local_log(data, i, dag.parents(i), alpha);
    return total;
}

} // namespace oracle
