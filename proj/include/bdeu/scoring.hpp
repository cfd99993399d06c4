#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "bdeu/dag.hpp"
#include "bdeu/dataset.hpp"
#include "bdeu/errors.hpp"

namespace bdeu {

// Equivalent sample size. Validated once at construction so scoring code can
// assume a positive finite value.
struct Alpha {
    explicit Alpha(double v) : value(v) {
        if (!(std::isfinite(v) && v > 0.0))
            throw ArgumentError("equivalent sample size must be positive and finite");
    }
    double value;
};

namespace detail {

inline double raw_log_gamma(double x) {
#if defined(__unix__) || defined(__APPLE__)
    // lgamma_r avoids the signgam global, which matters for threaded scoring.
    int sign = 0;
    return ::lgamma_r(x, &sign);
#else
    return std::lgamma(x);
#endif
}

} // namespace detail

// log Gamma for strictly positive arguments. Hyperparameters as small as
// alpha/(q*r) with alpha = 1e-20 occur in sweeps, so tiny arguments go
// through the recurrence Gamma(x) = Gamma(x+1)/x.
inline double log_gamma(double x) {
    if (x <= 1e-8)
        return detail::raw_log_gamma(x + 1.0) - std::log(x);
    return detail::raw_log_gamma(x);
}

// log Gamma(x + c) - log Gamma(x) for integer c >= 0. For large x the two
// lgamma values dwarf their difference, so the telescoped product
// sum_t log(x + t) is evaluated instead (Neumaier-compensated); this keeps
// per-configuration score terms accurate to ~1e-12 absolute even when
// alpha/(q r) reaches 1e6.
inline double log_gamma_ratio(double x, std::int64_t c) {
    if (c == 0)
        return 0.0;
    if (x >= 1024.0 && c <= (std::int64_t(1) << 21)) {
        double sum = 0.0;
        double comp = 0.0;
        for (std::int64_t t = 0; t < c; ++t) {
            const double term = std::log(x + static_cast<double>(t));
            const double s = sum + term;
            if (std::abs(sum) >= std::abs(term))
                comp += (sum - s) + term;
            else
                comp += (term - s) + sum;
            sum = s;
        }
        return sum + comp;
    }
    return log_gamma(x + static_cast<double>(c)) - log_gamma(x);
}

// log of the multinomial Beta function B(a_1..a_K) = prod Gamma(a_i) / Gamma(sum a_i).
inline double log_multinomial_beta(std::span<const double> args) {
    if (args.empty())
        throw ArgumentError("multinomial Beta needs at least one argument");
    double log_sum = 0.0;
    double arg_sum = 0.0;
    for (double a : args) {
        if (!(std::isfinite(a) && a > 0.0))
            throw DomainError("multinomial Beta arguments must be positive and finite");
        log_sum += log_gamma(a);
        arg_sum += a;
    }
    return log_sum - log_gamma(arg_sum);
}

// ---------------------------------------------------------------------------
// Sufficient statistics
// ---------------------------------------------------------------------------

// Counts N[j][k] for one child under one parent set. The configuration index
// j is the mixed-radix number of the parent codes in ascending parent-index
// order, least significant digit first.
struct SufficientStats {
    int child = 0;
    std::vector<int> parents; // ascending
    std::int64_t q = 1;       // number of parent configurations
    int r = 1;                // child arity
    std::vector<std::int64_t> counts; // q*r entries, [j*r + k]

    std::int64_t count(std::int64_t j, int k) const {
        return counts[static_cast<std::size_t>(j * r + k)];
    }
    std::int64_t total() const {
        std::int64_t s = 0;
        for (std::int64_t c : counts)
            s += c;
        return s;
    }
};

namespace detail {

constexpr std::int64_t kMaxDenseCells = std::int64_t(1) << 28;

inline std::vector<int> sorted_parent_set(const CategoricalDataset& data, int child,
                                          std::span<const int> parents) {
    const int n = data.variable_count();
    if (child < 0 || child >= n)
        throw ArgumentError("child index out of range");
    std::vector<int> sorted(parents.begin(), parents.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i] < 0 || sorted[i] >= n)
            throw ArgumentError("parent index out of range");
        if (sorted[i] == child)
            throw ArgumentError("child cannot be its own parent");
        if (i > 0 && sorted[i] == sorted[i - 1])
            throw ArgumentError("duplicate parent index");
    }
    return sorted;
}

} // namespace detail

inline SufficientStats count_sufficient_stats(const CategoricalDataset& data, int child,
                                              std::span<const int> parents) {
    SufficientStats stats;
    stats.child = child;
    stats.parents = detail::sorted_parent_set(data, child, parents);
    stats.r = data.arity(child);
    for (int p : stats.parents) {
        stats.q *= data.arity(p);
        if (stats.q * stats.r > detail::kMaxDenseCells)
            throw CapacityError("parent configuration space too large for dense counting");
    }
    stats.counts.assign(static_cast<std::size_t>(stats.q * stats.r), 0);
    const std::int64_t n_rows = data.row_count();
    for (std::int64_t t = 0; t < n_rows; ++t) {
        std::int64_t j = 0;
        std::int64_t radix = 1;
        for (int p : stats.parents) {
            j += radix * data.code(t, p);
            radix *= data.arity(p);
        }
        ++stats.counts[static_cast<std::size_t>(j * stats.r + data.code(t, child))];
    }
    return stats;
}

// ---------------------------------------------------------------------------
// BDeu local and total scores
// ---------------------------------------------------------------------------

namespace detail {

// One configuration's contribution, log B(N_j + a, ..) - log B(a, ..) with
// per-cell pseudo-count a, written with Gamma ratios so that no large lgamma
// values cancel. Every scoring path in the library funnels through this
// function, which keeps local scores bit-identical across routes. All-zero
// counts give exactly 0.
inline double log_bdeu_config_term(std::span<const std::int64_t> counts, double cell) {
    std::int64_t total = 0;
    double term = 0.0;
    for (std::int64_t c : counts) {
        if (c < 0)
            throw ArgumentError("negative count in sufficient statistics");
        term += log_gamma_ratio(cell, c);
        total += c;
    }
    const double config_pseudo = static_cast<double>(counts.size()) * cell;
    return term - log_gamma_ratio(config_pseudo, total);
}

} // namespace detail

// Local log BDeu of (child | parents): sum over parent configurations of
// log B(N_j1 + a, .., N_jr + a) - log B(a, .., a) with a = alpha/(q*r).
// Configurations with no data contribute exactly zero.
inline double local_log_bdeu(const SufficientStats& stats, Alpha alpha) {
    if (stats.q < 1 || stats.r < 1 ||
        static_cast<std::int64_t>(stats.counts.size()) != stats.q * stats.r)
        throw ArgumentError("malformed sufficient statistics");
    const double cell = alpha.value / (static_cast<double>(stats.q) * stats.r);
    double total = 0.0;
    for (std::int64_t j = 0; j < stats.q; ++j)
        total += detail::log_bdeu_config_term(
            std::span<const std::int64_t>(stats.counts).subspan(
                static_cast<std::size_t>(j * stats.r), static_cast<std::size_t>(stats.r)),
            cell);
    return total;
}

namespace detail {

// Same score as local_log_bdeu but counts only the parent configurations
// that occur in the data, so huge configuration spaces cost O(N). Visiting
// configurations in ascending j order keeps the result bit-identical to the
// dense evaluation.
inline double local_log_bdeu_sparse(const CategoricalDataset& data, int child,
                                    std::span<const int> parents_sorted, double alpha) {
    const int r = data.arity(child);
    double q = 1.0;
    std::vector<std::int64_t> radix(parents_sorted.size());
    std::int64_t rad = 1;
    for (std::size_t idx = 0; idx < parents_sorted.size(); ++idx) {
        radix[idx] = rad;
        const int a = data.arity(parents_sorted[idx]);
        q *= a;
        if (q > 9.0e18)
            throw CapacityError("parent configuration space exceeds 64-bit indexing");
        rad *= a;
    }
    std::unordered_map<std::int64_t, std::int64_t> slot; // config -> offset into pool
    std::vector<std::int64_t> pool;
    const std::int64_t n_rows = data.row_count();
    for (std::int64_t t = 0; t < n_rows; ++t) {
        std::int64_t j = 0;
        for (std::size_t idx = 0; idx < parents_sorted.size(); ++idx)
            j += radix[idx] * data.code(t, parents_sorted[idx]);
        auto [it, inserted] = slot.try_emplace(j, static_cast<std::int64_t>(pool.size()));
        if (inserted)
            pool.resize(pool.size() + static_cast<std::size_t>(r), 0);
        ++pool[static_cast<std::size_t>(it->second + data.code(t, child))];
    }
    std::vector<std::int64_t> configs;
    configs.reserve(slot.size());
    for (const auto& [j, off] : slot) {
        (void)off;
        configs.push_back(j);
    }
    std::sort(configs.begin(), configs.end());

    const double cell = alpha / (q * r);
    double total = 0.0;
    for (std::int64_t j : configs) {
        const std::int64_t off = slot.at(j);
        total += log_bdeu_config_term(
            std::span<const std::int64_t>(pool).subspan(static_cast<std::size_t>(off),
                                                        static_cast<std::size_t>(r)),
            cell);
    }
    return total;
}

inline void check_dag_against_data(const CategoricalDataset& data, const Dag& dag) {
    if (dag.node_count() != data.variable_count())
        throw ArgumentError("DAG node count does not match dataset variable count");
    if (!is_acyclic(dag))
        throw ArgumentError("graph is cyclic");
}

} // namespace detail

// Total log BDeu of a DAG: the sum of the local scores of every family.
inline double total_log_bdeu(const CategoricalDataset& data, const Dag& dag, Alpha alpha) {
    detail::check_dag_against_data(data, dag);
    double total = 0.0;
    for (int i = 0; i < dag.node_count(); ++i)
        total += detail::local_log_bdeu_sparse(data, i, dag.parents(i), alpha.value);
    return total;
}

// Prequential reading of the marginal likelihood: rows are predicted one at
// a time from the posterior given the rows already seen, and the log
// predictive probabilities are summed. Equals total_log_bdeu for every row
// order.
inline double prequential_log_ml(const CategoricalDataset& data, const Dag& dag, Alpha alpha,
                                 std::span<const std::int64_t> row_order) {
    detail::check_dag_against_data(data, dag);
    const std::int64_t n_rows = data.row_count();
    if (static_cast<std::int64_t>(row_order.size()) != n_rows)
        throw ArgumentError("row order length does not match row count");
    std::vector<char> seen(static_cast<std::size_t>(n_rows), 0);
    for (std::int64_t t : row_order) {
        if (t < 0 || t >= n_rows || seen[static_cast<std::size_t>(t)])
            throw ArgumentError("row order is not a permutation of the rows");
        seen[static_cast<std::size_t>(t)] = 1;
    }

    const int n = data.variable_count();
    std::vector<std::vector<std::int64_t>> radix(static_cast<std::size_t>(n));
    std::vector<double> cell_pseudo(static_cast<std::size_t>(n));
    std::vector<double> config_pseudo(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double q = 1.0;
        std::int64_t rad = 1;
        for (int p : dag.parents(i)) {
            radix[static_cast<std::size_t>(i)].push_back(rad);
            q *= data.arity(p);
            if (q * data.arity(i) > 9.0e18)
                throw CapacityError("parent configuration space exceeds 64-bit indexing");
            rad *= data.arity(p);
        }
        cell_pseudo[static_cast<std::size_t>(i)] = alpha.value / (q * data.arity(i));
        config_pseudo[static_cast<std::size_t>(i)] = alpha.value / q;
    }

    std::vector<std::unordered_map<std::int64_t, std::int64_t>> cell_counts(static_cast<std::size_t>(n));
    std::vector<std::unordered_map<std::int64_t, std::int64_t>> config_counts(static_cast<std::size_t>(n));
    double total = 0.0;
    for (std::int64_t t : row_order) {
        for (int i = 0; i < n; ++i) {
            const auto& ps = dag.parents(i);
            std::int64_t j = 0;
            for (std::size_t idx = 0; idx < ps.size(); ++idx)
                j += radix[static_cast<std::size_t>(i)][idx] * data.code(t, ps[idx]);
            const int k = data.code(t, i);
            const std::int64_t cell_key = j * data.arity(i) + k;
            const std::int64_t n_cell = cell_counts[static_cast<std::size_t>(i)][cell_key];
            const std::int64_t n_config = config_counts[static_cast<std::size_t>(i)][j];
            total += std::log((static_cast<double>(n_cell) + cell_pseudo[static_cast<std::size_t>(i)]) /
                              (static_cast<double>(n_config) + config_pseudo[static_cast<std::size_t>(i)]));
            ++cell_counts[static_cast<std::size_t>(i)][cell_key];
            ++config_counts[static_cast<std::size_t>(i)][j];
        }
    }
    return total;
}

// ---------------------------------------------------------------------------
// Arc-addition decomposition
// ---------------------------------------------------------------------------

// Signed change of one parent configuration's denominator contribution when
// a new parent with K values is added: log B(x..x) - K log B(y..y) with
// x = alpha/(q r) and y = alpha/(K q r). Data-independent and exactly zero
// for K = 1. Negative (a complexity penalty) while x stays below ~50 and
// monotone increasing in alpha; it crosses zero once alpha is large against
// q r, where the prior histograms themselves carry the information.
inline double arc_penalty_per_config(int r, std::int64_t q, int K, Alpha alpha) {
    if (r < 1 || q < 1 || K < 1)
        throw ArgumentError("arities and configuration counts must be >= 1");
    const double x = alpha.value / (static_cast<double>(q) * r);
    const double y = alpha.value / (static_cast<double>(K) * static_cast<double>(q) * r);
    std::vector<double> xs(static_cast<std::size_t>(r), x);
    std::vector<double> ys(static_cast<std::size_t>(r), y);
    return log_multinomial_beta(xs) - static_cast<double>(K) * log_multinomial_beta(ys);
}

// Numerator change for one pre-existing configuration whose child histogram
// `before` is split by the new parent into the K histograms `after`.
inline double arc_gain(std::span<const std::int64_t> before,
                       std::span<const std::vector<std::int64_t>> after,
                       std::int64_t q, Alpha alpha) {
    const int r = static_cast<int>(before.size());
    const int K = static_cast<int>(after.size());
    if (r < 1 || K < 1)
        throw ArgumentError("histograms must be non-empty");
    for (const auto& h : after)
        if (static_cast<int>(h.size()) != r)
            throw ArgumentError("split histogram arity mismatch");
    for (int k = 0; k < r; ++k) {
        std::int64_t s = 0;
        for (const auto& h : after)
            s += h[static_cast<std::size_t>(k)];
        if (s != before[static_cast<std::size_t>(k)])
            throw ArgumentError("split histograms do not sum to the original histogram");
    }
    const double x = alpha.value / (static_cast<double>(q) * r);
    const double y = alpha.value / (static_cast<double>(K) * static_cast<double>(q) * r);
    std::vector<double> args(static_cast<std::size_t>(r));
    double gain = 0.0;
    for (const auto& h : after) {
        for (int k = 0; k < r; ++k)
            args[static_cast<std::size_t>(k)] = static_cast<double>(h[static_cast<std::size_t>(k)]) + y;
        gain += log_multinomial_beta(args);
    }
    for (int k = 0; k < r; ++k)
        args[static_cast<std::size_t>(k)] = static_cast<double>(before[static_cast<std::size_t>(k)]) + x;
    gain -= log_multinomial_beta(args);
    return gain;
}

// Full decomposition of a candidate arc into the shared per-configuration
// penalty and one data gain per pre-existing configuration. net equals the
// exact local-score difference caused by adding the arc.
struct ArcDecomposition {
    double alpha = 0.0;
    double penalty_per_config = 0.0;
    double total_penalty = 0.0;
    std::vector<double> gains;
    double net = 0.0;
};

inline ArcDecomposition arc_delta(const CategoricalDataset& data, int child,
                                  std::span<const int> parents, int new_parent, Alpha alpha) {
    std::vector<int> sorted = detail::sorted_parent_set(data, child, parents);
    if (new_parent == child)
        throw ArgumentError("the new parent cannot be the child");
    if (new_parent < 0 || new_parent >= data.variable_count())
        throw ArgumentError("new parent index out of range");
    if (std::find(sorted.begin(), sorted.end(), new_parent) != sorted.end())
        throw ArgumentError("the new parent is already a parent");

    const SufficientStats before = count_sufficient_stats(data, child, sorted);
    const int r = before.r;
    const std::int64_t q = before.q;
    const int K = data.arity(new_parent);
    if (static_cast<double>(q) * K * r > static_cast<double>(detail::kMaxDenseCells))
        throw CapacityError("configuration space too large for arc decomposition");

    // split[j][m][k]: rows in pre-existing configuration j with new-parent
    // value m and child value k.
    std::vector<std::int64_t> split(static_cast<std::size_t>(q * K * r), 0);
    const std::int64_t n_rows = data.row_count();
    for (std::int64_t t = 0; t < n_rows; ++t) {
        std::int64_t j = 0;
        std::int64_t radix = 1;
        for (int p : before.parents) {
            j += radix * data.code(t, p);
            radix *= data.arity(p);
        }
        const int m = data.code(t, new_parent);
        const int k = data.code(t, child);
        ++split[static_cast<std::size_t>((j * K + m) * r + k)];
    }

    ArcDecomposition out;
    out.alpha = alpha.value;
    out.penalty_per_config = arc_penalty_per_config(r, q, K, alpha);
    out.total_penalty = static_cast<double>(q) * out.penalty_per_config;
    out.gains.reserve(static_cast<std::size_t>(q));
    double net = out.total_penalty;
    std::vector<std::int64_t> hist(static_cast<std::size_t>(r));
    for (std::int64_t j = 0; j < q; ++j) {
        std::vector<std::vector<std::int64_t>> after(static_cast<std::size_t>(K),
                                                     std::vector<std::int64_t>(static_cast<std::size_t>(r)));
        for (int m = 0; m < K; ++m)
            for (int k = 0; k < r; ++k)
                after[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)] =
                    split[static_cast<std::size_t>((j * K + m) * r + k)];
        for (int k = 0; k < r; ++k)
            hist[static_cast<std::size_t>(k)] = before.count(j, k);
        const double g = arc_gain(hist, after, q, alpha);
        out.gains.push_back(g);
        net += g;
    }
    out.net = net;
    return out;
}

inline nlohmann::json arc_decomposition_to_json(const ArcDecomposition& d) {
    nlohmann::json doc;
    doc["alpha"] = d.alpha;
    doc["penalty_per_config"] = d.penalty_per_config;
    doc["total_penalty"] = d.total_penalty;
    doc["gains"] = d.gains;
    doc["net"] = d.net;
    return doc;
}

} // namespace bdeu
