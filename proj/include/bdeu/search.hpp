#pragma once

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>
#include <vector>

#include "bdeu/dag.hpp"
#include "bdeu/dataset.hpp"
#include "bdeu/errors.hpp"
#include "bdeu/format.hpp"
#include "bdeu/scoring.hpp"

namespace bdeu {

struct SearchOptions {
    std::optional<int> max_parents; // cap on |parent set|; unbounded if absent
    int threads = 0;                // 0 = hardware concurrency
    int variable_limit = 20;        // hard cap on n for the exact tables
};

struct LearnResult {
    Dag dag;
    double log_score = 0.0;
};

inline std::uint32_t set_to_mask(std::span<const int> vars) {
    std::uint32_t mask = 0;
    for (int v : vars)
        mask |= std::uint32_t(1) << v;
    return mask;
}

inline std::vector<int> mask_to_set(std::uint32_t mask) {
    std::vector<int> vars;
    while (mask) {
        vars.push_back(std::countr_zero(mask));
        mask &= mask - 1;
    }
    return vars;
}

namespace detail {

// Compensated accumulator for network totals. Local scores of distinct but
// score-equivalent structures differ only below double precision once the
// per-family terms are fixed, so comparing totals at double-double precision
// keeps the optimizer's choices stable across evaluation routes.
struct DoubleDouble {
    double hi = 0.0;
    double lo = 0.0;
};

inline DoubleDouble dd_add(DoubleDouble a, double b) {
    const double s = a.hi + b;
    const double bv = s - a.hi;
    const double err = (a.hi - (s - bv)) + (b - bv);
    const double lo = a.lo + err;
    DoubleDouble out;
    out.hi = s + lo;
    out.lo = lo - (out.hi - s);
    return out;
}

inline int dd_cmp(DoubleDouble a, DoubleDouble b) {
    if (a.hi < b.hi) return -1;
    if (a.hi > b.hi) return 1;
    if (a.lo < b.lo) return -1;
    if (a.lo > b.lo) return 1;
    return 0;
}

inline double dd_value(DoubleDouble a) { return a.hi + a.lo; }

} // namespace detail

// Write-once store of local_log_bdeu(i | S) for every variable i and every
// parent set S within the cap, indexed by the parent-set bitmask.
class LocalScoreTable {
public:
    LocalScoreTable(int n, Alpha alpha, std::optional<int> max_parents,
                    std::vector<std::vector<double>> scores)
        : n_(n), alpha_(alpha), max_parents_(max_parents), scores_(std::move(scores)) {}

    int variable_count() const { return n_; }
    Alpha alpha() const { return alpha_; }
    std::optional<int> max_parents() const { return max_parents_; }

    bool has(int var, std::uint32_t parent_mask) const {
        return !std::isnan(scores_[static_cast<std::size_t>(var)][parent_mask]);
    }

    double local_score(int var, std::uint32_t parent_mask) const {
        const double s = scores_[static_cast<std::size_t>(var)][parent_mask];
        if (std::isnan(s))
            throw ArgumentError("no score stored for this (variable, parent set)");
        return s;
    }

private:
    int n_;
    Alpha alpha_;
    std::optional<int> max_parents_;
    std::vector<std::vector<double>> scores_;
};

namespace detail {

// Scores every parent set of one child by depth-first refinement of the row
// partition. Variables are added in descending index order, which keeps the
// partition blocks sorted by configuration index, so each node's score is
// bit-identical to the dense local_log_bdeu evaluation of the same family.
class ChildScoreBuilder {
public:
    ChildScoreBuilder(const CategoricalDataset& data, double alpha, std::optional<int> cap)
        : data_(data), alpha_(alpha), cap_(cap),
          n_(data.variable_count()), n_rows_(data.row_count()) {
        int max_arity = 1;
        for (int i = 0; i < n_; ++i)
            max_arity = std::max(max_arity, data.arity(i));
        counts_.resize(static_cast<std::size_t>(max_arity));
        positions_.resize(static_cast<std::size_t>(max_arity));
    }

    void run(int child, std::vector<double>& out) {
        child_ = child;
        out_ = &out;
        r_child_ = data_.arity(child);
        hist_.assign(static_cast<std::size_t>(r_child_), 0);
        ensure_level(0);
        auto& rows0 = level_rows_[0];
        for (std::int64_t t = 0; t < n_rows_; ++t)
            rows0[static_cast<std::size_t>(t)] = static_cast<std::int32_t>(t);
        level_blocks_[0].assign(1, static_cast<std::int32_t>(n_rows_));
        out[0] = node_score(0, 1.0);
        descend(0u, 0, 1.0, n_);
    }

private:
    void ensure_level(int depth) {
        while (static_cast<int>(level_rows_.size()) <= depth) {
            level_rows_.emplace_back(static_cast<std::size_t>(n_rows_));
            level_blocks_.emplace_back();
        }
    }

    void descend(std::uint32_t mask, int depth, double q, int bound) {
        if (cap_ && depth >= *cap_)
            return;
        for (int v = bound - 1; v >= 0; --v) {
            if (v == child_)
                continue;
            ensure_level(depth + 1);
            refine(depth, v);
            const double q2 = q * data_.arity(v);
            const std::uint32_t mask2 = mask | (std::uint32_t(1) << v);
            (*out_)[mask2] = node_score(depth + 1, q2);
            descend(mask2, depth + 1, q2, v);
        }
    }

    // Splits every block of level `depth` by the codes of variable v. Blocks
    // stay sorted by configuration index because v is a lower index (hence a
    // less significant digit) than everything refined before it.
    void refine(int depth, int v) {
        const auto& src = level_rows_[static_cast<std::size_t>(depth)];
        const auto& src_blocks = level_blocks_[static_cast<std::size_t>(depth)];
        auto& dst = level_rows_[static_cast<std::size_t>(depth) + 1];
        auto& dst_blocks = level_blocks_[static_cast<std::size_t>(depth) + 1];
        dst_blocks.clear();
        const auto& column = data_.column(v);
        const int rv = data_.arity(v);
        std::int64_t offset = 0;
        for (std::int32_t bs : src_blocks) {
            for (int c = 0; c < rv; ++c)
                counts_[static_cast<std::size_t>(c)] = 0;
            for (std::int64_t t = offset; t < offset + bs; ++t)
                ++counts_[static_cast<std::size_t>(column[static_cast<std::size_t>(src[static_cast<std::size_t>(t)])])];
            std::int32_t pos = static_cast<std::int32_t>(offset);
            for (int c = 0; c < rv; ++c) {
                positions_[static_cast<std::size_t>(c)] = pos;
                pos += counts_[static_cast<std::size_t>(c)];
            }
            for (std::int64_t t = offset; t < offset + bs; ++t) {
                const std::int32_t row = src[static_cast<std::size_t>(t)];
                const int c = column[static_cast<std::size_t>(row)];
                dst[static_cast<std::size_t>(positions_[static_cast<std::size_t>(c)]++)] = row;
            }
            for (int c = 0; c < rv; ++c)
                if (counts_[static_cast<std::size_t>(c)] > 0)
                    dst_blocks.push_back(counts_[static_cast<std::size_t>(c)]);
            offset += bs;
        }
    }

    double node_score(int depth, double q) {
        const double cell = alpha_ / (q * r_child_);
        const auto& rows = level_rows_[static_cast<std::size_t>(depth)];
        const auto& blocks = level_blocks_[static_cast<std::size_t>(depth)];
        const auto& child_column = data_.column(child_);
        double total = 0.0;
        std::int64_t offset = 0;
        for (std::int32_t bs : blocks) {
            for (int k = 0; k < r_child_; ++k)
                hist_[static_cast<std::size_t>(k)] = 0;
            for (std::int64_t t = offset; t < offset + bs; ++t)
                ++hist_[static_cast<std::size_t>(child_column[static_cast<std::size_t>(rows[static_cast<std::size_t>(t)])])];
            total += log_bdeu_config_term(hist_, cell);
            offset += bs;
        }
        return total;
    }

    const CategoricalDataset& data_;
    double alpha_;
    std::optional<int> cap_;
    int n_;
    std::int64_t n_rows_;
    int child_ = 0;
    int r_child_ = 1;
    std::vector<double>* out_ = nullptr;
    std::vector<std::vector<std::int32_t>> level_rows_;
    std::vector<std::vector<std::int32_t>> level_blocks_;
    std::vector<std::int32_t> counts_;
    std::vector<std::int32_t> positions_;
    std::vector<std::int64_t> hist_;
};

inline int resolve_threads(int requested, int jobs) {
    int t = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
    if (t < 1)
        t = 1;
    return std::min(t, jobs);
}

} // namespace detail

inline LocalScoreTable compute_local_score_table(const CategoricalDataset& data, Alpha alpha,
                                                 const SearchOptions& options = {}) {
    const int n = data.variable_count();
    const int limit = std::min(options.variable_limit, 25);
    if (n > limit)
        throw CapacityError("dataset has " + std::to_string(n) +
                            " variables but the exact search supports at most " +
                            std::to_string(limit) +
                            "; reduce the variable count (max_parents only caps parent sets)");
    if (options.max_parents && *options.max_parents < 0)
        throw ArgumentError("max_parents must be >= 0");

    const std::size_t table_size = std::size_t(1) << n;
    std::vector<std::vector<double>> scores(
        static_cast<std::size_t>(n),
        std::vector<double>(table_size, std::numeric_limits<double>::quiet_NaN()));

    const int threads = detail::resolve_threads(options.threads, n);
    std::atomic<int> next_child{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
        try {
            detail::ChildScoreBuilder builder(data, alpha.value, options.max_parents);
            while (true) {
                const int child = next_child.fetch_add(1);
                if (child >= n)
                    return;
                builder.run(child, scores[static_cast<std::size_t>(child)]);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure)
                failure = std::current_exception();
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }
    if (failure)
        std::rethrow_exception(failure);
    return LocalScoreTable(n, alpha, options.max_parents, std::move(scores));
}

// For every variable and candidate set C, the best-scoring parent subset of
// C. Ties go to the smaller subset, then the smaller bitmask.
class BestParentsTable {
public:
    BestParentsTable(int n, std::vector<std::vector<double>> scores,
                     std::vector<std::vector<std::uint32_t>> subsets)
        : n_(n), scores_(std::move(scores)), subsets_(std::move(subsets)) {}

    int variable_count() const { return n_; }
    double best_score(int var, std::uint32_t candidates) const {
        return scores_[static_cast<std::size_t>(var)][candidates];
    }
    std::uint32_t best_subset(int var, std::uint32_t candidates) const {
        return subsets_[static_cast<std::size_t>(var)][candidates];
    }

private:
    int n_;
    std::vector<std::vector<double>> scores_;
    std::vector<std::vector<std::uint32_t>> subsets_;
};

inline BestParentsTable best_parents(const LocalScoreTable& table) {
    const int n = table.variable_count();
    const std::uint32_t full = (std::uint32_t(1) << n) - 1;
    std::vector<std::vector<double>> scores(
        static_cast<std::size_t>(n),
        std::vector<double>(std::size_t(1) << n, std::numeric_limits<double>::quiet_NaN()));
    std::vector<std::vector<std::uint32_t>> subsets(
        static_cast<std::size_t>(n), std::vector<std::uint32_t>(std::size_t(1) << n, 0));
    for (int i = 0; i < n; ++i) {
        auto& score_row = scores[static_cast<std::size_t>(i)];
        auto& subset_row = subsets[static_cast<std::size_t>(i)];
        for (std::uint32_t mask = 0; mask <= full; ++mask) {
            if (mask & (std::uint32_t(1) << i))
                continue;
            double best = std::numeric_limits<double>::quiet_NaN();
            std::uint32_t best_set = 0;
            if (table.has(i, mask)) {
                best = table.local_score(i, mask);
                best_set = mask;
            }
            for (std::uint32_t rest = mask; rest;) {
                const std::uint32_t bit = rest & (0u - rest);
                rest ^= bit;
                const std::uint32_t sub = mask ^ bit;
                const double cand = score_row[sub];
                const std::uint32_t cand_set = subset_row[sub];
                const bool take =
                    std::isnan(best) || cand > best ||
                    (cand == best &&
                     (std::popcount(cand_set) < std::popcount(best_set) ||
                      (std::popcount(cand_set) == std::popcount(best_set) && cand_set < best_set)));
                if (take) {
                    best = cand;
                    best_set = cand_set;
                }
            }
            score_row[mask] = best;
            subset_row[mask] = best_set;
        }
    }
    return BestParentsTable(n, std::move(scores), std::move(subsets));
}

// Optimal variable ordering by peeling best sinks from the full variable set
// down to the empty set. Sink ties go to the highest index, which leaves
// low-index variables earliest in the order (fully tied instances come out
// ascending).
inline std::vector<int> best_order(const BestParentsTable& bp) {
    const int n = bp.variable_count();
    const std::size_t subsets = std::size_t(1) << n;
    std::vector<detail::DoubleDouble> net(subsets);
    std::vector<std::int8_t> sink(subsets, -1);
    for (std::uint32_t mask = 1; mask < subsets; ++mask) {
        detail::DoubleDouble best{};
        int best_sink = -1;
        for (std::uint32_t rest = mask; rest;) {
            const std::uint32_t bit = rest & (0u - rest);
            rest ^= bit;
            const int s = std::countr_zero(bit);
            const std::uint32_t sub = mask ^ bit;
            const detail::DoubleDouble cand = detail::dd_add(net[sub], bp.best_score(s, sub));
            if (best_sink < 0 || detail::dd_cmp(cand, best) >= 0) {
                best = cand;
                best_sink = s;
            }
        }
        net[mask] = best;
        sink[mask] = static_cast<std::int8_t>(best_sink);
    }
    std::vector<int> order(static_cast<std::size_t>(n));
    std::uint32_t mask = static_cast<std::uint32_t>(subsets - 1);
    for (int pos = n - 1; pos >= 0; --pos) {
        const int s = sink[mask];
        order[static_cast<std::size_t>(pos)] = s;
        mask ^= std::uint32_t(1) << s;
    }
    return order;
}

// Materializes the DAG for an ordering: each variable gets its best parent
// subset among its predecessors.
inline Dag reconstruct_dag(std::span<const int> order, const BestParentsTable& bp) {
    const int n = bp.variable_count();
    if (static_cast<int>(order.size()) != n)
        throw ArgumentError("order length does not match variable count");
    std::vector<char> used(static_cast<std::size_t>(n), 0);
    for (int v : order) {
        if (v < 0 || v >= n || used[static_cast<std::size_t>(v)])
            throw ArgumentError("order is not a permutation of the variables");
        used[static_cast<std::size_t>(v)] = 1;
    }
    Dag dag(n);
    std::uint32_t predecessors = 0;
    for (int v : order) {
        dag.set_parents(v, mask_to_set(bp.best_subset(v, predecessors)));
        predecessors |= std::uint32_t(1) << v;
    }
    return dag;
}

// Globally optimal DAG under the BDeu score for the given alpha, via the
// local-score / best-parents / best-sink dynamic program.
inline LearnResult learn_map(const CategoricalDataset& data, Alpha alpha,
                             const SearchOptions& options = {}) {
    const LocalScoreTable table = compute_local_score_table(data, alpha, options);
    const BestParentsTable bp = best_parents(table);
    const std::vector<int> order = best_order(bp);
    Dag dag = reconstruct_dag(order, bp);
    detail::DoubleDouble total{};
    for (int i = 0; i < dag.node_count(); ++i)
        total = detail::dd_add(total, table.local_score(i, set_to_mask(dag.parents(i))));
    return LearnResult{std::move(dag), detail::dd_value(total)};
}

struct BruteForceResult {
    Dag dag;
    double log_score = 0.0;
    std::uint64_t dag_count = 0; // acyclic structures enumerated
};

namespace detail {

inline bool parent_masks_acyclic(std::span<const std::uint32_t> parent_masks) {
    const int n = static_cast<int>(parent_masks.size());
    std::uint32_t removed = 0;
    const std::uint32_t full = (std::uint32_t(1) << n) - 1;
    for (int round = 0; round < n; ++round) {
        bool progress = false;
        for (int i = 0; i < n; ++i) {
            const std::uint32_t bit = std::uint32_t(1) << i;
            if ((removed & bit) == 0 && (parent_masks[static_cast<std::size_t>(i)] & ~removed) == 0) {
                removed |= bit;
                progress = true;
            }
        }
        if (removed == full)
            return true;
        if (!progress)
            return false;
    }
    return removed == full;
}

} // namespace detail

// Exhaustive oracle: enumerates every labeled DAG (543 of them for n = 4)
// and keeps the best score. Ties keep the first maximizer in lexicographic
// parent-mask order, which prefers smaller parent sets for early variables.
inline BruteForceResult brute_force_map(const CategoricalDataset& data, Alpha alpha) {
    const int n = data.variable_count();
    if (n > 5)
        throw CapacityError("brute-force enumeration supports at most 5 variables");
    const std::uint32_t full = (std::uint32_t(1) << n) - 1;

    std::vector<std::vector<double>> locals(static_cast<std::size_t>(n),
                                            std::vector<double>(std::size_t(1) << n, 0.0));
    for (int i = 0; i < n; ++i) {
        const std::uint32_t comp = full ^ (std::uint32_t(1) << i);
        std::uint32_t sub = 0;
        while (true) {
            const std::vector<int> parents = mask_to_set(sub);
            locals[static_cast<std::size_t>(i)][sub] =
                local_log_bdeu(count_sufficient_stats(data, i, parents), alpha);
            if (sub == comp)
                break;
            sub = (sub - comp) & comp;
        }
    }

    std::vector<std::uint32_t> assignment(static_cast<std::size_t>(n), 0);
    std::vector<std::uint32_t> best_assignment(static_cast<std::size_t>(n), 0);
    detail::DoubleDouble best_total{};
    bool have_best = false;
    std::uint64_t count = 0;

    auto evaluate = [&]() {
        if (!detail::parent_masks_acyclic(assignment))
            return;
        ++count;
        detail::DoubleDouble total{};
        for (int i = 0; i < n; ++i)
            total = detail::dd_add(total, locals[static_cast<std::size_t>(i)][assignment[static_cast<std::size_t>(i)]]);
        if (!have_best || detail::dd_cmp(total, best_total) > 0) {
            best_total = total;
            best_assignment = assignment;
            have_best = true;
        }
    };

    // Odometer over per-variable parent masks, most significant digit first,
    // so the enumeration is lexicographic in (G_0, .., G_{n-1}).
    auto enumerate = [&](auto&& self, int i) -> void {
        if (i == n) {
            evaluate();
            return;
        }
        const std::uint32_t comp = full ^ (std::uint32_t(1) << i);
        std::uint32_t sub = 0;
        while (true) {
            assignment[static_cast<std::size_t>(i)] = sub;
            self(self, i + 1);
            if (sub == comp)
                break;
            sub = (sub - comp) & comp;
        }
    };
    enumerate(enumerate, 0);

    Dag dag(n);
    for (int i = 0; i < n; ++i)
        dag.set_parents(i, mask_to_set(best_assignment[static_cast<std::size_t>(i)]));
    return BruteForceResult{std::move(dag), detail::dd_value(best_total), count};
}

// CSV dump of every stored (variable, parent set, score) entry.
inline void dump_score_table_csv(const LocalScoreTable& table, std::ostream& out) {
    out << "variable,parent_mask,log_score\n";
    const std::uint32_t full = (std::uint32_t(1) << table.variable_count()) - 1;
    for (int i = 0; i < table.variable_count(); ++i) {
        for (std::uint32_t mask = 0; mask <= full; ++mask) {
            if (mask & (std::uint32_t(1) << i))
                continue;
            if (!table.has(i, mask))
                continue;
            out << i << ',' << mask << ',' << format_double(table.local_score(i, mask)) << "\n";
        }
    }
}

} // namespace bdeu
