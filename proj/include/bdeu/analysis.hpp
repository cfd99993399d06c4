#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bdeu/equivalence.hpp"
#include "bdeu/errors.hpp"
#include "bdeu/format.hpp"
#include "bdeu/scoring.hpp"
#include "bdeu/search.hpp"

namespace bdeu {

// ---------------------------------------------------------------------------
// Alpha grids
// ---------------------------------------------------------------------------

// Strictly increasing positive alpha values plus the descriptor they were
// built from, so a manifest can reproduce the grid exactly.
class AlphaGrid {
public:
    static AlphaGrid explicit_values(std::vector<double> values) {
        std::string desc = "list:";
        for (std::size_t i = 0; i < values.size(); ++i)
            desc += (i ? "," : "") + format_double(values[i]);
        return AlphaGrid(std::move(values), std::move(desc));
    }

    static AlphaGrid linear(double start, double stop, int count) {
        return AlphaGrid(spaced(start, stop, count, false),
                         "linear:" + format_double(start) + ":" + format_double(stop) + ":" +
                             std::to_string(count));
    }

    static AlphaGrid logarithmic(double start, double stop, int count) {
        return AlphaGrid(spaced(start, stop, count, true),
                         "log:" + format_double(start) + ":" + format_double(stop) + ":" +
                             std::to_string(count));
    }

    static AlphaGrid integers(long lo, long hi) {
        if (lo > hi)
            throw ArgumentError("integer grid needs lo <= hi");
        std::vector<double> values;
        values.reserve(static_cast<std::size_t>(hi - lo + 1));
        for (long v = lo; v <= hi; ++v)
            values.push_back(static_cast<double>(v));
        return AlphaGrid(std::move(values), "int:" + std::to_string(lo) + ":" + std::to_string(hi));
    }

    // Descriptor mini-syntax used by the command line:
    //   log:START:STOP:COUNT | linear:START:STOP:COUNT | int:LO:HI | list:V1,V2,..
    static AlphaGrid parse(std::string_view descriptor) {
        const auto colon = descriptor.find(':');
        if (colon == std::string_view::npos)
            throw FormatError("grid descriptor needs the form kind:..., got '" +
                              std::string(descriptor) + "'");
        const std::string_view kind = descriptor.substr(0, colon);
        const std::string_view rest = descriptor.substr(colon + 1);
        auto fields = split(rest, kind == "list" ? ',' : ':');
        try {
            if (kind == "list") {
                std::vector<double> values;
                for (const auto& f : fields)
                    values.push_back(number_field(f));
                return explicit_values(std::move(values));
            }
            if (kind == "int") {
                if (fields.size() != 2)
                    throw FormatError("int grid needs int:LO:HI");
                return integers(integer_field(fields[0]), integer_field(fields[1]));
            }
            if (kind == "log" || kind == "linear") {
                if (fields.size() != 3)
                    throw FormatError("grid needs " + std::string(kind) + ":START:STOP:COUNT");
                const double start = number_field(fields[0]);
                const double stop = number_field(fields[1]);
                const int count = static_cast<int>(integer_field(fields[2]));
                return kind == "log" ? logarithmic(start, stop, count) : linear(start, stop, count);
            }
        } catch (const std::invalid_argument&) {
            throw FormatError("malformed number in grid descriptor '" + std::string(descriptor) + "'");
        } catch (const std::out_of_range&) {
            throw FormatError("number out of range in grid descriptor '" + std::string(descriptor) + "'");
        }
        throw FormatError("unknown grid kind '" + std::string(kind) + "'");
    }

    const std::vector<double>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    const std::string& descriptor() const { return descriptor_; }

private:
    AlphaGrid(std::vector<double> values, std::string descriptor)
        : values_(std::move(values)), descriptor_(std::move(descriptor)) {
        if (values_.empty())
            throw ArgumentError("alpha grid must not be empty");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!(std::isfinite(values_[i]) && values_[i] > 0.0))
                throw ArgumentError("alpha grid values must be positive and finite");
            if (i > 0 && values_[i] <= values_[i - 1])
                throw ArgumentError("alpha grid values must be strictly increasing");
        }
    }

    static double number_field(const std::string& s) {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size())
            throw std::invalid_argument(s);
        return v;
    }

    static long integer_field(const std::string& s) {
        std::size_t used = 0;
        const long v = std::stol(s, &used);
        if (used != s.size())
            throw std::invalid_argument(s);
        return v;
    }

    static std::vector<std::string> split(std::string_view s, char sep) {
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t pos = s.find(sep, start);
            fields.emplace_back(s.substr(start, pos - start));
            if (pos == std::string_view::npos)
                break;
            start = pos + 1;
        }
        return fields;
    }

    static std::vector<double> spaced(double start, double stop, int count, bool log_scale) {
        if (count < 1)
            throw ArgumentError("grid count must be >= 1");
        if (count == 1) {
            if (start != stop)
                throw ArgumentError("a one-point grid needs start == stop");
            return {start};
        }
        if (!(start > 0.0 && stop > start))
            throw ArgumentError("grid needs 0 < start < stop");
        std::vector<double> values(static_cast<std::size_t>(count));
        values.front() = start;
        values.back() = stop;
        if (log_scale) {
            const double la = std::log(start), lb = std::log(stop);
            for (int i = 1; i + 1 < count; ++i)
                values[static_cast<std::size_t>(i)] = std::exp(la + (lb - la) * i / (count - 1));
        } else {
            for (int i = 1; i + 1 < count; ++i)
                values[static_cast<std::size_t>(i)] = start + (stop - start) * i / (count - 1);
        }
        return values;
    }

    std::vector<double> values_;
    std::string descriptor_;
};

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct SweepRecord {
    double alpha = 0.0;
    Dag dag;
    double log_score = 0.0;
    int arc_count = 0;
    EquivalenceKey key;
};

using SweepResult = std::vector<SweepRecord>;

// One exact search per grid value, recorded in grid order.
inline SweepResult sweep(const CategoricalDataset& data, const AlphaGrid& grid,
                         const SearchOptions& options = {}) {
    SweepResult result;
    result.reserve(grid.size());
    for (double a : grid.values()) {
        LearnResult learned = learn_map(data, Alpha(a), options);
        SweepRecord rec;
        rec.alpha = a;
        rec.log_score = learned.log_score;
        rec.arc_count = arc_count(learned.dag);
        rec.key = equivalence_key(learned.dag);
        rec.dag = std::move(learned.dag);
        result.push_back(std::move(rec));
    }
    return result;
}

struct SweepSummary {
    int distinct_arc_counts = 0;
    int max_possible_arcs = 0; // n(n-1)/2, the skeleton-size ceiling
    int arc_min = 0;
    int arc_max = 0;
    double alpha_min = 0.0;
    double alpha_max = 0.0;
    int distinct_models = 0; // distinct equivalence keys
};

inline SweepSummary summarize(const SweepResult& result) {
    if (result.empty())
        throw ArgumentError("cannot summarize an empty sweep");
    SweepSummary s;
    std::set<int> arc_counts;
    std::set<std::string> models;
    s.arc_min = s.arc_max = result.front().arc_count;
    for (const auto& rec : result) {
        arc_counts.insert(rec.arc_count);
        models.insert(rec.key.canonical_json());
        s.arc_min = std::min(s.arc_min, rec.arc_count);
        s.arc_max = std::max(s.arc_max, rec.arc_count);
    }
    const int n = result.front().dag.node_count();
    s.distinct_arc_counts = static_cast<int>(arc_counts.size());
    s.max_possible_arcs = n * (n - 1) / 2;
    s.alpha_min = result.front().alpha;
    s.alpha_max = result.back().alpha;
    s.distinct_models = static_cast<int>(models.size());
    return s;
}

inline nlohmann::json sweep_summary_to_json(const SweepSummary& s) {
    nlohmann::json doc;
    doc["schema_version"] = 1;
    doc["distinct_arc_counts"] = s.distinct_arc_counts;
    doc["max_possible_arcs"] = s.max_possible_arcs;
    doc["arc_range"] = {s.arc_min, s.arc_max};
    doc["alpha_range"] = {s.alpha_min, s.alpha_max};
    doc["distinct_models"] = s.distinct_models;
    return doc;
}

// One representative DAG per distinct equivalence key, first occurrence kept.
inline std::vector<Dag> candidate_set_from_sweep(const SweepResult& result) {
    if (result.empty())
        throw ArgumentError("cannot take candidates from an empty sweep");
    std::vector<Dag> candidates;
    std::set<std::string> seen;
    for (const auto& rec : result)
        if (seen.insert(rec.key.canonical_json()).second)
            candidates.push_back(rec.dag);
    return candidates;
}

// ---------------------------------------------------------------------------
// Scoring fixed structures across a grid
// ---------------------------------------------------------------------------

// curves[d][a] = total log BDeu of dags[d] at grid value a.
inline std::vector<std::vector<double>> score_curves(const CategoricalDataset& data,
                                                     std::span<const Dag> dags,
                                                     const AlphaGrid& grid) {
    std::vector<std::vector<double>> curves(dags.size(), std::vector<double>(grid.size()));
    for (std::size_t d = 0; d < dags.size(); ++d)
        for (std::size_t a = 0; a < grid.size(); ++a)
            curves[d][a] = total_log_bdeu(data, dags[d], Alpha(grid.values()[a]));
    return curves;
}

// One row per alpha, one column per model.
inline void write_curves_csv(const std::vector<std::vector<double>>& curves,
                             std::span<const std::string> labels, const AlphaGrid& grid,
                             std::ostream& out) {
    out << "alpha";
    for (std::size_t d = 0; d < curves.size(); ++d)
        out << ',' << (d < labels.size() ? labels[d] : "model_" + std::to_string(d));
    out << "\n";
    for (std::size_t a = 0; a < grid.size(); ++a) {
        out << format_double(grid.values()[a]);
        for (const auto& row : curves)
            out << ',' << format_double(row[a]);
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// Alpha selection
// ---------------------------------------------------------------------------

struct AlphaPosterior {
    std::vector<Dag> candidates;
    std::vector<EquivalenceKey> keys;
    std::vector<double> posterior; // sums to 1
    std::vector<double> grid;
    int best_index = 0;
};

namespace detail {

inline double log_sum_exp(std::span<const double> xs) {
    double m = xs[0];
    for (double x : xs)
        m = std::max(m, x);
    double s = 0.0;
    for (double x : xs)
        s += std::exp(x - m);
    return m + std::log(s);
}

} // namespace detail

// Posterior over candidate structures with alpha integrated out against the
// discrete uniform prior carried by the grid:
//   P(G | D)  proportional to  (1/m) sum_alpha P(D | G, alpha).
// Everything is accumulated in log space with a max shift.
inline AlphaPosterior integrate_out_alpha(const CategoricalDataset& data,
                                          std::span<const Dag> candidates, const AlphaGrid& grid) {
    if (candidates.empty())
        throw ArgumentError("integrate_out_alpha needs at least one candidate");
    std::set<std::string> keys_seen;
    AlphaPosterior out;
    for (const Dag& dag : candidates) {
        EquivalenceKey key = equivalence_key(dag);
        if (!keys_seen.insert(key.canonical_json()).second)
            throw ArgumentError("candidates must be pairwise distinct by equivalence key");
        out.keys.push_back(std::move(key));
        out.candidates.push_back(dag);
    }
    const auto curves = score_curves(data, candidates, grid);
    std::vector<double> log_marginal(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c)
        log_marginal[c] =
            detail::log_sum_exp(curves[c]) - std::log(static_cast<double>(grid.size()));
    const double norm = detail::log_sum_exp(log_marginal);
    out.posterior.resize(candidates.size());
    out.best_index = 0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        out.posterior[c] = std::exp(log_marginal[c] - norm);
        if (out.posterior[c] > out.posterior[static_cast<std::size_t>(out.best_index)])
            out.best_index = static_cast<int>(c);
    }
    out.grid = grid.values();
    return out;
}

struct AlphaSelection {
    Dag dag;
    double alpha_star = 0.0;
    double log_score = 0.0;
    int grid_index = 0;
};

// Joint maximization over (G, alpha): the grid value whose optimal network
// scores highest. Ties go to the smaller alpha.
inline AlphaSelection select_alpha_star_from_sweep(const SweepResult& result) {
    if (result.empty())
        throw ArgumentError("cannot select from an empty sweep");
    std::size_t best = 0;
    for (std::size_t i = 1; i < result.size(); ++i)
        if (result[i].log_score > result[best].log_score)
            best = i;
    return AlphaSelection{result[best].dag, result[best].alpha, result[best].log_score,
                          static_cast<int>(best)};
}

inline AlphaSelection select_alpha_star(const CategoricalDataset& data, const AlphaGrid& grid,
                                        const SearchOptions& options = {}) {
    return select_alpha_star_from_sweep(sweep(data, grid, options));
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

// Sweep CSV: one row per grid value. refs[i] names the JSON file holding the
// record's representative model.
inline void write_sweep_csv(const SweepResult& result, std::span<const std::string> refs,
                            std::ostream& out) {
    out << "alpha,log_score,arc_count,equivalence_key_hash,dag_json_ref\n";
    for (std::size_t i = 0; i < result.size(); ++i) {
        const auto& rec = result[i];
        out << format_double(rec.alpha) << ',' << format_double(rec.log_score) << ','
            << rec.arc_count << ',' << equivalence_key_hash(rec.key) << ','
            << (i < refs.size() ? refs[i] : "") << "\n";
    }
}

inline nlohmann::json alpha_posterior_to_json(const AlphaPosterior& posterior,
                                              std::span<const std::string> candidate_refs) {
    nlohmann::json doc;
    doc["schema_version"] = 1;
    doc["grid"] = posterior.grid;
    doc["candidates"] = std::vector<std::string>(candidate_refs.begin(), candidate_refs.end());
    doc["posterior"] = posterior.posterior;
    doc["best_index"] = posterior.best_index;
    return doc;
}

} // namespace bdeu
