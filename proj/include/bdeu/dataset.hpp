#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "bdeu/errors.hpp"
#include "bdeu/random.hpp"

namespace bdeu {

// ---------------------------------------------------------------------------
// Raw tabular input
// ---------------------------------------------------------------------------

struct MissingCell {
    bool operator==(const MissingCell&) const = default;
};

// A raw cell is missing, a number, or a category token.
using Cell = std::variant<MissingCell, double, std::string>;

inline bool is_missing(const Cell& c) { return std::holds_alternative<MissingCell>(c); }

struct RawTable {
    std::vector<std::string> column_names;
    std::vector<std::vector<Cell>> rows;

    int column_count() const { return static_cast<int>(column_names.size()); }
    int row_count() const { return static_cast<int>(rows.size()); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_number(std::string_view s) {
    if (s.empty())
        return std::nullopt;
    double value = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last || !std::isfinite(value))
        return std::nullopt;
    return value;
}

// Splits one CSV line into fields. Fields may be wrapped in double quotes to
// protect embedded commas; "" inside a quoted field is a literal quote.
inline std::vector<std::string> split_csv_line(const std::string& line, int line_number) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current += c;
            }
        } else if (c == '"' && trim(current).empty()) {
            quoted = true;
            current.clear();
        } else if (c == ',') {
            fields.push_back(current);
            current.clear();
        } else {
            current += c;
        }
    }
    if (quoted)
        throw FormatError("line " + std::to_string(line_number) + ": unterminated quoted field");
    fields.push_back(current);
    return fields;
}

inline Cell classify_field(const std::string& raw) {
    std::string_view t = trim(raw);
    if (t.empty() || t == "?")
        return MissingCell{};
    if (auto num = parse_number(t))
        return *num;
    return std::string(t);
}

} // namespace detail

// Parses CSV with a header row. "?" and empty fields become the missing
// marker; fields that parse fully as decimal numbers become numeric cells.
inline RawTable parse_csv(std::istream& in) {
    RawTable table;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line_number == 1) {
            for (const auto& f : detail::split_csv_line(line, line_number))
                table.column_names.emplace_back(detail::trim(f));
            if (table.column_names.empty() || (table.column_names.size() == 1 && table.column_names[0].empty()))
                throw FormatError("line 1: empty header");
            continue;
        }
        if (line.empty() || line == "\r")
            continue;
        auto fields = detail::split_csv_line(line, line_number);
        if (static_cast<int>(fields.size()) != table.column_count())
            throw FormatError("line " + std::to_string(line_number) + ": expected " +
                              std::to_string(table.column_count()) + " fields, got " +
                              std::to_string(fields.size()));
        std::vector<Cell> row;
        row.reserve(fields.size());
        for (const auto& f : fields)
            row.push_back(detail::classify_field(f));
        table.rows.push_back(std::move(row));
    }
    if (line_number == 0)
        throw FormatError("empty file");
    if (table.rows.empty())
        throw FormatError("no data rows after the header");
    return table;
}

inline RawTable load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path);
    try {
        return parse_csv(in);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Encoded dataset
// ---------------------------------------------------------------------------

// Fully observed integer-coded data with fixed per-variable arities.
// Storage is column-major; the object is immutable after construction.
class CategoricalDataset {
public:
    CategoricalDataset(std::vector<int> arities,
                       const std::vector<std::vector<int>>& rows,
                       std::vector<std::string> column_names = {})
        : arities_(std::move(arities)), names_(std::move(column_names)) {
        const int n = static_cast<int>(arities_.size());
        if (n < 1)
            throw ArgumentError("dataset needs at least one variable");
        if (rows.empty())
            throw ArgumentError("dataset needs at least one row");
        if (!names_.empty() && static_cast<int>(names_.size()) != n)
            throw ArgumentError("column name count does not match variable count");
        if (names_.empty())
            for (int i = 0; i < n; ++i)
                names_.push_back("v" + std::to_string(i));
        for (int a : arities_)
            if (a < 1)
                throw ArgumentError("arities must be >= 1");
        columns_.assign(static_cast<std::size_t>(n), std::vector<int>(rows.size()));
        for (std::size_t t = 0; t < rows.size(); ++t) {
            if (static_cast<int>(rows[t].size()) != n)
                throw ArgumentError("row " + std::to_string(t) + " has wrong length");
            for (int i = 0; i < n; ++i) {
                int code = rows[t][static_cast<std::size_t>(i)];
                if (code < 0 || code >= arities_[static_cast<std::size_t>(i)])
                    throw ArgumentError("code out of range in row " + std::to_string(t) +
                                        ", column " + names_[static_cast<std::size_t>(i)]);
                columns_[static_cast<std::size_t>(i)][t] = code;
            }
        }
    }

    int variable_count() const { return static_cast<int>(arities_.size()); }
    std::int64_t row_count() const { return static_cast<std::int64_t>(columns_[0].size()); }
    int arity(int var) const { return arities_.at(static_cast<std::size_t>(var)); }
    const std::vector<int>& arities() const { return arities_; }
    const std::vector<int>& column(int var) const { return columns_.at(static_cast<std::size_t>(var)); }
    const std::vector<std::string>& column_names() const { return names_; }
    int code(std::int64_t row, int var) const {
        return columns_[static_cast<std::size_t>(var)][static_cast<std::size_t>(row)];
    }

    bool operator==(const CategoricalDataset&) const = default;

private:
    std::vector<int> arities_;
    std::vector<std::string> names_;
    std::vector<std::vector<int>> columns_;
};

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

enum class ColumnTreatment { Auto, Numeric, Categorical };

struct ColumnOverride {
    std::optional<int> arity;
    ColumnTreatment treatment = ColumnTreatment::Auto;
};

struct PreprocessSpec {
    int bins = 3;
    std::optional<std::uint64_t> seed;
    std::map<std::string, ColumnOverride> overrides; // keyed by column name
};

struct DiscretizedColumn {
    std::vector<std::optional<int>> codes;
    std::vector<double> bin_edges; // bins+1 boundaries over [min, max]
};

// Equal-width binning over the observed [min, max]. Bins are half-open with
// the maximum folded into the last bin; a constant column collapses to one
// effective bin. Missing cells stay missing.
inline DiscretizedColumn discretize_equal_width(std::span<const std::optional<double>> values, int bins) {
    if (bins < 1)
        throw ArgumentError("bins must be >= 1");
    double lo = 0.0, hi = 0.0;
    bool seen = false;
    for (const auto& v : values) {
        if (!v)
            continue;
        if (!seen) {
            lo = hi = *v;
            seen = true;
        } else {
            lo = std::min(lo, *v);
            hi = std::max(hi, *v);
        }
    }
    if (!seen)
        throw PreprocessError("no numeric values to discretize");
    DiscretizedColumn out;
    out.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
    const double width = (hi - lo) / bins;
    for (int b = 0; b <= bins; ++b)
        out.bin_edges[static_cast<std::size_t>(b)] = lo + width * b;
    out.bin_edges.back() = hi;
    out.codes.reserve(values.size());
    for (const auto& v : values) {
        if (!v) {
            out.codes.emplace_back(std::nullopt);
            continue;
        }
        int code = 0;
        if (hi > lo) {
            code = (*v >= hi) ? bins - 1 : static_cast<int>(std::floor((*v - lo) / width));
            code = std::clamp(code, 0, bins - 1);
        }
        out.codes.emplace_back(code);
    }
    return out;
}

// Replaces each missing cell with a draw proportional to the observed counts.
// The generator is SplitMix64 on the (seed, column) stream, so identical
// inputs give identical outputs on every platform.
inline std::vector<int> impute_random(std::span<const std::optional<int>> codes,
                                      std::span<const std::int64_t> observed_counts,
                                      std::uint64_t seed,
                                      int column_index) {
    std::int64_t total = 0;
    for (std::int64_t c : observed_counts) {
        if (c < 0)
            throw ArgumentError("negative count in empirical distribution");
        total += c;
    }
    if (total == 0)
        throw PreprocessError("all cells missing; empirical distribution undefined");
    SplitMix64 rng = column_stream(seed, column_index);
    std::vector<int> out;
    out.reserve(codes.size());
    for (const auto& c : codes) {
        if (c) {
            out.push_back(*c);
            continue;
        }
        std::int64_t u = static_cast<std::int64_t>(rng.next() % static_cast<std::uint64_t>(total));
        int drawn = 0;
        for (std::size_t k = 0; k < observed_counts.size(); ++k) {
            if (u < observed_counts[k]) {
                drawn = static_cast<int>(k);
                break;
            }
            u -= observed_counts[k];
        }
        out.push_back(drawn);
    }
    return out;
}

namespace detail {

struct EncodedColumn {
    std::vector<int> codes;
    int arity = 0;
};

inline std::string canonical_token(const Cell& cell) {
    if (const auto* s = std::get_if<std::string>(&cell))
        return *s;
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), std::get<double>(cell));
    return std::string(buf, res.ptr);
}

// Order-preserving compaction: distinct observed codes map to 0..r-1 by
// ascending value, so discretization order survives.
inline void compact_codes(std::vector<int>& codes, int& arity) {
    std::vector<int> distinct(codes);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (int& c : codes)
        c = static_cast<int>(std::lower_bound(distinct.begin(), distinct.end(), c) - distinct.begin());
    arity = static_cast<int>(distinct.size());
}

inline EncodedColumn encode_column(const RawTable& table, int col, const PreprocessSpec& spec,
                                   const ColumnOverride& ov) {
    const int n_rows = table.row_count();
    bool any_missing = false;
    bool all_numeric = true;
    bool all_missing = true;
    for (int t = 0; t < n_rows; ++t) {
        const Cell& cell = table.rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(col)];
        if (is_missing(cell)) {
            any_missing = true;
        } else {
            all_missing = false;
            if (!std::holds_alternative<double>(cell))
                all_numeric = false;
        }
    }
    if (all_missing)
        throw PreprocessError("all cells missing");

    ColumnTreatment treat = ov.treatment;
    if (treat == ColumnTreatment::Auto)
        treat = all_numeric ? ColumnTreatment::Numeric : ColumnTreatment::Categorical;
    if (treat == ColumnTreatment::Numeric && !all_numeric)
        throw PreprocessError("column contains non-numeric tokens but is forced numeric");

    std::vector<std::optional<int>> codes(static_cast<std::size_t>(n_rows));
    if (treat == ColumnTreatment::Numeric) {
        std::vector<std::optional<double>> values(static_cast<std::size_t>(n_rows));
        for (int t = 0; t < n_rows; ++t) {
            const Cell& cell = table.rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(col)];
            if (!is_missing(cell))
                values[static_cast<std::size_t>(t)] = std::get<double>(cell);
        }
        codes = discretize_equal_width(values, spec.bins).codes;
    } else if (all_numeric) {
        // Numeric values under categorical treatment: rank coding by
        // ascending value keeps code order aligned with value order.
        std::vector<double> distinct;
        for (int t = 0; t < n_rows; ++t) {
            const Cell& cell = table.rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(col)];
            if (!is_missing(cell))
                distinct.push_back(std::get<double>(cell));
        }
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        for (int t = 0; t < n_rows; ++t) {
            const Cell& cell = table.rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(col)];
            if (!is_missing(cell)) {
                double v = std::get<double>(cell);
                codes[static_cast<std::size_t>(t)] =
                    static_cast<int>(std::lower_bound(distinct.begin(), distinct.end(), v) - distinct.begin());
            }
        }
    } else {
        // Token column: first-appearance coding.
        std::map<std::string, int> index;
        for (int t = 0; t < n_rows; ++t) {
            const Cell& cell = table.rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(col)];
            if (is_missing(cell))
                continue;
            std::string token = canonical_token(cell);
            auto it = index.find(token);
            if (it == index.end())
                it = index.emplace(token, static_cast<int>(index.size())).first;
            codes[static_cast<std::size_t>(t)] = it->second;
        }
    }

    std::vector<int> full;
    if (any_missing) {
        if (!spec.seed)
            throw PreprocessError("column has missing values but no seed was given");
        int max_code = 0;
        for (const auto& c : codes)
            if (c)
                max_code = std::max(max_code, *c);
        std::vector<std::int64_t> counts(static_cast<std::size_t>(max_code) + 1, 0);
        for (const auto& c : codes)
            if (c)
                ++counts[static_cast<std::size_t>(*c)];
        full = impute_random(codes, counts, *spec.seed, col);
    } else {
        full.reserve(codes.size());
        for (const auto& c : codes)
            full.push_back(*c);
    }

    EncodedColumn out;
    out.codes = std::move(full);
    if (ov.arity) {
        if (*ov.arity < 1)
            throw PreprocessError("forced arity must be >= 1");
        for (int c : out.codes)
            if (c >= *ov.arity)
                throw PreprocessError("observed code " + std::to_string(c) +
                                      " exceeds forced arity " + std::to_string(*ov.arity));
        out.arity = *ov.arity; // codes unchanged under an explicit arity
    } else {
        compact_codes(out.codes, out.arity);
    }
    return out;
}

} // namespace detail

// Full preprocessing pipeline: per-column treatment resolution, equal-width
// discretization of numeric columns, first-appearance coding of token
// columns, imputation of missing cells, then arity determination.
inline CategoricalDataset encode(const RawTable& table, const PreprocessSpec& spec) {
    if (table.row_count() < 1 || table.column_count() < 1)
        throw ArgumentError("table must have at least one row and one column");
    if (spec.bins < 1)
        throw ArgumentError("bins must be >= 1");
    for (const auto& [name, ov] : spec.overrides) {
        (void)ov;
        if (std::find(table.column_names.begin(), table.column_names.end(), name) ==
            table.column_names.end())
            throw ArgumentError("override references unknown column '" + name + "'");
    }
    const int n = table.column_count();
    std::vector<detail::EncodedColumn> cols(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        ColumnOverride ov;
        auto it = spec.overrides.find(table.column_names[static_cast<std::size_t>(i)]);
        if (it != spec.overrides.end())
            ov = it->second;
        try {
            cols[static_cast<std::size_t>(i)] = detail::encode_column(table, i, spec, ov);
        } catch (const PreprocessError& e) {
            throw PreprocessError("column '" + table.column_names[static_cast<std::size_t>(i)] +
                                  "': " + e.what());
        }
    }
    std::vector<int> arities;
    arities.reserve(static_cast<std::size_t>(n));
    for (const auto& c : cols)
        arities.push_back(c.arity);
    std::vector<std::vector<int>> rows(static_cast<std::size_t>(table.row_count()),
                                       std::vector<int>(static_cast<std::size_t>(n)));
    for (int t = 0; t < table.row_count(); ++t)
        for (int i = 0; i < n; ++i)
            rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] =
                cols[static_cast<std::size_t>(i)].codes[static_cast<std::size_t>(t)];
    return CategoricalDataset(std::move(arities), rows, table.column_names);
}

// ---------------------------------------------------------------------------
// Encoded dataset round-trip (CSV of codes + self-describing JSON sidecar)
// ---------------------------------------------------------------------------

inline void write_encoded_csv(const CategoricalDataset& data, std::ostream& out) {
    const auto& names = data.column_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        out << (i ? "," : "") << names[i];
    out << "\n";
    for (std::int64_t t = 0; t < data.row_count(); ++t) {
        for (int i = 0; i < data.variable_count(); ++i)
            out << (i ? "," : "") << data.code(t, i);
        out << "\n";
    }
}

inline nlohmann::json sidecar_json(const CategoricalDataset& data, const PreprocessSpec& spec) {
    nlohmann::json doc;
    doc["schema_version"] = 1;
    doc["arities"] = data.arities();
    doc["names"] = data.column_names();
    doc["bins"] = spec.bins;
    if (spec.seed)
        doc["seed"] = *spec.seed;
    else
        doc["seed"] = nullptr;
    return doc;
}

// Reads a dataset written by write_encoded_csv + sidecar_json. Codes are
// validated against the sidecar arities.
inline CategoricalDataset load_encoded(const std::string& csv_path, const std::string& sidecar_path) {
    std::ifstream side(sidecar_path);
    if (!side)
        throw IoError("cannot open " + sidecar_path);
    nlohmann::json doc;
    try {
        side >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(sidecar_path + ": " + e.what());
    }
    if (!doc.contains("arities") || !doc.contains("names"))
        throw FormatError(sidecar_path + ": sidecar must contain \"arities\" and \"names\"");
    auto arities = doc.at("arities").get<std::vector<int>>();
    auto names = doc.at("names").get<std::vector<std::string>>();

    RawTable table = load_csv(csv_path);
    if (table.column_count() != static_cast<int>(arities.size()))
        throw FormatError(csv_path + ": column count does not match sidecar");
    std::vector<std::vector<int>> rows(static_cast<std::size_t>(table.row_count()),
                                       std::vector<int>(arities.size()));
    for (int t = 0; t < table.row_count(); ++t) {
        for (int i = 0; i < table.column_count(); ++i) {
            const Cell& cell = table.rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
            const double* num = std::get_if<double>(&cell);
            if (num == nullptr || *num != std::floor(*num))
                throw FormatError(csv_path + ": row " + std::to_string(t + 2) +
                                  " column " + names[static_cast<std::size_t>(i)] +
                                  ": expected an integer code");
            rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] = static_cast<int>(*num);
        }
    }
    try {
        return CategoricalDataset(std::move(arities), rows, std::move(names));
    } catch (const ArgumentError& e) {
        throw FormatError(csv_path + ": " + e.what());
    }
}

} // namespace bdeu
