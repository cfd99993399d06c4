#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "bdeu/dataset.hpp"

using namespace bdeu;

namespace {

RawTable table_from(const std::string& csv) {
    std::istringstream in(csv);
    return parse_csv(in);
}

} // namespace

TEST_CASE("parse_csv classifies numbers, tokens and missing markers") {
    const auto t = table_from("a,b\n1,x\n");
    REQUIRE(t.column_count() == 2);
    REQUIRE(t.row_count() == 1);
    CHECK(std::get<double>(t.rows[0][0]) == 1.0);
    CHECK(std::get<std::string>(t.rows[0][1]) == "x");

    const auto m = table_from("a,b\n1,?\n2,\n");
    CHECK(is_missing(m.rows[0][1]));
    CHECK(is_missing(m.rows[1][1]));
}

TEST_CASE("parse_csv reports ragged rows with their line number") {
    try {
        table_from("a,b\n1,2\n1,2,3\n");
        FAIL("expected a format error");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("parse_csv rejects empty input") {
    CHECK_THROWS_AS(table_from(""), FormatError);
    CHECK_THROWS_AS(table_from("a,b\n"), FormatError);
}

TEST_CASE("parse_csv honors quoted fields with embedded commas") {
    const auto t = table_from("a,b\n\"x,y\",2\n");
    CHECK(std::get<std::string>(t.rows[0][0]) == "x,y");
    CHECK(std::get<double>(t.rows[0][1]) == 2.0);
}

TEST_CASE("equal-width discretization splits the observed range") {
    std::vector<std::optional<double>> values;
    for (int v = 0; v <= 9; ++v)
        values.emplace_back(static_cast<double>(v));
    const auto d = discretize_equal_width(values, 3);
    std::vector<int> counts(3, 0);
    for (const auto& c : d.codes)
        ++counts[static_cast<std::size_t>(*c)];
    CHECK(counts == std::vector<int>{3, 3, 4});
    CHECK(d.bin_edges.front() == 0.0);
    CHECK(d.bin_edges.back() == 9.0);
}

TEST_CASE("discretization maps a constant column to one bin") {
    std::vector<std::optional<double>> values = {5.0, 5.0, 5.0};
    const auto d = discretize_equal_width(values, 3);
    for (const auto& c : d.codes)
        CHECK(*c == 0);
}

TEST_CASE("discretization folds the maximum into the last bin") {
    std::vector<std::optional<double>> values = {0.0, 10.0};
    const auto d = discretize_equal_width(values, 2);
    CHECK(*d.codes[0] == 0);
    CHECK(*d.codes[1] == 1);
}

TEST_CASE("discretization keeps missing cells missing and needs one value") {
    std::vector<std::optional<double>> values = {std::nullopt, 3.0, std::nullopt};
    const auto d = discretize_equal_width(values, 3);
    CHECK(!d.codes[0].has_value());
    CHECK(d.codes[1].has_value());

    std::vector<std::optional<double>> empty = {std::nullopt, std::nullopt};
    CHECK_THROWS_AS(discretize_equal_width(empty, 3), PreprocessError);
}

TEST_CASE("imputation leaves fully observed columns unchanged") {
    std::vector<std::optional<int>> codes = {1, 0, 1};
    const std::vector<std::int64_t> counts = {1, 2};
    CHECK(impute_random(codes, counts, 7, 0) == std::vector<int>{1, 0, 1});
    CHECK(impute_random(codes, counts, 99, 3) == std::vector<int>{1, 0, 1});
}

TEST_CASE("imputation never draws a zero-probability code") {
    std::vector<std::optional<int>> codes(50, std::nullopt);
    codes[0] = 0;
    const std::vector<std::int64_t> counts = {10, 0};
    for (int v : impute_random(codes, counts, 123, 2))
        CHECK(v == 0);
}

TEST_CASE("imputation is deterministic in (input, seed, column)") {
    std::vector<std::optional<int>> codes = {0, std::nullopt, 1, std::nullopt, 2, std::nullopt};
    const std::vector<std::int64_t> counts = {3, 2, 1};
    const auto a = impute_random(codes, counts, 42, 1);
    const auto b = impute_random(codes, counts, 42, 1);
    CHECK(a == b);
}

TEST_CASE("imputation requires at least one observed cell") {
    std::vector<std::optional<int>> codes = {std::nullopt, std::nullopt};
    const std::vector<std::int64_t> counts = {0, 0};
    CHECK_THROWS_AS(impute_random(codes, counts, 1, 0), PreprocessError);
}

TEST_CASE("encode codes tokens in first-appearance order") {
    const auto data = encode(table_from("c\nx\ny\nx\n"), PreprocessSpec{});
    CHECK(data.arity(0) == 2);
    CHECK(data.code(0, 0) == 0);
    CHECK(data.code(1, 0) == 1);
    CHECK(data.code(2, 0) == 0);
}

TEST_CASE("encode composes discretization with compaction") {
    // 4 distinct values into 3 bins: 0,1 -> bin 0; 5 -> bin 1; 9,10 -> bin 2.
    const auto data = encode(table_from("v\n0\n1\n5\n9\n10\n"), PreprocessSpec{});
    CHECK(data.arity(0) == 3);
    CHECK(data.code(0, 0) == 0);
    CHECK(data.code(1, 0) == 0);
    CHECK(data.code(2, 0) == 1);
    CHECK(data.code(3, 0) == 2);
    CHECK(data.code(4, 0) == 2);
}

TEST_CASE("encode keeps codes and widens the arity under an override") {
    PreprocessSpec spec;
    spec.overrides["v"] = ColumnOverride{4, ColumnTreatment::Categorical};
    const auto data = encode(table_from("v\n0\n1\n2\n"), spec);
    CHECK(data.arity(0) == 4);
    CHECK(data.code(0, 0) == 0);
    CHECK(data.code(2, 0) == 2);
}

TEST_CASE("encode names the failing column") {
    try {
        encode(table_from("good,bad\n1,?\n2,?\n"), PreprocessSpec{});
        FAIL("expected a preprocessing error");
    } catch (const PreprocessError& e) {
        CHECK(std::string(e.what()).find("bad") != std::string::npos);
    }
}

TEST_CASE("encode requires a seed only when cells are missing") {
    CHECK_THROWS_AS(encode(table_from("a\n1\n?\n"), PreprocessSpec{}), PreprocessError);
    PreprocessSpec with_seed;
    with_seed.seed = 7;
    const auto data = encode(table_from("a\n1\n?\n"), with_seed);
    CHECK(data.row_count() == 2);
    CHECK(data.code(1, 0) == 0); // only one observed value to draw
}

TEST_CASE("encode imputes after discretization") {
    PreprocessSpec spec;
    spec.seed = 11;
    const auto data = encode(table_from("v\n0\n1\n8\n9\n?\n"), spec);
    CHECK(data.row_count() == 5);
    // The imputed cell is one of the observed bin codes.
    CHECK(data.code(4, 0) >= 0);
    CHECK(data.code(4, 0) < data.arity(0));
}

TEST_CASE("encode is idempotent on encoded data with matching arities") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 10; ++rep) {
        const int n_rows = 30;
        // Codes 0..r-1 with every value observed, arities within the default
        // three bins.
        std::vector<int> arity = {2, 3};
        std::ostringstream csv;
        csv << "a,b\n";
        std::vector<std::vector<int>> rows;
        for (int t = 0; t < n_rows; ++t) {
            std::vector<int> row = {t % arity[0], t % arity[1]};
            if (t >= 2) {
                row[0] = std::uniform_int_distribution<int>(0, arity[0] - 1)(rng);
                row[1] = std::uniform_int_distribution<int>(0, arity[1] - 1)(rng);
            }
            csv << row[0] << ',' << row[1] << "\n";
            rows.push_back(row);
        }
        const auto encoded = encode(table_from(csv.str()), PreprocessSpec{});
        for (int t = 0; t < n_rows; ++t)
            for (int i = 0; i < 2; ++i)
                CHECK(encoded.code(t, i) == rows[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)]);
        CHECK(encoded.arities() == arity);
    }
}

TEST_CASE("encode is deterministic") {
    PreprocessSpec spec;
    spec.seed = 31;
    const std::string csv = "a,b\n1,x\n?,y\n3,?\n4,x\n?,?\n";
    const auto first = encode(table_from(csv), spec);
    const auto second = encode(table_from(csv), spec);
    CHECK(first == second);
}

TEST_CASE("encode preserves the row count") {
    PreprocessSpec spec;
    spec.seed = 3;
    const auto data = encode(table_from("a,b\n1,x\n?,y\n3,?\n"), spec);
    CHECK(data.row_count() == 3);
}

TEST_CASE("numeric codes never invert the value order") {
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 20; ++rep) {
        std::ostringstream csv;
        csv << "v\n";
        std::vector<double> values;
        const int n_rows = std::uniform_int_distribution<int>(2, 40)(rng);
        for (int t = 0; t < n_rows; ++t) {
            const double v = std::uniform_real_distribution<double>(-50.0, 50.0)(rng);
            values.push_back(v);
            csv << v << "\n";
        }
        PreprocessSpec spec;
        spec.bins = std::uniform_int_distribution<int>(1, 5)(rng);
        const auto data = encode(table_from(csv.str()), spec);
        for (int s = 0; s < n_rows; ++s)
            for (int t = 0; t < n_rows; ++t)
                if (values[static_cast<std::size_t>(s)] <= values[static_cast<std::size_t>(t)])
                    CHECK(data.code(s, 0) <= data.code(t, 0));
    }
}

TEST_CASE("categorical dataset validates its invariants") {
    CHECK_THROWS_AS(CategoricalDataset({2}, {}), ArgumentError);
    CHECK_THROWS_AS(CategoricalDataset({2}, {{2}}), ArgumentError);
    CHECK_THROWS_AS(CategoricalDataset({0}, {{0}}), ArgumentError);
    CHECK_THROWS_AS(CategoricalDataset({2, 2}, {{0}}), ArgumentError);
}

TEST_CASE("encoded CSV and sidecar round-trip") {
    PreprocessSpec spec;
    spec.seed = 9;
    const auto data = encode(table_from("a,b\n1,x\n2,y\n?,x\n"), spec);

    std::ostringstream csv;
    write_encoded_csv(data, csv);
    const auto side = sidecar_json(data, spec);
    CHECK(side.at("bins") == 3);
    CHECK(side.at("seed") == 9);

    const auto tmp = std::filesystem::temp_directory_path();
    const auto csv_path = (tmp / "bdeu_test_encoded.csv").string();
    const auto side_path = (tmp / "bdeu_test_encoded.json").string();
    {
        std::ofstream out(csv_path);
        out << csv.str();
        std::ofstream sout(side_path);
        sout << side.dump(2);
    }
    const auto loaded = load_encoded(csv_path, side_path);
    CHECK(loaded == data);
}
