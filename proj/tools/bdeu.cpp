// Command-line front end: prep, learn, sweep, decompose and select
// subcommands over CSV datasets. Every run writes a manifest echoing its
// full resolved configuration; outputs are deterministic, so re-running a
// manifest's command line reproduces them byte for byte.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bdeu/analysis.hpp"
#include "bdeu/dataset.hpp"
#include "bdeu/equivalence.hpp"
#include "bdeu/format.hpp"
#include "bdeu/scoring.hpp"
#include "bdeu/search.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Command-line mistakes that CLI11 cannot catch itself (bad grid syntax,
// unknown column names, child listed among parents). Exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonOptions {
    std::string data_path;
    std::string sidecar_path;
    int bins = 3;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> categorical;
    std::vector<std::string> numeric;
    std::vector<std::string> arities; // NAME=K
    std::string out_dir = ".";
    std::optional<int> max_parents;
    int threads = 0;
    std::string formats = "json,csv,dot";
};

void add_data_options(CLI::App* cmd, CommonOptions& opt, bool with_preprocessing = true) {
    cmd->add_option("--data", opt.data_path, "input CSV with a header row")->required();
    if (with_preprocessing) {
        cmd->add_option("--sidecar", opt.sidecar_path,
                        "sidecar JSON of an already encoded dataset; skips preprocessing");
        cmd->add_option("--bins", opt.bins, "equal-width bins for numeric columns")
            ->check(CLI::PositiveNumber)
            ->default_val(3);
        cmd->add_option("--seed", opt.seed, "imputation seed (required when cells are missing)");
        cmd->add_option("--categorical", opt.categorical, "force columns to categorical coding")
            ->delimiter(',');
        cmd->add_option("--numeric", opt.numeric, "force columns to numeric discretization")
            ->delimiter(',');
        cmd->add_option("--arity", opt.arities, "force column arities, NAME=K")->delimiter(',');
    }
}

void add_run_options(CLI::App* cmd, CommonOptions& opt) {
    cmd->add_option("--out", opt.out_dir, "output directory")->default_val(".");
    cmd->add_option("--threads", opt.threads, "worker threads (0 = all cores)")
        ->check(CLI::NonNegativeNumber)
        ->default_val(0);
    cmd->add_option("--formats", opt.formats, "output formats to write (json,csv,dot)")
        ->default_val("json,csv,dot");
}

std::set<std::string> parse_formats(const std::string& formats) {
    std::set<std::string> out;
    std::stringstream ss(formats);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.insert(item);
    for (const auto& f : out)
        if (f != "json" && f != "csv" && f != "dot")
            throw UsageError("unknown output format '" + f + "'");
    return out;
}

bdeu::PreprocessSpec build_spec(const CommonOptions& opt) {
    bdeu::PreprocessSpec spec;
    spec.bins = opt.bins;
    spec.seed = opt.seed;
    for (const auto& name : opt.categorical)
        spec.overrides[name].treatment = bdeu::ColumnTreatment::Categorical;
    for (const auto& name : opt.numeric)
        spec.overrides[name].treatment = bdeu::ColumnTreatment::Numeric;
    for (const auto& entry : opt.arities) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos)
            throw UsageError("--arity needs NAME=K, got '" + entry + "'");
        const std::string value = entry.substr(eq + 1);
        try {
            std::size_t used = 0;
            const int k = std::stoi(value, &used);
            if (used != value.size())
                throw std::invalid_argument(value);
            spec.overrides[entry.substr(0, eq)].arity = k;
        } catch (const std::exception&) {
            throw UsageError("--arity needs an integer K, got '" + entry + "'");
        }
    }
    return spec;
}

void check_override_names(const bdeu::RawTable& table, const bdeu::PreprocessSpec& spec) {
    for (const auto& [name, ov] : spec.overrides) {
        (void)ov;
        if (std::find(table.column_names.begin(), table.column_names.end(), name) ==
            table.column_names.end())
            throw UsageError("override references unknown column '" + name + "'");
    }
}

bdeu::CategoricalDataset load_dataset(const CommonOptions& opt) {
    if (!opt.sidecar_path.empty())
        return bdeu::load_encoded(opt.data_path, opt.sidecar_path);
    const auto table = bdeu::load_csv(opt.data_path);
    const auto spec = build_spec(opt);
    check_override_names(table, spec);
    return bdeu::encode(table, spec);
}

bdeu::SearchOptions search_options(const CommonOptions& opt) {
    bdeu::SearchOptions options;
    options.max_parents = opt.max_parents;
    options.threads = opt.threads;
    return options;
}

bdeu::AlphaGrid parse_grid(const std::string& descriptor) {
    try {
        return bdeu::AlphaGrid::parse(descriptor);
    } catch (const bdeu::Error& e) {
        throw UsageError(std::string("--alphas: ") + e.what());
    }
}

int resolve_variable(const bdeu::CategoricalDataset& data, const std::string& token) {
    const auto& names = data.column_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == token)
            return static_cast<int>(i);
    try {
        std::size_t used = 0;
        const int index = std::stoi(token, &used);
        if (used == token.size() && index >= 0 && index < data.variable_count())
            return index;
    } catch (const std::exception&) {
    }
    throw UsageError("unknown variable '" + token + "'");
}

void atomic_write(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw bdeu::IoError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out)
            throw bdeu::IoError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

struct OutputWriter {
    fs::path dir;
    std::set<std::string> formats;
    std::vector<std::string> written;

    explicit OutputWriter(const CommonOptions& opt)
        : dir(opt.out_dir), formats(parse_formats(opt.formats)) {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec)
            throw bdeu::IoError("cannot create output directory " + dir.string());
    }

    bool wants(const std::string& format) const { return formats.count(format) > 0; }

    void write(const std::string& name, const std::string& format, const std::string& content) {
        if (format != "manifest" && !wants(format))
            return;
        atomic_write(dir / name, content);
        written.push_back(name);
    }

    void write_json_doc(const std::string& name, const json& doc, bool always = false) {
        if (!always && !wants("json"))
            return;
        atomic_write(dir / name, doc.dump(2) + "\n");
        written.push_back(name);
    }
};

json manifest_base(const std::string& subcommand, const CommonOptions& opt) {
    json doc;
    doc["schema_version"] = 1;
    doc["subcommand"] = subcommand;
    doc["data"] = opt.data_path;
    if (!opt.sidecar_path.empty()) {
        doc["sidecar"] = opt.sidecar_path;
    } else {
        doc["bins"] = opt.bins;
        doc["seed"] = opt.seed ? json(*opt.seed) : json(nullptr);
        json overrides = json::object();
        for (const auto& name : opt.categorical)
            overrides[name]["treatment"] = "categorical";
        for (const auto& name : opt.numeric)
            overrides[name]["treatment"] = "numeric";
        for (const auto& entry : opt.arities) {
            const auto eq = entry.find('=');
            if (eq != std::string::npos)
                overrides[entry.substr(0, eq)]["arity"] = std::stoi(entry.substr(eq + 1));
        }
        doc["overrides"] = overrides;
    }
    doc["max_parents"] = opt.max_parents ? json(*opt.max_parents) : json(nullptr);
    doc["threads"] = opt.threads;
    doc["formats"] = opt.formats;
    doc["out"] = opt.out_dir;
    return doc;
}

void finish_manifest(OutputWriter& writer, json manifest) {
    manifest["outputs"] = writer.written;
    writer.write_json_doc("manifest.json", manifest, /*always=*/true);
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int run_prep(const CommonOptions& opt) {
    const auto table = bdeu::load_csv(opt.data_path);
    const auto spec = build_spec(opt);
    check_override_names(table, spec);
    const auto data = bdeu::encode(table, spec);

    OutputWriter writer(opt);
    std::ostringstream csv;
    bdeu::write_encoded_csv(data, csv);
    writer.write("encoded.csv", "csv", csv.str());
    writer.write_json_doc("encoded.json", bdeu::sidecar_json(data, spec));

    json manifest = manifest_base("prep", opt);
    manifest["rows"] = data.row_count();
    manifest["variables"] = data.variable_count();
    finish_manifest(writer, manifest);
    return 0;
}

int run_learn(const CommonOptions& opt, double alpha, const std::string& score_table_file) {
    const auto data = load_dataset(opt);
    const auto options = search_options(opt);

    OutputWriter writer(opt);
    if (!score_table_file.empty()) {
        const auto table = bdeu::compute_local_score_table(data, bdeu::Alpha(alpha), options);
        std::ostringstream csv;
        bdeu::dump_score_table_csv(table, csv);
        writer.write(score_table_file, "csv", csv.str());
    }
    const auto result = bdeu::learn_map(data, bdeu::Alpha(alpha), options);

    writer.write_json_doc("dag.json", bdeu::dag_to_json(result.dag, data.column_names()));
    writer.write("dag.dot", "dot", bdeu::dag_to_dot(result.dag, data.column_names()));

    json manifest = manifest_base("learn", opt);
    manifest["alpha"] = alpha;
    manifest["log_score"] = result.log_score;
    manifest["arc_count"] = bdeu::arc_count(result.dag);
    finish_manifest(writer, manifest);
    return 0;
}

int run_sweep(const CommonOptions& opt, const std::string& alphas) {
    const auto grid = parse_grid(alphas);
    const auto data = load_dataset(opt);
    const auto result = bdeu::sweep(data, grid, search_options(opt));

    OutputWriter writer(opt);

    // One JSON file per distinct model, in first-appearance order.
    std::vector<std::string> refs;
    std::map<std::string, std::string> ref_by_key;
    for (const auto& rec : result) {
        const std::string key = rec.key.canonical_json();
        auto it = ref_by_key.find(key);
        if (it == ref_by_key.end()) {
            char name[32];
            std::snprintf(name, sizeof(name), "model_%03zu.json", ref_by_key.size());
            it = ref_by_key.emplace(key, name).first;
            writer.write_json_doc(name, bdeu::dag_to_json(rec.dag, data.column_names()));
        }
        refs.push_back(it->second);
    }

    std::ostringstream csv;
    bdeu::write_sweep_csv(result, refs, csv);
    writer.write("sweep.csv", "csv", csv.str());
    writer.write_json_doc("summary.json", bdeu::sweep_summary_to_json(bdeu::summarize(result)));

    json manifest = manifest_base("sweep", opt);
    manifest["alphas"] = grid.descriptor();
    manifest["grid_size"] = grid.size();
    manifest["distinct_models"] = ref_by_key.size();
    finish_manifest(writer, manifest);
    return 0;
}

int run_decompose(const CommonOptions& opt, const std::string& child_token,
                  const std::vector<std::string>& parent_tokens, const std::string& new_parent_token,
                  std::optional<double> alpha, const std::string& alphas) {
    if (alpha.has_value() == !alphas.empty())
        throw UsageError("give exactly one of --alpha or --alphas");
    const auto data = load_dataset(opt);

    const int child = resolve_variable(data, child_token);
    const int new_parent = resolve_variable(data, new_parent_token);
    std::vector<int> parents;
    for (const auto& token : parent_tokens)
        parents.push_back(resolve_variable(data, token));
    for (int p : parents)
        if (p == child)
            throw UsageError("the child cannot be among --parents");
    if (new_parent == child)
        throw UsageError("--new-parent cannot equal --child");
    for (int p : parents)
        if (p == new_parent)
            throw UsageError("--new-parent is already among --parents");

    const auto grid = alpha ? bdeu::AlphaGrid::explicit_values({*alpha}) : parse_grid(alphas);

    std::vector<bdeu::ArcDecomposition> decompositions;
    decompositions.reserve(grid.size());
    for (double a : grid.values())
        decompositions.push_back(bdeu::arc_delta(data, child, parents, new_parent, bdeu::Alpha(a)));

    OutputWriter writer(opt);

    json entries = json::array();
    for (const auto& d : decompositions)
        entries.push_back(bdeu::arc_decomposition_to_json(d));
    json doc;
    doc["schema_version"] = 1;
    doc["child"] = data.column_names()[static_cast<std::size_t>(child)];
    doc["parents"] = json::array();
    for (int p : parents)
        doc["parents"].push_back(data.column_names()[static_cast<std::size_t>(p)]);
    doc["new_parent"] = data.column_names()[static_cast<std::size_t>(new_parent)];
    doc["entries"] = entries;
    writer.write_json_doc("decomposition.json", doc);

    // Curve CSVs over the grid: the per-configuration penalty and the
    // per-configuration data gains.
    const std::size_t q = decompositions.front().gains.size();
    std::ostringstream penalty_csv;
    penalty_csv << "alpha,alpha_per_cell,penalty_per_config,total_penalty\n";
    const int r = data.arity(child);
    const int K = data.arity(new_parent);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& d = decompositions[i];
        penalty_csv << bdeu::format_double(d.alpha) << ','
                    << bdeu::format_double(d.alpha / (static_cast<double>(q) * r)) << ','
                    << bdeu::format_double(d.penalty_per_config) << ','
                    << bdeu::format_double(d.total_penalty) << "\n";
    }
    writer.write("penalty_curve.csv", "csv", penalty_csv.str());

    std::ostringstream gain_csv;
    gain_csv << "alpha,alpha_per_config";
    for (std::size_t j = 0; j < q; ++j)
        gain_csv << ",gain_" << j;
    gain_csv << ",net\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& d = decompositions[i];
        gain_csv << bdeu::format_double(d.alpha) << ','
                 << bdeu::format_double(d.alpha / static_cast<double>(q));
        for (double g : d.gains)
            gain_csv << ',' << bdeu::format_double(g);
        gain_csv << ',' << bdeu::format_double(d.net) << "\n";
    }
    writer.write("gain_curve.csv", "csv", gain_csv.str());

    json manifest = manifest_base("decompose", opt);
    manifest["child"] = child_token;
    manifest["parents"] = parent_tokens;
    manifest["new_parent"] = new_parent_token;
    manifest["alphas"] = grid.descriptor();
    manifest["child_arity"] = r;
    manifest["new_parent_arity"] = K;
    finish_manifest(writer, manifest);
    return 0;
}

int run_select(const CommonOptions& opt, const std::string& method, const std::string& alphas) {
    if (method != "integrate" && method != "maximize")
        throw UsageError("--method must be integrate or maximize");
    const auto grid = parse_grid(alphas);
    const auto data = load_dataset(opt);

    // One sweep feeds both selection procedures.
    const auto result = bdeu::sweep(data, grid, search_options(opt));
    const auto candidates = bdeu::candidate_set_from_sweep(result);
    const auto posterior = bdeu::integrate_out_alpha(data, candidates, grid);
    const auto selection = bdeu::select_alpha_star_from_sweep(result);

    const auto& integrated_winner = posterior.candidates[static_cast<std::size_t>(posterior.best_index)];
    const bool winners_agree =
        bdeu::same_independence_model(integrated_winner, selection.dag);

    OutputWriter writer(opt);

    std::vector<std::string> candidate_refs;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        char name[32];
        std::snprintf(name, sizeof(name), "model_%03zu.json", c);
        candidate_refs.emplace_back(name);
        writer.write_json_doc(name, bdeu::dag_to_json(candidates[c], data.column_names()));
    }

    // Score curves of every candidate across the grid, one row per alpha.
    {
        const auto curves = bdeu::score_curves(data, candidates, grid);
        std::ostringstream csv;
        bdeu::write_curves_csv(curves, candidate_refs, grid, csv);
        writer.write("curves.csv", "csv", csv.str());
    }

    if (method == "integrate") {
        json doc = bdeu::alpha_posterior_to_json(posterior, candidate_refs);
        doc["winners_share_equivalence_key"] = winners_agree;
        writer.write_json_doc("posterior.json", doc);
        writer.write_json_doc("winner.json",
                              bdeu::dag_to_json(integrated_winner, data.column_names()));
    } else {
        json doc;
        doc["schema_version"] = 1;
        doc["alpha_star"] = selection.alpha_star;
        doc["log_score"] = selection.log_score;
        doc["dag_ref"] = "winner.json";
        doc["winners_share_equivalence_key"] = winners_agree;
        writer.write_json_doc("selection.json", doc);
        writer.write_json_doc("winner.json", bdeu::dag_to_json(selection.dag, data.column_names()));
    }

    json manifest = manifest_base("select", opt);
    manifest["method"] = method;
    manifest["alphas"] = grid.descriptor();
    manifest["winners_share_equivalence_key"] = winners_agree;
    finish_manifest(writer, manifest);
    return 0;
}

const char* stage_name(const bdeu::Error& e) {
    if (dynamic_cast<const bdeu::FormatError*>(&e))
        return "parse";
    if (dynamic_cast<const bdeu::PreprocessError*>(&e))
        return "preprocess";
    if (dynamic_cast<const bdeu::CapacityError*>(&e))
        return "capacity";
    if (dynamic_cast<const bdeu::IoError*>(&e))
        return "io";
    if (dynamic_cast<const bdeu::DomainError*>(&e))
        return "domain";
    return "argument";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"BDeu structure learning and equivalent-sample-size sensitivity toolkit"};
    app.require_subcommand(1);

    CommonOptions prep_opt, learn_opt, sweep_opt, decompose_opt, select_opt;

    auto* prep = app.add_subcommand("prep", "discretize, impute and encode a raw CSV");
    add_data_options(prep, prep_opt);
    add_run_options(prep, prep_opt);

    auto* learn = app.add_subcommand("learn", "find the MAP network for one alpha");
    add_data_options(learn, learn_opt);
    add_run_options(learn, learn_opt);
    double learn_alpha = 0.0;
    std::string score_table_file;
    learn->add_option("--alpha", learn_alpha, "equivalent sample size")
        ->required()
        ->check(CLI::PositiveNumber);
    learn->add_option("--max-parents", learn_opt.max_parents, "cap on parent-set size");
    learn->add_option("--score-table", score_table_file, "also dump the local score table CSV");

    auto* sweep_cmd = app.add_subcommand("sweep", "learn the MAP network across an alpha grid");
    add_data_options(sweep_cmd, sweep_opt);
    add_run_options(sweep_cmd, sweep_opt);
    std::string sweep_alphas;
    sweep_cmd->add_option("--alphas", sweep_alphas, "grid descriptor (log:|linear:|int:|list:)")
        ->required();
    sweep_cmd->add_option("--max-parents", sweep_opt.max_parents, "cap on parent-set size");

    auto* decompose = app.add_subcommand("decompose",
                                         "penalty/gain decomposition of one candidate arc");
    add_data_options(decompose, decompose_opt);
    add_run_options(decompose, decompose_opt);
    std::string child_token, new_parent_token, decompose_alphas;
    std::vector<std::string> parent_tokens;
    std::optional<double> decompose_alpha;
    decompose->add_option("--child", child_token, "child variable (name or index)")->required();
    decompose->add_option("--parents", parent_tokens, "pre-existing parents (names or indices)")
        ->delimiter(',');
    decompose->add_option("--new-parent", new_parent_token, "candidate parent (name or index)")
        ->required();
    decompose->add_option("--alpha", decompose_alpha, "single equivalent sample size");
    decompose->add_option("--alphas", decompose_alphas, "grid descriptor for curves");

    auto* select = app.add_subcommand("select", "pick alpha by integration or maximization");
    add_data_options(select, select_opt);
    add_run_options(select, select_opt);
    std::string method, select_alphas;
    select->add_option("--method", method, "integrate | maximize")->required();
    select->add_option("--alphas", select_alphas, "grid descriptor")->required();
    select->add_option("--max-parents", select_opt.max_parents, "cap on parent-set size");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (prep->parsed())
            return run_prep(prep_opt);
        if (learn->parsed())
            return run_learn(learn_opt, learn_alpha, score_table_file);
        if (sweep_cmd->parsed())
            return run_sweep(sweep_opt, sweep_alphas);
        if (decompose->parsed())
            return run_decompose(decompose_opt, child_token, parent_tokens, new_parent_token,
                                 decompose_alpha, decompose_alphas);
        if (select->parsed())
            return run_select(select_opt, method, select_alphas);
    } catch (const UsageError& e) {
        std::cerr << "bdeu: usage error: " << e.what() << "\n";
        return 2;
    } catch (const bdeu::Error& e) {
        std::cerr << "bdeu: " << stage_name(e) << " error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "bdeu: internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
