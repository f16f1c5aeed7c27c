// tspas: command-line front end for feature extraction, ranking, rendering
// and selector experiments. Exit codes: 0 ok, 1 usage, 2 data, 3 internal.

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "tspas/cnn.hpp"
#include "tspas/config.hpp"
#include "tspas/csv.hpp"
#include "tspas/features.hpp"
#include "tspas/instance.hpp"
#include "tspas/parallel.hpp"
#include "tspas/rendering.hpp"
#include "tspas/report.hpp"
#include "tspas/scoring.hpp"
#include "tspas/selection.hpp"
#include "tspas/stats_tests.hpp"
#include "tspas/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tspas;

namespace {

constexpr const char* kToolVersion = "0.1.0";

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Globals {
    std::uint64_t seed = 1;
    std::size_t jobs = 1;
    double cutoff = kDefaultCutoff;
    double penalty = kDefaultPenaltyFactor;
};

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return out.str();
}

void write_file(const fs::path& path, std::string_view data) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw DataError("cannot write " + path.string());
}

std::string read_input(const fs::path& path) {
    try {
        return detail::read_file(path);
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
}

std::vector<fs::path> instance_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".tsp") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Reproducibility envelope. The id hashes everything except the timestamp,
/// so identical inputs and seeds give the same id.
struct Manifest {
    std::string command;
    std::map<std::string, std::string> config;
    std::map<std::string, std::string> inputs;  // role -> sha256
    std::uint64_t seed = 0;
    double cutoff = 0.0, penalty = 0.0;

    [[nodiscard]] json stable() const {
        return {{"tool", "tspas"},         {"tool_version", kToolVersion}, {"command", command},
                {"config", config},        {"inputs", inputs},             {"seed", seed},
                {"cutoff_T", cutoff},      {"penalty_factor", penalty}};
    }
    [[nodiscard]] std::string id() const { return sha256_hex(stable().dump()); }

    void add_input(const std::string& role, std::string_view bytes) { inputs[role] = sha256_hex(bytes); }

    void write(const fs::path& path) const {
        json j = stable();
        j["manifest_id"] = id();
        j["created_at"] = utc_now();
        write_file(path, j.dump(2) + "\n");
    }
};

fs::path manifest_path_for(const fs::path& report) {
    auto p = report;
    p.replace_extension();
    return p.string() + ".manifest.json";
}

// ---------------------------------------------------------------------------

int cmd_generate(const Globals& g, const fs::path& out, SyntheticConfig cfg) {
    cfg.seed = g.seed;
    cfg.cutoff = g.cutoff;
    const auto corpus = make_synthetic_corpus(cfg);
    fs::create_directories(out / "instances");
    for (const auto& inst : corpus.instances) save_tsplib(inst, out / "instances" / (inst.id + ".tsp"));
    write_file(out / "perf.csv", write_performance_csv(corpus.records));
    std::cerr << "generated " << corpus.instances.size() << " instances in " << out << "\n";
    return kOk;
}

int cmd_features(const Globals& g, const fs::path& dir, const fs::path& out, std::size_t k) {
    const auto files = instance_files(dir);
    std::vector<std::optional<FeatureVector>> results(files.size());
    std::vector<std::string> ids(files.size()), errors(files.size());
    parallel_for(files.size(), g.jobs, [&](std::size_t i) {
        try {
            const auto inst = load_tsplib(files[i]);
            ids[i] = inst.id;
            results[i] = compute_features(inst, k);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    FeatureTable table;
    table.names = feature_names(k);
    std::size_t failed = 0;
    for (std::size_t i = 0; i < files.size(); ++i) {
        if (!results[i]) {
            std::cerr << "error: " << files[i].string() << ": " << errors[i] << "\n";
            ++failed;
            continue;
        }
        table.rows.push_back({ids[i], results[i]->cost_seconds, results[i]->values});
    }
    std::sort(table.rows.begin(), table.rows.end(),
              [](const auto& a, const auto& b) { return a.instance_id < b.instance_id; });
    for (std::size_t i = 1; i < table.rows.size(); ++i)
        if (table.rows[i].instance_id == table.rows[i - 1].instance_id)
            throw DataError("duplicate instance id " + table.rows[i].instance_id);
    write_file(out, write_feature_csv(table));
    if (files.empty()) {
        std::cerr << "warning: no .tsp files in " << dir << "; wrote header only\n";
        return kData;
    }
    return failed ? kData : kOk;
}

PerformanceTable load_performance(const Globals& g, const std::string& text) {
    try {
        return build_performance_table(read_performance_csv(text, g.cutoff), g.penalty);
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
}

/// Restricts the table to the feature rows (in their order) and fails on ids
/// without performance data.
PerformanceTable align(const PerformanceTable& perf, const FeatureTable& features) {
    std::vector<std::size_t> idx;
    std::vector<std::string> missing;
    for (const auto& r : features.rows) {
        if (auto i = perf.find(r.instance_id)) idx.push_back(*i);
        else missing.push_back(r.instance_id);
    }
    if (!missing.empty()) {
        std::string msg = "no performance data for instance(s):";
        for (const auto& id : missing) msg += " " + id;
        throw DataError(msg);
    }
    return perf.subset(idx);
}

/// Feature rows reordered to the table's (sorted) instance order.
FeatureTable reorder(const FeatureTable& features, const PerformanceTable& table) {
    std::map<std::string, const FeatureRow*> by_id;
    for (const auto& r : features.rows)
        if (!by_id.emplace(r.instance_id, &r).second) throw DataError("duplicate feature row " + r.instance_id);
    FeatureTable out{features.names, {}};
    for (const auto& row : table.rows()) out.rows.push_back(*by_id.at(row.instance_id));
    return out;
}

int cmd_rank(const Globals& g, const fs::path& features_csv, const fs::path& perf_csv,
             const std::optional<fs::path>& labels_csv, std::size_t top, const std::string& subset,
             const fs::path& out) {
    std::optional<HardnessMode> mode;
    std::size_t m = 0;
    if (subset != "all") {
        if (subset.size() < 2 || (subset[0] != 'r' && subset[0] != 's') ||
            !detail::parse_int(std::string_view(subset).substr(1), m) || m == 0)
            throw UsageError("--subset must be all, r<m> or s<m> (e.g. r300)");
        mode = subset[0] == 'r' ? HardnessMode::Par10Ratio : HardnessMode::Par10Score;
    }
    const auto features = read_feature_csv(read_input(features_csv));
    const auto table = align(load_performance(g, read_input(perf_csv)), features);
    const auto ft = reorder(features, table);
    auto labels = table.best_labels();
    if (labels_csv) {
        const auto doc = csv::parse(read_input(*labels_csv));
        if (doc.header != std::vector<std::string>{"instance_id", "label"})
            throw DataError("labels CSV header must be instance_id,label");
        for (const auto& rec : doc.records) {
            const auto i = table.find(rec.fields[0]);
            if (!i) throw DataError("label for unknown instance " + rec.fields[0]);
            if (rec.fields.size() != 2) throw DataError("labels CSV line " + std::to_string(rec.line) + ": expected 2 fields");
            Solver s;
            try {
                s = parse_solver(rec.fields[1]);
            } catch (const std::exception&) {
                throw DataError("labels CSV line " + std::to_string(rec.line) + ": unknown solver " + rec.fields[1]);
            }
            if (s != labels[*i])
                std::cerr << "warning: explicit label " << rec.fields[1] << " for " << rec.fields[0]
                          << " overrides performance-derived " << to_string(labels[*i]) << "\n";
            labels[*i] = s;
        }
    }
    std::vector<std::size_t> rows(table.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    if (mode) {
        try {
            rows = hardest_subset(table, *mode, m);
        } catch (const std::invalid_argument& e) {
            throw DataError(std::string("subset ") + subset + ": " + e.what());
        }
    }
    std::vector<std::vector<double>> cols(ft.names.size());
    std::vector<Solver> y;
    for (auto r : rows) {
        y.push_back(labels[r]);
        for (std::size_t j = 0; j < ft.names.size(); ++j) cols[j].push_back(ft.rows[r].values[j]);
    }
    FeatureRanking ranking;
    try {
        ranking = rank_features(cols, ft.names, y, top);
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
    write_file(out, write_ranking_csv(ranking));
    return kOk;
}

int cmd_render(const Globals& g, const fs::path& dir, const fs::path& out, const std::string& roles_arg,
               std::size_t size, std::size_t k, bool pgm) {
    std::vector<ChannelRole> roles;
    try {
        roles = parse_roles(roles_arg);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (size < 2) throw UsageError("--size must be >= 2");
    const auto files = instance_files(dir);
    std::vector<std::string> errors(files.size());
    fs::create_directories(out);
    parallel_for(files.size(), g.jobs, [&](std::size_t i) {
        try {
            const auto inst = load_tsplib(files[i]);
            const auto img = render(inst, roles, size, size, k);
            save_tensor(img, out / (inst.id + ".tensor"));
            if (pgm)
                for (std::size_t c = 0; c < img.channels; ++c)
                    export_pgm(img, c, out / (inst.id + "_" + std::string(to_string(img.roles[c])) + ".pgm"));
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    std::size_t failed = 0;
    for (std::size_t i = 0; i < files.size(); ++i)
        if (!errors[i].empty()) {
            std::cerr << "error: " << files[i].string() << ": " << errors[i] << "\n";
            ++failed;
        }
    if (files.empty()) std::cerr << "warning: no .tsp files in " << dir << "\n";
    return failed || files.empty() ? kData : kOk;
}

FoldAssignment load_or_make_folds(const std::optional<fs::path>& folds_csv, const PerformanceTable& table,
                                  std::size_t n_folds, std::uint64_t seed, Manifest& man) {
    if (!folds_csv) return make_folds(table.best_labels(), n_folds, seed);
    const auto text = read_input(*folds_csv);
    man.add_input("folds", text);
    return read_fold_csv(text, table);
}

int cmd_evaluate(const Globals& g, const fs::path& features_csv, const fs::path& perf_csv, const fs::path& config,
                 const std::optional<fs::path>& folds_csv, const fs::path& out) {
    Manifest man;
    man.command = "evaluate";
    man.seed = g.seed;
    man.cutoff = g.cutoff;
    man.penalty = g.penalty;
    const auto ftext = read_input(features_csv), ptext = read_input(perf_csv), ctext = read_input(config);
    man.add_input("features", ftext);
    man.add_input("perf", ptext);
    man.add_input("config", ctext);

    const auto kv = KeyValueConfig::parse(ctext);
    auto cfg = experiment_config_from(kv);
    if (!kv.has("seed")) cfg.seed = g.seed;
    man.config = kv.values();
    man.config["seed"] = std::to_string(cfg.seed);

    const auto features = read_feature_csv(ftext);
    const auto table = align(load_performance(g, ptext), features);
    const auto ft = reorder(features, table);
    const auto folds = load_or_make_folds(folds_csv, table, cfg.n_folds, cfg.seed, man);

    FeatureMatrix X(table.size(), ft.names.size());
    std::vector<double> cost;
    for (std::size_t i = 0; i < table.size(); ++i) {
        for (std::size_t j = 0; j < ft.names.size(); ++j) X(i, j) = ft.rows[i].values[j];
        cost.push_back(ft.rows[i].cost_seconds);
    }
    const auto report = run_cv_selector(X, ft.names, table, cost, cfg, folds, g.jobs);
    ReportContext ctx{man.id(), man.config, json::object()};
    write_file(out, render_report(report, ctx));
    man.write(manifest_path_for(out));
    std::cerr << report.selector << ": mean PAR10 " << report.mean_par10 << ", gap closed "
              << (report.gap_closed ? std::to_string(*report.gap_closed) : "n/a") << "\n";
    return kOk;
}

struct CnnSettings {
    cnn::NetworkSpec spec;
    cnn::TrainConfig train;
    std::size_t n_folds = 10;
    double grid_step = 0.01;
};

CnnSettings cnn_settings_from(const KeyValueConfig& kv, std::size_t in_channels, std::uint64_t default_seed) {
    kv.require_known({"max_epochs", "patience", "lr", "batch_size", "seed", "n_folds", "threshold_grid_step",
                      "dropout", "groups", "blocks", "width"});
    CnnSettings s;
    const auto blocks = kv.get_uint("blocks", 8), width = kv.get_uint("width", 0);
    if (blocks == 0 || blocks > 8) throw ConfigError("blocks must be in [1, 8]");
    s.spec = width == 0 && blocks == 8 ? cnn::NetworkSpec::standard(in_channels)
                                       : cnn::NetworkSpec::reduced(in_channels, blocks, width == 0 ? 32 : width);
    s.spec.groups = kv.get_uint("groups", s.spec.groups);
    s.spec.dropout = kv.get_double("dropout", s.spec.dropout);
    try {
        s.spec.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    s.train.max_epochs = kv.get_uint("max_epochs", s.train.max_epochs);
    s.train.patience = kv.get_uint("patience", s.train.patience);
    s.train.adam.lr = kv.get_double("lr", s.train.adam.lr);
    s.train.batch_size = kv.get_uint("batch_size", s.train.batch_size);
    s.train.seed = kv.get_uint("seed", default_seed);
    s.n_folds = kv.get_uint("n_folds", s.n_folds);
    s.grid_step = kv.get_double("threshold_grid_step", s.grid_step);
    if (s.train.batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (s.n_folds < 3) throw ConfigError("n_folds must be >= 3");
    return s;
}

int cmd_train_cnn(const Globals& g, const fs::path& tensors, const fs::path& perf_csv, const fs::path& config,
                  const std::optional<fs::path>& folds_csv, const std::optional<std::string>& channels,
                  const fs::path& out) {
    Manifest man;
    man.command = "train-cnn";
    man.seed = g.seed;
    man.cutoff = g.cutoff;
    man.penalty = g.penalty;
    const auto ptext = read_input(perf_csv), ctext = read_input(config);
    man.add_input("perf", ptext);
    man.add_input("config", ctext);
    const auto table = load_performance(g, ptext);

    std::vector<ImageTensor> images;
    std::vector<std::string> missing;
    images.reserve(table.size());
    for (const auto& row : table.rows()) {
        const auto path = tensors / (row.instance_id + ".tensor");
        if (!fs::exists(path)) {
            missing.push_back(row.instance_id);
            continue;
        }
        const auto bytes = read_input(path);
        man.add_input("tensor:" + row.instance_id, bytes);
        try {
            images.push_back(decode_tensor(bytes));
        } catch (const std::exception& e) {
            throw DataError(path.string() + ": " + e.what());
        }
    }
    if (!missing.empty()) {
        std::string msg = "no tensor file for instance(s):";
        for (const auto& id : missing) msg += " " + id;
        throw DataError(msg);
    }
    if (images.empty()) throw DataError("no instances in " + perf_csv.string());
    const auto& first = images.front();
    for (const auto& img : images)
        if (img.channels != first.channels || img.height != first.height || img.width != first.width ||
            img.roles != first.roles)
            throw DataError("tensor " + img.id + " differs in shape or channel roles from " + first.id);
    if (channels) {
        std::vector<ChannelRole> want;
        try {
            want = parse_roles(*channels);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        if (want != first.roles) throw DataError("--channels " + *channels + " does not match the tensor channels");
    }

    const auto kv = KeyValueConfig::parse(ctext);
    auto s = cnn_settings_from(kv, first.channels, g.seed);
    s.train.jobs = g.jobs;
    man.config = kv.values();
    man.config["seed"] = std::to_string(s.train.seed);
    const auto folds = load_or_make_folds(folds_csv, table, s.n_folds, s.train.seed, man);

    std::vector<const ImageTensor*> ptrs;
    for (const auto& img : images) ptrs.push_back(&img);
    std::string name = "cnn-";
    for (std::size_t c = 0; c < first.roles.size(); ++c) name += (c ? "+" : "") + std::string(to_string(first.roles[c]));
    const auto result = cnn::run_cnn_cv(ptrs, table, folds, s.spec, s.train, s.grid_step, name);

    fs::create_directories(out);
    const auto id = man.id();
    json extra = {{"best_epochs", json::array()}};
    for (std::size_t f = 0; f < result.fold_params.size(); ++f) {
        write_file(out / ("fold_" + std::to_string(f) + ".ckpt"),
                   cnn::encode_checkpoint(result.fold_params[f], derive_seed(s.train.seed, f), "manifest " + id));
        write_file(out / ("fold_" + std::to_string(f) + "_log.csv"), cnn::training_log_csv(result.histories[f]));
        std::size_t best = 0;
        double best_val = std::numeric_limits<double>::infinity();
        for (const auto& e : result.histories[f])
            if (e.val_loss && *e.val_loss < best_val) {
                best_val = *e.val_loss;
                best = e.epoch;
            }
        extra["best_epochs"].push_back(best);
    }
    ReportContext ctx{id, man.config, extra};
    write_file(out / "report.json", render_report(result.report, ctx));
    man.write(out / "report.manifest.json");
    std::cerr << result.report.selector << ": mean PAR10 " << result.report.mean_par10 << ", gap closed "
              << (result.report.gap_closed ? std::to_string(*result.report.gap_closed) : "n/a") << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tspas: per-instance algorithm selection for Euclidean TSP (EAX vs LKH)"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);
    Globals g;
    app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
    app.add_option("--jobs", g.jobs, "Worker threads (results do not depend on it)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app.add_option("--cutoff-T", g.cutoff, "Solver cutoff in seconds")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--penalty-factor", g.penalty, "PAR penalty factor")->capture_default_str()->check(CLI::PositiveNumber);

    std::function<int()> run;

    auto* gen = app.add_subcommand("generate", "Write the synthetic clustered/uniform corpus and perf.csv");
    fs::path gen_out;
    SyntheticConfig syn;
    gen->add_option("out-dir", gen_out)->required();
    gen->add_option("--n", syn.n_instances, "Number of instances")->capture_default_str();
    gen->add_option("--nodes", syn.nodes, "Nodes per instance")->capture_default_str();
    gen->add_option("--runs", syn.runs, "Runs per solver")->capture_default_str();
    gen->add_option("--slowdown", syn.slowdown, "Runtime factor of the slower solver")->capture_default_str();
    gen->callback([&] { run = [&] { return cmd_generate(g, gen_out, syn); }; });

    auto* feat = app.add_subcommand("features", "Compute MST / nearest-neighbour features for a directory of .tsp files");
    fs::path feat_dir, feat_out;
    std::size_t feat_k = 5;
    feat->add_option("instances-dir", feat_dir)->required();
    feat->add_option("out-csv", feat_out)->required();
    feat->add_option("--k", feat_k, "Neighbours in the k-NN graph")->capture_default_str()->check(CLI::PositiveNumber);
    feat->callback([&] { run = [&] { return cmd_features(g, feat_dir, feat_out, feat_k); }; });

    auto* rank = app.add_subcommand("rank", "Rank features by Wilcoxon-Mann-Whitney p-value");
    fs::path rank_features_csv, rank_perf, rank_out;
    std::optional<fs::path> rank_labels;
    std::size_t rank_top = 15;
    std::string rank_subset = "all";
    rank->add_option("features-csv", rank_features_csv)->required();
    rank->add_option("perf-csv", rank_perf)->required();
    rank->add_option("--labels", rank_labels, "instance_id,label CSV; overrides performance-derived labels");
    rank->add_option("--top", rank_top)->capture_default_str()->check(CLI::PositiveNumber);
    rank->add_option("--subset", rank_subset, "all, r150, r300, s150, s300 (r = PAR10 ratio, s = PAR10 score)")
        ->capture_default_str();
    rank->add_option("--out", rank_out)->required();
    rank->callback([&] {
        run = [&] { return cmd_rank(g, rank_features_csv, rank_perf, rank_labels, rank_top, rank_subset, rank_out); };
    });

    auto* rend = app.add_subcommand("render", "Rasterise instances to tensors and PGM images");
    fs::path rend_dir, rend_out;
    std::string rend_roles = "points,mst,nng";
    std::size_t rend_size = 512, rend_k = 5;
    bool no_pgm = false;
    rend->add_option("instances-dir", rend_dir)->required();
    rend->add_option("out-dir", rend_out)->required();
    rend->add_option("--roles", rend_roles)->capture_default_str();
    rend->add_option("--size", rend_size)->capture_default_str();
    rend->add_option("--k", rend_k, "Neighbours for the nng channel")->capture_default_str()->check(CLI::PositiveNumber);
    rend->add_flag("--no-pgm", no_pgm, "Write tensors only");
    rend->callback([&] { run = [&] { return cmd_render(g, rend_dir, rend_out, rend_roles, rend_size, rend_k, !no_pgm); }; });

    auto* eval = app.add_subcommand("evaluate", "Cross-validated feature-based selector");
    fs::path eval_features, eval_perf, eval_config, eval_out;
    std::optional<fs::path> eval_folds;
    eval->add_option("features-csv", eval_features)->required();
    eval->add_option("perf-csv", eval_perf)->required();
    eval->add_option("config", eval_config)->required();
    eval->add_option("--folds", eval_folds, "instance_id,fold CSV (default: stratified folds from the seed)");
    eval->add_option("--out", eval_out, "Report JSON; the manifest is written next to it")->required();
    eval->callback([&] {
        run = [&] { return cmd_evaluate(g, eval_features, eval_perf, eval_config, eval_folds, eval_out); };
    });

    auto* tcnn = app.add_subcommand("train-cnn", "Cross-validated image-based selector");
    fs::path tcnn_dir, tcnn_perf, tcnn_config, tcnn_out;
    std::optional<fs::path> tcnn_folds;
    std::optional<std::string> tcnn_channels;
    tcnn->add_option("tensors-dir", tcnn_dir)->required();
    tcnn->add_option("perf-csv", tcnn_perf)->required();
    tcnn->add_option("config", tcnn_config)->required();
    tcnn->add_option("--folds", tcnn_folds, "instance_id,fold CSV (default: stratified folds from the seed)");
    tcnn->add_option("--channels", tcnn_channels, "Expected channel roles, e.g. points or points,mst");
    tcnn->add_option("--out", tcnn_out, "Output directory for checkpoints, logs and report")->required();
    tcnn->callback([&] {
        run = [&] { return cmd_train_cnn(g, tcnn_dir, tcnn_perf, tcnn_config, tcnn_folds, tcnn_channels, tcnn_out); };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }
    try {
        return run();
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kData;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kData;
    } catch (const csv::CsvError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kData;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kInternal;
    }
}
