// mal — train small dense classifiers, align heterogeneous checkpoints with
// generalized permutations, merge them layer-selectively, and measure linear
// mode connectivity. Subcommands: train, match, merge, sweep, assemble,
// zoo-build, grid, heatmap.
//
// Exit codes: 0 success, 2 usage/config, 3 numeric failure, 4 I/O or format.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mal/assemble.hpp"
#include "mal/align.hpp"
#include "mal/data.hpp"
#include "mal/errors.hpp"
#include "mal/heatmap.hpp"
#include "mal/lmc.hpp"
#include "mal/merge.hpp"
#include "mal/nn.hpp"
#include "mal/zoo.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw mal::IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw mal::IoError("write failed for " + path.string());
}

std::vector<bool> parse_mask(const std::string& s) {
    std::vector<bool> mask;
    std::stringstream ss(s);
    std::string field;
    while (std::getline(ss, field, ',')) {
        if (field == "1" || field == "true")
            mask.push_back(true);
        else if (field == "0" || field == "false")
            mask.push_back(false);
        else
            throw mal::ConfigError("mask entries must be 0/1, got '" + field + "'");
    }
    if (mask.empty()) throw mal::ConfigError("empty layer mask");
    return mask;
}

std::vector<int> parse_widths(const std::string& s) {
    std::vector<int> widths;
    std::stringstream ss(s);
    std::string field;
    while (std::getline(ss, field, ',')) {
        try {
            widths.push_back(std::stoi(field));
        } catch (const std::exception&) {
            throw mal::ConfigError("widths must be integers, got '" + field + "'");
        }
    }
    return widths;
}

/// Dataset selection flags shared by every data-consuming subcommand. Known
/// names resolve under --data-root; unknown names require explicit IDX files.
struct DataFlags {
    std::string dataset;
    std::string split = "test";
    std::string data_root = ".";
    std::string images, labels;
    int classes = 10;
    int subsample = 0;
    std::uint64_t seed = 0;

    void add_to(CLI::App* cmd, const std::string& default_split) {
        split = default_split;
        cmd->add_option("--dataset", dataset, "dataset name (mnist, fashion-mnist, cifar10, cifar100, cifar100-coarse, or a custom id)")->required();
        cmd->add_option("--split", split, "train or test")->capture_default_str();
        cmd->add_option("--data-root", data_root, "directory with the dataset files")
            ->envname("MAL_DATA_ROOT")
            ->capture_default_str();
        cmd->add_option("--images", images, "explicit IDX image file (overrides --data-root resolution)");
        cmd->add_option("--labels", labels, "explicit IDX label file");
        cmd->add_option("--classes", classes, "class count for explicit IDX files")->capture_default_str();
        cmd->add_option("--subsample", subsample,
                        "stratified subsample size, 0 = full split")->capture_default_str();
    }

    mal::Dataset load() const {
        mal::Dataset d;
        if (!images.empty() || !labels.empty()) {
            if (images.empty() || labels.empty())
                throw mal::ConfigError("--images and --labels must be given together");
            d = mal::load_idx_dataset(dataset, images, labels, classes);
        } else {
            d = mal::load_standard_dataset(data_root, dataset, split);
        }
        if (subsample > 0 && subsample < d.size())
            d = mal::subsample(d, subsample, mal::derive_seed(seed, "subsample"));
        d.validate();
        return d;
    }

    json echo() const {
        return {{"dataset", dataset}, {"split", split},      {"images", images},
                {"labels", labels},   {"classes", classes},  {"subsample", subsample}};
    }
};

mal::ModelCheckpoint load_checkpoint_near(const std::string& path, const fs::path& anchor) {
    if (fs::exists(path)) return mal::load_checkpoint(path);
    if (!anchor.empty()) {
        const fs::path alt = anchor.parent_path() / path;
        if (fs::exists(alt)) return mal::load_checkpoint(alt);
    }
    throw mal::IoError("checkpoint not found: " + path);
}

struct AlignFile {
    mal::AlignmentResult result;
    mal::ModelCheckpoint base;
    mal::ModelCheckpoint target;
};

AlignFile load_align_file(const fs::path& path) {
    const auto bytes = mal::read_file(path);
    json j;
    try {
        j = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw mal::FormatError(path.string() + " is not valid JSON: " + e.what());
    }
    AlignFile f;
    std::string base_path, target_path;
    f.result = mal::alignment_from_json(j, &base_path, &target_path);
    f.base = load_checkpoint_near(base_path, path);
    f.target = load_checkpoint_near(target_path, path);
    f.result.plan.validate_for(f.base, f.target);
    return f;
}

int run(int argc, char** argv) {
    CLI::App app{"mal — model assembly learning toolkit"};
    app.require_subcommand(1);

    // ------------------------------------------------------------------ train
    auto* train = app.add_subcommand("train", "train one dense classifier checkpoint");
    struct {
        std::string arch;
        DataFlags data;
        double lr = 1e-3;
        int epochs = 20;
        int batch_size = 32;
        std::uint64_t seed = 0;
        std::string out;
    } tr;
    train->add_option("--arch", tr.arch, "full widths, e.g. 784,64,64,10")->required();
    tr.data.add_to(train, "train");
    train->add_option("--lr", tr.lr, "learning rate")->capture_default_str();
    train->add_option("--epochs", tr.epochs)->capture_default_str();
    train->add_option("--batch-size", tr.batch_size)->capture_default_str();
    train->add_option("--seed", tr.seed)->capture_default_str();
    train->add_option("--out", tr.out, "checkpoint output path")->required();
    train->callback([&] {
        tr.data.seed = tr.seed;
        const mal::Dataset data = tr.data.load();
        const mal::ArchSpec arch = mal::ArchSpec::from_widths(parse_widths(tr.arch));
        const mal::Hyperparams hp{tr.lr, tr.epochs, tr.batch_size, tr.seed};
        const mal::ModelCheckpoint model = mal::train_sgd(arch, data, hp);
        if (fs::path(tr.out).has_parent_path())
            fs::create_directories(fs::path(tr.out).parent_path());
        mal::save_checkpoint(model, tr.out);
        std::cout << "trained " << arch.label() << " on " << data.name << " (" << data.size()
                  << " samples): loss " << mal::format_g9(model.meta.final_loss) << ", accuracy "
                  << mal::format_g9(model.meta.final_accuracy) << " -> " << tr.out << "\n";
    });

    // ------------------------------------------------------------------ match
    auto* match = app.add_subcommand("match", "align two checkpoints by weight matching");
    struct {
        std::string base, target, out;
        std::string engine = "auto";
        std::uint64_t seed = 0;
        int max_passes = 100;
        int max_rounds = 50;
        double tol = 1e-9;
    } ma;
    match->add_option("--base", ma.base)->required();
    match->add_option("--target", ma.target)->required();
    match->add_option("--engine", ma.engine, "auto|square|compatible|bidirectional")
        ->capture_default_str();
    match->add_option("--seed", ma.seed)->capture_default_str();
    match->add_option("--max-passes", ma.max_passes)->capture_default_str();
    match->add_option("--max-rounds", ma.max_rounds)->capture_default_str();
    match->add_option("--tol", ma.tol)->capture_default_str();
    match->add_option("--out", ma.out, "alignment JSON output")->required();
    match->callback([&] {
        const mal::ModelCheckpoint base = mal::load_checkpoint(ma.base);
        const mal::ModelCheckpoint target = mal::load_checkpoint(ma.target);
        mal::MatchOptions opt;
        opt.seed = ma.seed;
        opt.max_passes = ma.max_passes;
        opt.max_rounds = ma.max_rounds;
        opt.tol = ma.tol;
        const mal::AlignmentResult res =
            mal::weight_matching(base, target, mal::engine_from_name(ma.engine), opt);
        json j = mal::alignment_to_json(res, ma.base, ma.target);
        j["config"] = {{"engine", ma.engine},       {"seed", ma.seed}, {"max_passes", ma.max_passes},
                       {"max_rounds", ma.max_rounds}, {"tol", ma.tol}};
        write_text(ma.out, j.dump(2) + "\n");
        std::cout << "engine " << res.engine << ": objective " << mal::format_g9(res.objective)
                  << ", " << res.iterations << (res.engine == "bidirectional" ? " rounds" : " passes")
                  << (res.converged ? " (converged)" : " (budget exhausted)") << " -> " << ma.out
                  << "\n";
    });

    // ------------------------------------------------------------------ merge
    auto* merge = app.add_subcommand("merge", "convex-combine two aligned checkpoints");
    struct {
        std::string align, mask, out;
        double lambda = 0.5;
    } me;
    merge->add_option("--align", me.align, "alignment JSON from `mal match`")->required();
    merge->add_option("--lambda", me.lambda, "convex factor in [0,1]")->required();
    merge->add_option("--mask", me.mask, "per-layer merge mask, e.g. 1,1,0 (default: all layers)");
    merge->add_option("--out", me.out, "merged checkpoint output")->required();
    merge->callback([&] {
        const AlignFile f = load_align_file(me.align);
        const std::vector<bool> mask =
            me.mask.empty() ? mal::default_layer_mask(f.base, f.target) : parse_mask(me.mask);
        const mal::ModelCheckpoint merged =
            mal::merge_convex(f.base, f.target, f.result.plan, me.lambda, mask);
        if (fs::path(me.out).has_parent_path())
            fs::create_directories(fs::path(me.out).parent_path());
        mal::save_checkpoint(merged, me.out);
        std::cout << "merged at lambda " << mal::format_g9(me.lambda) << " -> " << me.out << "\n";
    });

    // ------------------------------------------------------------------ sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "sample the merging path and its LMC metrics");
    struct {
        std::string align, mask, out;
        DataFlags data;
        int grid = 21;
        double epsilon = 0.1;
        int threads = 1;
    } sw;
    sweep_cmd->add_option("--align", sw.align)->required();
    sw.data.add_to(sweep_cmd, "test");
    sweep_cmd->add_option("--grid", sw.grid, "lambda grid size")->capture_default_str();
    sweep_cmd->add_option("--epsilon", sw.epsilon, "relative loss budget for lambda*")
        ->capture_default_str();
    sweep_cmd->add_option("--mask", sw.mask, "per-layer merge mask");
    sweep_cmd->add_option("--threads", sw.threads)->capture_default_str();
    sweep_cmd->add_option("--out", sw.out, "curve CSV output (report JSON lands beside it)")
        ->required();
    sweep_cmd->callback([&] {
        const AlignFile f = load_align_file(sw.align);
        const mal::Dataset data = sw.data.load();
        const std::vector<bool> mask =
            sw.mask.empty() ? mal::default_layer_mask(f.base, f.target) : parse_mask(sw.mask);
        const std::vector<double> grid = mal::uniform_grid(sw.grid);
        const mal::BarrierCurve curve = mal::sweep(f.base, f.target, f.result.plan, mask, data,
                                                   grid, sw.data.split, sw.threads);
        const mal::InterfacePlan naive_plan =
            mal::InterfacePlan::canonical(f.base.arch.widths, f.target.arch.widths);
        const mal::BarrierCurve naive =
            mal::sweep(f.base, f.target, naive_plan, mask, data, grid, sw.data.split, sw.threads);

        std::ostringstream csv;
        mal::write_curve_csv(csv, curve);
        write_text(sw.out, csv.str());

        json report = mal::sweep_report_json(curve, naive, sw.epsilon);
        report["engine"] = f.result.engine;
        report["objective"] = f.result.objective;
        report["config"] = {{"align", sw.align}, {"grid", sw.grid},   {"epsilon", sw.epsilon},
                            {"mask", sw.mask},   {"data", sw.data.echo()}};
        fs::path report_path = fs::path(sw.out);
        report_path.replace_extension(".json");
        write_text(report_path, report.dump(2) + "\n");
        std::cout << "lambda_star " << mal::format_g9(report["lambda_star"].get<double>())
                  << ", aulc_ratio " << mal::format_g9(report["aulc_ratio"].get<double>())
                  << ", barrier " << mal::format_g9(report["barrier"].get<double>()) << " -> "
                  << sw.out << "\n";
    });

    // --------------------------------------------------------------- assemble
    auto* assemble_cmd = app.add_subcommand("assemble", "iteratively merge zoo candidates into a base");
    struct {
        std::string base, zoo, out, mask, save_model;
        std::string engine = "auto";
        DataFlags data;
        int budget = 10;
        int grid = 21;
        double epsilon = 0.1, min_lambda = 0.1, max_lambda = 0.5;
        std::uint64_t seed = 0;
        int threads = 1;
    } as;
    assemble_cmd->add_option("--base", as.base, "base checkpoint")->required();
    assemble_cmd->add_option("--zoo", as.zoo, "zoo directory (holds manifest.json)")->required();
    as.data.add_to(assemble_cmd, "test");
    assemble_cmd->add_option("--budget", as.budget, "max candidate evaluations")->capture_default_str();
    assemble_cmd->add_option("--grid", as.grid)->capture_default_str();
    assemble_cmd->add_option("--epsilon", as.epsilon)->capture_default_str();
    assemble_cmd->add_option("--min-lambda", as.min_lambda)->capture_default_str();
    assemble_cmd->add_option("--max-lambda", as.max_lambda)->capture_default_str();
    assemble_cmd->add_option("--engine", as.engine)->capture_default_str();
    assemble_cmd->add_option("--mask", as.mask, "fixed per-layer mask for every step");
    assemble_cmd->add_option("--seed", as.seed)->capture_default_str();
    assemble_cmd->add_option("--threads", as.threads)->capture_default_str();
    assemble_cmd->add_option("--save-model", as.save_model, "write the assembled checkpoint here");
    assemble_cmd->add_option("--out", as.out, "assembly report JSON (CSV lands beside it)")
        ->required();
    assemble_cmd->callback([&] {
        const auto t0 = std::chrono::steady_clock::now();
        as.data.seed = as.seed;
        mal::AssemblyState state;
        state.current = mal::load_checkpoint(as.base);
        state.base_dataset_id = state.current.meta.dataset_id.empty() ? as.data.dataset
                                                                      : state.current.meta.dataset_id;
        const mal::ZooManifest manifest = mal::load_manifest(as.zoo);
        const mal::Dataset eval_data = as.data.load();

        mal::AssembleConfig config;
        config.epsilon_rel = as.epsilon;
        config.min_lambda = as.min_lambda;
        config.max_lambda = as.max_lambda;
        config.grid_points = as.grid;
        config.seed = as.seed;
        config.engine = mal::engine_from_name(as.engine);
        if (!as.mask.empty()) config.layer_mask = parse_mask(as.mask);
        config.threads = as.threads;
        config.match.seed = as.seed;

        auto [final_state, report] =
            mal::assemble(std::move(state), manifest, as.zoo, eval_data, as.budget, config);

        json j;
        j["format"] = "mal-assemble";
        j["version"] = 1;
        j["base"] = {{"path", as.base},
                     {"arch", mal::arch_to_json(final_state.current.arch)},
                     {"dataset_id", final_state.base_dataset_id}};
        j["budget"] = as.budget;
        j["accepted"] = report.accepted;
        j["final_loss"] = report.final_loss;
        j["final_accuracy"] = report.final_accuracy;
        j["config"] = {{"epsilon", as.epsilon},       {"min_lambda", as.min_lambda},
                       {"max_lambda", as.max_lambda}, {"grid", as.grid},
                       {"engine", as.engine},         {"mask", as.mask},
                       {"seed", as.seed},             {"data", as.data.echo()}};
        json steps = json::array();
        for (const mal::StepReport& s : report.steps)
            steps.push_back(mal::step_report_json(s, as.epsilon));
        j["steps"] = steps;
        write_text(as.out, j.dump(2) + "\n");

        std::ostringstream csv;
        mal::write_assembly_csv(csv, report);
        fs::path csv_path = fs::path(as.out);
        csv_path.replace_extension(".csv");
        write_text(csv_path, csv.str());

        if (!as.save_model.empty()) mal::save_checkpoint(final_state.current, as.save_model);
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << "assembled " << report.accepted << "/" << report.steps.size()
                  << " candidates, final loss " << mal::format_g9(report.final_loss) << " -> "
                  << as.out << "\n";
        std::cerr << "total runtime: " << seconds << " s\n";
    });

    // --------------------------------------------------------------- zoo-build
    auto* zoo_build = app.add_subcommand("zoo-build", "train the experiment grid into a zoo");
    struct {
        std::vector<std::string> hidden;
        DataFlags data;
        std::vector<std::uint64_t> seeds{1, 2};
        std::vector<double> lrs{1e-4, 1e-3};
        int epochs = 10;
        int batch_size = 32;
        int heldout_subsample = 0;
        std::uint64_t seed = 0;
        int threads = 1;
        std::string out_dir;
    } zb;
    zoo_build->add_option("--hidden", zb.hidden, "hidden widths per arch, e.g. --hidden 64,64 --hidden 128,32")
        ->required();
    zb.data.add_to(zoo_build, "train");
    zoo_build->add_option("--seeds", zb.seeds)->delimiter(',')->capture_default_str();
    zoo_build->add_option("--lrs", zb.lrs)->delimiter(',')->capture_default_str();
    zoo_build->add_option("--epochs", zb.epochs)->capture_default_str();
    zoo_build->add_option("--batch-size", zb.batch_size)->capture_default_str();
    zoo_build->add_option("--heldout-subsample", zb.heldout_subsample,
                          "subsample size of the held-out split, 0 = full")->capture_default_str();
    zoo_build->add_option("--seed", zb.seed)->capture_default_str();
    zoo_build->add_option("--threads", zb.threads)->capture_default_str();
    zoo_build->add_option("--out-dir", zb.out_dir, "zoo directory")->required();
    zoo_build->callback([&] {
        zb.data.seed = zb.seed;
        DataFlags train_flags = zb.data;
        train_flags.split = "train";
        DataFlags heldout_flags = zb.data;
        heldout_flags.split = "test";
        heldout_flags.subsample = zb.heldout_subsample;
        if (!zb.data.images.empty())
            throw mal::ConfigError(
                "zoo-build needs both splits; use --data-root resolution, not --images");

        mal::ZooBuildConfig config;
        for (const std::string& h : zb.hidden) config.hidden_archs.push_back(parse_widths(h));
        config.datasets.push_back({zb.data.dataset, train_flags.load(), heldout_flags.load()});
        config.seeds = zb.seeds;
        config.learning_rates = zb.lrs;
        config.epochs = zb.epochs;
        config.batch_size = zb.batch_size;
        config.threads = zb.threads;
        const mal::ZooManifest manifest = mal::build_zoo(config, zb.out_dir);
        int ok = 0;
        for (const auto& e : manifest.entries)
            if (e.status == "ok") ++ok;
        std::cout << "zoo at " << zb.out_dir << ": " << ok << " checkpoints, "
                  << manifest.entries.size() - ok << " failed\n";
    });

    // ------------------------------------------------------------------- grid
    auto* grid_cmd = app.add_subcommand("grid", "all pairwise merges of a zoo -> pairs CSV");
    struct {
        std::string zoo, out, mask;
        DataFlags data;
        int grid = 21;
        double epsilon = 0.1;
        int pairs_per_cell = 0;
        std::uint64_t seed = 0;
        int threads = 1;
    } gr;
    grid_cmd->add_option("--zoo", gr.zoo)->required();
    gr.data.add_to(grid_cmd, "test");
    grid_cmd->add_option("--grid", gr.grid)->capture_default_str();
    grid_cmd->add_option("--epsilon", gr.epsilon)->capture_default_str();
    grid_cmd->add_option("--pairs-per-cell", gr.pairs_per_cell,
                         "cap on model pairs averaged per arch cell, 0 = all")->capture_default_str();
    grid_cmd->add_option("--mask", gr.mask);
    grid_cmd->add_option("--seed", gr.seed)->capture_default_str();
    grid_cmd->add_option("--threads", gr.threads)->capture_default_str();
    grid_cmd->add_option("--out", gr.out, "pairs CSV output")->required();
    grid_cmd->callback([&] {
        gr.data.seed = gr.seed;
        const mal::ZooManifest manifest = mal::load_manifest(gr.zoo);
        const mal::Dataset eval_data = gr.data.load();

        // distinct arch labels in manifest order; models grouped per label
        std::vector<std::string> arch_labels;
        std::map<std::string, std::vector<const mal::ZooEntry*>> by_arch;
        for (const mal::ZooEntry& e : manifest.entries) {
            if (e.status != "ok") continue;
            const std::string label = e.arch.label();
            if (!by_arch.count(label)) arch_labels.push_back(label);
            by_arch[label].push_back(&e);
        }
        if (arch_labels.empty()) throw mal::ConfigError("zoo has no loadable entries");

        std::map<std::string, mal::ModelCheckpoint> cache;
        auto model_of = [&](const mal::ZooEntry& e) -> const mal::ModelCheckpoint& {
            auto it = cache.find(e.id);
            if (it == cache.end())
                it = cache.emplace(e.id, mal::load_checkpoint(fs::path(gr.zoo) / e.path)).first;
            return it->second;
        };

        mal::MatchOptions match_opt;
        match_opt.seed = gr.seed;

        std::ostringstream csv;
        csv << "row_arch,col_arch,n_pairs,aulc,aulc_naive,aulc_ratio,aulc_diff,lambda_star,"
               "barrier\n";
        for (const std::string& row : arch_labels) {
            for (const std::string& col : arch_labels) {
                std::vector<std::pair<const mal::ZooEntry*, const mal::ZooEntry*>> pairs;
                for (const mal::ZooEntry* b : by_arch[row])
                    for (const mal::ZooEntry* t : by_arch[col])
                        if (b->id != t->id) pairs.push_back({b, t});
                if (gr.pairs_per_cell > 0 &&
                    static_cast<int>(pairs.size()) > gr.pairs_per_cell)
                    pairs.resize(gr.pairs_per_cell);
                if (pairs.empty()) continue;

                double sum_aulc = 0, sum_naive = 0, sum_ratio = 0, sum_diff = 0, sum_star = 0,
                       sum_barrier = 0;
                for (const auto& [b, t] : pairs) {
                    const mal::ModelCheckpoint& base = model_of(*b);
                    const mal::ModelCheckpoint& target = model_of(*t);
                    const mal::AlignmentResult alignment =
                        mal::weight_matching(base, target, mal::MatchEngine::Auto, match_opt);
                    const std::vector<bool> mask = gr.mask.empty()
                                                       ? mal::default_layer_mask(base, target)
                                                       : parse_mask(gr.mask);
                    const std::vector<double> grid_points = mal::uniform_grid(gr.grid);
                    const mal::BarrierCurve curve =
                        mal::sweep(base, target, alignment.plan, mask, eval_data, grid_points,
                                   gr.data.split, gr.threads);
                    const mal::BarrierCurve naive = mal::sweep(
                        base, target,
                        mal::InterfacePlan::canonical(base.arch.widths, target.arch.widths), mask,
                        eval_data, grid_points, gr.data.split, gr.threads);
                    sum_aulc += mal::aulc(curve);
                    sum_naive += mal::aulc(naive);
                    sum_ratio += mal::aulc_ratio(curve, naive);
                    sum_diff += mal::aulc(curve) - mal::aulc(naive);
                    sum_star += mal::merging_threshold(curve, gr.epsilon);
                    sum_barrier += mal::loss_barrier(curve);
                }
                const double n = static_cast<double>(pairs.size());
                csv << row << ',' << col << ',' << pairs.size() << ','
                    << mal::format_g9(sum_aulc / n) << ',' << mal::format_g9(sum_naive / n) << ','
                    << mal::format_g9(sum_ratio / n) << ',' << mal::format_g9(sum_diff / n) << ','
                    << mal::format_g9(sum_star / n) << ',' << mal::format_g9(sum_barrier / n)
                    << '\n';
                std::cerr << "grid cell " << row << " x " << col << ": " << pairs.size()
                          << " pairs done\n";
            }
        }
        write_text(gr.out, csv.str());
        std::cout << arch_labels.size() << "x" << arch_labels.size() << " grid -> " << gr.out
                  << "\n";
    });

    // ---------------------------------------------------------------- heatmap
    auto* heatmap_cmd = app.add_subcommand("heatmap", "render a pairs CSV as a static SVG heatmap");
    struct {
        std::string pairs, out;
        std::string metric = "aulc_ratio";
    } hm;
    heatmap_cmd->add_option("--pairs", hm.pairs, "pairs CSV from `mal grid`")->required();
    heatmap_cmd->add_option("--metric", hm.metric, "metric column to render")->capture_default_str();
    heatmap_cmd->add_option("--out", hm.out, "SVG output (data echo CSV lands beside it)")
        ->required();
    heatmap_cmd->callback([&] {
        std::ifstream in(hm.pairs);
        if (!in) throw mal::IoError("cannot open " + hm.pairs);
        const mal::HeatmapGrid grid = mal::heatmap_from_pairs_csv(in, hm.metric);
        write_text(hm.out, mal::render_heatmap_svg(grid));
        std::ostringstream csv;
        mal::write_heatmap_csv(csv, grid);
        fs::path csv_path = fs::path(hm.out);
        csv_path.replace_extension(".csv");
        write_text(csv_path, csv.str());
        std::cout << grid.values.rows << "x" << grid.values.cols << " heatmap -> " << hm.out
                  << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e); // prints the help text, exits 0
    } catch (const CLI::ParseError& e) {
        app.exit(e); // prints the parse error
        std::cerr << "run `mal --help` or `mal <subcommand> --help` for usage\n";
        return 2;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const mal::DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const mal::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const mal::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const mal::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const mal::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
