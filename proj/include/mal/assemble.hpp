#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mal/align.hpp"
#include "mal/data.hpp"
#include "mal/errors.hpp"
#include "mal/lmc.hpp"
#include "mal/merge.hpp"
#include "mal/nn.hpp"
#include "mal/zoo.hpp"

namespace mal {

/// Knobs of the assembly policy. A candidate is accepted when its merging
/// threshold λ* clears min_lambda; the merge then runs at the largest grid
/// value not above min(λ*, max_lambda), so the accepted model's loss stays
/// within (1 + epsilon_rel) of the base loss by construction.
struct AssembleConfig {
    double epsilon_rel = 0.1;
    double min_lambda = 0.1;
    double max_lambda = 0.5;
    int grid_points = 21;
    std::uint64_t seed = 0;
    MatchEngine engine = MatchEngine::Auto;
    std::optional<std::vector<bool>> layer_mask; // default: all layers, head guarded
    int threads = 1;
    MatchOptions match;
};

/// The growing base model plus the record of every accepted merge.
struct AssemblyState {
    ModelCheckpoint current;
    std::string base_dataset_id;
    std::vector<MergePlan> history;       // append-only
    std::vector<double> loss_history;     // base-dataset loss after each accepted step
};

struct StepReport {
    std::string candidate_id;
    bool failed = false;
    std::string error;
    bool accepted = false;
    std::string reject_reason;
    std::string engine;
    bool roles_swapped = false;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    double lambda_star = 0.0;
    double aulc_value = 0.0;
    double aulc_naive = 0.0;
    double aulc_ratio_value = 0.0;
    double barrier = 0.0;
    double chosen_lambda = std::numeric_limits<double>::quiet_NaN();
    std::optional<BarrierCurve> curve;
    std::optional<BarrierCurve> naive_curve;
};

namespace detail {

inline double snap_to_grid(const std::vector<double>& grid, double upper) {
    double best = grid.front();
    for (double g : grid)
        if (g <= upper) best = g;
    return best;
}

} // namespace detail

/// Evaluates one candidate against the current base: match (engine auto-picked
/// by width comparison unless configured), sweep the λ grid on the held-out
/// data, compute λ*, and accept or reject. On acceptance the merged model
/// becomes the new base and the step is appended to history; on evaluation
/// failure the state is left untouched and the step is marked failed.
inline std::pair<AssemblyState, StepReport> assemble_step(const AssemblyState& state,
                                                          const ModelCheckpoint& candidate,
                                                          const std::string& candidate_id,
                                                          const Dataset& eval_data,
                                                          const AssembleConfig& config) {
    StepReport report;
    report.candidate_id = candidate_id;

    const ModelCheckpoint& base = state.current;
    if (candidate.depth() != base.depth()) {
        report.reject_reason = "depth mismatch (" + std::to_string(base.depth()) + " vs " +
                               std::to_string(candidate.depth()) + " layers)";
        return {state, report};
    }
    if (candidate.input_dim() != base.input_dim()) {
        report.reject_reason = "input-dim mismatch (" + std::to_string(base.input_dim()) +
                               " vs " + std::to_string(candidate.input_dim()) + ")";
        return {state, report};
    }

    std::vector<bool> mask =
        config.layer_mask ? *config.layer_mask : default_layer_mask(base, candidate);
    if (static_cast<int>(mask.size()) != base.depth()) {
        report.reject_reason = "configured mask has " + std::to_string(mask.size()) +
                               " entries for " + std::to_string(base.depth()) + " layers";
        return {state, report};
    }
    if (base.num_classes() != candidate.num_classes()) mask.back() = false;

    try {
        const AlignmentResult alignment = weight_matching(base, candidate, config.engine,
                                                          config.match);
        report.engine = alignment.engine;
        report.roles_swapped = alignment.roles_swapped;
        report.objective = alignment.objective;
        report.iterations = alignment.iterations;
        report.converged = alignment.converged;

        const std::vector<double> grid = uniform_grid(config.grid_points);
        const BarrierCurve curve = sweep(base, candidate, alignment.plan, mask, eval_data, grid,
                                         "heldout", config.threads);
        const InterfacePlan naive_plan =
            InterfacePlan::canonical(base.arch.widths, candidate.arch.widths);
        const BarrierCurve naive = sweep(base, candidate, naive_plan, mask, eval_data, grid,
                                         "heldout", config.threads);

        report.lambda_star = merging_threshold(curve, config.epsilon_rel);
        report.aulc_value = aulc(curve);
        report.aulc_naive = aulc(naive);
        report.aulc_ratio_value = aulc_ratio(curve, naive);
        report.barrier = loss_barrier(curve);
        report.curve = curve;
        report.naive_curve = naive;

        if (report.lambda_star < config.min_lambda) {
            report.reject_reason = "lambda_star below min_lambda";
            return {state, report};
        }

        const double chosen =
            detail::snap_to_grid(grid, std::min(report.lambda_star, config.max_lambda));
        report.accepted = true;
        report.chosen_lambda = chosen;

        AssemblyState next = state;
        next.current = merge_convex(base, candidate, alignment.plan, chosen, mask);
        MergePlan record;
        record.base_id = base.meta.dataset_id.empty() ? "base" : base.meta.dataset_id;
        record.target_id = candidate_id;
        record.plan = alignment.plan;
        record.lambda = chosen;
        record.layer_mask = mask;
        next.history.push_back(std::move(record));
        next.loss_history.push_back(loss_and_accuracy(next.current, eval_data, config.threads).first);
        return {std::move(next), report};
    } catch (const Error& e) {
        report.failed = true;
        report.error = e.what();
        return {state, report};
    }
}

struct AssemblyReport {
    std::vector<StepReport> steps;
    int accepted = 0;
    double final_loss = 0.0;
    double final_accuracy = 0.0;
};

namespace detail {

/// Law-informed candidate ranking: same-dataset candidates first, then width
/// dominance (equal widths, base at least as wide, candidate wider, mixed),
/// manifest order last — deterministic for a fixed manifest.
inline std::vector<ZooEntry> rank_candidates(const AssemblyState& state,
                                             const std::vector<ZooEntry>& entries) {
    const std::vector<int>& base_widths = state.current.arch.widths;
    auto dominance = [&](const ZooEntry& e) {
        if (static_cast<int>(e.arch.widths.size()) != static_cast<int>(base_widths.size()))
            return 4;
        if (e.arch.widths == base_widths) return 0;
        bool base_wide = true, cand_wide = true;
        for (std::size_t l = 1; l + 1 < base_widths.size(); ++l) {
            if (base_widths[l] < e.arch.widths[l]) base_wide = false;
            if (e.arch.widths[l] < base_widths[l]) cand_wide = false;
        }
        if (base_wide) return 1;
        if (cand_wide) return 2;
        return 3;
    };
    std::vector<std::pair<std::pair<int, int>, std::size_t>> keyed;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const int ds_rank = entries[i].dataset_id == state.base_dataset_id ? 0 : 1;
        keyed.push_back({{ds_rank, dominance(entries[i])}, i});
    }
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<ZooEntry> ranked;
    for (const auto& [key, idx] : keyed) ranked.push_back(entries[idx]);
    return ranked;
}

} // namespace detail

/// Greedy assembly over a zoo: rank candidates by the law-informed heuristic,
/// then run assemble_step on each in order until the budget is exhausted.
/// Candidates are re-matched against the current (possibly grown) base.
inline std::pair<AssemblyState, AssemblyReport> assemble(AssemblyState state,
                                                         const ZooManifest& zoo,
                                                         const std::filesystem::path& zoo_dir,
                                                         const Dataset& eval_data, int budget,
                                                         const AssembleConfig& config) {
    AssemblyReport report;
    std::vector<ZooEntry> candidates = detail::rank_candidates(state, query(zoo, {}));
    int steps = 0;
    for (const ZooEntry& entry : candidates) {
        if (steps >= budget) break;
        ++steps;
        StepReport step;
        try {
            const ModelCheckpoint candidate = load_checkpoint(zoo_dir / entry.path);
            auto [next, s] = assemble_step(state, candidate, entry.id, eval_data, config);
            state = std::move(next);
            step = std::move(s);
        } catch (const Error& e) {
            step.candidate_id = entry.id;
            step.failed = true;
            step.error = e.what();
        }
        if (step.accepted) ++report.accepted;
        report.steps.push_back(std::move(step));
    }
    auto [loss, acc] = loss_and_accuracy(state.current, eval_data, config.threads);
    report.final_loss = loss;
    report.final_accuracy = acc;
    return {std::move(state), report};
}

inline nlohmann::json step_report_json(const StepReport& s, double epsilon_rel) {
    nlohmann::json j;
    j["candidate_id"] = s.candidate_id;
    j["failed"] = s.failed;
    if (s.failed) j["error"] = s.error;
    j["accepted"] = s.accepted;
    if (!s.accepted && !s.failed) j["reject_reason"] = s.reject_reason;
    if (!s.engine.empty()) {
        j["engine"] = s.engine;
        j["roles_swapped"] = s.roles_swapped;
        j["objective"] = s.objective;
        j["iterations"] = s.iterations;
        j["converged"] = s.converged;
    }
    if (s.curve && s.naive_curve) {
        j["metrics"] = sweep_report_json(*s.curve, *s.naive_curve, epsilon_rel);
        j["curve"] = curve_to_json(*s.curve);
        j["naive_losses"] = s.naive_curve->losses;
    }
    if (s.accepted) j["chosen_lambda"] = s.chosen_lambda;
    return j;
}

/// Per-candidate CSV row schema:
/// candidate_id,engine,objective,lambda_star,aulc,aulc_ratio,accepted,chosen_lambda
inline void write_assembly_csv(std::ostream& out, const AssemblyReport& report) {
    out << "candidate_id,engine,objective,lambda_star,aulc,aulc_ratio,accepted,chosen_lambda\n";
    for (const StepReport& s : report.steps) {
        out << s.candidate_id << ',' << s.engine << ',' << format_g9(s.objective) << ','
            << format_g9(s.lambda_star) << ',' << format_g9(s.aulc_value) << ','
            << format_g9(s.aulc_ratio_value) << ',' << (s.accepted ? "true" : "false") << ','
            << format_g9(s.chosen_lambda) << '\n';
    }
}

} // namespace mal
