#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mal/align.hpp"
#include "mal/data.hpp"
#include "mal/errors.hpp"
#include "mal/merge.hpp"
#include "mal/nn.hpp"
#include "mal/parallel.hpp"

namespace mal {

/// Loss/accuracy samples of the merged path over an ascending λ grid that
/// includes both endpoints. loss_a/loss_b are the endpoint losses of the two
/// lifted models; losses[0] always equals loss_a, and losses.back() equals
/// loss_b exactly when the mask is full and both models lift losslessly.
struct BarrierCurve {
    std::vector<double> lambdas;
    std::vector<double> losses;
    std::vector<double> accuracies;
    double loss_a = 0.0;
    double loss_b = 0.0;
    std::string dataset_id;
    std::string split;

    void validate() const {
        if (lambdas.size() < 2) throw ConfigError("barrier curve needs at least two grid points");
        if (lambdas.front() != 0.0 || lambdas.back() != 1.0)
            throw ConfigError("barrier curve grid must span [0, 1]");
        for (std::size_t i = 1; i < lambdas.size(); ++i)
            if (!(lambdas[i] > lambdas[i - 1]))
                throw ConfigError("barrier curve grid must be strictly ascending");
        if (losses.size() != lambdas.size() || accuracies.size() != lambdas.size())
            throw ConfigError("barrier curve sample counts do not match the grid");
    }
};

/// Uniform λ grid with `points` samples including 0 and 1.
inline std::vector<double> uniform_grid(int points) {
    if (points < 2) throw ConfigError("grid needs at least 2 points, got " + std::to_string(points));
    std::vector<double> grid(points);
    for (int i = 0; i < points; ++i) grid[i] = static_cast<double>(i) / (points - 1);
    return grid;
}

/// Evaluates merge_convex at every grid point on the given dataset. Grid
/// points are independent, so evaluation fans out over `threads`; the curve
/// keeps grid order either way.
inline BarrierCurve sweep(const ModelCheckpoint& base, const ModelCheckpoint& target,
                          const InterfacePlan& plan, const std::vector<bool>& layer_mask,
                          const Dataset& data, const std::vector<double>& grid,
                          const std::string& split = "", int threads = 1) {
    if (grid.size() < 2 || grid.front() != 0.0 || grid.back() != 1.0)
        throw ConfigError("sweep: grid must include the endpoints 0 and 1");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw ConfigError("sweep: grid must be strictly ascending");

    BarrierCurve curve;
    curve.lambdas = grid;
    curve.losses.resize(grid.size());
    curve.accuracies.resize(grid.size());
    curve.dataset_id = data.name;
    curve.split = split;

    // Surface precondition violations (plan/mask/boundary) before the sweep.
    ModelCheckpoint probe = merge_convex(base, target, plan, 0.0, layer_mask);
    (void)probe;

    parallel_for(static_cast<int>(grid.size()), threads, [&](int i) {
        try {
            const ModelCheckpoint merged = merge_convex(base, target, plan, grid[i], layer_mask);
            auto [loss, acc] = loss_and_accuracy(merged, data);
            curve.losses[i] = loss;
            curve.accuracies[i] = acc;
        } catch (const Error& e) {
            throw NumericError("sweep at lambda=" + std::to_string(grid[i]) + ": " + e.what());
        }
    });

    curve.loss_a = curve.losses.front();
    if (base.num_classes() == target.num_classes()) {
        const ModelCheckpoint lifted_target = lift_model(target, plan.p);
        curve.loss_b = loss_and_accuracy(lifted_target, data, threads).first;
    } else {
        // The target head is not evaluable on this dataset; use the λ=1 loss.
        curve.loss_b = curve.losses.back();
    }
    curve.validate();
    return curve;
}

/// Loss barrier: max_λ losses(λ) − ½(loss_a + loss_b). May be negative;
/// callers report the raw and the zero-clamped value separately.
inline double loss_barrier(const BarrierCurve& curve) {
    curve.validate();
    const double peak = *std::max_element(curve.losses.begin(), curve.losses.end());
    return peak - 0.5 * (curve.loss_a + curve.loss_b);
}

/// Trapezoidal area under the loss curve over λ ∈ [0, 1].
inline double aulc(const BarrierCurve& curve) {
    curve.validate();
    double area = 0.0;
    for (std::size_t i = 1; i < curve.lambdas.size(); ++i)
        area += (curve.lambdas[i] - curve.lambdas[i - 1]) *
                0.5 * (curve.losses[i] + curve.losses[i - 1]);
    return area;
}

/// AULC of the aligned curve relative to the naive (identity-alignment,
/// zero-padded) curve on the same grid. Below 1 means matching beat naive.
inline double aulc_ratio(const BarrierCurve& curve, const BarrierCurve& naive) {
    if (curve.lambdas != naive.lambdas)
        throw ConfigError("aulc_ratio: curves were sampled on different grids");
    const double denominator = aulc(naive);
    if (denominator == 0.0) throw NumericError("aulc_ratio: naive AULC is zero, ratio undefined");
    return aulc(curve) / denominator;
}

/// Merging-factor threshold λ*: the largest grid value such that every loss up
/// to it stays within (1 + epsilon_rel) of the λ=0 loss; 0 when even the first
/// step off the base violates the budget.
inline double merging_threshold(const BarrierCurve& curve, double epsilon_rel) {
    curve.validate();
    if (!(epsilon_rel > 0.0)) throw ConfigError("merging_threshold: epsilon_rel must be positive");
    const double budget = curve.losses.front() * (1.0 + epsilon_rel);
    std::size_t last_ok = 0;
    while (last_ok + 1 < curve.losses.size() && curve.losses[last_ok + 1] <= budget) ++last_ok;
    return curve.lambdas[last_ok];
}

/// f64 rendered with 9 significant digits — the curve CSV number format.
inline std::string format_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

/// CSV schema: header `lambda,loss,accuracy`, one row per grid point.
inline void write_curve_csv(std::ostream& out, const BarrierCurve& curve) {
    out << "lambda,loss,accuracy\n";
    for (std::size_t i = 0; i < curve.lambdas.size(); ++i)
        out << format_g9(curve.lambdas[i]) << ',' << format_g9(curve.losses[i]) << ','
            << format_g9(curve.accuracies[i]) << '\n';
}

inline nlohmann::json curve_to_json(const BarrierCurve& curve) {
    return {{"lambdas", curve.lambdas},
            {"losses", curve.losses},
            {"accuracies", curve.accuracies},
            {"loss_a", curve.loss_a},
            {"loss_b", curve.loss_b},
            {"dataset_id", curve.dataset_id},
            {"split", curve.split}};
}

/// The metrics block shared by sweep reports and assembly step reports.
inline nlohmann::json sweep_report_json(const BarrierCurve& curve, const BarrierCurve& naive,
                                        double epsilon_rel) {
    const double barrier = loss_barrier(curve);
    nlohmann::json j;
    j["dataset_id"] = curve.dataset_id;
    j["split"] = curve.split;
    j["grid_size"] = curve.lambdas.size();
    j["epsilon_rel"] = epsilon_rel;
    j["loss_a"] = curve.loss_a;
    j["loss_b"] = curve.loss_b;
    j["barrier"] = barrier;
    j["barrier_clamped"] = std::max(0.0, barrier);
    j["barrier_naive"] = loss_barrier(naive);
    j["aulc"] = aulc(curve);
    j["aulc_naive"] = aulc(naive);
    j["aulc_ratio"] = aulc_ratio(curve, naive);
    j["aulc_diff"] = aulc(curve) - aulc(naive);
    j["lambda_star"] = merging_threshold(curve, epsilon_rel);
    j["lambda_star_naive"] = merging_threshold(naive, epsilon_rel);
    return j;
}

} // namespace mal
