#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mal/align.hpp"
#include "mal/errors.hpp"
#include "mal/nn.hpp"

namespace mal {

/// One accepted (or proposed) merge: identifies the endpoints, the alignment,
/// the convex factor and the per-layer selection mask (true = merge the layer,
/// false = keep the lifted base layer).
struct MergePlan {
    std::string base_id;
    std::string target_id;
    InterfacePlan plan;
    double lambda = 0.0;
    std::vector<bool> layer_mask;
};

/// All-layers mask; the final layer is forced off when the class counts of the
/// two models differ (cross-head merging is undefined, the base keeps its head).
inline std::vector<bool> default_layer_mask(const ModelCheckpoint& base,
                                            const ModelCheckpoint& target) {
    std::vector<bool> mask(base.depth(), true);
    if (base.num_classes() != target.num_classes()) mask.back() = false;
    return mask;
}

/// Convex combination of aligned checkpoints with per-layer selection.
/// Masked-true layers become (1-λ)·Q_l W_l^A Q_{l-1}ᵀ + λ·P_l W_l^B P_{l-1}ᵀ
/// (biases likewise); masked-false layers carry the lifted base weights
/// unchanged. The combine is computed as a + λ(b - a) in f64 with exact
/// branches at λ = 0 and λ = 1, then stored f32.
///
/// Preconditions: input dims equal; class counts equal or the final layer
/// masked off, in which case the result keeps the base head (its width stays
/// the base class count so the merged model remains evaluable on base data).
inline ModelCheckpoint merge_convex(const ModelCheckpoint& base, const ModelCheckpoint& target,
                                    const InterfacePlan& plan, double lambda,
                                    const std::vector<bool>& layer_mask) {
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw ConfigError("merge_convex: lambda must lie in [0, 1], got " + std::to_string(lambda));
    plan.validate_for(base, target);
    const int L = base.depth();
    if (static_cast<int>(layer_mask.size()) != L)
        throw ConfigError("merge_convex: mask has " + std::to_string(layer_mask.size()) +
                          " entries for " + std::to_string(L) + " layers");
    if (base.input_dim() != target.input_dim())
        throw ContractError("merge_convex: input dims differ (" +
                            std::to_string(base.input_dim()) + " vs " +
                            std::to_string(target.input_dim()) + ")");
    const bool keep_base_head = base.num_classes() != target.num_classes();
    if (keep_base_head && layer_mask.back())
        throw ContractError("merge_convex: class counts differ (" +
                            std::to_string(base.num_classes()) + " vs " +
                            std::to_string(target.num_classes()) +
                            "); the final layer must be masked off");

    std::vector<int> widths(L + 1);
    for (int l = 0; l <= L; ++l) widths[l] = plan.merged[l];
    if (keep_base_head) widths[L] = base.num_classes();

    ModelCheckpoint out;
    out.arch = ArchSpec::from_widths(widths);
    out.arch.activation = base.arch.activation;
    out.meta = base.meta; // merged model keeps the base lineage's metadata

    auto combine = [lambda](const MatD& a, const MatD& b) {
        MatD r(a.rows, a.cols);
        if (lambda == 0.0) {
            r = a;
        } else if (lambda == 1.0) {
            r = b;
        } else {
            for (std::size_t i = 0; i < a.data.size(); ++i)
                r.data[i] = a.data[i] + lambda * (b.data[i] - a.data[i]);
        }
        return r;
    };

    for (int l = 1; l <= L; ++l) {
        const Injection out_q =
            (l == L && keep_base_head) ? Injection::identity(base.num_classes()) : plan.q[l];
        const MatD lifted_a = apply_injection_pair(widen(base.weights[l - 1]), out_q, plan.q[l - 1]);
        const std::vector<double> lifted_ab = apply_injection(widen(base.biases[l - 1]), out_q);

        MatD w;
        std::vector<double> bvec;
        if (layer_mask[l - 1]) {
            const MatD lifted_b =
                apply_injection_pair(widen(target.weights[l - 1]), plan.p[l], plan.p[l - 1]);
            const std::vector<double> lifted_bb =
                apply_injection(widen(target.biases[l - 1]), plan.p[l]);
            w = combine(lifted_a, lifted_b);
            bvec.resize(lifted_ab.size());
            if (lambda == 0.0) {
                bvec = lifted_ab;
            } else if (lambda == 1.0) {
                bvec = lifted_bb;
            } else {
                for (std::size_t i = 0; i < bvec.size(); ++i)
                    bvec[i] = lifted_ab[i] + lambda * (lifted_bb[i] - lifted_ab[i]);
            }
        } else {
            w = lifted_a;
            bvec = lifted_ab;
        }

        MatF wf(w.rows, w.cols);
        for (std::size_t i = 0; i < w.data.size(); ++i)
            wf.data[i] = static_cast<float>(w.data[i]);
        std::vector<float> bf(bvec.size());
        for (std::size_t i = 0; i < bvec.size(); ++i) bf[i] = static_cast<float>(bvec[i]);
        out.weights.push_back(std::move(wf));
        out.biases.push_back(std::move(bf));
    }
    out.validate();
    return out;
}

} // namespace mal
