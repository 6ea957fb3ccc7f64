#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mal/data.hpp"
#include "mal/errors.hpp"
#include "mal/matrix.hpp"
#include "mal/parallel.hpp"
#include "mal/rng.hpp"

namespace mal {

enum class Activation { ReLU };

/// Hidden-width profile families used to organize the experiment grid.
enum class Family { Equal, WideToNarrow, NarrowToWide, Pyramid, InversePyramid, Other };

inline const char* family_name(Family f) {
    switch (f) {
        case Family::Equal: return "equal";
        case Family::WideToNarrow: return "wide_to_narrow";
        case Family::NarrowToWide: return "narrow_to_wide";
        case Family::Pyramid: return "pyramid";
        case Family::InversePyramid: return "inverse_pyramid";
        case Family::Other: return "other";
    }
    return "other";
}

inline Family family_from_name(std::string_view s) {
    if (s == "equal") return Family::Equal;
    if (s == "wide_to_narrow") return Family::WideToNarrow;
    if (s == "narrow_to_wide") return Family::NarrowToWide;
    if (s == "pyramid") return Family::Pyramid;
    if (s == "inverse_pyramid") return Family::InversePyramid;
    if (s == "other") return Family::Other;
    throw ConfigError("unknown family name '" + std::string(s) + "'");
}

/// Classifies a hidden-width sequence (d_1 … d_{L-1}). Equal: all widths the
/// same. WideToNarrow / NarrowToWide: weakly monotone with at least one strict
/// step. Pyramid / InversePyramid: unimodal with both directions present.
inline Family classify_family(const std::vector<int>& hidden) {
    if (hidden.empty()) throw ConfigError("classify_family: hidden-width list is empty");
    bool any_up = false, any_down = false;
    for (std::size_t i = 1; i < hidden.size(); ++i) {
        if (hidden[i] > hidden[i - 1]) any_up = true;
        if (hidden[i] < hidden[i - 1]) any_down = true;
    }
    if (!any_up && !any_down) return Family::Equal;
    if (!any_up) return Family::WideToNarrow;
    if (!any_down) return Family::NarrowToWide;
    bool down_seen = false, pyramid = true;
    for (std::size_t i = 1; i < hidden.size(); ++i) {
        if (hidden[i] < hidden[i - 1]) down_seen = true;
        if (hidden[i] > hidden[i - 1] && down_seen) pyramid = false;
    }
    if (pyramid) return Family::Pyramid;
    bool up_seen = false, inverse = true;
    for (std::size_t i = 1; i < hidden.size(); ++i) {
        if (hidden[i] > hidden[i - 1]) up_seen = true;
        if (hidden[i] < hidden[i - 1] && up_seen) inverse = false;
    }
    if (inverse) return Family::InversePyramid;
    return Family::Other;
}

/// Layer-width specification of a dense ReLU classifier:
/// widths = [d_0, d_1, …, d_L] with d_0 the input dim and d_L the class count.
struct ArchSpec {
    std::vector<int> widths;
    Activation activation = Activation::ReLU;
    Family family = Family::Other;

    int depth() const { return static_cast<int>(widths.size()) - 1; } // L
    int input_dim() const { return widths.front(); }
    int num_classes() const { return widths.back(); }

    std::vector<int> hidden_widths() const {
        return std::vector<int>(widths.begin() + 1, widths.end() - 1);
    }

    static ArchSpec from_widths(std::vector<int> w) {
        ArchSpec a;
        a.widths = std::move(w);
        a.validate_widths();
        a.family = classify_family(a.hidden_widths());
        return a;
    }

    void validate_widths() const {
        if (widths.size() < 3)
            throw ConfigError("arch needs at least [input, hidden, output] widths, got " +
                              std::to_string(widths.size()));
        for (int w : widths)
            if (w < 1) throw ConfigError("arch widths must be >= 1");
    }

    void validate() const {
        validate_widths();
        if (family != classify_family(hidden_widths()))
            throw ConfigError("arch family tag is inconsistent with its hidden widths");
    }

    /// "784-64-64-10" — used as ids in manifests, reports and heatmap axes.
    std::string label() const {
        std::string s;
        for (std::size_t i = 0; i < widths.size(); ++i) {
            if (i) s += '-';
            s += std::to_string(widths[i]);
        }
        return s;
    }

    bool operator==(const ArchSpec&) const = default;
};

struct TrainMeta {
    std::string dataset_id;
    std::uint64_t seed = 0;
    double learning_rate = 0.0;
    int epochs = 0;
    double final_loss = 0.0;
    double final_accuracy = 0.0;

    bool operator==(const TrainMeta&) const = default;
};

/// A trained (or initialized) dense classifier: the unit of merging.
/// weights[l-1] is W_l with shape d_l × d_{l-1}; biases[l-1] is b_l.
/// Tensors are stored f32; all numerics accumulate in f64.
struct ModelCheckpoint {
    ArchSpec arch;
    std::vector<MatF> weights;
    std::vector<std::vector<float>> biases;
    TrainMeta meta;

    int depth() const { return arch.depth(); }
    int input_dim() const { return arch.input_dim(); }
    int num_classes() const { return arch.num_classes(); }

    static ModelCheckpoint zeros(const ArchSpec& arch) {
        arch.validate();
        ModelCheckpoint m;
        m.arch = arch;
        for (int l = 1; l <= arch.depth(); ++l) {
            m.weights.emplace_back(arch.widths[l], arch.widths[l - 1], 0.0f);
            m.biases.emplace_back(arch.widths[l], 0.0f);
        }
        return m;
    }

    void validate() const {
        arch.validate();
        const int L = depth();
        if (static_cast<int>(weights.size()) != L || static_cast<int>(biases.size()) != L)
            throw ShapeError("checkpoint holds " + std::to_string(weights.size()) +
                             " weight tensors for depth " + std::to_string(L));
        for (int l = 1; l <= L; ++l) {
            const MatF& w = weights[l - 1];
            if (w.rows != arch.widths[l] || w.cols != arch.widths[l - 1])
                throw ShapeError("layer " + std::to_string(l) + " weights are " +
                                 std::to_string(w.rows) + "x" + std::to_string(w.cols) +
                                 ", arch expects " + std::to_string(arch.widths[l]) + "x" +
                                 std::to_string(arch.widths[l - 1]));
            if (static_cast<int>(biases[l - 1].size()) != arch.widths[l])
                throw ShapeError("layer " + std::to_string(l) + " bias has " +
                                 std::to_string(biases[l - 1].size()) + " entries, arch expects " +
                                 std::to_string(arch.widths[l]));
            if (!w.all_finite())
                throw NumericError("layer " + std::to_string(l) + " weights contain non-finite values");
            for (float b : biases[l - 1])
                if (!std::isfinite(b))
                    throw NumericError("layer " + std::to_string(l) + " bias contains non-finite values");
        }
    }

    bool operator==(const ModelCheckpoint&) const = default;
};

struct Hyperparams {
    double learning_rate = 1e-3;
    int epochs = 1;
    int batch_size = 32;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(learning_rate > 0.0 && learning_rate < 1.0))
            throw ConfigError("learning_rate must lie in (0, 1)");
        if (epochs < 0) throw ConfigError("epochs must be >= 0");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    }
};

namespace detail {

/// Single-sample forward pass filling post-activation vectors acts[0..L]
/// (acts[L] are the logits, no activation on the last layer).
template <typename Scalar>
inline void forward_sample(const ModelCheckpoint& m, const Scalar* x,
                           std::vector<std::vector<double>>& acts) {
    const int L = m.depth();
    acts.resize(L + 1);
    acts[0].assign(x, x + m.arch.widths[0]);
    for (int l = 1; l <= L; ++l) {
        const MatF& w = m.weights[l - 1];
        const std::vector<float>& b = m.biases[l - 1];
        const std::vector<double>& in = acts[l - 1];
        std::vector<double>& out = acts[l];
        out.assign(w.rows, 0.0);
        for (int j = 0; j < w.rows; ++j) {
            const float* wr = w.row_ptr(j);
            double acc = static_cast<double>(b[j]);
            for (int k = 0; k < w.cols; ++k) acc += static_cast<double>(wr[k]) * in[k];
            out[j] = (l < L && acc < 0.0) ? 0.0 : acc;
        }
    }
}

inline double log_sum_exp(const std::vector<double>& z) {
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    return m + std::log(s);
}

/// argmax with ties broken toward the lowest class index.
inline int argmax_lowest(const std::vector<double>& z) {
    int best = 0;
    for (int j = 1; j < static_cast<int>(z.size()); ++j)
        if (z[j] > z[best]) best = j;
    return best;
}

} // namespace detail

/// Batch forward pass: returns N × d_L logits.
inline MatD forward(const ModelCheckpoint& model, const MatD& inputs) {
    model.validate();
    if (inputs.cols != model.input_dim())
        throw ShapeError("forward: inputs have " + std::to_string(inputs.cols) +
                         " columns but layer 1 expects " + std::to_string(model.input_dim()));
    if (!inputs.all_finite()) throw NumericError("forward: inputs contain non-finite values");
    MatD logits(inputs.rows, model.num_classes());
    std::vector<std::vector<double>> acts;
    for (int i = 0; i < inputs.rows; ++i) {
        detail::forward_sample(model, inputs.row_ptr(i), acts);
        std::copy(acts.back().begin(), acts.back().end(), logits.row_ptr(i));
    }
    return logits;
}

inline MatD forward(const ModelCheckpoint& model, const MatF& inputs) {
    return forward(model, widen(inputs));
}

/// Mean softmax cross-entropy (log-sum-exp stabilized) and argmax accuracy
/// over a dataset. Samples are independent, so evaluation may fan out over
/// `threads`; the reduction order is fixed regardless.
inline std::pair<double, double> loss_and_accuracy(const ModelCheckpoint& model,
                                                   const Dataset& data, int threads = 1) {
    if (data.size() < 1) throw ConfigError("loss_and_accuracy: dataset is empty");
    if (data.num_classes != model.num_classes())
        throw ConfigError("loss_and_accuracy: dataset has " + std::to_string(data.num_classes) +
                          " classes but the model head has " +
                          std::to_string(model.num_classes()));
    if (data.input_dim() != model.input_dim())
        throw ShapeError("loss_and_accuracy: dataset dim " + std::to_string(data.input_dim()) +
                         " vs model input dim " + std::to_string(model.input_dim()));
    const int n = data.size();
    std::vector<double> losses(n);
    std::vector<std::uint8_t> correct(n);
    parallel_for(n, threads, [&](int i) {
        thread_local std::vector<std::vector<double>> acts;
        detail::forward_sample(model, data.features.row_ptr(i), acts);
        const std::vector<double>& z = acts.back();
        losses[i] = detail::log_sum_exp(z) - z[data.labels[i]];
        correct[i] = detail::argmax_lowest(z) == data.labels[i] ? 1 : 0;
    });
    double loss = 0.0;
    long hits = 0;
    for (int i = 0; i < n; ++i) {
        loss += losses[i];
        hits += correct[i];
    }
    return {loss / n, static_cast<double>(hits) / n};
}

/// Per-parameter gradients, same shapes as weights/biases, in f64.
struct Gradients {
    std::vector<MatD> weights;
    std::vector<std::vector<double>> biases;
};

/// Gradient of the mean cross-entropy over a batch w.r.t. every W_l and b_l.
/// If `mean_loss` is non-null it receives the batch loss from the same pass.
inline Gradients gradients(const ModelCheckpoint& model, const MatF& batch_inputs,
                           const std::vector<int>& batch_labels, double* mean_loss = nullptr) {
    const int L = model.depth();
    const int n = batch_inputs.rows;
    if (n < 1) throw ConfigError("gradients: batch is empty");
    if (batch_inputs.cols != model.input_dim())
        throw ShapeError("gradients: batch has " + std::to_string(batch_inputs.cols) +
                         " columns but layer 1 expects " + std::to_string(model.input_dim()));
    if (static_cast<int>(batch_labels.size()) != n)
        throw ShapeError("gradients: " + std::to_string(batch_labels.size()) + " labels for " +
                         std::to_string(n) + " inputs");
    for (int label : batch_labels)
        if (label < 0 || label >= model.num_classes())
            throw ConfigError("gradients: label " + std::to_string(label) + " outside [0, " +
                              std::to_string(model.num_classes()) + ")");

    Gradients g;
    for (int l = 1; l <= L; ++l) {
        g.weights.emplace_back(model.arch.widths[l], model.arch.widths[l - 1], 0.0);
        g.biases.emplace_back(model.arch.widths[l], 0.0);
    }

    std::vector<std::vector<double>> acts;
    double loss = 0.0;
    const double inv_n = 1.0 / n;
    for (int i = 0; i < n; ++i) {
        detail::forward_sample(model, batch_inputs.row_ptr(i), acts);
        const std::vector<double>& z = acts.back();
        const double lse = detail::log_sum_exp(z);
        loss += (lse - z[batch_labels[i]]) * inv_n;

        // delta at the output: softmax(z) - one_hot(label), scaled by 1/n.
        std::vector<double> delta(z.size());
        for (std::size_t j = 0; j < z.size(); ++j) delta[j] = std::exp(z[j] - lse) * inv_n;
        delta[batch_labels[i]] -= inv_n;

        for (int l = L; l >= 1; --l) {
            const MatF& w = model.weights[l - 1];
            const std::vector<double>& in = acts[l - 1];
            MatD& gw = g.weights[l - 1];
            std::vector<double>& gb = g.biases[l - 1];
            for (int j = 0; j < w.rows; ++j) {
                const double dj = delta[j];
                gb[j] += dj;
                double* gwr = gw.row_ptr(j);
                for (int k = 0; k < w.cols; ++k) gwr[k] += dj * in[k];
            }
            if (l > 1) {
                // ReLU gate: post-activation is positive iff pre-activation was.
                std::vector<double> prev(w.cols, 0.0);
                for (int j = 0; j < w.rows; ++j) {
                    const double dj = delta[j];
                    if (dj == 0.0) continue;
                    const float* wr = w.row_ptr(j);
                    for (int k = 0; k < w.cols; ++k) prev[k] += static_cast<double>(wr[k]) * dj;
                }
                for (int k = 0; k < w.cols; ++k)
                    if (in[k] <= 0.0) prev[k] = 0.0;
                delta = std::move(prev);
            }
        }
    }
    if (mean_loss) *mean_loss = loss;
    return g;
}

/// Seeded init: weights uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) drawn from
/// the counter-based generator in layer-major, row-major order; biases zero.
inline ModelCheckpoint init_checkpoint(const ArchSpec& arch, std::uint64_t seed,
                                       const std::string& dataset_id = "") {
    ModelCheckpoint m = ModelCheckpoint::zeros(arch);
    CounterRng rng(derive_seed(seed, "init"));
    for (int l = 1; l <= arch.depth(); ++l) {
        const double bound = std::sqrt(1.0 / arch.widths[l - 1]);
        for (float& w : m.weights[l - 1].data)
            w = static_cast<float>(rng.next_uniform(-bound, bound));
    }
    m.meta.dataset_id = dataset_id;
    m.meta.seed = seed;
    return m;
}

/// Plain SGD on mean cross-entropy. Bit-deterministic for a fixed seed: the
/// init stream and the epoch shuffle stream are both counter-based, training
/// is single-threaded, and updates round through f64 into the f32 store.
inline ModelCheckpoint train_sgd(const ArchSpec& arch, const Dataset& data,
                                 const Hyperparams& hp) {
    arch.validate();
    hp.validate();
    data.validate();
    if (arch.input_dim() != data.input_dim())
        throw ConfigError("train_sgd: arch input width " + std::to_string(arch.input_dim()) +
                          " vs dataset dim " + std::to_string(data.input_dim()));
    if (arch.num_classes() != data.num_classes)
        throw ConfigError("train_sgd: arch head width " + std::to_string(arch.num_classes()) +
                          " vs dataset classes " + std::to_string(data.num_classes));

    ModelCheckpoint model = init_checkpoint(arch, hp.seed, data.name);
    model.meta.learning_rate = hp.learning_rate;
    model.meta.epochs = hp.epochs;

    const int n = data.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    CounterRng shuffle_rng(derive_seed(hp.seed, "shuffle"));

    MatF batch_x;
    std::vector<int> batch_y;
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (int start = 0; start < n; start += hp.batch_size) {
            const int b = std::min(hp.batch_size, n - start);
            batch_x = MatF(b, data.input_dim());
            batch_y.resize(b);
            for (int i = 0; i < b; ++i) {
                const int src = order[start + i];
                std::copy_n(data.features.row_ptr(src), data.input_dim(), batch_x.row_ptr(i));
                batch_y[i] = data.labels[src];
            }
            double batch_loss = 0.0;
            Gradients g = gradients(model, batch_x, batch_y, &batch_loss);
            if (!std::isfinite(batch_loss))
                throw DivergenceError(epoch, "training diverged: non-finite loss in epoch " +
                                                 std::to_string(epoch));
            const double lr = hp.learning_rate;
            for (int l = 0; l < arch.depth(); ++l) {
                MatF& w = model.weights[l];
                const MatD& gw = g.weights[l];
                for (std::size_t i = 0; i < w.data.size(); ++i)
                    w.data[i] =
                        static_cast<float>(static_cast<double>(w.data[i]) - lr * gw.data[i]);
                std::vector<float>& bias = model.biases[l];
                const std::vector<double>& gb = g.biases[l];
                for (std::size_t i = 0; i < bias.size(); ++i)
                    bias[i] = static_cast<float>(static_cast<double>(bias[i]) - lr * gb[i]);
            }
        }
    }

    auto [loss, acc] = loss_and_accuracy(model, data);
    model.meta.final_loss = loss;
    model.meta.final_accuracy = acc;
    return model;
}

} // namespace mal
