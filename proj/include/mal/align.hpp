#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mal/errors.hpp"
#include "mal/lap.hpp"
#include "mal/matrix.hpp"
#include "mal/nn.hpp"
#include "mal/rng.hpp"

namespace mal {

/// A generalized permutation: an injective index map from a source space of
/// n units into a target space of m ≥ n slots. As a 0/1 matrix P ∈ {m×n} with
/// P[map[j], j] = 1 it has orthonormal columns (PᵀP = I), which is exactly the
/// zero-padding-plus-reorder transform. Stored as the index vector — applying
/// it is a gather/scatter, never a dense product.
struct Injection {
    int target_dim = 0;
    std::vector<int> map;

    int source_dim() const { return static_cast<int>(map.size()); }

    static Injection identity(int n) { return canonical(n, n); }

    /// The canonical index injection i → i (identity when n == m).
    static Injection canonical(int n, int m) {
        if (n > m)
            throw ContractError("canonical injection needs source " + std::to_string(n) +
                                " <= target " + std::to_string(m));
        Injection inj;
        inj.target_dim = m;
        inj.map.resize(n);
        std::iota(inj.map.begin(), inj.map.end(), 0);
        return inj;
    }

    bool is_identity() const {
        if (target_dim != source_dim()) return false;
        for (int i = 0; i < source_dim(); ++i)
            if (map[i] != i) return false;
        return true;
    }

    void validate() const {
        if (source_dim() > target_dim)
            throw ContractError("injection has " + std::to_string(source_dim()) +
                                " sources for " + std::to_string(target_dim) + " targets");
        std::vector<char> seen(target_dim, 0);
        for (int t : map) {
            if (t < 0 || t >= target_dim)
                throw ContractError("injection entry " + std::to_string(t) + " outside [0, " +
                                    std::to_string(target_dim) + ")");
            if (seen[t]++)
                throw ContractError("injection maps two units to slot " + std::to_string(t));
        }
    }

    /// target slot → source index, -1 for slots outside the image.
    std::vector<int> inverse() const {
        std::vector<int> inv(target_dim, -1);
        for (int j = 0; j < source_dim(); ++j) inv[map[j]] = j;
        return inv;
    }

    bool operator==(const Injection&) const = default;
};

/// result = P_out · W · P_inᵀ by index placement: entry (r, c) of W lands at
/// (out.map[r], in.map[c]); everything outside the images stays zero.
template <typename T>
inline Mat<T> apply_injection_pair(const Mat<T>& w, const Injection& out, const Injection& in) {
    out.validate();
    in.validate();
    if (out.source_dim() != w.rows || in.source_dim() != w.cols)
        throw ShapeError("apply_injection_pair: weight is " + std::to_string(w.rows) + "x" +
                         std::to_string(w.cols) + " but injections cover " +
                         std::to_string(out.source_dim()) + "x" + std::to_string(in.source_dim()));
    Mat<T> res(out.target_dim, in.target_dim, T{});
    for (int r = 0; r < w.rows; ++r) {
        T* dst = res.row_ptr(out.map[r]);
        const T* src = w.row_ptr(r);
        for (int c = 0; c < w.cols; ++c) dst[in.map[c]] = src[c];
    }
    return res;
}

/// Scatter of a vector through an injection; off-image slots are zero.
template <typename T>
inline std::vector<T> apply_injection(const std::vector<T>& v, const Injection& inj) {
    inj.validate();
    if (static_cast<int>(v.size()) != inj.source_dim())
        throw ShapeError("apply_injection: vector size " + std::to_string(v.size()) +
                         " vs injection source " + std::to_string(inj.source_dim()));
    std::vector<T> res(inj.target_dim, T{});
    for (std::size_t j = 0; j < v.size(); ++j) res[inj.map[j]] = v[j];
    return res;
}

namespace detail {

/// Columns scattered into the target space, rows kept; widened to f64.
inline MatD lift_cols(const MatF& w, const Injection& in) {
    if (in.source_dim() != w.cols)
        throw ShapeError("lift_cols: weight has " + std::to_string(w.cols) +
                         " cols, injection covers " + std::to_string(in.source_dim()));
    MatD res(w.rows, in.target_dim, 0.0);
    for (int r = 0; r < w.rows; ++r) {
        double* dst = res.row_ptr(r);
        const float* src = w.row_ptr(r);
        for (int c = 0; c < w.cols; ++c) dst[in.map[c]] = static_cast<double>(src[c]);
    }
    return res;
}

/// Rows scattered into the target space, columns kept; widened to f64.
inline MatD lift_rows(const MatF& w, const Injection& out) {
    if (out.source_dim() != w.rows)
        throw ShapeError("lift_rows: weight has " + std::to_string(w.rows) +
                         " rows, injection covers " + std::to_string(out.source_dim()));
    MatD res(out.target_dim, w.cols, 0.0);
    for (int r = 0; r < w.rows; ++r) {
        double* dst = res.row_ptr(out.map[r]);
        const float* src = w.row_ptr(r);
        for (int c = 0; c < w.cols; ++c) dst[c] = static_cast<double>(src[c]);
    }
    return res;
}

} // namespace detail

/// Functionally-equivalent relocation of a checkpoint: weights move through
/// apply_injection_pair, biases through the output-side scatter. Padded units
/// get zero in-weights and zero bias, so their ReLU output is zero and nothing
/// downstream changes — for identity boundary injections the lifted model's
/// logits equal the original's on every input.
inline ModelCheckpoint lift_model(const ModelCheckpoint& model,
                                  const std::vector<Injection>& injections) {
    model.validate();
    const int L = model.depth();
    if (static_cast<int>(injections.size()) != L + 1)
        throw ContractError("lift_model: " + std::to_string(injections.size()) +
                            " injections for " + std::to_string(L + 1) + " interfaces");
    if (!injections.front().is_identity() || injections.front().source_dim() != model.input_dim())
        throw ContractError("lift_model: interface 0 injection must be the identity");
    if (!injections.back().is_identity() || injections.back().source_dim() != model.num_classes())
        throw ContractError("lift_model: interface " + std::to_string(L) +
                            " injection must be the identity");
    for (int l = 0; l <= L; ++l) {
        injections[l].validate();
        if (injections[l].source_dim() != model.arch.widths[l])
            throw ShapeError("lift_model: interface " + std::to_string(l) + " injection covers " +
                             std::to_string(injections[l].source_dim()) + " units, model has " +
                             std::to_string(model.arch.widths[l]));
    }

    std::vector<int> widths(L + 1);
    for (int l = 0; l <= L; ++l) widths[l] = injections[l].target_dim;
    ModelCheckpoint out;
    out.arch = ArchSpec::from_widths(widths);
    out.arch.activation = model.arch.activation;
    out.meta = model.meta;
    for (int l = 1; l <= L; ++l) {
        out.weights.push_back(
            apply_injection_pair(model.weights[l - 1], injections[l], injections[l - 1]));
        out.biases.push_back(apply_injection(model.biases[l - 1], injections[l]));
    }
    return out;
}

/// Per-interface alignment of two checkpoints of equal depth: at interface l
/// the merged width is d_l = max(a_l, b_l); q[l] maps the base model's units
/// into the merged space and p[l] the target model's. Interfaces 0 and L stay
/// canonical index injections and are never optimized.
struct InterfacePlan {
    std::vector<Injection> q; // base side, interfaces 0..L
    std::vector<Injection> p; // target side
    std::vector<int> merged;  // d_l

    int interfaces() const { return static_cast<int>(merged.size()); }

    static InterfacePlan canonical(const std::vector<int>& widths_base,
                                   const std::vector<int>& widths_target) {
        if (widths_base.size() != widths_target.size())
            throw ContractError("interface plan needs equal depth: " +
                                std::to_string(widths_base.size() - 1) + " vs " +
                                std::to_string(widths_target.size() - 1) + " layers");
        InterfacePlan plan;
        const int n = static_cast<int>(widths_base.size());
        plan.merged.resize(n);
        for (int l = 0; l < n; ++l) {
            plan.merged[l] = std::max(widths_base[l], widths_target[l]);
            plan.q.push_back(Injection::canonical(widths_base[l], plan.merged[l]));
            plan.p.push_back(Injection::canonical(widths_target[l], plan.merged[l]));
        }
        return plan;
    }

    void validate_for(const ModelCheckpoint& base, const ModelCheckpoint& target) const {
        const int L = base.depth();
        if (target.depth() != L)
            throw ContractError("plan: checkpoints have different depth (" + std::to_string(L) +
                                " vs " + std::to_string(target.depth()) + ")");
        if (interfaces() != L + 1 || static_cast<int>(q.size()) != L + 1 ||
            static_cast<int>(p.size()) != L + 1)
            throw ContractError("plan covers " + std::to_string(interfaces()) +
                                " interfaces, models have " + std::to_string(L + 1));
        for (int l = 0; l <= L; ++l) {
            if (q[l].source_dim() != base.arch.widths[l] ||
                p[l].source_dim() != target.arch.widths[l])
                throw ShapeError("plan interface " + std::to_string(l) +
                                 " does not cover the checkpoints' widths");
            if (q[l].target_dim != merged[l] || p[l].target_dim != merged[l])
                throw ShapeError("plan interface " + std::to_string(l) +
                                 " injections disagree on the merged width");
        }
        auto canonical_check = [&](int l) {
            for (int i = 0; i < q[l].source_dim(); ++i)
                if (q[l].map[i] != i)
                    throw ContractError("plan: base boundary injection " + std::to_string(l) +
                                        " is not canonical");
            for (int i = 0; i < p[l].source_dim(); ++i)
                if (p[l].map[i] != i)
                    throw ContractError("plan: target boundary injection " + std::to_string(l) +
                                        " is not canonical");
        };
        canonical_check(0);
        canonical_check(L);
    }
};

/// Pairing cost for one interface, given lifted neighbor tensors: entry (i, j)
/// is the gain of sending base unit i and target unit j to the same merged
/// slot. Sums the incoming-weight term, the outgoing-weight term, and the
/// bias outer product b^A (b^B)ᵀ.
///
///   a_next: d_{l+1} × n_a (rows lifted) | a_prev: n_a × d_{l-1} (cols lifted)
///   b_next: d_{l+1} × n_b               | b_prev: n_b × d_{l-1}
inline MatD compose_cost(const MatD& a_next, const MatD& b_next, const MatD& a_prev,
                         const MatD& b_prev, const std::vector<double>& bias_a,
                         const std::vector<double>& bias_b) {
    const int na = a_prev.rows, nb = b_prev.rows;
    if (a_prev.cols != b_prev.cols)
        throw ShapeError("compose_cost: previous-interface widths disagree (" +
                         std::to_string(a_prev.cols) + " vs " + std::to_string(b_prev.cols) + ")");
    if (a_next.rows != b_next.rows)
        throw ShapeError("compose_cost: next-interface widths disagree (" +
                         std::to_string(a_next.rows) + " vs " + std::to_string(b_next.rows) + ")");
    if (a_next.cols != na || b_next.cols != nb)
        throw ShapeError("compose_cost: outgoing tensors do not match this interface (" +
                         std::to_string(a_next.cols) + "x" + std::to_string(b_next.cols) +
                         " vs " + std::to_string(na) + "x" + std::to_string(nb) + ")");
    if (static_cast<int>(bias_a.size()) != na || static_cast<int>(bias_b.size()) != nb)
        throw ShapeError("compose_cost: bias sizes do not match this interface");

    MatD cost(na, nb, 0.0);
    for (int i = 0; i < na; ++i) {
        const double* ar = a_prev.row_ptr(i);
        double* out = cost.row_ptr(i);
        for (int j = 0; j < nb; ++j) {
            const double* br = b_prev.row_ptr(j);
            double acc = 0.0;
            for (int k = 0; k < a_prev.cols; ++k) acc += ar[k] * br[k];
            out[j] = acc;
        }
    }
    for (int r = 0; r < a_next.rows; ++r) {
        const double* ar = a_next.row_ptr(r);
        const double* br = b_next.row_ptr(r);
        for (int i = 0; i < na; ++i) {
            if (ar[i] == 0.0) continue;
            double* out = cost.row_ptr(i);
            for (int j = 0; j < nb; ++j) out[j] += ar[i] * br[j];
        }
    }
    for (int i = 0; i < na; ++i) {
        double* out = cost.row_ptr(i);
        for (int j = 0; j < nb; ++j) out[j] += bias_a[i] * bias_b[j];
    }
    return cost;
}

/// The alignment objective: Σ_l ⟨Q_l W_l^A Q_{l-1}ᵀ, P_l W_l^B P_{l-1}ᵀ⟩_F
/// plus the bias terms ⟨Q_l b_l^A, P_l b_l^B⟩. Terms are gathered in the base
/// model's index order, so structurally identical alignments (self-match and
/// exact recoveries) produce bit-identical sums.
inline double matching_objective(const ModelCheckpoint& base, const ModelCheckpoint& target,
                                 const InterfacePlan& plan) {
    plan.validate_for(base, target);
    const int L = base.depth();
    double acc = 0.0;
    std::vector<int> col_pair;
    for (int l = 1; l <= L; ++l) {
        const std::vector<int> pinv_row = plan.p[l].inverse();
        const std::vector<int> pinv_col = plan.p[l - 1].inverse();
        const std::vector<int>& qrow = plan.q[l].map;
        const std::vector<int>& qcol = plan.q[l - 1].map;
        const MatF& wa = base.weights[l - 1];
        const MatF& wb = target.weights[l - 1];

        col_pair.assign(wa.cols, -1);
        for (int c = 0; c < wa.cols; ++c) col_pair[c] = pinv_col[qcol[c]];

        for (int r = 0; r < wa.rows; ++r) {
            const int rb = pinv_row[qrow[r]];
            if (rb < 0) continue;
            const float* ar = wa.row_ptr(r);
            const float* br = wb.row_ptr(rb);
            for (int c = 0; c < wa.cols; ++c) {
                const int cb = col_pair[c];
                if (cb >= 0) acc += static_cast<double>(ar[c]) * static_cast<double>(br[cb]);
            }
        }
        const std::vector<float>& ba = base.biases[l - 1];
        const std::vector<float>& bb = target.biases[l - 1];
        for (int r = 0; r < static_cast<int>(ba.size()); ++r) {
            const int rb = pinv_row[qrow[r]];
            if (rb >= 0) acc += static_cast<double>(ba[r]) * static_cast<double>(bb[rb]);
        }
    }
    return acc;
}

enum class MatchEngine { Auto, Square, Compatible, Bidirectional };

inline const char* engine_name(MatchEngine e) {
    switch (e) {
        case MatchEngine::Auto: return "auto";
        case MatchEngine::Square: return "square";
        case MatchEngine::Compatible: return "compatible";
        case MatchEngine::Bidirectional: return "bidirectional";
    }
    return "auto";
}

inline MatchEngine engine_from_name(std::string_view s) {
    if (s == "auto") return MatchEngine::Auto;
    if (s == "square") return MatchEngine::Square;
    if (s == "compatible") return MatchEngine::Compatible;
    if (s == "bidirectional") return MatchEngine::Bidirectional;
    throw ConfigError("unknown engine '" + std::string(s) +
                      "' (auto, square, compatible, bidirectional)");
}

struct MatchOptions {
    std::uint64_t seed = 0;
    int max_passes = 100;      // one-sided coordinate-descent budget
    int max_rounds = 50;       // bidirectional alternation budget
    double tol = 1e-9;         // relative improvement treated as converged
    bool allow_routing = true; // compatible may fall through to bidirectional
};

struct AlignmentResult {
    InterfacePlan plan;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string engine;
    bool roles_swapped = false;
    std::uint64_t seed = 0;
    /// Objective value after every LAP solve (first entry: before any solve).
    std::vector<double> objective_trace;
};

namespace detail {

enum class Side { Target, Base };

inline MatD interface_cost(const ModelCheckpoint& a, const ModelCheckpoint& b,
                           const InterfacePlan& plan, int l) {
    return compose_cost(lift_rows(a.weights[l], plan.q[l + 1]),
                        lift_rows(b.weights[l], plan.p[l + 1]),
                        lift_cols(a.weights[l - 1], plan.q[l - 1]),
                        lift_cols(b.weights[l - 1], plan.p[l - 1]), widen(a.biases[l - 1]),
                        widen(b.biases[l - 1]));
}

/// One exact LAP solve for interface l on the chosen side, every other
/// variable fixed. The current assignment is always feasible, so the global
/// objective cannot decrease. Returns whether the injection changed.
inline bool solve_interface(const ModelCheckpoint& a, const ModelCheckpoint& b,
                            InterfacePlan& plan, int l, Side side) {
    const MatD m = interface_cost(a, b, plan, l);
    const int d = plan.merged[l];
    if (side == Side::Target) {
        const std::vector<int> qinv = plan.q[l].inverse();
        MatD c(d, m.cols, 0.0);
        for (int t = 0; t < d; ++t) {
            const int i = qinv[t];
            if (i < 0) continue; // slot outside the base image contributes nothing
            std::copy_n(m.row_ptr(i), m.cols, c.row_ptr(t));
        }
        auto [assignment, obj] = solve_lap_max(c);
        (void)obj;
        if (assignment.map == plan.p[l].map) return false;
        plan.p[l].map = assignment.map;
        return true;
    }
    const std::vector<int> pinv = plan.p[l].inverse();
    MatD c(d, m.rows, 0.0);
    for (int t = 0; t < d; ++t) {
        const int j = pinv[t];
        if (j < 0) continue;
        double* row = c.row_ptr(t);
        for (int i = 0; i < m.rows; ++i) row[i] = m(i, j);
    }
    auto [assignment, obj] = solve_lap_max(c);
    (void)obj;
    if (assignment.map == plan.q[l].map) return false;
    plan.q[l].map = assignment.map;
    return true;
}

inline std::vector<int> hidden_interfaces(int depth) {
    std::vector<int> hidden(depth - 1);
    std::iota(hidden.begin(), hidden.end(), 1);
    return hidden;
}

inline bool improvement_below_tol(double before, double after, double tol) {
    return after - before <= tol * std::max(1.0, std::abs(after));
}

/// Coordinate descent over the target-side injections with the base fixed:
/// seeded random interface order per pass, each interface solved exactly,
/// stop when a full pass no longer improves the objective.
inline AlignmentResult run_one_sided(const ModelCheckpoint& a, const ModelCheckpoint& b,
                                     InterfacePlan plan, const char* engine,
                                     const MatchOptions& opt) {
    AlignmentResult res;
    res.plan = std::move(plan);
    res.engine = engine;
    res.seed = opt.seed;
    double obj = matching_objective(a, b, res.plan);
    res.objective_trace.push_back(obj);

    CounterRng order_rng(derive_seed(opt.seed, "pass-order"));
    std::vector<int> hidden = hidden_interfaces(a.depth());
    for (int pass = 1; pass <= opt.max_passes; ++pass) {
        const double pass_start = obj;
        order_rng.shuffle(hidden);
        for (int l : hidden) {
            if (solve_interface(a, b, res.plan, l, Side::Target))
                obj = matching_objective(a, b, res.plan);
            res.objective_trace.push_back(obj);
        }
        res.iterations = pass;
        if (improvement_below_tol(pass_start, obj, opt.tol)) {
            res.converged = true;
            break;
        }
    }
    res.objective = obj;
    return res;
}

/// Alternating optimization for shape-incompatible pairs: fix all Q and pass
/// over P, then fix all P and pass over Q, until a full round stalls. Q starts
/// canonical (the base unmoved); P earns its first alignment in the opening
/// half-round, so the base only starts moving once the target is placed.
inline AlignmentResult run_bidirectional(const ModelCheckpoint& a, const ModelCheckpoint& b,
                                         const MatchOptions& opt) {
    AlignmentResult res;
    res.plan = InterfacePlan::canonical(a.arch.widths, b.arch.widths);
    res.engine = "bidirectional";
    res.seed = opt.seed;
    double obj = matching_objective(a, b, res.plan);
    res.objective_trace.push_back(obj);

    CounterRng order_rng(derive_seed(opt.seed, "pass-order"));
    std::vector<int> hidden = hidden_interfaces(a.depth());
    for (int round = 1; round <= opt.max_rounds; ++round) {
        const double round_start = obj;
        for (Side side : {Side::Target, Side::Base}) {
            order_rng.shuffle(hidden);
            for (int l : hidden) {
                if (solve_interface(a, b, res.plan, l, side))
                    obj = matching_objective(a, b, res.plan);
                res.objective_trace.push_back(obj);
            }
        }
        res.iterations = round;
        if (improvement_below_tol(round_start, obj, opt.tol)) {
            res.converged = true;
            break;
        }
    }
    res.objective = obj;
    return res;
}

inline void require_same_depth(const ModelCheckpoint& a, const ModelCheckpoint& b,
                               const char* who) {
    if (a.depth() != b.depth())
        throw ContractError(std::string(who) + ": checkpoints have different depth (" +
                            std::to_string(a.depth()) + " vs " + std::to_string(b.depth()) + ")");
}

} // namespace detail

/// Equal-architecture weight matching: all Q stay identity, the P_l are square
/// permutations found by coordinate descent with exact per-interface LAPs.
inline AlignmentResult weight_matching_square(const ModelCheckpoint& a, const ModelCheckpoint& b,
                                              const MatchOptions& opt = {}) {
    detail::require_same_depth(a, b, "weight_matching_square");
    if (a.arch.widths != b.arch.widths)
        throw ContractError("weight_matching_square: architectures differ (" + a.arch.label() +
                            " vs " + b.arch.label() + ")");
    return detail::run_one_sided(a, b, InterfacePlan::canonical(a.arch.widths, b.arch.widths),
                                 "square", opt);
}

inline AlignmentResult weight_matching_bidirectional(const ModelCheckpoint& a,
                                                     const ModelCheckpoint& b,
                                                     const MatchOptions& opt = {});

/// Size-compatible weight matching: the base is at least as wide at every
/// hidden interface; Q stays canonical and the rectangular P_l are solved by
/// rectangular LAPs. Pairs that are not actually compatible are routed to the
/// bidirectional engine (unless opt.allow_routing forbids that).
inline AlignmentResult weight_matching_compatible(const ModelCheckpoint& a,
                                                  const ModelCheckpoint& b,
                                                  const MatchOptions& opt = {}) {
    detail::require_same_depth(a, b, "weight_matching_compatible");
    bool base_dominates = true;
    for (int l = 1; l < a.depth(); ++l)
        if (a.arch.widths[l] < b.arch.widths[l]) base_dominates = false;
    if (!base_dominates) {
        if (opt.allow_routing) return weight_matching_bidirectional(a, b, opt);
        throw ContractError(
            "weight_matching_compatible: base is narrower at some hidden interface (" +
            a.arch.label() + " vs " + b.arch.label() + ")");
    }
    return detail::run_one_sided(a, b, InterfacePlan::canonical(a.arch.widths, b.arch.widths),
                                 "compatible", opt);
}

/// Size-incompatible weight matching per the alternating strategy. Works for
/// any width profile; calling it directly forces bidirectional mode.
inline AlignmentResult weight_matching_bidirectional(const ModelCheckpoint& a,
                                                     const ModelCheckpoint& b,
                                                     const MatchOptions& opt) {
    detail::require_same_depth(a, b, "weight_matching_bidirectional");
    return detail::run_bidirectional(a, b, opt);
}

/// Engine dispatch. Auto picks square for identical width profiles, the
/// compatible engine when one side dominates every hidden interface (roles
/// swapped when the target is the wide one), and bidirectional otherwise.
inline AlignmentResult weight_matching(const ModelCheckpoint& a, const ModelCheckpoint& b,
                                       MatchEngine engine, const MatchOptions& opt = {}) {
    switch (engine) {
        case MatchEngine::Square: return weight_matching_square(a, b, opt);
        case MatchEngine::Compatible: return weight_matching_compatible(a, b, opt);
        case MatchEngine::Bidirectional: return weight_matching_bidirectional(a, b, opt);
        case MatchEngine::Auto: break;
    }
    detail::require_same_depth(a, b, "weight_matching");
    if (a.arch.widths == b.arch.widths) return weight_matching_square(a, b, opt);
    bool base_wide = true, target_wide = true;
    for (int l = 1; l < a.depth(); ++l) {
        if (a.arch.widths[l] < b.arch.widths[l]) base_wide = false;
        if (b.arch.widths[l] < a.arch.widths[l]) target_wide = false;
    }
    if (base_wide) return weight_matching_compatible(a, b, opt);
    if (target_wide) {
        // Mirrored compatible case: match with roles swapped, then swap back.
        AlignmentResult swapped = weight_matching_compatible(b, a, opt);
        AlignmentResult res;
        res.plan.merged = swapped.plan.merged;
        res.plan.q = std::move(swapped.plan.p);
        res.plan.p = std::move(swapped.plan.q);
        res.objective = swapped.objective;
        res.iterations = swapped.iterations;
        res.converged = swapped.converged;
        res.engine = swapped.engine;
        res.roles_swapped = true;
        res.seed = swapped.seed;
        res.objective_trace = std::move(swapped.objective_trace);
        return res;
    }
    return weight_matching_bidirectional(a, b, opt);
}

inline nlohmann::json alignment_to_json(const AlignmentResult& r, const std::string& base_path,
                                        const std::string& target_path) {
    nlohmann::json j;
    j["format"] = "mal-align";
    j["version"] = 1;
    j["engine"] = r.engine;
    j["roles_swapped"] = r.roles_swapped;
    j["seed"] = r.seed;
    j["objective"] = r.objective;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["base_path"] = base_path;
    j["target_path"] = target_path;
    nlohmann::json interfaces = nlohmann::json::array();
    for (int l = 0; l < r.plan.interfaces(); ++l) {
        interfaces.push_back({{"merged", r.plan.merged[l]},
                              {"q", r.plan.q[l].map},
                              {"p", r.plan.p[l].map}});
    }
    j["interfaces"] = interfaces;
    j["objective_trace"] = r.objective_trace;
    return j;
}

inline AlignmentResult alignment_from_json(const nlohmann::json& j, std::string* base_path = nullptr,
                                           std::string* target_path = nullptr) {
    if (!j.is_object() || j.value("format", "") != "mal-align")
        throw FormatError("not a mal-align document");
    AlignmentResult r;
    r.engine = j.at("engine").get<std::string>();
    r.roles_swapped = j.value("roles_swapped", false);
    r.seed = j.at("seed").get<std::uint64_t>();
    r.objective = j.at("objective").get<double>();
    r.iterations = j.at("iterations").get<int>();
    r.converged = j.at("converged").get<bool>();
    if (base_path) *base_path = j.value("base_path", "");
    if (target_path) *target_path = j.value("target_path", "");
    for (const auto& itf : j.at("interfaces")) {
        const int merged = itf.at("merged").get<int>();
        Injection q, p;
        q.target_dim = merged;
        q.map = itf.at("q").get<std::vector<int>>();
        p.target_dim = merged;
        p.map = itf.at("p").get<std::vector<int>>();
        q.validate();
        p.validate();
        r.plan.merged.push_back(merged);
        r.plan.q.push_back(std::move(q));
        r.plan.p.push_back(std::move(p));
    }
    if (j.contains("objective_trace"))
        r.objective_trace = j.at("objective_trace").get<std::vector<double>>();
    return r;
}

} // namespace mal
