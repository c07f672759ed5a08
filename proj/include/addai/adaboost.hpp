#pragma once

// Class-weighted AdaBoost over depth-limited decision trees, plus the
// grid search that produces the three cloud variants (Normal-sensitive,
// Regular, Attack-sensitive).
//
// Determinism contract (tests compare against an independent reference
// implementation, so the arithmetic evaluation order is part of the
// interface): node class totals accumulate in ascending sample-index order,
// candidate split scans walk samples sorted by (value, index), right-side
// sums are computed as total minus left, and candidate thresholds are
// a + (b - a) / 2 between adjacent distinct values.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "addai/binio.hpp"
#include "addai/dataset.hpp"

namespace addai {

inline int to_pm1(int label01) {
    if (label01 != 0 && label01 != 1) throw Error("to_pm1: label must be 0 or 1");
    return label01 == 0 ? -1 : +1;
}

inline int from_pm1(int pm1) {
    if (pm1 != -1 && pm1 != 1) throw Error("from_pm1: label must be -1 or +1");
    return pm1 == -1 ? 0 : 1;
}

struct ClassWeights {
    double cw0 = 1.0;  // multiplies samples with label 0 (normal)
    double cw1 = 1.0;  // multiplies samples with label 1 (attack)

    bool operator==(const ClassWeights&) const = default;
};

// Binary decision tree over real feature vectors. Internal nodes hold
// (feature, threshold), leaves a label in {-1, +1}; x[feature] < threshold
// goes left.
struct TreeNode {
    int32_t feature = -1;  // < 0 marks a leaf
    float threshold = 0.0f;
    uint32_t left = 0;
    uint32_t right = 0;
    int8_t leaf_label = 0;  // -1 or +1

    bool is_leaf() const { return feature < 0; }
};

struct WeakLearner {
    std::vector<TreeNode> nodes;  // preorder, root at 0

    int predict_pm1(std::span<const float> x) const {
        if (nodes.empty()) throw Error("WeakLearner: empty tree");
        uint32_t at = 0;
        while (!nodes[at].is_leaf()) {
            const auto& nd = nodes[at];
            if (static_cast<size_t>(nd.feature) >= x.size())
                throw Error("WeakLearner: feature index out of range");
            at = x[static_cast<size_t>(nd.feature)] < nd.threshold ? nd.left : nd.right;
        }
        return nodes[at].leaf_label;
    }
};

namespace detail {

inline double midpoint(double a, double b) { return a + (b - a) / 2.0; }

// per-feature sample indices sorted by (value, index)
struct FeatureOrder {
    std::vector<std::vector<uint32_t>> order;

    static FeatureOrder build(const Dataset& d) {
        FeatureOrder fo;
        const size_t f_count = d.feature_count();
        fo.order.resize(f_count);
        for (size_t f = 0; f < f_count; ++f) {
            auto& idx = fo.order[f];
            idx.resize(d.size());
            std::iota(idx.begin(), idx.end(), 0u);
            std::sort(idx.begin(), idx.end(), [&](uint32_t a, uint32_t b) {
                const float va = d.records[a].features[f];
                const float vb = d.records[b].features[f];
                return va < vb || (va == vb && a < b);
            });
        }
        return fo;
    }
};

struct TreeBuilder {
    const Dataset& data;
    const FeatureOrder& sorted;
    const std::vector<double>& w;
    ClassWeights cw;
    size_t max_depth;
    std::vector<uint8_t> member;  // node membership mask, reused per node
    std::vector<TreeNode> nodes;

    double effective_weight(uint32_t i) const {
        return w[i] * (data.records[i].label == 1 ? cw.cw1 : cw.cw0);
    }

    uint32_t build(const std::vector<uint32_t>& node_samples, size_t depth) {
        // class totals in ascending index order (node_samples stays sorted)
        double pos_total = 0.0, neg_total = 0.0;
        for (uint32_t i : node_samples)
            (data.records[i].label == 1 ? pos_total : neg_total) += effective_weight(i);

        const int8_t majority = pos_total >= neg_total ? +1 : -1;
        const bool pure = (pos_total == 0.0) || (neg_total == 0.0);

        int32_t best_feature = -1;
        double best_threshold = 0.0;
        double best_cost = std::numeric_limits<double>::infinity();

        if (!pure && depth < max_depth) {
            for (uint32_t i : node_samples) member[i] = 1;
            const size_t f_count = data.feature_count();
            for (size_t f = 0; f < f_count; ++f) {
                double pos_left = 0.0, neg_left = 0.0;
                uint32_t prev = UINT32_MAX;
                for (uint32_t i : sorted.order[f]) {
                    if (!member[i]) continue;
                    const float v = data.records[i].features[f];
                    if (prev != UINT32_MAX) {
                        const float pv = data.records[prev].features[f];
                        if (pv != v) {
                            const double cost = std::min(pos_left, neg_left) +
                                                std::min(pos_total - pos_left, neg_total - neg_left);
                            if (cost < best_cost) {
                                best_cost = cost;
                                best_feature = static_cast<int32_t>(f);
                                best_threshold = midpoint(pv, v);
                            }
                        }
                    }
                    (data.records[i].label == 1 ? pos_left : neg_left) += effective_weight(i);
                    prev = i;
                }
            }
            for (uint32_t i : node_samples) member[i] = 0;
        }

        const uint32_t at = static_cast<uint32_t>(nodes.size());
        nodes.emplace_back();
        if (best_feature < 0) {
            nodes[at].leaf_label = majority;
            return at;
        }

        std::vector<uint32_t> left_samples, right_samples;
        for (uint32_t i : node_samples) {
            if (data.records[i].features[static_cast<size_t>(best_feature)] <
                static_cast<float>(best_threshold))
                left_samples.push_back(i);
            else
                right_samples.push_back(i);
        }
        nodes[at].feature = best_feature;
        nodes[at].threshold = static_cast<float>(best_threshold);
        nodes[at].left = build(left_samples, depth + 1);
        nodes[at].right = build(right_samples, depth + 1);
        return at;
    }
};

inline WeakLearner fit_weak_presorted(const Dataset& train, const FeatureOrder& sorted,
                                      const std::vector<double>& w, ClassWeights cw,
                                      size_t max_depth) {
    if (w.size() != train.size()) throw Error("fit_weak: weight count != record count");
    if (max_depth < 1) throw Error("fit_weak: max_depth must be >= 1");
    if (cw.cw0 <= 0.0 || cw.cw1 <= 0.0) throw Error("fit_weak: class weights must be positive");
    const size_t n_attack = train.count_label(1);
    if (n_attack == 0 || n_attack == train.size())
        throw Error("fit_weak: training data must contain both classes");

    TreeBuilder builder{train, sorted, w, cw, max_depth, std::vector<uint8_t>(train.size(), 0), {}};
    std::vector<uint32_t> all(train.size());
    std::iota(all.begin(), all.end(), 0u);
    builder.build(all, 0);
    return WeakLearner{std::move(builder.nodes)};
}

}  // namespace detail

// Greedy tree minimizing class-weighted, sample-weighted misclassification
// (effective weight of sample i is w_i * cw_{y_i}). Ties break to the lowest
// feature index, then the lowest threshold; leaf ties go to +1.
inline WeakLearner fit_weak(const Dataset& train, const std::vector<double>& w, ClassWeights cw,
                            size_t max_depth) {
    const auto sorted = detail::FeatureOrder::build(train);
    return detail::fit_weak_presorted(train, sorted, w, cw, max_depth);
}

// Plain weighted error rate of a learner (class weights play no part here).
inline double weighted_error(const WeakLearner& l, const Dataset& train,
                             const std::vector<double>& w) {
    if (w.size() != train.size()) throw Error("weighted_error: weight count != record count");
    double wrong = 0.0, total = 0.0;
    for (size_t i = 0; i < train.size(); ++i) {
        total += w[i];
        if (l.predict_pm1(train.records[i].features) != to_pm1(train.records[i].label))
            wrong += w[i];
    }
    if (total <= 0.0) throw Error("weighted_error: non-positive weight total");
    return wrong / total;
}

inline constexpr double kEpsilonMin = 1e-10;

// Learner vote weight: 0.5 * ln((1 - eps) / eps), eps clamped away from
// {0, 1} to keep the value finite.
inline double alpha(double epsilon) {
    if (epsilon < 0.0 || epsilon > 1.0) throw Error("alpha: epsilon must be in [0,1]");
    const double e = std::clamp(epsilon, kEpsilonMin, 1.0 - kEpsilonMin);
    return 0.5 * std::log((1.0 - e) / e);
}

// w_i <- w_i * exp(-y_i * l(x_i) * alpha), then renormalized to sum 1.
inline void update_weights(std::vector<double>& w, const WeakLearner& l, double alpha_t,
                           const Dataset& train) {
    if (w.size() != train.size()) throw Error("update_weights: weight count != record count");
    double sum = 0.0;
    for (size_t i = 0; i < w.size(); ++i) {
        const int y = to_pm1(train.records[i].label);
        const int pred = l.predict_pm1(train.records[i].features);
        w[i] *= std::exp(-static_cast<double>(y * pred) * alpha_t);
        sum += w[i];
    }
    if (!(sum > 0.0) || !std::isfinite(sum)) throw Error("update_weights: weight underflow");
    for (auto& wi : w) wi /= sum;
}

enum class Variant { Normal, Regular, Attack };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::Normal: return "normal";
        case Variant::Regular: return "regular";
        case Variant::Attack: return "attack";
    }
    throw Error("variant_name: bad variant");
}

struct BoostRound {
    WeakLearner learner;
    double alpha = 0.0;
};

struct BoostedEnsemble {
    std::vector<BoostRound> rounds;
    ClassWeights class_weights;
    Variant variant = Variant::Regular;
    uint32_t n_features = 0;  // 0: unknown (hand-built), skip the width check
};

// Sequential boosting: uniform initial weights, then fit / error / alpha /
// reweight per round. Stops early when a learner is no better than chance
// (eps >= 0.5, discarded unless it is the only one) or when no further
// improvement is possible (eps <= kEpsilonMin).
inline BoostedEnsemble boost(const Dataset& train, size_t t_rounds, ClassWeights cw,
                             size_t max_depth, uint64_t seed) {
    (void)seed;  // boosting is fully deterministic; kept for interface stability
    if (t_rounds < 1) throw Error("boost: need at least one round");
    const size_t n_attack = train.count_label(1);
    if (n_attack == 0 || n_attack == train.size())
        throw Error("boost: training data must contain both classes");

    const auto sorted = detail::FeatureOrder::build(train);
    std::vector<double> w(train.size(), 1.0 / static_cast<double>(train.size()));

    BoostedEnsemble e;
    e.class_weights = cw;
    e.n_features = static_cast<uint32_t>(train.feature_count());
    for (size_t t = 0; t < t_rounds; ++t) {
        WeakLearner l = detail::fit_weak_presorted(train, sorted, w, cw, max_depth);
        const double eps = weighted_error(l, train, w);
        if (eps >= 0.5) {
            if (e.rounds.empty()) e.rounds.push_back({std::move(l), alpha(eps)});
            break;
        }
        const double a = alpha(eps);
        e.rounds.push_back({std::move(l), a});
        if (eps <= kEpsilonMin) break;
        update_weights(w, e.rounds.back().learner, a, train);
    }
    return e;
}

struct Prediction {
    int label = 0;      // 0 normal, 1 attack
    double margin = 0;  // sum of alpha_t * l_t(x)
};

// Weighted vote; margin >= 0 decides attack (fail-safe tie).
inline Prediction predict(const BoostedEnsemble& e, std::span<const float> x) {
    if (e.n_features != 0 && x.size() != e.n_features)
        throw Error("predict: input width " + std::to_string(x.size()) +
                    " != trained width " + std::to_string(e.n_features));
    double margin = 0.0;
    for (const auto& round : e.rounds) margin += round.alpha * round.learner.predict_pm1(x);
    return {margin >= 0.0 ? 1 : 0, margin};
}

inline double margin_to_probability(double margin) { return 1.0 / (1.0 + std::exp(-2.0 * margin)); }

// Class-weighted log loss used as the grid-search objective:
// (1/N) * sum of cw0*(y*log y') + cw1*((1-y)*log(1-y')). The value is
// maximized (equivalently its negation, the cross-entropy form, minimized).
inline double class_weighted_loss(const std::vector<double>& probs, const std::vector<int>& labels,
                                  ClassWeights cw) {
    if (probs.size() != labels.size()) throw Error("class_weighted_loss: length mismatch");
    if (probs.empty()) throw Error("class_weighted_loss: empty inputs");
    double sum = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        const double p = std::clamp(probs[i], 1e-12, 1.0 - 1e-12);
        const double y = static_cast<double>(labels[i]);
        sum += cw.cw0 * (y * std::log(p)) + cw.cw1 * ((1.0 - y) * std::log(1.0 - p));
    }
    return sum / static_cast<double>(probs.size());
}

struct VariantSet {
    BoostedEnsemble normal;
    BoostedEnsemble regular;
    BoostedEnsemble attack;

    const BoostedEnsemble& by_variant(Variant v) const {
        switch (v) {
            case Variant::Normal: return normal;
            case Variant::Regular: return regular;
            case Variant::Attack: return attack;
        }
        throw Error("VariantSet: bad variant");
    }
};

namespace detail {

struct GridEval {
    ClassWeights cw;
    BoostedEnsemble ensemble;
    double ce_loss = 0.0;  // negated Eq-style loss at unit weights
    double mcc_v = 0.0;
    double recall_normal = 0.0;
    double recall_attack = 0.0;

    double ratio() const { return std::max(cw.cw0, cw.cw1) / std::min(cw.cw0, cw.cw1); }
};

}  // namespace detail

// Trains one ensemble per grid point and selects the three variants on the
// validation split: Regular minimizes the unit-weight log loss; Normal
// maximizes normal-class recall subject to MCC >= MCC(Regular) - 0.05;
// Attack mirrors that for attack recall. Ties break toward higher MCC, then
// the smaller class-weight ratio, then grid order.
inline VariantSet grid_search_variants(const Dataset& train, const Dataset& valid,
                                       const std::vector<ClassWeights>& grid, size_t t_rounds,
                                       size_t max_depth, uint64_t seed) {
    if (grid.empty()) throw Error("grid_search_variants: empty grid");
    if (valid.empty()) throw Error("grid_search_variants: empty validation set");

    std::vector<detail::GridEval> evals;
    evals.reserve(grid.size());
    for (size_t g = 0; g < grid.size(); ++g) {
        detail::GridEval ev;
        ev.cw = grid[g];
        ev.ensemble = boost(train, t_rounds, grid[g], max_depth, seed + g);

        std::vector<double> probs(valid.size());
        std::vector<int> labels(valid.size());
        uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
        for (size_t i = 0; i < valid.size(); ++i) {
            const auto pred = predict(ev.ensemble, valid.records[i].features);
            probs[i] = margin_to_probability(pred.margin);
            labels[i] = valid.records[i].label;
            if (labels[i] == 1)
                pred.label == 1 ? ++tp : ++fn;
            else
                pred.label == 1 ? ++fp : ++tn;
        }
        ev.ce_loss = -class_weighted_loss(probs, labels, ClassWeights{1.0, 1.0});
        const double d1 = static_cast<double>(tp + fp), d2 = static_cast<double>(tp + fn);
        const double d3 = static_cast<double>(tn + fp), d4 = static_cast<double>(tn + fn);
        ev.mcc_v = (d1 == 0 || d2 == 0 || d3 == 0 || d4 == 0)
                       ? 0.0
                       : (static_cast<double>(tp) * tn - static_cast<double>(fp) * fn) /
                             std::sqrt(d1 * d2 * d3 * d4);
        ev.recall_normal = (tn + fp) == 0 ? 0.0 : static_cast<double>(tn) / static_cast<double>(tn + fp);
        ev.recall_attack = (tp + fn) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
        evals.push_back(std::move(ev));
    }

    auto better_tiebreak = [](const detail::GridEval& a, const detail::GridEval& b) {
        // true when a beats b on the shared tie chain (higher MCC, smaller ratio)
        if (a.mcc_v != b.mcc_v) return a.mcc_v > b.mcc_v;
        return a.ratio() < b.ratio();
    };

    size_t regular_at = 0;
    for (size_t g = 1; g < evals.size(); ++g) {
        if (evals[g].ce_loss < evals[regular_at].ce_loss ||
            (evals[g].ce_loss == evals[regular_at].ce_loss &&
             better_tiebreak(evals[g], evals[regular_at])))
            regular_at = g;
    }
    const double mcc_floor = evals[regular_at].mcc_v - 0.05;

    auto select_recall = [&](bool normal_side) {
        size_t best = SIZE_MAX;
        for (size_t g = 0; g < evals.size(); ++g) {
            if (evals[g].mcc_v < mcc_floor) continue;
            if (best == SIZE_MAX) {
                best = g;
                continue;
            }
            const double rg = normal_side ? evals[g].recall_normal : evals[g].recall_attack;
            const double rb = normal_side ? evals[best].recall_normal : evals[best].recall_attack;
            if (rg > rb || (rg == rb && better_tiebreak(evals[g], evals[best]))) best = g;
        }
        return best == SIZE_MAX ? regular_at : best;  // empty constraint set: fall back
    };

    VariantSet out;
    out.regular = evals[regular_at].ensemble;
    out.regular.variant = Variant::Regular;
    out.normal = evals[select_recall(true)].ensemble;
    out.normal.variant = Variant::Normal;
    out.attack = evals[select_recall(false)].ensemble;
    out.attack.variant = Variant::Attack;
    return out;
}

// --- ensemble serialization -------------------------------------------------
//
// "ADBE" | u32 version | u8 variant | u32 n_features | f64 cw0 | f64 cw1
// | u32 round count; per round: f64 alpha, then the tree preorder:
//   u8 0 marks an internal node (u32 feature, f32 threshold, left, right)
//   u8 1 marks a leaf (i8 label)

inline constexpr uint32_t kEnsembleFormatVersion = 1;

namespace detail {

inline void encode_tree(std::vector<uint8_t>& out, const WeakLearner& l, uint32_t at) {
    const TreeNode& nd = l.nodes[at];
    if (nd.is_leaf()) {
        binio::put_u8(out, 1);
        binio::put_u8(out, static_cast<uint8_t>(nd.leaf_label));
        return;
    }
    binio::put_u8(out, 0);
    binio::put_u32(out, static_cast<uint32_t>(nd.feature));
    binio::put_f32(out, nd.threshold);
    encode_tree(out, l, nd.left);
    encode_tree(out, l, nd.right);
}

inline uint32_t decode_tree(binio::Reader& r, WeakLearner& l) {
    const uint8_t tag = r.u8();
    const uint32_t at = static_cast<uint32_t>(l.nodes.size());
    l.nodes.emplace_back();
    if (tag == 1) {
        const int8_t label = r.i8();
        if (label != -1 && label != 1) throw Error("deserialize_ensemble: bad leaf label");
        l.nodes[at].leaf_label = label;
        return at;
    }
    if (tag != 0) throw Error("deserialize_ensemble: bad node tag");
    l.nodes[at].feature = static_cast<int32_t>(r.u32());
    l.nodes[at].threshold = r.f32();
    l.nodes[at].left = decode_tree(r, l);
    l.nodes[at].right = decode_tree(r, l);
    return at;
}

}  // namespace detail

inline std::vector<uint8_t> serialize_ensemble(const BoostedEnsemble& e) {
    std::vector<uint8_t> out;
    for (char c : {'A', 'D', 'B', 'E'}) out.push_back(static_cast<uint8_t>(c));
    binio::put_u32(out, kEnsembleFormatVersion);
    binio::put_u8(out, static_cast<uint8_t>(e.variant));
    binio::put_u32(out, e.n_features);
    binio::put_f64(out, e.class_weights.cw0);
    binio::put_f64(out, e.class_weights.cw1);
    binio::put_u32(out, static_cast<uint32_t>(e.rounds.size()));
    for (const auto& round : e.rounds) {
        binio::put_f64(out, round.alpha);
        detail::encode_tree(out, round.learner, 0);
    }
    return out;
}

inline BoostedEnsemble deserialize_ensemble(std::span<const uint8_t> bytes) {
    binio::Reader r(bytes);
    if (r.u8() != 'A' || r.u8() != 'D' || r.u8() != 'B' || r.u8() != 'E')
        throw Error("deserialize_ensemble: bad magic");
    const uint32_t version = r.u32();
    if (version != kEnsembleFormatVersion)
        throw Error("deserialize_ensemble: unsupported version " + std::to_string(version));
    BoostedEnsemble e;
    const uint8_t variant = r.u8();
    if (variant > 2) throw Error("deserialize_ensemble: bad variant");
    e.variant = static_cast<Variant>(variant);
    e.n_features = r.u32();
    e.class_weights.cw0 = r.f64();
    e.class_weights.cw1 = r.f64();
    const uint32_t n_rounds = r.u32();
    e.rounds.resize(n_rounds);
    for (uint32_t t = 0; t < n_rounds; ++t) {
        e.rounds[t].alpha = r.f64();
        detail::decode_tree(r, e.rounds[t].learner);
    }
    if (!r.done()) throw Error("deserialize_ensemble: trailing bytes");
    return e;
}

inline void save_ensemble(const BoostedEnsemble& e, const std::filesystem::path& path) {
    binio::write_file(path, serialize_ensemble(e));
}

inline BoostedEnsemble load_ensemble(const std::filesystem::path& path) {
    return deserialize_ensemble(binio::read_file(path));
}

}  // namespace addai
