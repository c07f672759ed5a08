#pragma once

// Local-unit model: the symmetric tanh autoencoder, reconstruction-error
// scoring, threshold selection, local classification and the local range
// computed from the sorted training errors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "addai/dataset.hpp"
#include "addai/neuralnet.hpp"

namespace addai {

struct AutoencoderModel {
    NetworkParams params;
    size_t input_width = 0;
    size_t code_size = 0;
    size_t code_layer_index = 0;  // activation index of the bottleneck
};

// Layer widths interpolate linearly (rounded) from k down to h in 3 encoder
// steps and back up symmetrically; 7 widths total.
inline std::vector<size_t> autoencoder_widths(size_t k, size_t h) {
    if (h < 2) throw Error("autoencoder_widths: code size must be >= 2");
    if (h >= k) throw Error("autoencoder_widths: code size " + std::to_string(h) +
                            " must be smaller than input width " + std::to_string(k));
    std::vector<size_t> widths(7);
    for (size_t i = 0; i <= 3; ++i) {
        const double w = static_cast<double>(k) +
                         (static_cast<double>(h) - static_cast<double>(k)) * static_cast<double>(i) / 3.0;
        widths[i] = static_cast<size_t>(std::llround(w));
    }
    widths[4] = widths[2];
    widths[5] = widths[1];
    widths[6] = widths[0];
    return widths;
}

inline AutoencoderModel build_autoencoder(size_t k, size_t h, uint64_t seed) {
    AutoencoderModel m;
    m.input_width = k;
    m.code_size = h;
    m.code_layer_index = 3;
    m.params = init_params(autoencoder_widths(k, h), seed);
    return m;
}

// Trains on normal data only (reconstruction target = input). Returns the
// end-of-epoch mean reconstruction loss over the training set, measured in
// inference mode. Deterministic under cfg.seed.
inline std::vector<double> train(AutoencoderModel& m, const Dataset& normals,
                                 const TrainConfig& cfg) {
    if (normals.empty()) throw Error("train: empty dataset");
    if (cfg.epochs < 1) throw Error("train: epochs must be >= 1");
    if (cfg.batch_size < 1) throw Error("train: batch_size must be >= 1");
    if (!(cfg.learning_rate > 0.0)) throw Error("train: learning rate must be > 0");
    for (size_t i = 0; i < normals.size(); ++i)
        if (normals.records[i].label != 0)
            throw Error("train: dataset contains an attack label at record " + std::to_string(i));
    if (normals.feature_count() != m.input_width)
        throw Error("train: dataset width " + std::to_string(normals.feature_count()) +
                    " != model input " + std::to_string(m.input_width));

    std::mt19937_64 rng(cfg.seed);
    std::vector<size_t> order(normals.size());
    std::iota(order.begin(), order.end(), 0);

    AdamState adam = init_adam_state(m.params);
    std::vector<double> epoch_loss;
    epoch_loss.reserve(cfg.epochs);

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t end = std::min(start + cfg.batch_size, order.size());
            NetworkParams grad_sum = zero_like(m.params);
            for (size_t i = start; i < end; ++i) {
                const auto& x = normals.records[order[i]].features;
                auto trace = forward<float>(m.params, x, &rng, cfg.dropout_rate);
                add_in_place(grad_sum, backward<float>(m.params, trace, x));
            }
            scale_in_place(grad_sum, 1.0 / static_cast<double>(end - start));
            adam_step(m.params, grad_sum, adam, cfg);
        }
        double loss_sum = 0.0;
        for (const auto& rec : normals.records) {
            auto trace = forward<float>(m.params, rec.features);
            loss_sum += mse<float>(rec.features, trace.output());
        }
        epoch_loss.push_back(loss_sum / static_cast<double>(normals.size()));
    }
    return epoch_loss;
}

inline double reconstruction_error(const AutoencoderModel& m, std::span<const float> x) {
    auto trace = forward<float>(m.params, x);
    return mse<float>(x, trace.output());
}

// Bottleneck activations; pure function of the input.
inline std::vector<float> encode(const AutoencoderModel& m, std::span<const float> x) {
    auto trace = forward<float>(m.params, x);
    return trace.activations[m.code_layer_index];
}

// error < eta -> normal; the boundary classifies as attack.
inline int classify_local(double error, double eta) { return error < eta ? 0 : 1; }

// Threshold maximizing training accuracy over candidate thresholds at the
// midpoints between adjacent distinct sorted errors; ties go to the smaller
// candidate.
inline double select_threshold(const std::vector<double>& errors, const std::vector<int>& labels) {
    if (errors.size() != labels.size()) throw Error("select_threshold: length mismatch");
    const size_t n = errors.size();
    size_t n_attack = 0;
    for (int y : labels) n_attack += (y == 1) ? 1 : 0;
    if (n_attack == 0 || n_attack == n)
        throw Error("select_threshold: training data must contain both classes");

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return errors[a] < errors[b]; });

    // prefix = samples strictly below the candidate; scan ascending so ties
    // resolve to the smaller threshold
    double best_eta = 0.0;
    size_t best_correct = 0;
    bool found = false;
    size_t normals_below = 0, attacks_below = 0;
    for (size_t i = 0; i + 1 <= n; ++i) {
        if (labels[order[i]] == 0)
            ++normals_below;
        else
            ++attacks_below;
        if (i + 1 == n) break;
        const double lo = errors[order[i]];
        const double hi = errors[order[i + 1]];
        if (lo == hi) continue;
        const double eta = lo + (hi - lo) / 2.0;
        const size_t correct = normals_below + (n_attack - attacks_below);
        if (!found || correct > best_correct) {
            found = true;
            best_correct = correct;
            best_eta = eta;
        }
    }
    if (!found)
        // all errors identical: no decision boundary exists, fall back to the
        // common value (everything classifies as attack)
        return errors[order[0]];
    return best_eta;
}

inline double select_threshold(const AutoencoderModel& m, const Dataset& labeled_train) {
    std::vector<double> errors(labeled_train.size());
    std::vector<int> labels(labeled_train.size());
    for (size_t i = 0; i < labeled_train.size(); ++i) {
        errors[i] = reconstruction_error(m, labeled_train.records[i].features);
        labels[i] = labeled_train.records[i].label;
    }
    return select_threshold(errors, labels);
}

// Ascending reconstruction errors of a unit's training samples.
struct SortedErrors {
    std::vector<double> values;

    static SortedErrors from_unsorted(std::vector<double> v) {
        for (double e : v)
            if (!(e >= 0.0)) throw Error("SortedErrors: negative or NaN error");
        std::sort(v.begin(), v.end());
        return {std::move(v)};
    }
};

// Literal local-range rule: r = 1 - trust, k = floor(r*n/2), idx = position
// of the error closest to eta (ties toward the lower index);
// lo = eta - Err[idx-k], hi = eta + Err[idx+k], indices clamped to the array,
// lo clamped to >= 0.
inline std::pair<double, double> compute_local_range(const SortedErrors& errs, double eta,
                                                     double trust, size_t n) {
    if (errs.values.empty()) throw Error("compute_local_range: empty error array");
    if (trust < 0.0 || trust > 1.0) throw Error("compute_local_range: trust must be in [0,1]");
    const size_t m = errs.values.size();

    const double r = 1.0 - trust;
    const size_t k = static_cast<size_t>(std::floor(r * static_cast<double>(n) / 2.0));

    auto it = std::lower_bound(errs.values.begin(), errs.values.end(), eta);
    size_t idx;
    if (it == errs.values.begin())
        idx = 0;
    else if (it == errs.values.end())
        idx = m - 1;
    else {
        const size_t j = static_cast<size_t>(it - errs.values.begin());
        idx = (eta - errs.values[j - 1] <= errs.values[j] - eta) ? j - 1 : j;
    }

    const size_t lo_idx = (idx >= k) ? idx - k : 0;
    const size_t hi_idx = std::min(idx + k, m - 1);
    const double lo = std::max(0.0, eta - errs.values[lo_idx]);
    const double hi = eta + errs.values[hi_idx];
    return {lo, hi};
}

// Per-unit profile: threshold, trust score (training accuracy of the local
// classifier) and the local range, all computed from the unit's own labeled
// training split.
struct LocalProfile {
    std::string unit_id;
    double eta = 0.0;
    double trust = 0.0;
    double range_lo = 0.0;
    double range_hi = 0.0;
    size_t n_train = 0;
};

inline LocalProfile build_local_profile(const std::string& unit_id, const AutoencoderModel& m,
                                        const Dataset& labeled_train) {
    std::vector<double> errors(labeled_train.size());
    std::vector<int> labels(labeled_train.size());
    for (size_t i = 0; i < labeled_train.size(); ++i) {
        errors[i] = reconstruction_error(m, labeled_train.records[i].features);
        labels[i] = labeled_train.records[i].label;
    }

    LocalProfile p;
    p.unit_id = unit_id;
    p.n_train = labeled_train.size();
    p.eta = select_threshold(errors, labels);

    size_t correct = 0;
    for (size_t i = 0; i < errors.size(); ++i)
        correct += (classify_local(errors[i], p.eta) == labels[i]) ? 1 : 0;
    p.trust = static_cast<double>(correct) / static_cast<double>(errors.size());

    const auto sorted = SortedErrors::from_unsorted(errors);
    std::tie(p.range_lo, p.range_hi) = compute_local_range(sorted, p.eta, p.trust, p.n_train);
    return p;
}

// Encoder half of the model (input layer through the bottleneck); used to
// report the reduced on-device storage footprint.
inline NetworkParams encoder_params(const AutoencoderModel& m) {
    NetworkParams enc;
    enc.layers.assign(m.params.layers.begin(),
                      m.params.layers.begin() + static_cast<long>(m.code_layer_index));
    return enc;
}

}  // namespace addai
