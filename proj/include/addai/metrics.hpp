#pragma once

// Confusion-matrix accumulation and the three evaluation metrics
// (accuracy, MCC, undetected rate). Label 1 (attack) is the positive class.

#include <cmath>
#include <cstdint>

#include "addai/binio.hpp"

namespace addai {

struct ConfusionMatrix {
    uint64_t tp = 0;
    uint64_t tn = 0;
    uint64_t fp = 0;
    uint64_t fn = 0;

    void add(int truth, int predicted) {
        if ((truth != 0 && truth != 1) || (predicted != 0 && predicted != 1))
            throw Error("ConfusionMatrix::add: labels must be 0 or 1");
        if (truth == 1)
            predicted == 1 ? ++tp : ++fn;
        else
            predicted == 1 ? ++fp : ++tn;
    }

    // Field-wise sum, for merging evaluation shards.
    ConfusionMatrix& merge(const ConfusionMatrix& o) {
        tp += o.tp;
        tn += o.tn;
        fp += o.fp;
        fn += o.fn;
        return *this;
    }

    uint64_t total() const { return tp + tn + fp + fn; }
};

// Matthews correlation coefficient; 0 when any denominator factor vanishes.
inline double mcc(const ConfusionMatrix& cm) {
    const double tp = static_cast<double>(cm.tp);
    const double tn = static_cast<double>(cm.tn);
    const double fp = static_cast<double>(cm.fp);
    const double fn = static_cast<double>(cm.fn);
    const double f1 = tp + fp, f2 = tp + fn, f3 = tn + fp, f4 = tn + fn;
    if (f1 == 0.0 || f2 == 0.0 || f3 == 0.0 || f4 == 0.0) return 0.0;
    return (tp * tn - fp * fn) / std::sqrt(f1 * f2 * f3 * f4);
}

inline double accuracy(const ConfusionMatrix& cm) {
    const uint64_t total = cm.total();
    if (total == 0) throw Error("accuracy: empty confusion matrix");
    return static_cast<double>(cm.tp + cm.tn) / static_cast<double>(total);
}

// UR = FN / (FN + TP). With no attack samples the value is 0 and the
// degenerate flag is set.
struct UndetectedRate {
    double value = 0.0;
    bool degenerate = false;
};

inline UndetectedRate undetected_rate(const ConfusionMatrix& cm) {
    if (cm.fn + cm.tp == 0) return {0.0, true};
    return {static_cast<double>(cm.fn) / static_cast<double>(cm.fn + cm.tp), false};
}

}  // namespace addai
