#pragma once

// Flow-record ingestion: CSV loading, normalization, splits, per-unit
// partitioning and the synthetic fixture generator.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "addai/binio.hpp"

namespace addai {

// One network-flow observation: K numeric features plus a binary label
// (0 = normal, 1 = attack).
struct FlowRecord {
    std::vector<float> features;
    int label = 0;
};

struct Dataset {
    std::vector<std::string> schema;  // ordered feature-column names
    std::vector<FlowRecord> records;

    size_t size() const { return records.size(); }
    size_t feature_count() const { return schema.size(); }
    bool empty() const { return records.empty(); }

    size_t count_label(int label) const {
        size_t n = 0;
        for (const auto& r : records) n += (r.label == label) ? 1 : 0;
        return n;
    }
};

struct CsvSchema {
    std::vector<std::string> feature_columns;
    std::string label_column;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline bool parse_float(const std::string& s, float& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last && std::isfinite(out);
}

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace detail

// Loads a header-first CSV, keeping exactly the schema's feature columns and
// label column. Non-numeric or missing feature values are rejected with the
// offending row number, never imputed.
inline Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw Error("load_csv: file not found: " + path.string());

    std::string header_line;
    if (!std::getline(in, header_line))
        throw Error("load_csv: empty file: " + path.string());
    const auto header = detail::split_csv_line(header_line);

    auto column_index = [&](const std::string& name) -> size_t {
        for (size_t i = 0; i < header.size(); ++i)
            if (detail::trim(header[i]) == name) return i;
        throw Error("load_csv: schema mismatch: column '" + name + "' absent in " +
                    path.string());
    };

    std::vector<size_t> feature_idx;
    feature_idx.reserve(schema.feature_columns.size());
    for (const auto& name : schema.feature_columns) feature_idx.push_back(column_index(name));
    const size_t label_idx = column_index(schema.label_column);

    Dataset d;
    d.schema = schema.feature_columns;

    std::string line;
    size_t row = 1;  // header is row 1
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);

        FlowRecord rec;
        rec.features.reserve(feature_idx.size());
        for (size_t j = 0; j < feature_idx.size(); ++j) {
            if (feature_idx[j] >= cells.size())
                throw Error("load_csv: row " + std::to_string(row) + ": missing value for column '" +
                            schema.feature_columns[j] + "'");
            float v;
            if (!detail::parse_float(cells[feature_idx[j]], v))
                throw Error("load_csv: row " + std::to_string(row) + ": non-numeric value '" +
                            detail::trim(cells[feature_idx[j]]) + "' in column '" +
                            schema.feature_columns[j] + "'");
            rec.features.push_back(v);
        }

        if (label_idx >= cells.size())
            throw Error("load_csv: row " + std::to_string(row) + ": missing label");
        const std::string label_s = detail::trim(cells[label_idx]);
        if (label_s == "0")
            rec.label = 0;
        else if (label_s == "1")
            rec.label = 1;
        else
            throw Error("load_csv: row " + std::to_string(row) + ": label must be 0 or 1, got '" +
                        label_s + "'");
        d.records.push_back(std::move(rec));
    }

    if (d.records.empty()) throw Error("load_csv: no records in " + path.string());
    return d;
}

// Writes a dataset back out in the same layout load_csv reads. Floats use the
// shortest round-trip representation so load_csv(save_csv(d)) == d.
inline void save_csv(const Dataset& d, const std::filesystem::path& path,
                     const std::string& label_column = "label") {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("save_csv: cannot open for writing: " + path.string());
    for (size_t i = 0; i < d.schema.size(); ++i) out << d.schema[i] << ',';
    out << label_column << '\n';
    char buf[64];
    for (const auto& r : d.records) {
        for (float v : r.features) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
            out.write(buf, ptr - buf);
            out << ',';
        }
        out << r.label << '\n';
    }
    if (!out) throw Error("save_csv: write failed: " + path.string());
}

// Per-feature z-score statistics. Zero-variance features are flagged so
// apply_normalizer can map them to a constant 0.
struct NormalizationStats {
    std::vector<float> mean;
    std::vector<float> stddev;      // 1.0 placeholder on constant columns
    std::vector<uint8_t> constant;  // per-feature flag
};

inline NormalizationStats fit_normalizer(const Dataset& train) {
    if (train.empty()) throw Error("fit_normalizer: empty training set");
    const size_t k = train.feature_count();
    const size_t n = train.size();

    NormalizationStats s;
    s.mean.resize(k);
    s.stddev.resize(k);
    s.constant.resize(k, 0);

    for (size_t j = 0; j < k; ++j) {
        double sum = 0.0;
        for (const auto& r : train.records) sum += r.features[j];
        const double mean = sum / static_cast<double>(n);
        double var = 0.0;
        for (const auto& r : train.records) {
            const double d = r.features[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double sd = std::sqrt(var);
        s.mean[j] = static_cast<float>(mean);
        if (sd > 0.0) {
            s.stddev[j] = static_cast<float>(sd);
        } else {
            s.stddev[j] = 1.0f;
            s.constant[j] = 1;
        }
    }
    return s;
}

inline Dataset apply_normalizer(const Dataset& d, const NormalizationStats& s) {
    if (d.feature_count() != s.mean.size())
        throw Error("apply_normalizer: dimension mismatch: dataset has " +
                    std::to_string(d.feature_count()) + " features, stats have " +
                    std::to_string(s.mean.size()));
    Dataset out;
    out.schema = d.schema;
    out.records.reserve(d.size());
    for (const auto& r : d.records) {
        FlowRecord nr;
        nr.label = r.label;
        nr.features.resize(r.features.size());
        for (size_t j = 0; j < r.features.size(); ++j)
            nr.features[j] = s.constant[j] ? 0.0f : (r.features[j] - s.mean[j]) / s.stddev[j];
        out.records.push_back(std::move(nr));
    }
    return out;
}

// Deterministic stratified split. Each class is shuffled under the seed and
// cut at floor(ratio * n_class), clamped so both splits keep both classes
// whenever a class has at least two members.
inline std::pair<Dataset, Dataset> split_train_test(const Dataset& d, double ratio,
                                                    uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0))
        throw Error("split_train_test: ratio must be in (0,1)");
    if (d.size() < 2) throw Error("split_train_test: need at least 2 records");

    std::mt19937_64 rng(seed);
    std::vector<size_t> by_class[2];
    for (size_t i = 0; i < d.size(); ++i) by_class[d.records[i].label].push_back(i);

    std::vector<size_t> train_idx, test_idx;
    for (auto& idx : by_class) {
        if (idx.empty()) continue;
        std::shuffle(idx.begin(), idx.end(), rng);
        size_t n_train = static_cast<size_t>(std::floor(ratio * static_cast<double>(idx.size())));
        if (idx.size() >= 2) n_train = std::clamp<size_t>(n_train, 1, idx.size() - 1);
        train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + n_train);
        test_idx.insert(test_idx.end(), idx.begin() + n_train, idx.end());
    }
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    std::shuffle(test_idx.begin(), test_idx.end(), rng);

    auto take = [&](const std::vector<size_t>& idx) {
        Dataset out;
        out.schema = d.schema;
        out.records.reserve(idx.size());
        for (size_t i : idx) out.records.push_back(d.records[i]);
        return out;
    };
    return {take(train_idx), take(test_idx)};
}

// Random disjoint partition into n_units subsets whose sizes differ by at
// most one; the union is the input.
inline std::vector<Dataset> partition_local(const Dataset& d, size_t n_units, uint64_t seed) {
    if (n_units < 1) throw Error("partition_local: n_units must be >= 1");
    if (n_units > d.size())
        throw Error("partition_local: n_units (" + std::to_string(n_units) +
                    ") exceeds record count (" + std::to_string(d.size()) + ")");

    std::vector<size_t> idx(d.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);

    std::vector<Dataset> units(n_units);
    const size_t base = d.size() / n_units;
    const size_t extra = d.size() % n_units;
    size_t pos = 0;
    for (size_t u = 0; u < n_units; ++u) {
        const size_t take = base + (u < extra ? 1 : 0);
        units[u].schema = d.schema;
        units[u].records.reserve(take);
        for (size_t i = 0; i < take; ++i) units[u].records.push_back(d.records[idx[pos++]]);
    }
    return units;
}

// Subset with label 0, order preserved. Errors out when empty since the
// autoencoder cannot train without normal samples.
inline Dataset filter_normal(const Dataset& d) {
    Dataset out;
    out.schema = d.schema;
    for (const auto& r : d.records)
        if (r.label == 0) out.records.push_back(r);
    if (out.records.empty()) throw Error("filter_normal: no normal records");
    return out;
}

// Synthetic fixture. Normals are one Gaussian cluster living on a random
// m-dimensional linear manifold (m = k/2) plus small isotropic noise, so a
// bottleneck autoencoder can actually model them; attacks are the same
// process shifted by `displacement` per-feature standard deviations.
inline Dataset generate_synthetic(size_t n_normal, size_t n_attack, size_t k, uint64_t seed,
                                  double displacement = 4.0) {
    if (k < 2) throw Error("generate_synthetic: k must be >= 2");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const size_t m = std::max<size_t>(2, k / 2);
    constexpr double kNoiseSd = 0.3;
    const double feature_sd = std::sqrt(1.0 + kNoiseSd * kNoiseSd);

    // mixing matrix with unit-norm rows: Var(x_j) = 1 + noise^2 per feature
    std::vector<double> mix(k * m);
    for (auto& a : mix) a = gauss(rng);
    for (size_t j = 0; j < k; ++j) {
        double norm = 0.0;
        for (size_t l = 0; l < m; ++l) norm += mix[j * m + l] * mix[j * m + l];
        norm = std::sqrt(norm);
        for (size_t l = 0; l < m; ++l) mix[j * m + l] /= norm;
    }

    Dataset d;
    d.schema.reserve(k);
    for (size_t j = 0; j < k; ++j) d.schema.push_back("f" + std::to_string(j));

    std::vector<double> latent(m);
    d.records.reserve(n_normal + n_attack);
    for (size_t i = 0; i < n_normal + n_attack; ++i) {
        FlowRecord r;
        r.label = (i < n_normal) ? 0 : 1;
        const double shift = r.label == 1 ? displacement * feature_sd : 0.0;
        for (auto& z : latent) z = gauss(rng);
        r.features.resize(k);
        for (size_t j = 0; j < k; ++j) {
            double x = kNoiseSd * gauss(rng) + shift;
            for (size_t l = 0; l < m; ++l) x += mix[j * m + l] * latent[l];
            r.features[j] = static_cast<float>(x);
        }
        d.records.push_back(std::move(r));
    }
    std::shuffle(d.records.begin(), d.records.end(), rng);
    return d;
}

}  // namespace addai
