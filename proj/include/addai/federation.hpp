#pragma once

// Two-layer hierarchy orchestration: cloud-side training and parameter
// distribution, local inference and message emission, local-range routing to
// the three cloud ensembles, and byte-exact communication accounting against
// the raw-offload baseline.

#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "addai/adaboost.hpp"
#include "addai/autoencoder.hpp"
#include "addai/binio.hpp"
#include "addai/config.hpp"
#include "addai/dataset.hpp"
#include "addai/metrics.hpp"
#include "addai/neuralnet.hpp"
#include "addai/report.hpp"

namespace addai {

// The offload payload: predicted class, reconstruction error, code vector.
// Wire cost is exactly 1 + 4 + 4h bytes.
struct CloudMessage {
    uint8_t predicted_class = 0;  // 0 normal, 1 attack
    float recon_error = 0.0f;
    std::vector<float> code;

    bool operator==(const CloudMessage&) const = default;
};

inline size_t message_wire_bytes(size_t h) { return 1 + 4 + 4 * h; }

// 1 class byte, recon_error as little-endian f32, then each code component
// as little-endian f32.
inline std::vector<uint8_t> encode_message(const CloudMessage& m) {
    std::vector<uint8_t> out;
    out.reserve(message_wire_bytes(m.code.size()));
    binio::put_u8(out, m.predicted_class);
    binio::put_f32(out, m.recon_error);
    for (float c : m.code) binio::put_f32(out, c);
    return out;
}

inline CloudMessage decode_message(std::span<const uint8_t> bytes) {
    if (bytes.size() < 5 || (bytes.size() - 5) % 4 != 0)
        throw Error("decode_message: invalid length " + std::to_string(bytes.size()));
    binio::Reader r(bytes);
    CloudMessage m;
    m.predicted_class = r.u8();
    m.recon_error = r.f32();
    m.code.resize((bytes.size() - 5) / 4);
    for (auto& c : m.code) c = r.f32();
    return m;
}

// Which cloud ensemble a sample is fed to.
enum class CloudModel { Normal, Regular, Attack };

// Inside the local range -> Regular; below -> Normal-sensitive; above ->
// Attack-sensitive (boundaries belong to Regular).
inline CloudModel route(double error, const LocalProfile& profile) {
    if (error < profile.range_lo) return CloudModel::Normal;
    if (error > profile.range_hi) return CloudModel::Attack;
    return CloudModel::Regular;
}

// Byte totals under ADDAI vs the raw-offload baseline. Increments may come
// from concurrent unit loops; totals are exact regardless of interleaving.
struct CostLedger {
    std::atomic<uint64_t> addai_bytes{0};
    std::atomic<uint64_t> raw_bytes{0};
    std::atomic<uint64_t> messages{0};

    void record(uint64_t sent_bytes, uint64_t baseline_bytes) {
        addai_bytes.fetch_add(sent_bytes, std::memory_order_relaxed);
        raw_bytes.fetch_add(baseline_bytes, std::memory_order_relaxed);
        messages.fetch_add(1, std::memory_order_relaxed);
    }

    LedgerTotals totals() const {
        return {addai_bytes.load(), raw_bytes.load(), messages.load()};
    }
};

struct LocalUnit {
    std::string id;
    Dataset train;
    Dataset test;
    AutoencoderModel model;
    LocalProfile profile;
};

struct LocalVerdict {
    int label = 0;
};

using StepResult = std::variant<LocalVerdict, CloudMessage>;

// Trusted mode reports only the 1-byte verdict; untrusted (worst-case) mode
// emits the full message. The raw baseline charges 4K bytes either way.
inline StepResult local_unit_step(const LocalUnit& unit, const FlowRecord& x, TrustMode mode,
                                  CostLedger& ledger) {
    if (x.features.size() != unit.model.input_width)
        throw Error("local_unit_step: feature width mismatch");
    const double error = reconstruction_error(unit.model, x.features);
    const int label = classify_local(error, unit.profile.eta);
    const uint64_t baseline = 4 * static_cast<uint64_t>(x.features.size());

    if (mode == TrustMode::Trusted) {
        ledger.record(1, baseline);
        return LocalVerdict{label};
    }
    CloudMessage msg;
    msg.predicted_class = static_cast<uint8_t>(label);
    msg.recon_error = static_cast<float>(error);
    msg.code = encode(unit.model, x.features);
    ledger.record(message_wire_bytes(msg.code.size()), baseline);
    return msg;
}

// Feature layout the cloud ensembles consume: code ++ recon_error, plus the
// predicted-class byte when enabled.
inline std::vector<float> cloud_features(const CloudMessage& msg, bool include_class_feature) {
    std::vector<float> f = msg.code;
    f.push_back(msg.recon_error);
    if (include_class_feature) f.push_back(static_cast<float>(msg.predicted_class));
    return f;
}

inline int cloud_classify(const CloudMessage& msg, const LocalProfile& profile,
                          const VariantSet& models, bool include_class_feature = false) {
    const CloudModel target = route(msg.recon_error, profile);
    const auto features = cloud_features(msg, include_class_feature);
    switch (target) {
        case CloudModel::Normal: return predict(models.normal, features).label;
        case CloudModel::Regular: return predict(models.regular, features).label;
        case CloudModel::Attack: return predict(models.attack, features).label;
    }
    throw Error("cloud_classify: bad routing target");
}

// One autoencoder trained in the cloud on the pooled normal samples from all
// units; training is a one-time process.
inline NetworkParams cloud_train_autoencoder(const std::vector<Dataset>& unit_train_sets, size_t h,
                                             const TrainConfig& cfg, uint64_t init_seed) {
    if (unit_train_sets.empty()) throw Error("cloud_train_autoencoder: no units");
    Dataset pooled;
    pooled.schema = unit_train_sets.front().schema;
    for (const auto& d : unit_train_sets)
        for (const auto& r : d.records)
            if (r.label == 0) pooled.records.push_back(r);
    if (pooled.empty()) throw Error("cloud_train_autoencoder: no normal samples");

    AutoencoderModel model = build_autoencoder(pooled.feature_count(), h, init_seed);
    train(model, pooled, cfg);
    return model.params;
}

// Sends the trained parameters to every unit through the serialized payload
// (each copy must round-trip bitwise); each unit then derives its own
// threshold, trust score and local range from its own training data.
inline void distribute_params(const NetworkParams& params, size_t h,
                              std::vector<LocalUnit>& units) {
    const auto payload = serialize_params(params);
    for (auto& unit : units) {
        NetworkParams received = deserialize_params(payload);
        if (!(received == params))
            throw Error("distribute_params: serialization round-trip mismatch");
        unit.model.params = std::move(received);
        unit.model.input_width = params.input_width();
        unit.model.code_size = h;
        unit.model.code_layer_index = 3;
        unit.profile = build_local_profile(unit.id, unit.model, unit.train);
    }
}

// --- pipeline ----------------------------------------------------------------

struct PreparedData {
    std::vector<Dataset> unit_train;
    std::vector<Dataset> unit_test;
    size_t feature_count = 0;
};

struct TrainedArtifacts {
    NetworkParams ae_params;
    size_t feature_count = 0;
    size_t code_size = 0;
    VariantSet ensembles;
    std::vector<LocalProfile> profiles;
};

namespace detail {

template <typename F>
auto stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(std::string("stage ") + name + ": " + e.what());
    }
}

}  // namespace detail

// Loads (or synthesizes) the dataset, partitions it across units, splits each
// unit 80:20-style and z-scores everything against the pooled training split.
inline PreparedData prepare_data(const ExperimentConfig& cfg) {
    Dataset full = detail::stage("dataset", [&] {
        if (cfg.source == DataSource::Csv)
            return load_csv(cfg.csv_path, {cfg.feature_columns, cfg.label_column});
        return generate_synthetic(cfg.synthetic_normals, cfg.synthetic_attacks,
                                  cfg.synthetic_features,
                                  derive_seed(cfg.master_seed, Stage::Synthetic),
                                  cfg.synthetic_displacement);
    });

    auto units = detail::stage("partition", [&] {
        return partition_local(full, cfg.n_units, derive_seed(cfg.master_seed, Stage::Partition));
    });

    PreparedData data;
    data.feature_count = full.feature_count();
    data.unit_train.reserve(units.size());
    data.unit_test.reserve(units.size());
    detail::stage("split", [&] {
        for (size_t u = 0; u < units.size(); ++u) {
            auto [train_u, test_u] = split_train_test(
                units[u], cfg.train_ratio, derive_seed(cfg.master_seed, Stage::UnitSplit, u));
            data.unit_train.push_back(std::move(train_u));
            data.unit_test.push_back(std::move(test_u));
        }
        return 0;
    });

    detail::stage("normalize", [&] {
        Dataset pooled_train;
        pooled_train.schema = data.unit_train.front().schema;
        for (const auto& d : data.unit_train)
            pooled_train.records.insert(pooled_train.records.end(), d.records.begin(),
                                        d.records.end());
        const auto stats = fit_normalizer(pooled_train);
        for (auto& d : data.unit_train) d = apply_normalizer(d, stats);
        for (auto& d : data.unit_test) d = apply_normalizer(d, stats);
        return 0;
    });
    return data;
}

inline std::vector<LocalUnit> make_units(const PreparedData& data) {
    std::vector<LocalUnit> units(data.unit_train.size());
    for (size_t u = 0; u < units.size(); ++u) {
        units[u].id = "unit" + std::to_string(u + 1);
        units[u].train = data.unit_train[u];
        units[u].test = data.unit_test[u];
    }
    return units;
}

// Cloud training set: codes plus reconstruction error of every pooled
// training sample, computed with the distributed model of its own unit.
inline Dataset build_cloud_features(const std::vector<LocalUnit>& units, size_t h,
                                    bool include_class_feature) {
    Dataset cloud;
    cloud.schema.reserve(h + 2);
    for (size_t j = 0; j < h; ++j) cloud.schema.push_back("code_" + std::to_string(j));
    cloud.schema.push_back("recon_error");
    if (include_class_feature) cloud.schema.push_back("pred_class");

    for (const auto& unit : units) {
        for (const auto& rec : unit.train.records) {
            const double error = reconstruction_error(unit.model, rec.features);
            CloudMessage msg;
            msg.predicted_class =
                static_cast<uint8_t>(classify_local(error, unit.profile.eta));
            msg.recon_error = static_cast<float>(error);
            msg.code = encode(unit.model, rec.features);

            FlowRecord out;
            out.features = cloud_features(msg, include_class_feature);
            out.label = rec.label;
            cloud.records.push_back(std::move(out));
        }
    }
    return cloud;
}

inline TrainedArtifacts train_pipeline(const ExperimentConfig& cfg, const PreparedData& data) {
    auto units = make_units(data);

    TrainConfig train_cfg = cfg.train;
    train_cfg.seed = derive_seed(cfg.master_seed, Stage::AutoencoderTrain);

    TrainedArtifacts art;
    art.feature_count = data.feature_count;
    art.code_size = cfg.code_size;
    art.ae_params = detail::stage("autoencoder-train", [&] {
        std::vector<Dataset> train_sets;
        train_sets.reserve(units.size());
        for (const auto& unit : units) train_sets.push_back(unit.train);
        return cloud_train_autoencoder(train_sets, cfg.code_size, train_cfg,
                                       derive_seed(cfg.master_seed, Stage::AutoencoderInit));
    });

    detail::stage("distribute", [&] {
        distribute_params(art.ae_params, cfg.code_size, units);
        return 0;
    });
    for (const auto& unit : units) art.profiles.push_back(unit.profile);

    art.ensembles = detail::stage("adaboost", [&] {
        const Dataset cloud = build_cloud_features(units, cfg.code_size, cfg.include_class_feature);
        auto [cloud_train, cloud_valid] = split_train_test(
            cloud, 0.8, derive_seed(cfg.master_seed, Stage::ValidSplit));
        return grid_search_variants(cloud_train, cloud_valid, cfg.class_weight_grid(),
                                    cfg.boost_rounds, cfg.max_tree_depth,
                                    derive_seed(cfg.master_seed, Stage::Boost));
    });
    return art;
}

// Worst-case-oriented evaluation: every test sample produces a local verdict;
// in untrusted mode it is additionally offloaded, routed and classified in
// the cloud. The ablation switch bypasses routing toward one fixed ensemble.
inline EvaluationReport evaluate_pipeline(const ExperimentConfig& cfg, const PreparedData& data,
                                          const TrainedArtifacts& art) {
    if (art.code_size != cfg.code_size)
        throw Error("evaluate: artifact code size " + std::to_string(art.code_size) +
                    " != config code size " + std::to_string(cfg.code_size));
    if (art.feature_count != data.feature_count)
        throw Error("evaluate: artifact feature count " + std::to_string(art.feature_count) +
                    " != dataset feature count " + std::to_string(data.feature_count));
    if (art.profiles.size() != data.unit_train.size())
        throw Error("evaluate: artifact unit count " + std::to_string(art.profiles.size()) +
                    " != configured n_units " + std::to_string(data.unit_train.size()));

    auto units = make_units(data);
    for (size_t u = 0; u < units.size(); ++u) {
        units[u].model.params = art.ae_params;
        units[u].model.input_width = art.feature_count;
        units[u].model.code_size = art.code_size;
        units[u].model.code_layer_index = 3;
        units[u].profile = art.profiles[u];
    }

    EvaluationReport report;
    report.n_units = units.size();
    report.feature_count = data.feature_count;
    report.code_size = cfg.code_size;
    report.trust_mode = trust_mode_name(cfg.trust_mode);
    report.ablation = ablation_name(cfg.ablation);
    report.seed = cfg.master_seed;
    report.profiles = art.profiles;
    report.message_bytes_each = message_wire_bytes(cfg.code_size);
    report.raw_bytes_each = 4 * data.feature_count;
    for (const auto& unit : units)
        report.units.push_back({unit.id, unit.train.count_label(0), unit.train.count_label(1),
                                unit.test.count_label(0), unit.test.count_label(1)});

    const auto payload = serialize_params(art.ae_params);
    report.distribution_payload_bytes = payload.size();
    report.model_bytes_full = payload.size();
    AutoencoderModel whole;
    whole.params = art.ae_params;
    whole.code_layer_index = 3;
    report.model_bytes_encoder = serialize_params(encoder_params(whole)).size();

    CostLedger ledger;
    for (const auto& unit : units) {
        ConfusionMatrix local_cm, cloud_cm;
        RoutingRow routed{unit.id, 0, 0, 0};
        for (const auto& rec : unit.test.records) {
            const StepResult step = local_unit_step(unit, rec, cfg.trust_mode, ledger);
            if (std::holds_alternative<LocalVerdict>(step)) {
                local_cm.add(rec.label, std::get<LocalVerdict>(step).label);
                continue;
            }
            const auto& msg = std::get<CloudMessage>(step);
            local_cm.add(rec.label, static_cast<int>(msg.predicted_class));

            int cloud_label;
            if (cfg.ablation == Ablation::None) {
                switch (route(msg.recon_error, unit.profile)) {
                    case CloudModel::Normal: ++routed.to_normal; break;
                    case CloudModel::Regular: ++routed.to_regular; break;
                    case CloudModel::Attack: ++routed.to_attack; break;
                }
                cloud_label = cloud_classify(msg, unit.profile, art.ensembles,
                                             cfg.include_class_feature);
            } else {
                const Variant v = cfg.ablation == Ablation::Normal    ? Variant::Normal
                                  : cfg.ablation == Ablation::Regular ? Variant::Regular
                                                                      : Variant::Attack;
                switch (v) {
                    case Variant::Normal: ++routed.to_normal; break;
                    case Variant::Regular: ++routed.to_regular; break;
                    case Variant::Attack: ++routed.to_attack; break;
                }
                cloud_label = predict(art.ensembles.by_variant(v),
                                      cloud_features(msg, cfg.include_class_feature))
                                  .label;
            }
            cloud_cm.add(rec.label, cloud_label);
        }

        report.local_rows.push_back(MetricsRow::from(unit.id, "local", local_cm));
        report.local_total.merge(local_cm);
        if (cfg.trust_mode == TrustMode::Untrusted) {
            report.cloud_rows.push_back(MetricsRow::from(unit.id, "cloud", cloud_cm));
            report.cloud_total.merge(cloud_cm);
            report.routing.push_back(routed);
        }
    }

    report.ledger = ledger.totals();
    report.cost_ratio = report.ledger.raw_bytes == 0
                            ? 0.0
                            : static_cast<double>(report.ledger.addai_bytes) /
                                  static_cast<double>(report.ledger.raw_bytes);
    return report;
}

// Full pipeline under one config: partition, cloud training, distribution,
// per-unit profiles, grid-searched cloud variants, then worst-case routing of
// every test sample. Deterministic under the master seed.
inline EvaluationReport run_simulation(const ExperimentConfig& cfg) {
    validate_config(cfg);
    const PreparedData data = prepare_data(cfg);
    const TrainedArtifacts art = train_pipeline(cfg, data);
    return evaluate_pipeline(cfg, data, art);
}

}  // namespace addai
