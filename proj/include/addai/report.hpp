#pragma once

// Evaluation report: per-unit metric rows, local profiles, routing counts and
// the communication-cost ledger, emitted as JSON plus CSV tables. Output is
// deterministic; anything wall-clock-related goes to a separate metadata file.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "addai/autoencoder.hpp"
#include "addai/config.hpp"
#include "addai/metrics.hpp"

namespace addai {

struct MetricsRow {
    std::string unit_id;
    std::string scope;  // "local" or "cloud"
    ConfusionMatrix cm;
    double accuracy_v = 0.0;
    double mcc_v = 0.0;
    double ur_v = 0.0;
    bool ur_degenerate = false;

    static MetricsRow from(const std::string& unit_id, const std::string& scope,
                           const ConfusionMatrix& cm) {
        MetricsRow row{unit_id, scope, cm, 0.0, 0.0, 0.0, false};
        row.accuracy_v = accuracy(cm);
        row.mcc_v = mcc(cm);
        const auto ur = undetected_rate(cm);
        row.ur_v = ur.value;
        row.ur_degenerate = ur.degenerate;
        return row;
    }
};

struct RoutingRow {
    std::string unit_id;
    uint64_t to_normal = 0;
    uint64_t to_regular = 0;
    uint64_t to_attack = 0;

    uint64_t total() const { return to_normal + to_regular + to_attack; }
};

// Per-unit class counts of the partition, as dealt to the unit.
struct UnitDataRow {
    std::string unit_id;
    uint64_t train_normals = 0;
    uint64_t train_attacks = 0;
    uint64_t test_normals = 0;
    uint64_t test_attacks = 0;
};

struct LedgerTotals {
    uint64_t addai_bytes = 0;
    uint64_t raw_bytes = 0;
    uint64_t messages = 0;
};

struct EvaluationReport {
    // run parameters (echoed so the report stands alone)
    size_t n_units = 0;
    size_t feature_count = 0;
    size_t code_size = 0;
    std::string trust_mode;
    std::string ablation;
    uint64_t seed = 0;

    std::vector<UnitDataRow> units;
    std::vector<LocalProfile> profiles;
    std::vector<MetricsRow> local_rows;
    std::vector<MetricsRow> cloud_rows;  // empty in trusted mode
    std::vector<RoutingRow> routing;     // empty in trusted mode

    LedgerTotals ledger;
    double cost_ratio = 0.0;            // addai_bytes / raw_bytes
    uint64_t message_bytes_each = 0;    // 5 + 4h
    uint64_t raw_bytes_each = 0;        // 4K
    uint64_t distribution_payload_bytes = 0;
    uint64_t model_bytes_full = 0;
    uint64_t model_bytes_encoder = 0;

    // aggregates over all units
    ConfusionMatrix local_total;
    ConfusionMatrix cloud_total;
};

namespace detail {

inline std::string csv_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw Error("write failed: " + path.string());
}

}  // namespace detail

inline nlohmann::ordered_json profile_to_json(const LocalProfile& p) {
    return nlohmann::ordered_json{{"unit_id", p.unit_id}, {"eta", p.eta},
                                  {"trust", p.trust},     {"range_lo", p.range_lo},
                                  {"range_hi", p.range_hi}, {"n_train", p.n_train}};
}

inline LocalProfile profile_from_json(const nlohmann::json& j) {
    LocalProfile p;
    p.unit_id = j.at("unit_id").get<std::string>();
    p.eta = j.at("eta").get<double>();
    p.trust = j.at("trust").get<double>();
    p.range_lo = j.at("range_lo").get<double>();
    p.range_hi = j.at("range_hi").get<double>();
    p.n_train = j.at("n_train").get<size_t>();
    return p;
}

inline nlohmann::ordered_json metrics_row_to_json(const MetricsRow& r) {
    return nlohmann::ordered_json{
        {"unit_id", r.unit_id},   {"scope", r.scope},
        {"accuracy", r.accuracy_v}, {"mcc", r.mcc_v},
        {"ur", r.ur_v},           {"ur_degenerate", r.ur_degenerate},
        {"tp", r.cm.tp},          {"tn", r.cm.tn},
        {"fp", r.cm.fp},          {"fn", r.cm.fn}};
}

inline nlohmann::ordered_json report_to_json(const EvaluationReport& r) {
    nlohmann::ordered_json j;
    j["run"] = {{"n_units", r.n_units},       {"feature_count", r.feature_count},
                {"code_size", r.code_size},   {"trust_mode", r.trust_mode},
                {"ablation", r.ablation},     {"seed", r.seed}};

    j["units"] = nlohmann::ordered_json::array();
    for (const auto& u : r.units)
        j["units"].push_back({{"unit_id", u.unit_id},
                              {"train_normals", u.train_normals},
                              {"train_attacks", u.train_attacks},
                              {"test_normals", u.test_normals},
                              {"test_attacks", u.test_attacks}});

    j["profiles"] = nlohmann::ordered_json::array();
    for (const auto& p : r.profiles) j["profiles"].push_back(profile_to_json(p));

    j["metrics"] = nlohmann::ordered_json::array();
    for (const auto& row : r.local_rows) j["metrics"].push_back(metrics_row_to_json(row));
    for (const auto& row : r.cloud_rows) j["metrics"].push_back(metrics_row_to_json(row));

    j["routing"] = nlohmann::ordered_json::array();
    for (const auto& row : r.routing)
        j["routing"].push_back({{"unit_id", row.unit_id},
                                {"to_normal", row.to_normal},
                                {"to_regular", row.to_regular},
                                {"to_attack", row.to_attack}});

    j["ledger"] = {{"addai_bytes", r.ledger.addai_bytes},
                   {"raw_bytes", r.ledger.raw_bytes},
                   {"messages", r.ledger.messages},
                   {"cost_ratio", r.cost_ratio},
                   {"message_bytes_each", r.message_bytes_each},
                   {"raw_bytes_each", r.raw_bytes_each},
                   {"distribution_payload_bytes", r.distribution_payload_bytes},
                   {"model_bytes_full", r.model_bytes_full},
                   {"model_bytes_encoder", r.model_bytes_encoder}};

    auto totals = [](const ConfusionMatrix& cm) {
        nlohmann::ordered_json t{{"tp", cm.tp}, {"tn", cm.tn}, {"fp", cm.fp}, {"fn", cm.fn}};
        if (cm.total() > 0) {
            t["accuracy"] = accuracy(cm);
            t["mcc"] = mcc(cm);
            t["ur"] = undetected_rate(cm).value;
        }
        return t;
    };
    j["summary"] = {{"local", totals(r.local_total)}, {"cloud", totals(r.cloud_total)}};
    return j;
}

inline std::string metrics_csv(const EvaluationReport& r) {
    std::string out = "unit_id,scope,accuracy,mcc,ur,tp,tn,fp,fn\n";
    auto emit = [&](const MetricsRow& row) {
        out += row.unit_id + ',' + row.scope + ',' + detail::csv_double(row.accuracy_v) + ',' +
               detail::csv_double(row.mcc_v) + ',' + detail::csv_double(row.ur_v) + ',' +
               std::to_string(row.cm.tp) + ',' + std::to_string(row.cm.tn) + ',' +
               std::to_string(row.cm.fp) + ',' + std::to_string(row.cm.fn) + '\n';
    };
    for (const auto& row : r.local_rows) emit(row);
    for (const auto& row : r.cloud_rows) emit(row);
    return out;
}

inline std::string profiles_csv(const EvaluationReport& r) {
    std::string out = "unit_id,eta,trust,range_lo,range_hi,n_train\n";
    for (const auto& p : r.profiles)
        out += p.unit_id + ',' + detail::csv_double(p.eta) + ',' + detail::csv_double(p.trust) +
               ',' + detail::csv_double(p.range_lo) + ',' + detail::csv_double(p.range_hi) + ',' +
               std::to_string(p.n_train) + '\n';
    return out;
}

inline std::string ledger_csv(const EvaluationReport& r) {
    std::string out =
        "addai_bytes,raw_bytes,messages,cost_ratio,message_bytes_each,raw_bytes_each,"
        "distribution_payload_bytes,model_bytes_full,model_bytes_encoder\n";
    out += std::to_string(r.ledger.addai_bytes) + ',' + std::to_string(r.ledger.raw_bytes) + ',' +
           std::to_string(r.ledger.messages) + ',' + detail::csv_double(r.cost_ratio) + ',' +
           std::to_string(r.message_bytes_each) + ',' + std::to_string(r.raw_bytes_each) + ',' +
           std::to_string(r.distribution_payload_bytes) + ',' +
           std::to_string(r.model_bytes_full) + ',' + std::to_string(r.model_bytes_encoder) + '\n';
    return out;
}

inline std::string routing_csv(const EvaluationReport& r) {
    std::string out = "unit_id,to_normal,to_regular,to_attack\n";
    for (const auto& row : r.routing)
        out += row.unit_id + ',' + std::to_string(row.to_normal) + ',' +
               std::to_string(row.to_regular) + ',' + std::to_string(row.to_attack) + '\n';
    return out;
}

// Writes report.json plus the CSV tables into dir. Every byte is a pure
// function of the report contents.
inline void write_report_files(const EvaluationReport& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    detail::write_text_file(dir / "report.json", report_to_json(r).dump(2) + "\n");
    detail::write_text_file(dir / "metrics.csv", metrics_csv(r));
    detail::write_text_file(dir / "profiles.csv", profiles_csv(r));
    detail::write_text_file(dir / "ledger.csv", ledger_csv(r));
    detail::write_text_file(dir / "routing.csv", routing_csv(r));
}

}  // namespace addai
