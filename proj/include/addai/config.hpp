#pragma once

// Declarative experiment configuration: INI-style file with one section per
// module, field-level validation, and the master-seed derivation scheme.
//
// Seed scheme: every pipeline stage draws its seed as
//   derive_seed(master, stage, index)
// where `stage` is a fixed Stage tag and `index` disambiguates repeats
// (e.g. per-unit splits). Stages can therefore be rerun in isolation and
// reproduce exactly.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "addai/adaboost.hpp"
#include "addai/dataset.hpp"
#include "addai/neuralnet.hpp"

namespace addai {

enum class Stage : uint32_t {
    Synthetic = 1,
    Partition = 2,
    UnitSplit = 3,
    AutoencoderInit = 4,
    AutoencoderTrain = 5,
    ValidSplit = 6,
    Boost = 7,
};

inline uint64_t derive_seed(uint64_t master, Stage stage, uint64_t index = 0) {
    uint64_t x = detail::splitmix64(master ^ (0x100000001b3ull * static_cast<uint64_t>(stage)));
    return detail::splitmix64(x ^ index);
}

enum class DataSource { Synthetic, Csv };
enum class TrustMode { Trusted, Untrusted };
enum class Ablation { None, Normal, Regular, Attack };

struct ExperimentConfig {
    // [dataset]
    DataSource source = DataSource::Synthetic;
    std::string csv_path;
    std::string label_column = "label";
    std::vector<std::string> feature_columns;
    size_t synthetic_normals = 5000;
    size_t synthetic_attacks = 500;
    size_t synthetic_features = 40;
    double synthetic_displacement = 4.0;

    // [neuralnet]
    TrainConfig train;

    // [autoencoder]
    size_t code_size = 25;

    // [adaboost]
    size_t boost_rounds = 100;
    size_t max_tree_depth = 3;
    std::vector<double> grid_values = {1, 2, 4, 6, 8, 10};

    // [federation]
    size_t n_units = 3;
    double train_ratio = 0.8;
    TrustMode trust_mode = TrustMode::Untrusted;
    Ablation ablation = Ablation::None;
    bool include_class_feature = false;

    // [cli]
    uint64_t master_seed = 42;
    std::string out_dir = "out";

    std::vector<ClassWeights> class_weight_grid() const {
        std::vector<ClassWeights> grid;
        grid.reserve(grid_values.size() * grid_values.size());
        for (double a : grid_values)
            for (double b : grid_values) grid.push_back({a, b});
        return grid;
    }

    bool operator==(const ExperimentConfig&) const = default;
};

inline const char* trust_mode_name(TrustMode m) {
    return m == TrustMode::Trusted ? "trusted" : "untrusted";
}

inline const char* ablation_name(Ablation a) {
    switch (a) {
        case Ablation::None: return "none";
        case Ablation::Normal: return "normal";
        case Ablation::Regular: return "regular";
        case Ablation::Attack: return "attack";
    }
    throw Error("ablation_name: bad value");
}

inline TrustMode parse_trust_mode(const std::string& s) {
    if (s == "trusted") return TrustMode::Trusted;
    if (s == "untrusted") return TrustMode::Untrusted;
    throw Error("trust_mode: expected trusted|untrusted, got '" + s + "'");
}

inline Ablation parse_ablation(const std::string& s) {
    if (s == "none") return Ablation::None;
    if (s == "normal") return Ablation::Normal;
    if (s == "regular") return Ablation::Regular;
    if (s == "attack") return Ablation::Attack;
    throw Error("ablation: expected none|normal|regular|attack, got '" + s + "'");
}

namespace detail {

struct IniData {
    // (section, key) -> value; insertion order irrelevant, lookups tracked
    std::map<std::pair<std::string, std::string>, std::string> values;
    mutable std::map<std::pair<std::string, std::string>, bool> consumed;

    std::optional<std::string> get(const std::string& section, const std::string& key) const {
        auto it = values.find({section, key});
        if (it == values.end()) return std::nullopt;
        consumed[{section, key}] = true;
        return it->second;
    }
};

inline IniData parse_ini(std::istream& in, const std::string& origin) {
    IniData ini;
    std::string line, section;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (const size_t hash = t.find_first_of("#;"); hash != std::string::npos)
            t = trim(t.substr(0, hash));
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw Error(origin + ":" + std::to_string(line_no) + ": malformed section header");
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw Error(origin + ":" + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (section.empty())
            throw Error(origin + ":" + std::to_string(line_no) + ": key outside any section");
        if (key.empty())
            throw Error(origin + ":" + std::to_string(line_no) + ": empty key");
        if (!ini.values.emplace(std::make_pair(section, key), value).second)
            throw Error(origin + ":" + std::to_string(line_no) + ": duplicate key [" + section +
                        "] " + key);
    }
    return ini;
}

template <typename T>
T parse_number(const std::string& section, const std::string& key, const std::string& value) {
    T out{};
    const std::string t = trim(value);
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    if (ec != std::errc{} || ptr != t.data() + t.size())
        throw Error("[" + section + "] " + key + ": invalid number '" + value + "'");
    return out;
}

inline bool parse_bool(const std::string& section, const std::string& key,
                       const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw Error("[" + section + "] " + key + ": expected true|false, got '" + value + "'");
}

inline std::vector<std::string> parse_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace detail

inline ExperimentConfig parse_config(std::istream& in, const std::string& origin) {
    const auto ini = detail::parse_ini(in, origin);
    ExperimentConfig cfg;

    auto str = [&](const char* sec, const char* key, std::string& field) {
        if (auto v = ini.get(sec, key)) field = *v;
    };
    auto num = [&](const char* sec, const char* key, auto& field) {
        if (auto v = ini.get(sec, key))
            field = detail::parse_number<std::remove_reference_t<decltype(field)>>(sec, key, *v);
    };

    if (auto v = ini.get("dataset", "source")) {
        if (*v == "synthetic")
            cfg.source = DataSource::Synthetic;
        else if (*v == "csv")
            cfg.source = DataSource::Csv;
        else
            throw Error("[dataset] source: expected synthetic|csv, got '" + *v + "'");
    }
    str("dataset", "csv_path", cfg.csv_path);
    str("dataset", "label_column", cfg.label_column);
    if (auto v = ini.get("dataset", "feature_columns")) cfg.feature_columns = detail::parse_list(*v);
    num("dataset", "synthetic_normals", cfg.synthetic_normals);
    num("dataset", "synthetic_attacks", cfg.synthetic_attacks);
    num("dataset", "synthetic_features", cfg.synthetic_features);
    num("dataset", "synthetic_displacement", cfg.synthetic_displacement);

    num("neuralnet", "epochs", cfg.train.epochs);
    num("neuralnet", "learning_rate", cfg.train.learning_rate);
    num("neuralnet", "dropout_rate", cfg.train.dropout_rate);
    num("neuralnet", "batch_size", cfg.train.batch_size);
    num("neuralnet", "adam_beta1", cfg.train.adam_beta1);
    num("neuralnet", "adam_beta2", cfg.train.adam_beta2);
    num("neuralnet", "adam_epsilon", cfg.train.adam_epsilon);

    num("autoencoder", "code_size", cfg.code_size);

    num("adaboost", "rounds", cfg.boost_rounds);
    num("adaboost", "max_depth", cfg.max_tree_depth);
    if (auto v = ini.get("adaboost", "grid")) {
        cfg.grid_values.clear();
        for (const auto& item : detail::parse_list(*v))
            cfg.grid_values.push_back(detail::parse_number<double>("adaboost", "grid", item));
    }

    num("federation", "n_units", cfg.n_units);
    num("federation", "train_ratio", cfg.train_ratio);
    if (auto v = ini.get("federation", "trust_mode")) cfg.trust_mode = parse_trust_mode(*v);
    if (auto v = ini.get("federation", "ablation")) cfg.ablation = parse_ablation(*v);
    if (auto v = ini.get("federation", "include_class_feature"))
        cfg.include_class_feature = detail::parse_bool("federation", "include_class_feature", *v);

    num("cli", "seed", cfg.master_seed);
    str("cli", "out_dir", cfg.out_dir);

    for (const auto& [sk, value] : ini.values)
        if (!ini.consumed[{sk.first, sk.second}])
            throw Error(origin + ": unknown key [" + sk.first + "] " + sk.second);
    return cfg;
}

inline void validate_config(const ExperimentConfig& cfg) {
    auto fail = [](const std::string& field, const std::string& why) {
        throw Error("config: " + field + ": " + why);
    };
    if (cfg.source == DataSource::Csv) {
        if (cfg.csv_path.empty()) fail("[dataset] csv_path", "required for source = csv");
        if (!std::filesystem::exists(cfg.csv_path))
            fail("[dataset] csv_path", "file does not exist: " + cfg.csv_path);
        if (cfg.feature_columns.empty())
            fail("[dataset] feature_columns", "required for source = csv");
        if (cfg.label_column.empty()) fail("[dataset] label_column", "must not be empty");
    } else {
        if (cfg.synthetic_features < 2) fail("[dataset] synthetic_features", "must be >= 2");
        if (cfg.synthetic_normals == 0) fail("[dataset] synthetic_normals", "must be > 0");
    }
    if (cfg.train.epochs < 1) fail("[neuralnet] epochs", "must be >= 1");
    if (!(cfg.train.learning_rate > 0)) fail("[neuralnet] learning_rate", "must be > 0");
    if (cfg.train.dropout_rate < 0 || cfg.train.dropout_rate >= 1)
        fail("[neuralnet] dropout_rate", "must be in [0,1)");
    if (cfg.train.batch_size < 1) fail("[neuralnet] batch_size", "must be >= 1");
    const size_t k =
        cfg.source == DataSource::Csv ? cfg.feature_columns.size() : cfg.synthetic_features;
    if (cfg.code_size < 2) fail("[autoencoder] code_size", "must be >= 2");
    if (cfg.code_size >= k)
        fail("[autoencoder] code_size", "must be smaller than the feature count (" +
                                            std::to_string(k) + ")");
    if (cfg.boost_rounds < 1) fail("[adaboost] rounds", "must be >= 1");
    if (cfg.max_tree_depth < 1) fail("[adaboost] max_depth", "must be >= 1");
    if (cfg.grid_values.empty()) fail("[adaboost] grid", "must not be empty");
    for (double g : cfg.grid_values)
        if (!(g > 0)) fail("[adaboost] grid", "class weights must be positive");
    if (cfg.n_units < 1) fail("[federation] n_units", "must be >= 1");
    if (!(cfg.train_ratio > 0 && cfg.train_ratio < 1))
        fail("[federation] train_ratio", "must be in (0,1)");
    if (cfg.out_dir.empty()) fail("[cli] out_dir", "must not be empty");
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("config: cannot open " + path.string());
    auto cfg = parse_config(in, path.string());
    validate_config(cfg);
    return cfg;
}

// Canonical serialization; parse(serialize(cfg)) == cfg.
inline std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "[dataset]\n";
    out << "source = " << (cfg.source == DataSource::Csv ? "csv" : "synthetic") << "\n";
    if (!cfg.csv_path.empty()) out << "csv_path = " << cfg.csv_path << "\n";
    out << "label_column = " << cfg.label_column << "\n";
    if (!cfg.feature_columns.empty()) {
        out << "feature_columns = ";
        for (size_t i = 0; i < cfg.feature_columns.size(); ++i)
            out << (i ? ", " : "") << cfg.feature_columns[i];
        out << "\n";
    }
    out << "synthetic_normals = " << cfg.synthetic_normals << "\n";
    out << "synthetic_attacks = " << cfg.synthetic_attacks << "\n";
    out << "synthetic_features = " << cfg.synthetic_features << "\n";
    out << "synthetic_displacement = " << detail::format_double(cfg.synthetic_displacement) << "\n";
    out << "\n[neuralnet]\n";
    out << "epochs = " << cfg.train.epochs << "\n";
    out << "learning_rate = " << detail::format_double(cfg.train.learning_rate) << "\n";
    out << "dropout_rate = " << detail::format_double(cfg.train.dropout_rate) << "\n";
    out << "batch_size = " << cfg.train.batch_size << "\n";
    out << "adam_beta1 = " << detail::format_double(cfg.train.adam_beta1) << "\n";
    out << "adam_beta2 = " << detail::format_double(cfg.train.adam_beta2) << "\n";
    out << "adam_epsilon = " << detail::format_double(cfg.train.adam_epsilon) << "\n";
    out << "\n[autoencoder]\n";
    out << "code_size = " << cfg.code_size << "\n";
    out << "\n[adaboost]\n";
    out << "rounds = " << cfg.boost_rounds << "\n";
    out << "max_depth = " << cfg.max_tree_depth << "\n";
    out << "grid = ";
    for (size_t i = 0; i < cfg.grid_values.size(); ++i)
        out << (i ? ", " : "") << detail::format_double(cfg.grid_values[i]);
    out << "\n";
    out << "\n[federation]\n";
    out << "n_units = " << cfg.n_units << "\n";
    out << "train_ratio = " << detail::format_double(cfg.train_ratio) << "\n";
    out << "trust_mode = " << trust_mode_name(cfg.trust_mode) << "\n";
    out << "ablation = " << ablation_name(cfg.ablation) << "\n";
    out << "include_class_feature = " << (cfg.include_class_feature ? "true" : "false") << "\n";
    out << "\n[cli]\n";
    out << "seed = " << cfg.master_seed << "\n";
    out << "out_dir = " << cfg.out_dir << "\n";
    return out.str();
}

}  // namespace addai
