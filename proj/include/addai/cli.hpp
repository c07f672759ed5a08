#pragma once

// Command implementations behind the CLI binary: train, evaluate,
// sweep-code-size and report. Kept as library functions so tests drive them
// directly.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "addai/config.hpp"
#include "addai/federation.hpp"
#include "addai/report.hpp"

namespace addai {

struct ArtifactPaths {
    std::filesystem::path ae_params;
    std::filesystem::path ensemble_normal;
    std::filesystem::path ensemble_regular;
    std::filesystem::path ensemble_attack;
    std::filesystem::path profiles;
    std::filesystem::path meta;

    static ArtifactPaths in(const std::filesystem::path& dir) {
        return {dir / "ae_params.bin",       dir / "ensemble_normal.bin",
                dir / "ensemble_regular.bin", dir / "ensemble_attack.bin",
                dir / "profiles.json",        dir / "train_meta.json"};
    }

    std::vector<std::filesystem::path> all() const {
        return {ae_params, ensemble_normal, ensemble_regular, ensemble_attack, profiles, meta};
    }
};

namespace detail {

// The one deliberately non-deterministic output; everything else is a pure
// function of config + seed.
inline void write_run_meta(const std::filesystem::path& dir, const std::string& command) {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    std::ofstream out(dir / "run_meta.txt", std::ios::trunc);
    out << "command = " << command << "\n";
    out << "unix_time = " << t << "\n";
}

inline nlohmann::json parse_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

}  // namespace detail

// Trains the full pipeline and writes the model artifacts. Refuses to
// clobber existing artifacts unless `overwrite` is set.
inline void cmd_train(const ExperimentConfig& cfg, bool overwrite) {
    validate_config(cfg);
    const auto paths = ArtifactPaths::in(cfg.out_dir);
    if (!overwrite)
        for (const auto& p : paths.all())
            if (std::filesystem::exists(p))
                throw Error("cmd_train: refusing to overwrite " + p.string() +
                            " (pass --overwrite)");

    const PreparedData data = prepare_data(cfg);
    const TrainedArtifacts art = train_pipeline(cfg, data);

    std::filesystem::create_directories(cfg.out_dir);
    save_params(art.ae_params, paths.ae_params);
    save_ensemble(art.ensembles.normal, paths.ensemble_normal);
    save_ensemble(art.ensembles.regular, paths.ensemble_regular);
    save_ensemble(art.ensembles.attack, paths.ensemble_attack);

    nlohmann::ordered_json profiles = nlohmann::ordered_json::array();
    for (const auto& p : art.profiles) profiles.push_back(profile_to_json(p));
    detail::write_text_file(paths.profiles, profiles.dump(2) + "\n");

    nlohmann::ordered_json meta{{"feature_count", art.feature_count},
                                {"code_size", art.code_size},
                                {"n_units", art.profiles.size()},
                                {"seed", cfg.master_seed}};
    detail::write_text_file(paths.meta, meta.dump(2) + "\n");
    detail::write_run_meta(cfg.out_dir, "train");
}

inline TrainedArtifacts load_artifacts(const std::filesystem::path& dir) {
    const auto paths = ArtifactPaths::in(dir);
    for (const auto& p : paths.all())
        if (!std::filesystem::exists(p)) throw Error("missing artifact: " + p.string());

    TrainedArtifacts art;
    art.ae_params = load_params(paths.ae_params);
    art.ensembles.normal = load_ensemble(paths.ensemble_normal);
    art.ensembles.regular = load_ensemble(paths.ensemble_regular);
    art.ensembles.attack = load_ensemble(paths.ensemble_attack);
    for (const auto& j : detail::parse_json_file(paths.profiles))
        art.profiles.push_back(profile_from_json(j));
    const auto meta = detail::parse_json_file(paths.meta);
    art.feature_count = meta.at("feature_count").get<size_t>();
    art.code_size = meta.at("code_size").get<size_t>();
    return art;
}

// Loads artifacts from cfg.out_dir, re-derives the data under the same seed,
// evaluates and writes the report files next to the artifacts.
inline EvaluationReport cmd_evaluate(const ExperimentConfig& cfg) {
    validate_config(cfg);
    const TrainedArtifacts art = load_artifacts(cfg.out_dir);
    if (art.code_size != cfg.code_size)
        throw Error("cmd_evaluate: artifact code size " + std::to_string(art.code_size) +
                    " != config code size " + std::to_string(cfg.code_size));

    const PreparedData data = prepare_data(cfg);
    EvaluationReport report = evaluate_pipeline(cfg, data, art);
    write_report_files(report, cfg.out_dir);
    detail::write_run_meta(cfg.out_dir, "evaluate");
    return report;
}

struct SweepRow {
    size_t code_size = 0;
    uint64_t bytes = 0;  // measured wire length of one message
    double mcc_v = 0.0;
};

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "h,bytes,mcc\n";
    for (const auto& r : rows)
        out += std::to_string(r.code_size) + ',' + std::to_string(r.bytes) + ',' +
               detail::csv_double(r.mcc_v) + '\n';
    return out;
}

// Trains and evaluates once per code size (always worst-case offload, since
// the swept quantity is the cloud-side MCC vs wire cost) and emits the
// (h, bytes, mcc) table.
inline std::vector<SweepRow> cmd_sweep_code_size(const ExperimentConfig& base,
                                                 const std::vector<size_t>& sizes) {
    if (sizes.empty()) throw Error("cmd_sweep_code_size: no sizes given");
    std::vector<SweepRow> rows;
    rows.reserve(sizes.size());
    for (size_t h : sizes) {
        ExperimentConfig cfg = base;
        cfg.code_size = h;
        cfg.trust_mode = TrustMode::Untrusted;
        validate_config(cfg);
        const EvaluationReport report = run_simulation(cfg);

        SweepRow row;
        row.code_size = h;
        row.bytes = encode_message(CloudMessage{0, 0.0f, std::vector<float>(h, 0.0f)}).size();
        row.mcc_v = mcc(report.cloud_total);
        rows.push_back(row);
    }

    std::filesystem::create_directories(base.out_dir);
    detail::write_text_file(std::filesystem::path(base.out_dir) / "sweep.csv", sweep_csv(rows));
    nlohmann::ordered_json j;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : rows)
        j["rows"].push_back({{"h", r.code_size}, {"bytes", r.bytes}, {"mcc", r.mcc_v}});
    detail::write_text_file(std::filesystem::path(base.out_dir) / "sweep.json", j.dump(2) + "\n");
    detail::write_run_meta(base.out_dir, "sweep-code-size");
    return rows;
}

namespace detail {

// Minimal line plot, no rendering dependency.
inline std::string sweep_svg(const std::vector<SweepRow>& rows) {
    const double width = 640, height = 400, margin = 60;
    double min_b = 1e300, max_b = -1e300, min_m = 1e300, max_m = -1e300;
    for (const auto& r : rows) {
        min_b = std::min(min_b, static_cast<double>(r.bytes));
        max_b = std::max(max_b, static_cast<double>(r.bytes));
        min_m = std::min(min_m, r.mcc_v);
        max_m = std::max(max_m, r.mcc_v);
    }
    if (max_b == min_b) max_b = min_b + 1;
    if (max_m == min_m) max_m = min_m + 1e-6;
    auto sx = [&](double b) { return margin + (b - min_b) / (max_b - min_b) * (width - 2 * margin); };
    auto sy = [&](double m) {
        return height - margin - (m - min_m) / (max_m - min_m) * (height - 2 * margin);
    };

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
        << "'>\n";
    svg << "<rect width='100%' height='100%' fill='white'/>\n";
    svg << "<line x1='" << margin << "' y1='" << height - margin << "' x2='" << width - margin
        << "' y2='" << height - margin << "' stroke='black'/>\n";
    svg << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin << "' y2='"
        << height - margin << "' stroke='black'/>\n";
    svg << "<text x='" << width / 2 << "' y='" << height - 15
        << "' text-anchor='middle' font-size='14'>communication cost (bytes/sample)</text>\n";
    svg << "<text x='18' y='" << height / 2 << "' text-anchor='middle' font-size='14' "
        << "transform='rotate(-90 18 " << height / 2 << ")'>cloud MCC</text>\n";
    svg << "<polyline fill='none' stroke='steelblue' stroke-width='2' points='";
    for (const auto& r : rows) svg << sx(static_cast<double>(r.bytes)) << ',' << sy(r.mcc_v) << ' ';
    svg << "'/>\n";
    for (const auto& r : rows) {
        svg << "<circle cx='" << sx(static_cast<double>(r.bytes)) << "' cy='" << sy(r.mcc_v)
            << "' r='4' fill='steelblue'/>\n";
        svg << "<text x='" << sx(static_cast<double>(r.bytes)) << "' y='" << sy(r.mcc_v) - 10
            << "' text-anchor='middle' font-size='12'>h=" << r.code_size << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace detail

// Merges evaluation and/or sweep reports into a human-readable summary plus
// plot-ready CSV files; --plot adds a simple SVG for sweeps.
inline void cmd_report(const std::vector<std::filesystem::path>& inputs,
                       const std::filesystem::path& out_dir, bool plot) {
    if (inputs.empty()) throw Error("cmd_report: no input reports");
    std::filesystem::create_directories(out_dir);

    std::ostringstream summary;
    std::vector<SweepRow> sweep_rows;
    std::string metrics_long = "source,unit_id,scope,accuracy,mcc,ur\n";
    bool any_eval = false;

    for (const auto& path : inputs) {
        const auto j = detail::parse_json_file(path);
        if (j.contains("rows")) {
            for (const auto& row : j.at("rows"))
                sweep_rows.push_back({row.at("h").get<size_t>(), row.at("bytes").get<uint64_t>(),
                                      row.at("mcc").get<double>()});
            continue;
        }
        if (!j.contains("metrics"))
            throw Error(path.string() + ": not a recognized report (no 'metrics' or 'rows')");

        any_eval = true;
        const auto& run = j.at("run");
        summary << "== " << path.filename().string() << " ==\n";
        summary << "units=" << run.at("n_units").get<size_t>()
                << " code_size=" << run.at("code_size").get<size_t>() << " trust_mode="
                << run.at("trust_mode").get<std::string>()
                << " ablation=" << run.at("ablation").get<std::string>()
                << " seed=" << run.at("seed").get<uint64_t>() << "\n";
        summary << "unit       scope   accuracy   mcc        ur\n";
        for (const auto& row : j.at("metrics")) {
            char line[160];
            std::snprintf(line, sizeof(line), "%-10s %-7s %-10.6f %-10.6f %-10.6f\n",
                          row.at("unit_id").get<std::string>().c_str(),
                          row.at("scope").get<std::string>().c_str(),
                          row.at("accuracy").get<double>(), row.at("mcc").get<double>(),
                          row.at("ur").get<double>());
            summary << line;
            metrics_long += path.filename().string() + ',' +
                            row.at("unit_id").get<std::string>() + ',' +
                            row.at("scope").get<std::string>() + ',' +
                            detail::csv_double(row.at("accuracy").get<double>()) + ',' +
                            detail::csv_double(row.at("mcc").get<double>()) + ',' +
                            detail::csv_double(row.at("ur").get<double>()) + '\n';
        }
        const auto& ledger = j.at("ledger");
        summary << "ledger: addai_bytes=" << ledger.at("addai_bytes").get<uint64_t>()
                << " raw_bytes=" << ledger.at("raw_bytes").get<uint64_t>()
                << " messages=" << ledger.at("messages").get<uint64_t>()
                << " cost_ratio=" << detail::csv_double(ledger.at("cost_ratio").get<double>())
                << "\n\n";
    }

    if (!sweep_rows.empty()) {
        std::sort(sweep_rows.begin(), sweep_rows.end(),
                  [](const SweepRow& a, const SweepRow& b) { return a.code_size < b.code_size; });
        summary << "== code-size sweep ==\n";
        summary << "h      bytes  mcc\n";
        for (const auto& r : sweep_rows) {
            char line[96];
            std::snprintf(line, sizeof(line), "%-6zu %-6llu %.6f\n", r.code_size,
                          static_cast<unsigned long long>(r.bytes), r.mcc_v);
            summary << line;
        }
        detail::write_text_file(out_dir / "plot_sweep.csv", sweep_csv(sweep_rows));
        if (plot) detail::write_text_file(out_dir / "sweep.svg", detail::sweep_svg(sweep_rows));
    }
    if (any_eval) detail::write_text_file(out_dir / "plot_metrics.csv", metrics_long);
    detail::write_text_file(out_dir / "summary.txt", summary.str());
}

}  // namespace addai
