// Experiment runner: train / evaluate / sweep-code-size / report.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "addai/addai.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> trust_mode;
    std::optional<std::string> ablation;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "experiment configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", opts.seed, "override the master seed");
    cmd->add_option("--out", opts.out_dir, "override the output directory");
    cmd->add_option("--trust-mode", opts.trust_mode, "trusted|untrusted")
        ->check(CLI::IsMember({"trusted", "untrusted"}));
    cmd->add_option("--ablation", opts.ablation, "none|normal|regular|attack")
        ->check(CLI::IsMember({"none", "normal", "regular", "attack"}));
}

addai::ExperimentConfig resolve_config(const CommonOpts& opts) {
    auto cfg = addai::load_config(opts.config_path);
    if (opts.seed) cfg.master_seed = *opts.seed;
    if (opts.out_dir) cfg.out_dir = *opts.out_dir;
    if (opts.trust_mode) cfg.trust_mode = addai::parse_trust_mode(*opts.trust_mode);
    if (opts.ablation) cfg.ablation = addai::parse_ablation(*opts.ablation);
    addai::validate_config(cfg);
    return cfg;
}

void print_report_summary(const addai::EvaluationReport& r) {
    std::printf("units=%zu code_size=%zu trust_mode=%s ablation=%s\n", r.n_units, r.code_size,
                r.trust_mode.c_str(), r.ablation.c_str());
    for (const auto& row : r.local_rows)
        std::printf("  %-8s local  acc=%.6f mcc=%.6f ur=%.6f\n", row.unit_id.c_str(),
                    row.accuracy_v, row.mcc_v, row.ur_v);
    for (const auto& row : r.cloud_rows)
        std::printf("  %-8s cloud  acc=%.6f mcc=%.6f ur=%.6f\n", row.unit_id.c_str(),
                    row.accuracy_v, row.mcc_v, row.ur_v);
    std::printf("ledger: addai=%llu B raw=%llu B messages=%llu ratio=%.6f\n",
                static_cast<unsigned long long>(r.ledger.addai_bytes),
                static_cast<unsigned long long>(r.ledger.raw_bytes),
                static_cast<unsigned long long>(r.ledger.messages), r.cost_ratio);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ADDAI layered anomaly-detection simulator"};
    app.require_subcommand(1);

    CommonOpts train_opts, eval_opts, sweep_opts;
    bool overwrite = false;
    std::vector<size_t> sweep_sizes;
    std::vector<std::string> report_inputs;
    std::string report_out = ".";
    bool report_plot = false;

    auto* train_cmd = app.add_subcommand("train", "train and save model artifacts");
    add_common(train_cmd, train_opts);
    train_cmd->add_flag("--overwrite", overwrite, "allow clobbering existing artifacts");

    auto* eval_cmd = app.add_subcommand("evaluate", "evaluate saved artifacts and write reports");
    add_common(eval_cmd, eval_opts);

    auto* sweep_cmd = app.add_subcommand("sweep-code-size", "train/evaluate across code sizes");
    add_common(sweep_cmd, sweep_opts);
    sweep_cmd->add_option("--sizes", sweep_sizes, "code sizes to sweep")->required();

    auto* report_cmd = app.add_subcommand("report", "merge reports into summaries and plot data");
    report_cmd->add_option("inputs", report_inputs, "report.json / sweep.json files")->required();
    report_cmd->add_option("--out", report_out, "output directory");
    report_cmd->add_flag("--plot", report_plot, "emit simple SVG plots");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) {
            const auto cfg = resolve_config(train_opts);
            addai::cmd_train(cfg, overwrite);
            std::printf("artifacts written to %s\n", cfg.out_dir.c_str());
        } else if (eval_cmd->parsed()) {
            const auto cfg = resolve_config(eval_opts);
            const auto report = addai::cmd_evaluate(cfg);
            print_report_summary(report);
            std::printf("report written to %s\n", cfg.out_dir.c_str());
        } else if (sweep_cmd->parsed()) {
            const auto cfg = resolve_config(sweep_opts);
            const auto rows = addai::cmd_sweep_code_size(cfg, sweep_sizes);
            std::printf("h      bytes  mcc\n");
            for (const auto& r : rows)
                std::printf("%-6zu %-6llu %.6f\n", r.code_size,
                            static_cast<unsigned long long>(r.bytes), r.mcc_v);
            std::printf("sweep written to %s\n", cfg.out_dir.c_str());
        } else if (report_cmd->parsed()) {
            std::vector<std::filesystem::path> inputs(report_inputs.begin(), report_inputs.end());
            addai::cmd_report(inputs, report_out, report_plot);
            std::printf("summary written to %s\n", report_out.c_str());
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
