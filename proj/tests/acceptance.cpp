// Acceptance suite: runs the pinned criteria end to end and prints one
// PASS/FAIL line per criterion. Invoke with a criterion number (1..10) to run
// one, or with no arguments for the full sweep. Exit code is the number of
// failed criteria.

#include <cstdlib>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "addai/addai.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

using namespace addai;

namespace {

struct CheckFailure {
    std::string what;
};

void expect(bool ok, const std::string& what) {
    if (!ok) throw CheckFailure{what};
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Shared synthetic fixture (criteria 3-fallback, 4 and 9): 5,000 normals,
// 500 attacks, K = 40, 4-sigma displacement, h = 25, three units.

ExperimentConfig synthetic_fixture_config() {
    ExperimentConfig cfg;
    cfg.source = DataSource::Synthetic;
    cfg.synthetic_normals = 5000;
    cfg.synthetic_attacks = 500;
    cfg.synthetic_features = 40;
    cfg.synthetic_displacement = 4.0;
    cfg.code_size = 25;
    cfg.n_units = 3;
    cfg.train_ratio = 0.8;
    cfg.train.epochs = 12;
    cfg.train.batch_size = 256;
    cfg.train.learning_rate = 0.01;
    cfg.train.dropout_rate = 0.05;
    cfg.boost_rounds = 25;
    cfg.max_tree_depth = 2;
    cfg.grid_values = {1, 4, 10};
    cfg.master_seed = 424242;
    cfg.out_dir = "unused";
    return cfg;
}

struct FixtureRun {
    ExperimentConfig cfg;
    EvaluationReport report;
};

const FixtureRun& fixture_run() {
    static const FixtureRun run = [] {
        FixtureRun r;
        r.cfg = synthetic_fixture_config();
        r.report = run_simulation(r.cfg);
        return r;
    }();
    return run;
}

// ---------------------------------------------------------------------------

void criterion_1_wire_cost() {
    const std::vector<std::pair<size_t, size_t>> expected{
        {10, 45}, {15, 65}, {20, 85}, {25, 105}, {30, 125}};
    for (const auto& [h, bytes] : expected) {
        CloudMessage m;
        m.predicted_class = 1;
        m.recon_error = 0.5f;
        m.code.assign(h, 0.125f);
        const auto encoded = encode_message(m);
        expect(encoded.size() == bytes, "h=" + std::to_string(h) + " encoded to " +
                                            std::to_string(encoded.size()) + " bytes, want " +
                                            std::to_string(bytes));
        const auto back = decode_message(encoded);
        expect(back == m, "h=" + std::to_string(h) + " round-trip mismatch");
    }
}

void criterion_2_communication_reduction() {
    // lightweight evaluation over the ledger path: K = 40 raw features,
    // h = 25 code, worst-case offload of every sample
    LocalUnit unit;
    unit.id = "u";
    unit.model = build_autoencoder(40, 25, 7);
    unit.profile.eta = 0.5;
    unit.profile.range_lo = 0.2;
    unit.profile.range_hi = 1.0;

    CostLedger ledger;
    std::mt19937_64 rng(11);
    std::normal_distribution<float> gauss(0.0f, 1.0f);
    for (int i = 0; i < 200; ++i) {
        FlowRecord rec;
        rec.features.resize(40);
        for (auto& v : rec.features) v = gauss(rng);
        const auto step = local_unit_step(unit, rec, TrustMode::Untrusted, ledger);
        expect(std::holds_alternative<CloudMessage>(step), "untrusted step must offload");
    }
    const auto totals = ledger.totals();
    expect(totals.addai_bytes == 200ull * 105ull, "addai bytes " + std::to_string(totals.addai_bytes));
    expect(totals.raw_bytes == 200ull * 160ull, "raw bytes " + std::to_string(totals.raw_bytes));
    const double ratio =
        static_cast<double>(totals.addai_bytes) / static_cast<double>(totals.raw_bytes);
    expect(ratio == 0.65625, "ratio " + fmt(ratio) + " != 105/160 exactly");
    expect(1.0 - ratio >= 0.30, "reduction " + fmt(1.0 - ratio) + " below 30%");
    // the abstract's "by half" is documented, not asserted: 105/160 does not
    // follow from the stated formulas
}

struct SyntheticOutcome {
    double local_accuracy = 0.0;
    double local_mcc = 0.0;
    double cloud_mcc = 0.0;
};

SyntheticOutcome criterion_4_synthetic_separation() {
    const auto& run = fixture_run();
    SyntheticOutcome out;
    out.local_accuracy = accuracy(run.report.local_total);
    out.local_mcc = mcc(run.report.local_total);
    out.cloud_mcc = mcc(run.report.cloud_total);

    expect(out.local_accuracy >= 0.95,
           "local autoencoder accuracy " + fmt(out.local_accuracy) + " < 0.95");
    expect(out.cloud_mcc >= out.local_mcc - 0.02,
           "cloud MCC " + fmt(out.cloud_mcc) + " < local MCC " + fmt(out.local_mcc) + " - 0.02");
    // this fixture is also a K=40, h=25 evaluation: the ledger ratio must be exact
    expect(run.report.cost_ratio == 0.65625,
           "fixture cost ratio " + fmt(run.report.cost_ratio));
    return out;
}

void criterion_3_end_to_end() {
    const char* env = std::getenv("ADDAI_WUSTL_CSV");
    if (env == nullptr || !std::filesystem::exists(env)) {
        // The criterion's own fallback clause: without the public dataset the
        // check is the synthetic-fixture criterion.
        const auto out = criterion_4_synthetic_separation();
        std::printf("    note: WUSTL-IIoT dataset unavailable (set ADDAI_WUSTL_CSV); "
                    "replaced by criterion 4 per its fallback clause "
                    "(local acc %s, cloud MCC %s)\n",
                    fmt(out.local_accuracy).c_str(), fmt(out.cloud_mcc).c_str());
        return;
    }

    // Real-data path: stratified 50k subsample, worst-case cloud accuracy.
    const std::filesystem::path csv = env;
    const char* label_env = std::getenv("ADDAI_WUSTL_LABEL");
    const std::string label_column = label_env ? label_env : "Target";

    // default profile: first 40 numeric non-label columns, header order
    std::ifstream in(csv);
    std::string header_line, first_row;
    std::getline(in, header_line);
    std::getline(in, first_row);
    const auto headers = addai::detail::split_csv_line(header_line);
    const auto cells = addai::detail::split_csv_line(first_row);
    std::vector<std::string> features;
    for (size_t i = 0; i < headers.size() && features.size() < 40; ++i) {
        const auto name = addai::detail::trim(headers[i]);
        if (name == label_column) continue;
        float v;
        if (i < cells.size() && addai::detail::parse_float(cells[i], v)) features.push_back(name);
    }
    expect(features.size() == 40, "could not identify 40 numeric feature columns");

    const auto full = load_csv(csv, {features, label_column});
    const double take = std::min(1.0 - 1e-9, 50000.0 / static_cast<double>(full.size()));
    auto [subsample, rest] = split_train_test(full, take, 2026);
    (void)rest;

    testutil::TempDir dir;
    const auto sub_csv = dir.file("wustl_50k.csv");
    save_csv(subsample, sub_csv, label_column);

    ExperimentConfig cfg;
    cfg.source = DataSource::Csv;
    cfg.csv_path = sub_csv.string();
    cfg.label_column = label_column;
    cfg.feature_columns = features;
    cfg.code_size = 25;
    cfg.n_units = 3;
    cfg.train_ratio = 0.8;
    cfg.train.epochs = 30;
    cfg.train.batch_size = 256;
    cfg.boost_rounds = 40;
    cfg.max_tree_depth = 3;
    cfg.grid_values = {1, 4, 10};
    cfg.master_seed = 2026;
    const auto report = run_simulation(cfg);
    const double cloud_acc = accuracy(report.cloud_total);
    expect(cloud_acc >= 0.95, "cloud accuracy " + fmt(cloud_acc) + " < 0.95");
    std::printf("    note: cloud accuracy %s (abstract target 0.984 +/- 0.02)\n",
                fmt(cloud_acc).c_str());
}

void criterion_5_gradient_correctness() {
    std::mt19937_64 rng(5150);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const std::vector<std::vector<size_t>> shapes{
        {3, 2, 3},  {4, 3, 2, 3, 4}, {5, 4, 5},      {2, 2},       {6, 3, 6},
        {3, 5, 3},  {4, 2, 4},       {5, 3, 2, 3, 5}, {2, 4, 2},   {6, 4, 2, 4, 6}};
    double worst = 0.0;
    for (size_t s = 0; s < shapes.size(); ++s) {
        const auto p = init_params<double>(shapes[s], 900 + s);
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<double> x(shapes[s].front());
            std::vector<double> target(shapes[s].back());
            for (auto& v : x) v = unit(rng);
            for (auto& v : target) v = unit(rng);
            const auto trace = forward<double>(p, x);
            const auto analytic = backward<double>(p, trace, target);
            const auto fd = oracles::finite_difference_gradients(p, x, target, 1e-5);
            worst = std::max(worst, oracles::max_relative_gradient_error(analytic, fd));
        }
    }
    expect(worst < 1e-4, "max relative gradient error " + fmt(worst));
    std::printf("    note: max relative error %s over 10 networks x 10 inputs\n",
                fmt(worst).c_str());
}

void criterion_6_adaboost_oracle() {
    std::mt19937_64 rng(6006);
    std::uniform_real_distribution<double> unit(-2.0, 2.0);
    int fixtures_run = 0;
    while (fixtures_run < 20) {
        std::vector<std::vector<float>> x;
        std::vector<int> y;
        bool has0 = false, has1 = false;
        for (int i = 0; i < 50; ++i) {
            std::vector<float> row(4);
            for (auto& v : row) v = static_cast<float>(unit(rng));
            const int label =
                (row[0] - 0.6f * row[1] + 0.3f * row[2] * row[3] > 0.1f) ? 1 : 0;
            x.push_back(row);
            y.push_back(label);
            (label ? has1 : has0) = true;
        }
        if (!has0 || !has1) continue;
        ++fixtures_run;

        Dataset d;
        for (size_t j = 0; j < 4; ++j) d.schema.push_back("f" + std::to_string(j));
        for (size_t i = 0; i < x.size(); ++i) d.records.push_back({x[i], y[i]});

        // library ensemble vs the independent reference
        const auto ensemble = boost(d, 15, {1.0, 1.0}, 1, 0);
        const auto ref = oracles::ref_boost(x, y, 15);
        expect(ensemble.rounds.size() == ref.stumps.size(),
               "fixture " + std::to_string(fixtures_run) + ": round count " +
                   std::to_string(ensemble.rounds.size()) + " vs " +
                   std::to_string(ref.stumps.size()));
        for (size_t t = 0; t < ref.alphas.size(); ++t)
            expect(ensemble.rounds[t].alpha == ref.alphas[t],
                   "fixture " + std::to_string(fixtures_run) + ": alpha[" + std::to_string(t) +
                       "] differs");
        for (size_t i = 0; i < x.size(); ++i)
            expect(predict(ensemble, x[i]).label == ref.predict01(x[i]),
                   "fixture " + std::to_string(fixtures_run) + ": prediction differs on sample " +
                       std::to_string(i));

        // weight invariants after every round, via the library's own ops
        std::vector<double> w(d.size(), 1.0 / static_cast<double>(d.size()));
        for (int round = 0; round < 15; ++round) {
            const auto learner = fit_weak(d, w, {1.0, 1.0}, 1);
            const double eps = weighted_error(learner, d, w);
            if (eps >= 0.5 || eps <= kEpsilonMin) break;
            update_weights(w, learner, alpha(eps), d);
            double sum = 0.0;
            for (double wi : w) {
                expect(wi > 0.0, "non-positive weight after a round");
                sum += wi;
            }
            expect(std::fabs(sum - 1.0) < 1e-9, "weight sum drift " + fmt(sum - 1.0));
        }
    }
}

void criterion_7_metric_oracles() {
    const ConfusionMatrix hand{2, 2, 1, 1};
    expect(mcc(hand) == 1.0 / 3.0, "hand MCC " + fmt(mcc(hand)) + " != 1/3");

    std::mt19937_64 rng(7007);
    for (int stream = 0; stream < 1000; ++stream) {
        ConfusionMatrix cm;
        std::vector<std::pair<int, int>> pairs;
        const size_t n = 1 + rng() % 400;
        for (size_t i = 0; i < n; ++i) {
            const int truth = static_cast<int>(rng() % 2);
            const int pred = static_cast<int>(rng() % 2);
            pairs.emplace_back(truth, pred);
            cm.add(truth, pred);
        }
        const auto ref = oracles::recount(pairs);
        expect(cm.tp == ref.tp && cm.tn == ref.tn && cm.fp == ref.fp && cm.fn == ref.fn,
               "count mismatch on stream " + std::to_string(stream));
        expect(std::fabs(accuracy(cm) - ref.accuracy) < 1e-12, "accuracy drift");
        expect(std::fabs(mcc(cm) - ref.mcc) < 1e-12, "mcc drift");
        expect(std::fabs(undetected_rate(cm).value - ref.ur) < 1e-12, "ur drift");
    }
}

void criterion_8_local_range() {
    // clause 1: hand case, exact at double rounding
    const auto hand = SortedErrors::from_unsorted({0.1, 0.2, 0.3, 0.4, 0.5});
    const auto [hand_lo, hand_hi] = compute_local_range(hand, 0.3, 0.6, 5);
    const bool hand_ok = std::fabs(hand_lo - 0.1) < 1e-12 && std::fabs(hand_hi - 0.7) < 1e-12;

    // clauses 2 and 3 over 100 random sorted-error arrays
    bool contains_ok = true;
    bool monotone_ok = true;
    std::string monotone_detail;
    std::mt19937_64 rng(8008);
    std::uniform_real_distribution<double> unit(0.0, 2.0);
    for (int round = 0; round < 100; ++round) {
        const size_t n = 3 + rng() % 80;
        std::vector<double> raw(n);
        for (auto& v : raw) v = unit(rng);
        const auto errs = SortedErrors::from_unsorted(raw);
        const double eta = unit(rng);

        double prev_lo = 0.0, prev_hi = 0.0;
        bool first = true;
        for (double trust = 1.0; trust >= -1e-9; trust -= 0.05) {
            const double f = std::max(0.0, trust);
            const auto [lo, hi] = compute_local_range(errs, eta, f, n);
            contains_ok = contains_ok && lo <= eta && eta <= hi;
            if (!first) {
                // as stated: lowering f never shrinks [lo, hi]
                if (hi < prev_hi - 1e-12 && monotone_ok) {
                    monotone_ok = false;
                    monotone_detail = "hi shrank from " + fmt(prev_hi) + " to " + fmt(hi) +
                                      " at trust " + fmt(f);
                }
                if (lo > prev_lo + 1e-12 && monotone_ok) {
                    monotone_ok = false;
                    monotone_detail = "lo rose from " + fmt(prev_lo) + " to " + fmt(lo) +
                                      " at trust " + fmt(f);
                }
            }
            prev_lo = lo;
            prev_hi = hi;
            first = false;
        }
    }

    std::printf("    sub-checks: range contains eta on 100 arrays: %s; hand case [0.1, 0.7]: %s; "
                "never shrinks as trust falls: %s\n",
                contains_ok ? "pass" : "FAIL", hand_ok ? "pass" : "FAIL",
                monotone_ok ? "pass" : "FAIL");
    expect(contains_ok, "range failed to contain eta");
    expect(hand_ok, "hand case gave [" + fmt(hand_lo) + ", " + fmt(hand_hi) + "]");
    expect(monotone_ok,
           monotone_detail + "; the literal range rule sets lo = eta - Err[idx - k], and k grows "
                             "as trust falls while sorted errors shrink toward index 0, so the "
                             "lower endpoint tightens rather than widening");
}

void criterion_9_routing_totality() {
    const auto& run = fixture_run();
    const auto data = prepare_data(run.cfg);

    uint64_t routed_total = 0, test_total = 0;
    for (size_t u = 0; u < run.report.routing.size(); ++u) {
        expect(run.report.routing[u].total() == data.unit_test[u].size(),
               run.report.routing[u].unit_id + ": routed " +
                   std::to_string(run.report.routing[u].total()) + " of " +
                   std::to_string(data.unit_test[u].size()) + " test samples");
        routed_total += run.report.routing[u].total();
        test_total += data.unit_test[u].size();
    }
    expect(routed_total == test_total, "routing counts do not sum to the test-set size");

    // boundary samples go to the Regular model
    for (const auto& p : run.report.profiles) {
        expect(route(p.range_lo, p) == CloudModel::Regular,
               p.unit_id + ": error = range_lo not routed to Regular");
        expect(route(p.range_hi, p) == CloudModel::Regular,
               p.unit_id + ": error = range_hi not routed to Regular");
    }
}

void criterion_10_determinism() {
    testutil::TempDir dir;
    ExperimentConfig cfg;
    cfg.source = DataSource::Synthetic;
    cfg.synthetic_normals = 400;
    cfg.synthetic_attacks = 80;
    cfg.synthetic_features = 10;
    cfg.code_size = 5;
    cfg.n_units = 2;
    cfg.train.epochs = 6;
    cfg.train.batch_size = 64;
    cfg.boost_rounds = 6;
    cfg.max_tree_depth = 2;
    cfg.grid_values = {1, 4};
    cfg.master_seed = 321;
    cfg.out_dir = dir.file("run").string();

    cmd_train(cfg, false);
    cmd_evaluate(cfg);
    const std::vector<std::string> files{"report.json", "metrics.csv", "profiles.csv",
                                         "ledger.csv", "routing.csv"};
    std::vector<std::string> first;
    for (const auto& f : files)
        first.push_back(testutil::read_file(std::filesystem::path(cfg.out_dir) / f));
    cmd_evaluate(cfg);
    for (size_t i = 0; i < files.size(); ++i) {
        const auto second = testutil::read_file(std::filesystem::path(cfg.out_dir) / files[i]);
        expect(second == first[i], files[i] + " differs between identical runs");
    }
}

struct Criterion {
    int id;
    const char* summary;
    std::function<void()> run;
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> list{
        {1, "wire cost bit-exact for h in {10,15,20,25,30}", criterion_1_wire_cost},
        {2, "communication ratio 105/160 with >= 30% reduction", criterion_2_communication_reduction},
        {3, "end-to-end accuracy on WUSTL-IIoT (or fallback to criterion 4)", criterion_3_end_to_end},
        {4, "synthetic separation: local acc >= 0.95, cloud MCC >= local - 0.02",
         [] { criterion_4_synthetic_separation(); }},
        {5, "analytic gradients match finite differences within 1e-4", criterion_5_gradient_correctness},
        {6, "uniform-weight boosting matches the brute-force reference exactly", criterion_6_adaboost_oracle},
        {7, "metrics match recount oracles within 1e-12 on 1000 streams", criterion_7_metric_oracles},
        {8, "local-range properties (contains eta, monotone, hand case)", criterion_8_local_range},
        {9, "routing totality and boundary handling", criterion_9_routing_totality},
        {10, "byte-identical reports under identical config and seed", criterion_10_determinism},
    };
    return list;
}

int run_one(const Criterion& c) {
    try {
        c.run();
        std::printf("[PASS] criterion %d: %s\n", c.id, c.summary);
        return 0;
    } catch (const CheckFailure& f) {
        std::printf("[FAIL] criterion %d: %s: %s\n", c.id, c.summary, f.what.c_str());
        return 1;
    } catch (const std::exception& e) {
        std::printf("[FAIL] criterion %d: %s: unexpected error: %s\n", c.id, c.summary, e.what());
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    int failures = 0;
    if (argc > 1) {
        const int want = std::atoi(argv[1]);
        bool found = false;
        for (const auto& c : criteria())
            if (c.id == want) {
                failures += run_one(c);
                found = true;
            }
        if (!found) {
            std::fprintf(stderr, "no such criterion: %s\n", argv[1]);
            return 2;
        }
    } else {
        for (const auto& c : criteria()) failures += run_one(c);
        std::printf("%d of %zu criteria failed\n", failures, criteria().size());
    }
    return failures;
}
