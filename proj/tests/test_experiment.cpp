#include <gtest/gtest.h>

#include <filesystem>

#include "poseuq/experiment.hpp"
#include "poseuq/report.hpp"

using namespace poseuq;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny(const fs::path& dir) {
    ExperimentConfig c;
    c.seed = 3;
    c.dataset.landmarks = 4;
    c.dataset.train_size = 64;
    c.dataset.val_size = 40;
    c.hidden1 = 8;
    c.hidden2 = 8;
    c.schedule.epochs_total = 3;
    c.schedule.epochs_phase1 = 2;
    c.schedule.batch_size = 16;
    c.sampler.n_samples = 5;
    c.sampler.n_models = 2;
    c.output_dir = dir;
    return c;
}

fs::path fresh(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("poseuq_exp_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST(Config, JsonRoundTrip) {
    ExperimentConfig c = tiny("somewhere");
    c.methods = {Method::MCD, Method::DER};
    c.loss.evd_variant = EvidentialVariant::NLL;
    c.sampler.seeds = {7, 8};
    c.sweep_percentiles = {0.1, 0.3};
    const auto j = config_to_json(c);
    const auto back = config_from_json(j);
    EXPECT_EQ(config_to_json(back), j);
    EXPECT_EQ(back.output_dir, fs::path("somewhere"));
}

TEST(Config, DigestIgnoresOutputDir) {
    EXPECT_EQ(config_digest(tiny("a")), config_digest(tiny("b")));
    ExperimentConfig c = tiny("a");
    c.seed = 4;
    EXPECT_NE(config_digest(c), config_digest(tiny("a")));
}

TEST(Config, UnknownKeysRejected) {
    auto j = config_to_json(tiny("x"));
    j["dataset"]["bogus"] = 1;
    EXPECT_THROW(config_from_json(j), ConfigError);
    auto k = config_to_json(tiny("x"));
    k["extra"] = true;
    EXPECT_THROW(config_from_json(k), ConfigError);
}

TEST(Config, Overrides) {
    auto j = config_to_json(tiny("x"));
    apply_override(j, "schedule.lr=0.005");
    apply_override(j, "loss.evd_variant=NLL");
    apply_override(j, "methods=[\"DE\"]");
    const auto c = config_from_json(j);
    EXPECT_EQ(c.schedule.lr, 0.005);
    EXPECT_EQ(c.loss.evd_variant, EvidentialVariant::NLL);
    EXPECT_EQ(c.methods, std::vector<Method>{Method::DE});
    EXPECT_THROW(apply_override(j, "no_equals_sign"), std::invalid_argument);
}

TEST(Config, ValidationErrors) {
    ExperimentConfig c = tiny("x");
    c.sampler.n_models = 1;
    EXPECT_THROW(validate(c), ConfigError);
    c = tiny("x");
    c.gate_percentile = 0.0;
    EXPECT_THROW(validate(c), ConfigError);
    c = tiny("x");
    c.methods.clear();
    EXPECT_THROW(validate(c), ConfigError);
    c = tiny("x");
    c.sampler.dropout_p = 0.0;
    EXPECT_THROW(validate(c), ConfigError);
    EXPECT_NO_THROW(validate(tiny("x")));
}

TEST(Seeds, DistinctPerMethodAndMember) {
    const auto c = tiny("x");
    const auto de = method_seeds(c, Method::DE);
    ASSERT_EQ(de.size(), 2u);
    EXPECT_NE(de[0], de[1]);
    EXPECT_NE(method_seeds(c, Method::DER)[0], de[0]);
    EXPECT_EQ(method_seeds(c, Method::MCD).size(), 2u);
}

TEST(Pipeline, EndToEndArtifacts) {
    const auto dir = fresh("e2e");
    const auto c = tiny(dir);
    run_experiment(c);
    for (const char* f : {"config.json", "dataset_train.jsonl", "dataset_val.jsonl", "summary.csv", "summary.json",
                          "sweep.svg", "models/der.json", "models/de_0.json", "models/de_1.json", "models/mcd.json",
                          "train_log_der.csv", "train_log_de_1.csv", "predictions_mcd.jsonl", "calibration_de.csv",
                          "calibration_der.svg", "gate_der.json", "sweep_mcd.csv"}) {
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    }
    for (Method m : c.methods) {
        const auto log = read_log(dir / ("predictions_" + method_tag(m) + ".jsonl"));
        EXPECT_EQ(log.records.size(), 40u);
        EXPECT_EQ(log.header.method, m);
        EXPECT_EQ(log.header.config_digest, config_digest(c));
        EXPECT_EQ(log.header.seeds, method_seeds(c, m));
        for (const auto& r : log.records) {
            for (double v : r.prediction.var) EXPECT_GE(v, 0.0);
        }
    }
    const auto loaded = load_config(dir / "config.json");
    EXPECT_EQ(config_digest(loaded), config_digest(c));
    fs::remove_all(dir);
}

TEST(Pipeline, SummaryRecomputesFromLog) {
    const auto dir = fresh("summary");
    auto c = tiny(dir);
    c.methods = {Method::DER};
    run_experiment(c);
    const auto log = read_log(dir / "predictions_der.jsonl");
    const auto row = summarize(log, c.gate_percentile, c.calibration_levels);
    EXPECT_EQ(read_text(dir / "summary.csv"), summary_csv({row}));
    const auto gated = apply_gate(log, percentile_thresholds(log, c.gate_percentile));
    EXPECT_EQ(row.discarded_fraction, gated.discarded_fraction);
    const auto errs = ungated_errors(log);
    EXPECT_EQ(row.tr.mean, errs.tr.mean);
    double mce = 0.0;
    for (int k = 0; k < 6; ++k) {
        EXPECT_EQ(row.mce[k], calibration_curve(log, k, c.calibration_levels).mce);
        mce += row.mce[k];
    }
    EXPECT_NEAR(row.mce_mean, mce / 6.0, 1e-15);
    fs::remove_all(dir);
}

TEST(Pipeline, RerunsAreByteIdentical) {
    const auto a = fresh("rerun_a");
    const auto b = fresh("rerun_b");
    auto ca = tiny(a);
    auto cb = tiny(b);
    run_experiment(ca);
    run_experiment(cb);
    std::size_t compared = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), a);
        ASSERT_TRUE(fs::exists(b / rel)) << rel;
        EXPECT_EQ(read_text(e.path()), read_text(b / rel)) << rel;
        ++compared;
    }
    EXPECT_GT(compared, 20u);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Pipeline, MissingArtifactsAreNamed) {
    const auto dir = fresh("missing");
    auto c = tiny(dir);
    fs::create_directories(dir);
    try {
        stage_train(c, Method::DER);
        FAIL() << "expected ArtifactError";
    } catch (const ArtifactError& e) {
        EXPECT_NE(std::string(e.what()).find("dataset_train.jsonl"), std::string::npos);
    }
    try {
        emit_report(dir, {Method::DE}, 0.15, 19);
        FAIL() << "expected ArtifactError";
    } catch (const ArtifactError& e) {
        EXPECT_NE(std::string(e.what()).find("predictions_de.jsonl"), std::string::npos);
    }
    fs::remove_all(dir);
}

TEST(Noise, InjectedNoiseFromTruth) {
    PredictionLog log;
    PredictionRecord r;
    r.truth = make_pose(Translation{3, 4, 0}, EulerTriple{0, 0, 0.1});
    log.records.push_back(r);
    const auto n = injected_noise(log);
    EXPECT_DOUBLE_EQ(n.tr.median, 5.0);
    EXPECT_NEAR(n.rot_deg.median, 0.1 * 180.0 / kPi, 1e-9);
}
