// poseuq: synthetic benchmark runner.
//
//   poseuq all --seed 7 [--config cfg.json] [--set schedule.epochs_total=20] [--out dir]
//   poseuq gen|train|predict|calibrate|gate|sweep|report [--method DER] ...
//
// Exit codes: 0 ok, 2 config error, 3 training divergence, 4 I/O error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "poseuq/experiment.hpp"
#include "poseuq/prediction_log.hpp"
#include "poseuq/report.hpp"

namespace fs = std::filesystem;
using namespace poseuq;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitIo = 4;

struct Options {
    std::string config;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> methods;
};

ExperimentConfig build_config(const Options& o) {
    nlohmann::json j = nlohmann::json::object();
    if (!o.config.empty()) j = config_to_json(load_config(o.config));
    for (const auto& s : o.sets) apply_override(j, s);
    if (o.seed) j["seed"] = *o.seed;
    if (!o.out.empty()) j["output_dir"] = o.out;
    if (!o.methods.empty()) j["methods"] = o.methods;
    ExperimentConfig cfg = config_from_json(j);
    if (const char* root = std::getenv("POSEUQ_OUTPUT_ROOT"); root && *root && cfg.output_dir.is_relative()) {
        cfg.output_dir = fs::path(root) / cfg.output_dir;
    }
    return cfg;
}

void print_breakdown(const LossBreakdown& b) {
    std::fprintf(stderr,
                 "  total %.6g  geometric_tr %.6g  geometric_rot %.6g  evd_tr %.6g  evd_rot %.6g\n"
                 "  density_tr %.6g  density_rot %.6g  reg_tr %.6g  reg_rot %.6g\n",
                 b.total, b.geometric_tr, b.geometric_rot, b.evd_tr, b.evd_rot, b.density_tr, b.density_rot,
                 b.reg_tr, b.reg_rot);
}

int run(const std::string& verb, const Options& o) {
    const ExperimentConfig cfg = build_config(o);
    if (verb == "all") {
        run_experiment(cfg);
    } else if (verb == "gen") {
        stage_gen(cfg);
    } else if (verb == "report") {
        emit_report(cfg.output_dir, cfg.methods, cfg.gate_percentile, cfg.calibration_levels);
    } else {
        for (Method m : cfg.methods) {
            if (verb == "train") stage_train(cfg, m);
            else if (verb == "predict") stage_predict(cfg, m);
            else if (verb == "calibrate") stage_calibrate(cfg, m);
            else if (verb == "gate") stage_gate(cfg, m);
            else if (verb == "sweep") stage_sweep(cfg, m);
        }
    }
    std::cout << verb << ": wrote artifacts to " << cfg.output_dir.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Epistemic uncertainty for pose regression on a synthetic benchmark"};
    app.require_subcommand(1);
    Options o;
    std::string verb;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", o.config, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--set", o.sets, "Override a config key, e.g. schedule.epochs_total=20");
        sub->add_option("-o,--out", o.out, "Output directory");
        sub->add_option("--method", o.methods, "Restrict to these methods (DER, DE, MCD)");
        sub->callback([&verb, sub] { verb = sub->get_name(); });
    };

    for (const char* name : {"gen", "train", "predict", "calibrate", "gate", "sweep", "report"}) {
        auto* sub = app.add_subcommand(name, std::string("Run the ") + name + " stage");
        add_common(sub);
        sub->add_option("--seed", o.seed, "Master seed");
    }
    auto* all = app.add_subcommand("all", "Run every stage end to end");
    add_common(all);
    all->add_option("--seed", o.seed, "Master seed")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        return run(verb, o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const TrainingDivergence& e) {
        std::cerr << "training diverged at epoch " << e.epoch() << ": " << e.what() << "\n";
        print_breakdown(e.breakdown());
        return kExitDivergence;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kExitIo;
    }
}
