#include "poseuq/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <set>

#include "poseuq/calibration.hpp"
#include "poseuq/prediction_log.hpp"
#include "poseuq/report.hpp"

namespace poseuq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            throw ConfigError("unknown config key: " + (where.empty() ? key : where + "." + key));
        }
    }
}

template <class T>
void read_field(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key " + where + "." + key + " has the wrong type");
    }
}

std::string variant_name(EvidentialVariant v) { return v == EvidentialVariant::D ? "D" : "NLL"; }

EvidentialVariant variant_from(const std::string& s) {
    if (s == "D") return EvidentialVariant::D;
    if (s == "NLL") return EvidentialVariant::NLL;
    throw ConfigError("loss.evd_variant must be \"D\" or \"NLL\"");
}

fs::path dataset_path(const ExperimentConfig& cfg, const char* split) {
    return cfg.output_dir / (std::string("dataset_") + split + ".jsonl");
}

std::vector<fs::path> model_paths(const ExperimentConfig& cfg, Method m) {
    const fs::path dir = cfg.output_dir / "models";
    if (m != Method::DE) return {dir / (method_tag(m) + ".json")};
    std::vector<fs::path> out;
    for (std::size_t k = 0; k < cfg.sampler.n_models; ++k) out.push_back(dir / ("de_" + std::to_string(k) + ".json"));
    return out;
}

fs::path train_log_path(const ExperimentConfig& cfg, Method m, std::size_t member) {
    std::string name = "train_log_" + method_tag(m);
    if (m == Method::DE) name += "_" + std::to_string(member);
    return cfg.output_dir / (name + ".csv");
}

fs::path predictions_path(const ExperimentConfig& cfg, Method m) {
    return cfg.output_dir / ("predictions_" + method_tag(m) + ".jsonl");
}

std::vector<Sample> load_split(const ExperimentConfig& cfg, const char* split) {
    const fs::path p = dataset_path(cfg, split);
    if (!fs::exists(p)) throw ArtifactError("missing artifact: " + p.string() + " (run gen first)");
    try {
        return read_samples(p);
    } catch (const std::runtime_error& e) {
        throw ArtifactError(e.what());
    }
}

PredictionLog load_predictions(const ExperimentConfig& cfg, Method m) {
    const fs::path p = predictions_path(cfg, m);
    if (!fs::exists(p)) throw ArtifactError("missing artifact: " + p.string() + " (run predict first)");
    return read_log(p);
}

std::vector<RegressorParams> load_models(const ExperimentConfig& cfg, Method m) {
    std::vector<RegressorParams> out;
    for (const fs::path& p : model_paths(cfg, m)) {
        if (!fs::exists(p)) throw ArtifactError("missing artifact: " + p.string() + " (run train first)");
        try {
            out.push_back(load_checkpoint(p).params);
        } catch (const std::runtime_error& e) {
            throw ArtifactError(e.what());
        }
    }
    return out;
}

void append_breakdown(std::string& line, const LossBreakdown& b) {
    for (double v : {b.total, b.geometric_tr, b.geometric_rot, b.evd_tr, b.evd_rot, b.density_tr, b.density_rot,
                     b.reg_tr, b.reg_rot}) {
        line += ',';
        line += fmt_num(v);
    }
}

std::string train_log_csv(const std::vector<EpochRecord>& log) {
    std::string out = "epoch,phase,s_evd";
    for (const char* prefix : {"train_", "val_"}) {
        for (const char* f : {"total", "geometric_tr", "geometric_rot", "evd_tr", "evd_rot", "density_tr",
                              "density_rot", "reg_tr", "reg_rot"}) {
            out += ',';
            out += prefix;
            out += f;
        }
    }
    out += ",val_tr_error_mean,val_rot_error_mean_deg\n";
    for (const auto& r : log) {
        std::string line = std::to_string(r.epoch) + "," + std::to_string(r.phase) + "," + fmt_num(r.s_evd);
        append_breakdown(line, r.train);
        append_breakdown(line, r.validation);
        line += "," + fmt_num(r.val_tr_error_mean) + "," + fmt_num(r.val_rot_error_mean);
        out += line + "\n";
    }
    return out;
}

LossConfig loss_for(const ExperimentConfig& cfg, Method m) {
    LossConfig loss = cfg.loss;
    // Point-estimate heads only have the geometric objective.
    if (m != Method::DER) loss.use_geometric = true;
    return loss;
}

Architecture arch_for(const ExperimentConfig& cfg, Method m, std::size_t input_dim) {
    Architecture a;
    a.input_dim = input_dim;
    a.hidden1 = cfg.hidden1;
    a.hidden2 = cfg.hidden2;
    a.head = m == Method::DER ? HeadKind::Evidential : HeadKind::Plain;
    a.dropout_p = m == Method::MCD ? cfg.sampler.dropout_p : 0.0;
    return a;
}

std::vector<double> norms_of(const PredictionLog& log, bool translation) {
    std::vector<double> out;
    out.reserve(log.records.size());
    for (const auto& r : log.records) {
        if (translation) {
            const auto& t = r.truth.translation;
            out.push_back(std::hypot(t.x, t.y, t.z));
        } else {
            out.push_back(quat_angular_distance(r.truth.quaternion(), UnitQuaternion{}) * 180.0 / kPi);
        }
    }
    return out;
}

}  // namespace

void validate(const ExperimentConfig& cfg) {
    try {
        if (cfg.methods.empty()) throw ConfigError("methods must not be empty");
        std::set<Method> seen(cfg.methods.begin(), cfg.methods.end());
        if (seen.size() != cfg.methods.size()) throw ConfigError("methods must not repeat");
        validate(cfg.dataset);
        Architecture a;
        a.input_dim = cfg.dataset.feature_dim();
        a.hidden1 = cfg.hidden1;
        a.hidden2 = cfg.hidden2;
        validate(a);
        validate(cfg.loss);
        validate(cfg.schedule);
        for (Method m : cfg.methods) validate(cfg.sampler, m);
        if (!(cfg.gate_percentile > 0.0 && cfg.gate_percentile < 1.0)) throw ConfigError("gate.percentile must be in (0, 1)");
        for (std::size_t i = 0; i < cfg.sweep_percentiles.size(); ++i) {
            const double p = cfg.sweep_percentiles[i];
            if (!(p > 0.0 && p < 1.0)) throw ConfigError("gate.sweep entries must be in (0, 1)");
            if (i > 0 && !(p > cfg.sweep_percentiles[i - 1])) throw ConfigError("gate.sweep must be strictly increasing");
        }
        if (cfg.calibration_levels < 2) throw ConfigError("calibration.levels must be >= 2");
        if (cfg.output_dir.empty()) throw ConfigError("output_dir must not be empty");
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

json config_to_json(const ExperimentConfig& cfg, bool with_output_dir) {
    json methods = json::array();
    for (Method m : cfg.methods) methods.push_back(to_string(m));
    const auto& d = cfg.dataset;
    const auto& l = cfg.loss;
    const auto& s = cfg.schedule;
    json j;
    j["seed"] = cfg.seed;
    j["methods"] = methods;
    j["dataset"] = {{"landmarks", d.landmarks},
                    {"jitter_sigma", d.jitter_sigma},
                    {"train_size", d.train_size},
                    {"val_size", d.val_size},
                    {"max_translation", d.max_translation},
                    {"max_rotation_deg", d.max_rotation_deg},
                    {"mismatch_prob", d.mismatch_prob},
                    {"feature_scale", d.feature_scale},
                    {"layout_spread", d.layout_spread}};
    j["network"] = {{"hidden1", cfg.hidden1}, {"hidden2", cfg.hidden2}};
    j["loss"] = {{"lambda_tr", l.lambda_tr},
                 {"lambda_rot", l.lambda_rot},
                 {"s_tr", l.s_tr},
                 {"s_rot", l.s_rot},
                 {"evd_variant", variant_name(l.evd_variant)},
                 {"use_geometric", l.use_geometric},
                 {"clip_floor", l.clip_floor}};
    j["schedule"] = {{"epochs_total", s.epochs_total}, {"epochs_phase1", s.epochs_phase1},
                     {"lr", s.lr},                     {"batch_size", s.batch_size},
                     {"s_evd_phase1", s.s_evd_phase1}, {"s_evd_phase2", s.s_evd_phase2}};
    j["sampler"] = {{"n_samples", cfg.sampler.n_samples},
                    {"dropout_p", cfg.sampler.dropout_p},
                    {"n_models", cfg.sampler.n_models},
                    {"seeds", cfg.sampler.seeds}};
    j["gate"] = {{"percentile", cfg.gate_percentile}, {"sweep", cfg.sweep_percentiles}};
    j["calibration"] = {{"levels", cfg.calibration_levels}};
    if (with_output_dir) j["output_dir"] = cfg.output_dir.string();
    return j;
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig cfg;
    check_keys(j, {"seed", "methods", "dataset", "network", "loss", "schedule", "sampler", "gate", "calibration",
                   "output_dir"},
               "");
    read_field(j, "seed", cfg.seed, "");
    if (j.contains("methods")) {
        std::vector<std::string> names;
        read_field(j, "methods", names, "");
        cfg.methods.clear();
        for (const auto& n : names) {
            try {
                cfg.methods.push_back(method_from_string(n));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
        }
    }
    if (j.contains("dataset")) {
        const auto& d = j["dataset"];
        check_keys(d, {"landmarks", "jitter_sigma", "train_size", "val_size", "max_translation", "max_rotation_deg",
                       "mismatch_prob", "feature_scale", "layout_spread"},
                   "dataset");
        read_field(d, "landmarks", cfg.dataset.landmarks, "dataset");
        read_field(d, "jitter_sigma", cfg.dataset.jitter_sigma, "dataset");
        read_field(d, "train_size", cfg.dataset.train_size, "dataset");
        read_field(d, "val_size", cfg.dataset.val_size, "dataset");
        read_field(d, "max_translation", cfg.dataset.max_translation, "dataset");
        read_field(d, "max_rotation_deg", cfg.dataset.max_rotation_deg, "dataset");
        read_field(d, "mismatch_prob", cfg.dataset.mismatch_prob, "dataset");
        read_field(d, "feature_scale", cfg.dataset.feature_scale, "dataset");
        read_field(d, "layout_spread", cfg.dataset.layout_spread, "dataset");
    }
    if (j.contains("network")) {
        const auto& n = j["network"];
        check_keys(n, {"hidden1", "hidden2"}, "network");
        read_field(n, "hidden1", cfg.hidden1, "network");
        read_field(n, "hidden2", cfg.hidden2, "network");
    }
    if (j.contains("loss")) {
        const auto& l = j["loss"];
        check_keys(l, {"lambda_tr", "lambda_rot", "s_tr", "s_rot", "evd_variant", "use_geometric", "clip_floor"}, "loss");
        read_field(l, "lambda_tr", cfg.loss.lambda_tr, "loss");
        read_field(l, "lambda_rot", cfg.loss.lambda_rot, "loss");
        read_field(l, "s_tr", cfg.loss.s_tr, "loss");
        read_field(l, "s_rot", cfg.loss.s_rot, "loss");
        std::string variant = variant_name(cfg.loss.evd_variant);
        read_field(l, "evd_variant", variant, "loss");
        cfg.loss.evd_variant = variant_from(variant);
        read_field(l, "use_geometric", cfg.loss.use_geometric, "loss");
        read_field(l, "clip_floor", cfg.loss.clip_floor, "loss");
    }
    if (j.contains("schedule")) {
        const auto& s = j["schedule"];
        check_keys(s, {"epochs_total", "epochs_phase1", "lr", "batch_size", "s_evd_phase1", "s_evd_phase2"}, "schedule");
        read_field(s, "epochs_total", cfg.schedule.epochs_total, "schedule");
        read_field(s, "epochs_phase1", cfg.schedule.epochs_phase1, "schedule");
        read_field(s, "lr", cfg.schedule.lr, "schedule");
        read_field(s, "batch_size", cfg.schedule.batch_size, "schedule");
        read_field(s, "s_evd_phase1", cfg.schedule.s_evd_phase1, "schedule");
        read_field(s, "s_evd_phase2", cfg.schedule.s_evd_phase2, "schedule");
    }
    if (j.contains("sampler")) {
        const auto& s = j["sampler"];
        check_keys(s, {"n_samples", "dropout_p", "n_models", "seeds"}, "sampler");
        read_field(s, "n_samples", cfg.sampler.n_samples, "sampler");
        read_field(s, "dropout_p", cfg.sampler.dropout_p, "sampler");
        read_field(s, "n_models", cfg.sampler.n_models, "sampler");
        read_field(s, "seeds", cfg.sampler.seeds, "sampler");
    }
    if (j.contains("gate")) {
        const auto& g = j["gate"];
        check_keys(g, {"percentile", "sweep"}, "gate");
        read_field(g, "percentile", cfg.gate_percentile, "gate");
        read_field(g, "sweep", cfg.sweep_percentiles, "gate");
    }
    if (j.contains("calibration")) {
        const auto& c = j["calibration"];
        check_keys(c, {"levels"}, "calibration");
        read_field(c, "levels", cfg.calibration_levels, "calibration");
    }
    if (j.contains("output_dir")) {
        std::string dir;
        read_field(j, "output_dir", dir, "");
        cfg.output_dir = dir;
    }
    validate(cfg);
    return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed config " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::exception&) {
        value = text;
    }
    json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("bad override key: " + key);
        if (!node->is_object()) throw ConfigError("override key " + key + " descends into a non-object");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

std::string config_digest(const ExperimentConfig& cfg) { return digest_hex(config_to_json(cfg, false).dump()); }

std::string method_tag(Method m) {
    switch (m) {
        case Method::MCD: return "mcd";
        case Method::DE: return "de";
        case Method::DER: return "der";
    }
    return "?";
}

std::vector<std::uint64_t> method_seeds(const ExperimentConfig& cfg, Method m) {
    switch (m) {
        case Method::DER: return {derive_seed(cfg.seed, 10)};
        case Method::MCD: return {derive_seed(cfg.seed, 30), derive_seed(cfg.seed, 31)};
        case Method::DE: break;
    }
    if (!cfg.sampler.seeds.empty()) return cfg.sampler.seeds;
    std::vector<std::uint64_t> out;
    for (std::size_t k = 0; k < cfg.sampler.n_models; ++k) out.push_back(derive_seed(cfg.seed, 20 + k));
    return out;
}

void stage_gen(const ExperimentConfig& cfg) {
    validate(cfg);
    fs::create_directories(cfg.output_dir);
    DatasetConfig d = cfg.dataset;
    d.seed = derive_seed(cfg.seed, 1);
    const Dataset data = gen_dataset(d);
    try {
        write_samples(dataset_path(cfg, "train"), data.train);
        write_samples(dataset_path(cfg, "val"), data.validation);
    } catch (const std::runtime_error& e) {
        throw ArtifactError(e.what());
    }
    write_text(cfg.output_dir / "config.json", config_to_json(cfg, false).dump(2) + "\n");
}

void stage_train(const ExperimentConfig& cfg, Method m) {
    validate(cfg);
    const auto train = load_split(cfg, "train");
    const auto val = load_split(cfg, "val");
    if (train.empty()) throw ArtifactError("empty training set");
    fs::create_directories(cfg.output_dir / "models");

    const Architecture arch = arch_for(cfg, m, train.front().features.size());
    const LossConfig loss = loss_for(cfg, m);
    const auto seeds = method_seeds(cfg, m);
    const auto paths = model_paths(cfg, m);
    const auto n = static_cast<std::ptrdiff_t>(paths.size());

    // Ensemble members train concurrently; each has its own state and seed.
    std::vector<FitResult> fits(paths.size());
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        try {
            TrainSchedule s = cfg.schedule;
            s.seed = seeds[k];
            fits[k] = fit(arch, s, train, val, loss);
        } catch (...) {
#pragma omp critical
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);

    for (std::size_t k = 0; k < paths.size(); ++k) {
        TrainSchedule s = cfg.schedule;
        s.seed = seeds[k];
        try {
            save_checkpoint(paths[k], Checkpoint{fits[k].params, s, cfg.seed});
        } catch (const std::runtime_error& e) {
            throw ArtifactError(e.what());
        }
        write_text(train_log_path(cfg, m, k), train_log_csv(fits[k].log));
    }
}

void stage_predict(const ExperimentConfig& cfg, Method m) {
    validate(cfg);
    const auto val = load_split(cfg, "val");
    const auto models = load_models(cfg, m);
    const auto seeds = method_seeds(cfg, m);

    PredictionLog log;
    log.header.method = m;
    log.header.seeds = seeds;
    log.header.config_digest = config_digest(cfg);
    log.records.resize(val.size());

    const auto n = static_cast<std::ptrdiff_t>(val.size());
    std::exception_ptr error;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            const Sample& s = val[i];
            UncertainPose u;
            switch (m) {
                case Method::DER: u = der_predict(models.front(), s.features); break;
                case Method::DE: u = de_predict(models, s.features); break;
                case Method::MCD:
                    u = mcd_predict(models.front(), s.features, cfg.sampler, derive_seed(seeds.back(), i));
                    break;
            }
            log.records[i] = PredictionRecord{static_cast<std::uint64_t>(i), u, s.target};
        } catch (...) {
#pragma omp critical
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
    write_log(predictions_path(cfg, m), log);
}

void stage_calibrate(const ExperimentConfig& cfg, Method m) {
    validate(cfg);
    const PredictionLog log = load_predictions(cfg, m);
    std::vector<CalibrationCurve> curves;
    for (int c = 0; c < 6; ++c) curves.push_back(calibration_curve(log, c, cfg.calibration_levels));
    write_text(cfg.output_dir / ("calibration_" + method_tag(m) + ".csv"), calibration_csv(m, curves));
}

void stage_gate(const ExperimentConfig& cfg, Method m) {
    validate(cfg);
    const PredictionLog log = load_predictions(cfg, m);
    const GateReport rep = apply_gate(log, percentile_thresholds(log, cfg.gate_percentile));
    write_text(cfg.output_dir / ("gate_" + method_tag(m) + ".json"), gate_report_json(m, rep, log).dump(2) + "\n");
}

void stage_sweep(const ExperimentConfig& cfg, Method m) {
    validate(cfg);
    const PredictionLog log = load_predictions(cfg, m);
    std::vector<SweepRow> rows;
    for (const GateReport& r : confidence_sweep(log, cfg.sweep_percentiles)) rows.push_back(sweep_row(r));
    write_text(cfg.output_dir / ("sweep_" + method_tag(m) + ".csv"), sweep_csv(m, rows));
}

void run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    stage_gen(cfg);
    for (Method m : cfg.methods) {
        stage_train(cfg, m);
        stage_predict(cfg, m);
        stage_calibrate(cfg, m);
        stage_gate(cfg, m);
        stage_sweep(cfg, m);
    }
    emit_report(cfg.output_dir, cfg.methods, cfg.gate_percentile, cfg.calibration_levels);
}

ErrorSummary ungated_errors(const PredictionLog& log) {
    std::vector<double> tr, rot;
    for (const auto& r : log.records) {
        tr.push_back(translation_error(r));
        rot.push_back(rotation_error_deg(r));
    }
    return {error_stats(std::move(tr)), error_stats(std::move(rot))};
}

ErrorSummary injected_noise(const PredictionLog& log) {
    return {error_stats(norms_of(log, true)), error_stats(norms_of(log, false))};
}

}  // namespace poseuq
