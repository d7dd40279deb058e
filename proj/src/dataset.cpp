#include "poseuq/dataset.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace poseuq {

namespace {

using Vec3 = std::array<double, 3>;

Vec3 add(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

// Point p_w in the frame of a camera-to-world pose.
Vec3 to_frame(const Pose6& pose, const Vec3& p_w) {
    return rotate(conjugate(pose.quaternion()), sub(p_w, pose.translation.as_array()));
}

std::vector<Sample> make_split(const DatasetConfig& cfg, const LandmarkTemplate& tmpl, std::size_t n,
                               std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Sample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        SyntheticScene s = make_scene(cfg, tmpl, rng);
        out.push_back(Sample{std::move(s.features), s.misalignment});
    }
    return out;
}

}  // namespace

void validate(const DatasetConfig& cfg) {
    if (cfg.landmarks < 4) throw std::invalid_argument("DatasetConfig: need at least 4 landmarks");
    if (cfg.train_size < 1 || cfg.val_size < 1) throw std::invalid_argument("DatasetConfig: split sizes must be >= 1");
    if (!(cfg.jitter_sigma >= 0.0)) throw std::invalid_argument("DatasetConfig: jitter_sigma must be >= 0");
    if (!(cfg.max_translation >= 0.0) || !(cfg.max_rotation_deg >= 0.0) || cfg.max_rotation_deg >= 90.0) {
        throw std::invalid_argument("DatasetConfig: noise bounds must be >= 0 (rotation < 90 deg)");
    }
    if (!(cfg.mismatch_prob >= 0.0 && cfg.mismatch_prob <= 1.0)) throw std::invalid_argument("DatasetConfig: mismatch_prob must be in [0, 1]");
    if (!(cfg.feature_scale > 0.0)) throw std::invalid_argument("DatasetConfig: feature_scale must be > 0");
    if (!(cfg.layout_spread >= 0.0)) throw std::invalid_argument("DatasetConfig: layout_spread must be >= 0");
}

LandmarkTemplate make_template(std::size_t landmarks, std::uint64_t seed) {
    Rng rng(seed);
    LandmarkTemplate t(landmarks);
    for (auto& p : t) p = {rng.uniform(-6.0, 6.0), rng.uniform(-3.0, 3.0), rng.uniform(5.0, 15.0)};
    return t;
}

SyntheticScene make_scene(const DatasetConfig& cfg, const LandmarkTemplate& tmpl, Rng& rng) {
    validate(cfg);
    SyntheticScene scene;

    const Translation cam_t{rng.uniform(-100.0, 100.0), rng.uniform(-100.0, 100.0), rng.uniform(1.0, 3.0)};
    const EulerTriple cam_e{rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(-kPi, kPi)};
    scene.true_pose = make_pose(cam_t, euler_to_quat(cam_e));

    const double max_rot = cfg.max_rotation_deg * kPi / 180.0;
    const Translation mis_t{rng.uniform(-cfg.max_translation, cfg.max_translation),
                            rng.uniform(-cfg.max_translation, cfg.max_translation),
                            rng.uniform(-cfg.max_translation, cfg.max_translation)};
    const EulerTriple mis_e{rng.uniform(-max_rot, max_rot), rng.uniform(-max_rot, max_rot), rng.uniform(-max_rot, max_rot)};
    scene.misalignment = make_pose(mis_t, mis_e);

    // init = true * misalignment^-1
    const UnitQuaternion q_true = scene.true_pose.quaternion();
    const UnitQuaternion q_mis = euler_to_quat(mis_e);
    const UnitQuaternion q_init = multiply(q_true, conjugate(q_mis));
    const Vec3 t_init = sub(cam_t.as_array(), rotate(q_init, mis_t.as_array()));
    scene.init_pose = make_pose(Translation{t_init[0], t_init[1], t_init[2]}, q_init);

    const std::size_t k = cfg.landmarks;
    if (tmpl.size() != k) throw std::invalid_argument("make_scene: template size does not match landmarks");
    const double layout_sd = rng.uniform(0.0, cfg.layout_spread);
    std::vector<Vec3> in_camera(k);
    scene.landmarks_world.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        in_camera[i] = add(tmpl[i], Vec3{layout_sd * rng.normal(), layout_sd * rng.normal(), layout_sd * rng.normal()});
        scene.landmarks_world.push_back(add(rotate(q_true, in_camera[i]), cam_t.as_array()));
    }

    scene.features.assign(6 * k, 0.0);
    const double inv_scale = 1.0 / cfg.feature_scale;
    for (std::size_t i = 0; i < k; ++i) {
        const Vec3 in_init = to_frame(scene.init_pose, scene.landmarks_world[i]);
        Vec3 observed = to_frame(scene.true_pose, scene.landmarks_world[i]);
        for (double& v : observed) v += cfg.jitter_sigma * rng.normal();
        // A mismatch pairs the map landmark with some other point of the structure.
        if (rng.uniform() < cfg.mismatch_prob) {
            observed = add(tmpl[i], Vec3{3.0 * rng.normal(), 3.0 * rng.normal(), 3.0 * rng.normal()});
        }
        for (int d = 0; d < 3; ++d) {
            scene.features[3 * i + d] = in_init[d] * inv_scale;
            scene.features[3 * (k + i) + d] = observed[d] * inv_scale;
        }
    }
    return scene;
}

Dataset gen_dataset(const DatasetConfig& cfg) {
    validate(cfg);
    const LandmarkTemplate tmpl = make_template(cfg.landmarks, derive_seed(cfg.seed, 12));
    return {make_split(cfg, tmpl, cfg.train_size, derive_seed(cfg.seed, 10)),
            make_split(cfg, tmpl, cfg.val_size, derive_seed(cfg.seed, 11))};
}

void write_samples(const std::filesystem::path& path, std::span<const Sample> samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write dataset: " + path.string());
    nlohmann::json header = {{"format", "poseuq-dataset"},
                             {"version", 1},
                             {"samples", samples.size()},
                             {"feature_dim", samples.empty() ? 0 : samples.front().features.size()}};
    out << header.dump() << '\n';
    for (std::size_t i = 0; i < samples.size(); ++i) {
        nlohmann::json j = {{"id", i}, {"features", samples[i].features}, {"target", samples[i].target.components()}};
        out << j.dump() << '\n';
    }
    if (!out) throw std::runtime_error("failed writing dataset: " + path.string());
}

std::vector<Sample> read_samples(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read dataset: " + path.string());
    std::string line;
    std::vector<Sample> out;
    try {
        if (!std::getline(in, line)) throw std::runtime_error("empty dataset file");
        const auto header = nlohmann::json::parse(line);
        if (header.value("format", "") != "poseuq-dataset" || header.value("version", -1) != 1) {
            throw std::runtime_error("not a version-1 dataset file");
        }
        const auto n = header.at("samples").get<std::size_t>();
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::getline(in, line)) throw std::runtime_error("truncated at sample " + std::to_string(i));
            const auto j = nlohmann::json::parse(line);
            const auto t = j.at("target").get<std::vector<double>>();
            if (t.size() != 6) throw std::runtime_error("sample " + std::to_string(i) + ": target needs 6 values");
            out.push_back(Sample{j.at("features").get<std::vector<double>>(),
                                 Pose6{Translation{t[0], t[1], t[2]}, EulerTriple{t[3], t[4], t[5]}}});
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed dataset " + path.string() + ": " + e.what());
    }
    return out;
}

}  // namespace poseuq
