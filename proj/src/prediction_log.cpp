#include "poseuq/prediction_log.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <unordered_set>

#include "json.hpp"

namespace poseuq {

namespace {

using nlohmann::json;

const std::set<std::string> kHeaderKeys = {"format", "version", "method", "seeds", "config_digest", "records"};
const std::set<std::string> kRecordKeys = {"id", "mean", "var", "truth", "student"};

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& item : j.items()) {
        if (!allowed.contains(item.key())) throw LogError(where + ": unknown field '" + item.key() + "'");
    }
}

std::array<double, 6> six(const json& j) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 6) throw LogError("expected 6 components");
    std::array<double, 6> out{};
    for (int i = 0; i < 6; ++i) out[i] = v[i];
    return out;
}

json record_to_json(const PredictionRecord& r) {
    json j;
    j["id"] = r.id;
    j["mean"] = r.prediction.mean;
    j["var"] = r.prediction.var;
    j["truth"] = r.truth.components();
    if (r.prediction.student) {
        json st = json::array();
        for (const auto& s : *r.prediction.student) st.push_back({s.loc, s.scale_sq, s.dof});
        j["student"] = st;
    }
    return j;
}

PredictionRecord record_from_json(const json& j, Method method) {
    reject_unknown(j, kRecordKeys, "record");
    PredictionRecord r;
    r.id = j.at("id").get<std::uint64_t>();
    r.prediction.method = method;
    r.prediction.mean = six(j.at("mean"));
    r.prediction.var = six(j.at("var"));
    const auto t = six(j.at("truth"));
    r.truth = Pose6{Translation{t[0], t[1], t[2]}, EulerTriple{t[3], t[4], t[5]}};
    if (j.contains("student")) {
        const auto& st = j.at("student");
        if (!st.is_array() || st.size() != 6) throw LogError("student: expected 6 entries");
        std::array<StudentTParams, 6> s{};
        for (int c = 0; c < 6; ++c) {
            const auto v = st[c].get<std::vector<double>>();
            if (v.size() != 3) throw LogError("student: expected [loc, scale_sq, dof]");
            s[c] = {v[0], v[1], v[2]};
        }
        r.prediction.student = s;
    }
    return r;
}

}  // namespace

std::string digest_hex(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_log(const std::filesystem::path& path, const PredictionLog& log) {
    std::unordered_set<std::uint64_t> ids;
    for (const auto& r : log.records) {
        if (!ids.insert(r.id).second) throw LogDuplicateIdError("duplicate record id " + std::to_string(r.id), r.id);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LogError("cannot open for writing: " + path.string());
    json header;
    header["format"] = "poseuq-prediction-log";
    header["version"] = kLogVersion;
    header["method"] = to_string(log.header.method);
    header["seeds"] = log.header.seeds;
    header["config_digest"] = log.header.config_digest;
    header["records"] = log.records.size();
    out << header.dump() << '\n';
    for (const auto& r : log.records) out << record_to_json(r).dump() << '\n';
    out.flush();
    if (!out) throw LogError("write failed: " + path.string());
}

PredictionLog read_log(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LogError("cannot open for reading: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw LogTruncatedError("missing header in " + path.string(), 0);

    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw LogError("malformed header in " + path.string() + ": " + e.what());
    }
    if (!header.is_object() || header.value("format", "") != "poseuq-prediction-log") {
        throw LogError("not a prediction log: " + path.string());
    }
    const int version = header.value("version", -1);
    if (version != kLogVersion) {
        throw LogVersionError("unsupported prediction log version " + std::to_string(version) + " (expected " +
                              std::to_string(kLogVersion) + ")");
    }

    PredictionLog log;
    std::size_t expected = 0;
    try {
        reject_unknown(header, kHeaderKeys, "header");
        log.header.method = method_from_string(header.at("method").get<std::string>());
        log.header.seeds = header.at("seeds").get<std::vector<std::uint64_t>>();
        log.header.config_digest = header.at("config_digest").get<std::string>();
        expected = header.at("records").get<std::size_t>();
    } catch (const json::exception& e) {
        throw LogError(std::string("malformed header: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw LogError(std::string("malformed header: ") + e.what());
    }

    std::unordered_set<std::uint64_t> ids;
    log.records.reserve(expected);
    for (std::size_t i = 0; i < expected; ++i) {
        if (!std::getline(in, line) || line.empty()) {
            throw LogTruncatedError("truncated log: record " + std::to_string(i) + " of " + std::to_string(expected) +
                                        " is missing",
                                    i);
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception&) {
            throw LogTruncatedError("truncated log: record " + std::to_string(i) + " is incomplete", i);
        }
        PredictionRecord r;
        try {
            r = record_from_json(j, log.header.method);
        } catch (const json::exception& e) {
            throw LogError("record " + std::to_string(i) + ": " + e.what());
        } catch (const LogError& e) {
            throw LogError("record " + std::to_string(i) + ": " + e.what());
        }
        if (!ids.insert(r.id).second) throw LogDuplicateIdError("duplicate record id " + std::to_string(r.id), r.id);
        log.records.push_back(std::move(r));
    }
    while (std::getline(in, line)) {
        if (!line.empty()) throw LogError("trailing data after " + std::to_string(expected) + " records");
    }
    return log;
}

}  // namespace poseuq
