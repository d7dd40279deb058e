#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "poseuq/prediction_log.hpp"

using namespace poseuq;
namespace fs = std::filesystem;

namespace {

PredictionLog random_log(std::size_t n, std::uint64_t seed, bool student) {
    Rng rng(seed);
    PredictionLog log;
    log.header = {student ? Method::DER : Method::DE, {seed, 42}, digest_hex("cfg")};
    for (std::size_t i = 0; i < n; ++i) {
        PredictionRecord r;
        r.id = i * 3 + 1;
        r.prediction.method = log.header.method;
        for (int c = 0; c < 6; ++c) {
            r.prediction.mean[c] = rng.normal() * 1e-3 + rng.normal();
            r.prediction.var[c] = std::exp(rng.normal() * 5.0);
        }
        if (student) {
            std::array<StudentTParams, 6> st{};
            for (auto& s : st) s = {rng.normal(), rng.uniform(1e-9, 10.0), 2.0 + rng.uniform()};
            r.prediction.student = st;
        }
        r.truth = make_pose(Translation{rng.normal(), rng.normal(), rng.normal()},
                            EulerTriple{rng.uniform(-3, 3), rng.uniform(-1.5, 1.5), rng.uniform(-3, 3)});
        log.records.push_back(r);
    }
    return log;
}

fs::path tmp(const std::string& name) { return fs::temp_directory_path() / ("poseuq_log_" + name); }

std::vector<std::string> lines_of(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
    std::ofstream out(p);
    for (const auto& l : lines) out << l << '\n';
}

}  // namespace

TEST(PredictionLog, RoundTripIsExact) {
    for (bool student : {false, true}) {
        const auto log = random_log(200, 5, student);
        const auto p = tmp("rt.jsonl");
        write_log(p, log);
        const auto back = read_log(p);
        EXPECT_EQ(back.header, log.header);
        ASSERT_EQ(back.records.size(), log.records.size());
        for (std::size_t i = 0; i < log.records.size(); ++i) {
            const auto& a = log.records[i];
            const auto& b = back.records[i];
            EXPECT_EQ(a.id, b.id);
            EXPECT_EQ(a.prediction.mean, b.prediction.mean);
            EXPECT_EQ(a.prediction.var, b.prediction.var);
            EXPECT_EQ(a.truth.components(), b.truth.components());
            EXPECT_EQ(a.prediction.student.has_value(), b.prediction.student.has_value());
            if (student) {
                for (int c = 0; c < 6; ++c) {
                    EXPECT_EQ((*a.prediction.student)[c].scale_sq, (*b.prediction.student)[c].scale_sq);
                    EXPECT_EQ((*a.prediction.student)[c].dof, (*b.prediction.student)[c].dof);
                }
            }
        }
        fs::remove(p);
    }
}

TEST(PredictionLog, TruncatedNamesRecord) {
    const auto p = tmp("trunc.jsonl");
    write_log(p, random_log(10, 1, false));
    auto lines = lines_of(p);
    lines.resize(8);  // header + 7 records
    write_lines(p, lines);
    try {
        read_log(p);
        FAIL() << "expected LogTruncatedError";
    } catch (const LogTruncatedError& e) {
        EXPECT_EQ(e.record_index(), 7u);
    }
    lines.back() = lines.back().substr(0, lines.back().size() / 2);
    write_lines(p, lines);
    try {
        read_log(p);
        FAIL() << "expected LogTruncatedError";
    } catch (const LogTruncatedError& e) {
        EXPECT_EQ(e.record_index(), 6u);
    }
    fs::remove(p);
}

TEST(PredictionLog, VersionMismatch) {
    const auto p = tmp("ver.jsonl");
    write_log(p, random_log(3, 1, false));
    auto lines = lines_of(p);
    const auto at = lines[0].find("\"version\":1");
    ASSERT_NE(at, std::string::npos);
    lines[0].replace(at, 11, "\"version\":2");
    write_lines(p, lines);
    EXPECT_THROW(read_log(p), LogVersionError);
    fs::remove(p);
}

TEST(PredictionLog, DuplicateIds) {
    auto log = random_log(4, 2, false);
    log.records[3].id = log.records[1].id;
    const auto p = tmp("dup.jsonl");
    try {
        write_log(p, log);
        FAIL() << "expected LogDuplicateIdError";
    } catch (const LogDuplicateIdError& e) {
        EXPECT_EQ(e.id(), log.records[1].id);
    }
    log.records[3].id = 1000;
    write_log(p, log);
    auto lines = lines_of(p);
    lines[4] = lines[2];
    write_lines(p, lines);
    EXPECT_THROW(read_log(p), LogDuplicateIdError);
    fs::remove(p);
}

TEST(PredictionLog, UnknownFieldRejected) {
    const auto p = tmp("unk.jsonl");
    write_log(p, random_log(2, 3, false));
    auto lines = lines_of(p);
    lines[1].insert(1, "\"extra\":1,");
    write_lines(p, lines);
    EXPECT_THROW(read_log(p), LogError);
    fs::remove(p);
}

TEST(PredictionLog, MissingFile) { EXPECT_THROW(read_log(tmp("does_not_exist.jsonl")), LogError); }

TEST(PredictionLog, TenThousandRecordsUnderASecond) {
    const auto log = random_log(10000, 4, true);
    const auto p = tmp("big.jsonl");
    const auto t0 = std::chrono::steady_clock::now();
    write_log(p, log);
    const auto back = read_log(p);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_EQ(back.records.size(), 10000u);
    EXPECT_LT(secs, 1.0);
    fs::remove(p);
}

TEST(Digest, Fnv1a) {
    EXPECT_EQ(digest_hex(""), "cbf29ce484222325");
    EXPECT_EQ(digest_hex("a"), "af63dc4c8601ec8c");
    EXPECT_NE(digest_hex("ab"), digest_hex("ba"));
}
