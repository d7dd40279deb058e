#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "poseuq/sampling.hpp"

namespace poseuq {

inline constexpr int kLogVersion = 1;

struct LogHeader {
    Method method = Method::DER;
    std::vector<std::uint64_t> seeds;
    std::string config_digest;
    bool operator==(const LogHeader&) const = default;
};

struct PredictionRecord {
    std::uint64_t id = 0;
    UncertainPose prediction;
    Pose6 truth;  // Euler form
};

struct PredictionLog {
    LogHeader header;
    std::vector<PredictionRecord> records;
};

class LogError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class LogVersionError : public LogError {
public:
    using LogError::LogError;
};

class LogTruncatedError : public LogError {
public:
    LogTruncatedError(const std::string& what, std::size_t record_index)
        : LogError(what), record_index_(record_index) {}
    std::size_t record_index() const { return record_index_; }

private:
    std::size_t record_index_;
};

class LogDuplicateIdError : public LogError {
public:
    LogDuplicateIdError(const std::string& what, std::uint64_t id) : LogError(what), id_(id) {}
    std::uint64_t id() const { return id_; }

private:
    std::uint64_t id_;
};

/// Line-delimited JSON: one header object, then one object per record.
///
///   {"format":"poseuq-prediction-log","version":1,"method":"DER","seeds":[..],
///    "config_digest":"..","records":N}
///   {"id":0,"mean":[6],"var":[6],"truth":[6],"student":[[loc,scale_sq,dof] x 6]}
///
/// Component order is (x, y, z, roll, pitch, yaw); "student" is optional.
/// Unknown keys are rejected.
void write_log(const std::filesystem::path& path, const PredictionLog& log);
PredictionLog read_log(const std::filesystem::path& path);

/// FNV-1a 64-bit, as 16 lowercase hex digits.
std::string digest_hex(std::string_view text);

}  // namespace poseuq
