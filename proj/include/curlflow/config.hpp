#pragma once

// Experiment configuration: JSON in, byte-stable JSON out, unknown keys
// rejected with field-level messages.  Every output CSV echoes the full
// config in its header block so runs are self-describing.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

namespace curlflow {

inline constexpr const char* kVersion = "curlflow 0.1.0";

struct ExperimentConfig {
    std::string experiment;
    uint64_t seed = 1;
    int threads = 1;
    std::string out_dir = "out";
    nlohmann::ordered_json params = nlohmann::ordered_json::object();

    std::string to_json() const;  // canonical serialization (round-trips exactly)
};

ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig config_from_file(const std::string& path);

// Throws std::invalid_argument naming the offending key if params contains
// keys outside `allowed` (comma-separated list).
void validate_param_keys(const ExperimentConfig& cfg, const std::string& allowed);

// Typed parameter access with defaults; throws naming the key on type errors.
double param_num(const ExperimentConfig& cfg, const std::string& key, double fallback);
int64_t param_int(const ExperimentConfig& cfg, const std::string& key, int64_t fallback);
std::string param_str(const ExperimentConfig& cfg, const std::string& key,
                      const std::string& fallback);
std::vector<double> param_list(const ExperimentConfig& cfg, const std::string& key,
                               const std::vector<double>& fallback);

// CSV writer with config-echo header and full-precision doubles.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const ExperimentConfig& cfg);
    void columns(const std::vector<std::string>& names);
    void raw_comment(const std::string& line);
    void field(const std::string& s);
    void field(double v);
    void field(int64_t v);
    void field(uint64_t v);
    void end_row();
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
    bool row_started_ = false;
    void sep();
};

std::string format_double(double v);  // shortest round-trip-exact decimal

}  // namespace curlflow
