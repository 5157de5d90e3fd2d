#include "curlflow/config.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace curlflow {

using json = nlohmann::ordered_json;

std::string ExperimentConfig::to_json() const {
    json j;
    j["experiment"] = experiment;
    j["seed"] = seed;
    j["threads"] = threads;
    j["out"] = out_dir;
    j["params"] = params;
    return j.dump();
}

ExperimentConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
    for (const auto& [key, _] : j.items()) {
        if (key != "experiment" && key != "seed" && key != "threads" && key != "out" &&
            key != "params")
            throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    ExperimentConfig cfg;
    if (!j.contains("experiment") || !j["experiment"].is_string())
        throw std::invalid_argument("config: missing or non-string key 'experiment'");
    cfg.experiment = j["experiment"].get<std::string>();
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
            throw std::invalid_argument("config: 'seed' must be an integer");
        cfg.seed = j["seed"].get<uint64_t>();
    }
    if (j.contains("threads")) {
        if (!j["threads"].is_number_integer() && !j["threads"].is_number_unsigned())
            throw std::invalid_argument("config: 'threads' must be an integer");
        cfg.threads = j["threads"].get<int>();
    }
    if (j.contains("out")) {
        if (!j["out"].is_string())
            throw std::invalid_argument("config: 'out' must be a string");
        cfg.out_dir = j["out"].get<std::string>();
    }
    if (j.contains("params")) {
        if (!j["params"].is_object())
            throw std::invalid_argument("config: 'params' must be an object");
        cfg.params = j["params"];
    }
    return cfg;
}

ExperimentConfig config_from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return config_from_json(ss.str());
}

void validate_param_keys(const ExperimentConfig& cfg, const std::string& allowed) {
    for (const auto& [key, _] : cfg.params.items()) {
        const std::string needle = "," + key + ",";
        const std::string hay = "," + allowed + ",";
        if (hay.find(needle) == std::string::npos)
            throw std::invalid_argument("config: unknown parameter '" + key +
                                        "' for experiment '" + cfg.experiment + "'");
    }
}

double param_num(const ExperimentConfig& cfg, const std::string& key, double fallback) {
    if (!cfg.params.contains(key)) return fallback;
    if (!cfg.params[key].is_number())
        throw std::invalid_argument("config: parameter '" + key + "' must be a number");
    return cfg.params[key].get<double>();
}

int64_t param_int(const ExperimentConfig& cfg, const std::string& key, int64_t fallback) {
    if (!cfg.params.contains(key)) return fallback;
    if (!cfg.params[key].is_number_integer() && !cfg.params[key].is_number_unsigned())
        throw std::invalid_argument("config: parameter '" + key + "' must be an integer");
    return cfg.params[key].get<int64_t>();
}

std::string param_str(const ExperimentConfig& cfg, const std::string& key,
                      const std::string& fallback) {
    if (!cfg.params.contains(key)) return fallback;
    if (!cfg.params[key].is_string())
        throw std::invalid_argument("config: parameter '" + key + "' must be a string");
    return cfg.params[key].get<std::string>();
}

std::vector<double> param_list(const ExperimentConfig& cfg, const std::string& key,
                               const std::vector<double>& fallback) {
    if (!cfg.params.contains(key)) return fallback;
    if (!cfg.params[key].is_array())
        throw std::invalid_argument("config: parameter '" + key + "' must be a list");
    std::vector<double> out;
    for (const auto& v : cfg.params[key]) {
        if (!v.is_number())
            throw std::invalid_argument("config: parameter '" + key +
                                        "' must contain numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const ExperimentConfig& cfg)
    : path_(path) {
    std::filesystem::create_directories(path.parent_path().empty() ? "."
                                                                   : path.parent_path());
    out_.open(path);
    if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path.string());
    out_ << "# version = " << kVersion << "\n";
    out_ << "# config = " << cfg.to_json() << "\n";
}

void CsvWriter::columns(const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i)
        out_ << (i ? "," : "") << names[i];
    out_ << "\n";
}

void CsvWriter::raw_comment(const std::string& line) { out_ << "# " << line << "\n"; }

void CsvWriter::sep() {
    if (row_started_) out_ << ",";
    row_started_ = true;
}

void CsvWriter::field(const std::string& s) {
    sep();
    out_ << s;
}
void CsvWriter::field(double v) {
    sep();
    out_ << format_double(v);
}
void CsvWriter::field(int64_t v) {
    sep();
    out_ << v;
}
void CsvWriter::field(uint64_t v) {
    sep();
    out_ << v;
}
void CsvWriter::end_row() {
    out_ << "\n";
    row_started_ = false;
}

}  // namespace curlflow
