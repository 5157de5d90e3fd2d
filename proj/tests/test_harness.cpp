#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "curlflow/config.hpp"
#include "curlflow/experiments.hpp"

using namespace curlflow;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path temp_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("curlflow_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("config round trip is byte-identical") {
    const std::string text =
        R"({"experiment":"ladder-check","seed":42,"threads":2,"out":"x",)"
        R"("params":{"epsilon":0.5,"L_max":54.598150033144236,"J":16}})";
    const ExperimentConfig cfg = config_from_json(text);
    const std::string out = cfg.to_json();
    const ExperimentConfig cfg2 = config_from_json(out);
    CHECK(cfg2.to_json() == out);
    CHECK(cfg.seed == 42);
    CHECK(cfg.threads == 2);
}

TEST_CASE("unknown keys are rejected with the key named") {
    CHECK_THROWS_WITH_AS(config_from_json(R"({"experiment":"x","sneed":1})"),
                         doctest::Contains("sneed"), std::invalid_argument);
    ExperimentConfig cfg = config_from_json(
        R"({"experiment":"ladder-check","params":{"epsilon":0.5,"bogus":1}})");
    CHECK_THROWS_WITH_AS(run_config(cfg), doctest::Contains("bogus"),
                         std::invalid_argument);
    ExperimentConfig unknown = config_from_json(R"({"experiment":"no-such-thing"})");
    CHECK_THROWS_AS(run_config(unknown), std::invalid_argument);
}

TEST_CASE("determinism: identical config and seed give identical CSV") {
    const fs::path dir = temp_dir("det");
    ExperimentConfig cfg = config_from_json(
        R"({"experiment":"slbm-moments","seed":7,"threads":2,)"
        R"("params":{"n":2,"tau":1.0,"samples":20000}})");
    cfg.out_dir = (dir / "a").string();
    CHECK(run_config(cfg) == 0);
    const std::string a = slurp(fs::path(cfg.out_dir) / "slbm_moments.csv");
    cfg.out_dir = (dir / "b").string();
    CHECK(run_config(cfg) == 0);
    std::string b = slurp(fs::path(cfg.out_dir) / "slbm_moments.csv");
    // The config echo differs only in the out path; compare data sections.
    auto strip = [](const std::string& s) {
        std::string out;
        std::istringstream is(s);
        std::string line;
        while (std::getline(is, line))
            if (line.empty() || line[0] != '#') out += line + "\n";
        return out;
    };
    CHECK(strip(a) == strip(b));
    CHECK(!strip(a).empty());
}

TEST_CASE("changing the seed moves estimates within joint noise") {
    const fs::path dir = temp_dir("seed");
    ExperimentConfig cfg = config_from_json(
        R"({"experiment":"slbm-moments","seed":1,"threads":1,)"
        R"("params":{"n":2,"tau":1.0,"samples":40000}})");
    cfg.out_dir = (dir / "a").string();
    CHECK(run_config(cfg) == 0);
    cfg.seed = 2;
    cfg.out_dir = (dir / "b").string();
    CHECK(run_config(cfg) == 0);
    const std::string a = slurp(dir / "a" / "slbm_moments.csv");
    const std::string b = slurp(dir / "b" / "slbm_moments.csv");
    CHECK(a != b);  // different draws...
    // ...but both runs pass their own acceptance gate (exit 0 above).
}

TEST_CASE("thread count does not change results") {
    const fs::path dir = temp_dir("threads");
    ExperimentConfig cfg = config_from_json(
        R"({"experiment":"slflow-moments","seed":5,)"
        R"("params":{"n":2,"tau_end":0.5,"dtau":0.01,"paths":4000}})");
    cfg.threads = 1;
    cfg.out_dir = (dir / "t1").string();
    CHECK(run_config(cfg) == 0);
    cfg.threads = 2;
    cfg.out_dir = (dir / "t2").string();
    CHECK(run_config(cfg) == 0);
    auto strip = [](const std::string& s) {
        std::string out;
        std::istringstream is(s);
        std::string line;
        while (std::getline(is, line))
            if (line.empty() || line[0] != '#') out += line + "\n";
        return out;
    };
    CHECK(strip(slurp(dir / "t1" / "slflow_moments.csv")) ==
          strip(slurp(dir / "t2" / "slflow_moments.csv")));
}

TEST_CASE("CSV headers echo config and version") {
    const fs::path dir = temp_dir("hdr");
    ExperimentConfig cfg = config_from_json(
        R"({"experiment":"envelope-integrals","seed":3,)"
        R"("params":{"epsilon":0.5,"tau_star":1.0,"p":2.0}})");
    cfg.out_dir = dir.string();
    CHECK(run_config(cfg) == 0);
    const std::string text = slurp(dir / "envelope.csv");
    CHECK(text.find("# version = ") != std::string::npos);
    CHECK(text.find("# config = ") != std::string::npos);
    CHECK(text.find("envelope-integrals") != std::string::npos);
}

TEST_CASE("aniso experiment end to end") {
    const fs::path dir = temp_dir("aniso");
    ExperimentConfig cfg = config_from_json(
        R"({"experiment":"aniso-flow","params":{"n":2,"a0":[4.0,0.25],)"
        R"("dtau":0.02,"tau_end":40.0,"quad_order":33}})");
    cfg.out_dir = dir.string();
    CHECK(run_config(cfg) == 0);
    CHECK(fs::exists(dir / "aniso_flow.csv"));
}

TEST_CASE("parameter validation surfaces as exit-code-1 style errors") {
    ExperimentConfig cfg = config_from_json(
        R"({"experiment":"ladder-check","params":{"epsilon":-0.5}})");
    CHECK_THROWS_AS(run_config(cfg), std::invalid_argument);
}
