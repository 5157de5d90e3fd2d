// Command-line front end: every experiment is a subcommand; a JSON config
// file can stand in for (or be overridden by) command-line flags.
//
// Exit codes: 0 pass, 1 parameter error, 2 acceptance-check failure,
// 3 resource abort.

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "curlflow/config.hpp"
#include "curlflow/experiments.hpp"
#include "curlflow/spectral_field.hpp"

using curlflow::ExperimentConfig;

namespace {

// Flags of the form key=value collected per subcommand into params.
void apply_kv(ExperimentConfig& cfg, const std::vector<std::string>& kvs) {
    for (const auto& kv : kvs) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("expected key=value, got '" + kv + "'");
        const std::string key = kv.substr(0, eq);
        const std::string val = kv.substr(eq + 1);
        // Parse as JSON when possible (numbers, lists), else as string.
        try {
            cfg.params[key] = nlohmann::ordered_json::parse(val);
        } catch (...) {
            cfg.params[key] = val;
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stochastic homogenization and SL(n) flow laboratory"};
    app.require_subcommand(0, 1);

    std::string config_path;
    uint64_t seed = 1;
    int threads = 1;
    std::string out_dir = "out";
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--seed", seed, "RNG seed");
    app.add_option("--threads", threads, "parallelism degree (0 = hardware)");
    app.add_option("--out", out_dir, "output directory");

    std::vector<std::string> kvs;
    std::vector<CLI::App*> subs;
    for (const auto& name : curlflow::experiment_names()) {
        CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
        sub->add_option("params", kvs, "experiment parameters as key=value");
        subs.push_back(sub);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig cfg;
        if (!config_path.empty()) cfg = curlflow::config_from_file(config_path);
        for (CLI::App* sub : subs) {
            if (sub->parsed()) {
                cfg.experiment = sub->get_name();
                apply_kv(cfg, kvs);
            }
        }
        if (cfg.experiment.empty()) {
            std::cerr << "error: no experiment selected (subcommand or --config)\n";
            return 1;
        }
        // Command line overrides the file for the global knobs.
        if (app.count("--seed")) cfg.seed = seed;
        if (app.count("--threads")) cfg.threads = threads;
        if (app.count("--out")) cfg.out_dir = out_dir;
        if (cfg.out_dir.empty()) cfg.out_dir = "out";
        return curlflow::run_config(cfg);
    } catch (const std::invalid_argument& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return 1;
    } catch (const curlflow::EmptyShellError& e) {
        std::cerr << "resource abort: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "resource abort: " << e.what() << "\n";
        return 3;
    }
}
