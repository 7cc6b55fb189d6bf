// qxfer: command-line driver for the cross-device noise-correction pipeline.
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qxfer/errors.hpp"
#include "qxfer/pipeline.hpp"

namespace fs = std::filesystem;
using namespace qxfer;

namespace {

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

long long parse_int(const std::string& s, const std::string& what) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(s, &used);
    } catch (const std::exception&) {
        throw UsageError("invalid " + what + " '" + s + "'");
    }
    if (used != s.size()) throw UsageError("invalid " + what + " '" + s + "'");
    return v;
}

// Accepts "5,10,20".
std::vector<int> parse_ks(const std::string& text) {
    std::vector<int> ks;
    for (const auto& item : split_csv(text)) {
        const long long k = parse_int(item, "K");
        if (k < 1) throw UsageError("K must be positive, got " + item);
        ks.push_back(static_cast<int>(k));
    }
    if (ks.empty()) throw UsageError("empty K list");
    return ks;
}

// Accepts "0..4", "0,1,2" or a mix such as "0..2,7".
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    for (const auto& item : split_csv(text)) {
        const auto dots = item.find("..");
        if (dots == std::string::npos) {
            const long long s = parse_int(item, "seed");
            if (s < 0) throw UsageError("negative seed " + item);
            seeds.push_back(static_cast<std::uint64_t>(s));
            continue;
        }
        const long long lo = parse_int(item.substr(0, dots), "seed range");
        const long long hi = parse_int(item.substr(dots + 2), "seed range");
        if (lo < 0 || hi < lo) throw UsageError("invalid seed range '" + item + "'");
        for (long long s = lo; s <= hi; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
    }
    if (seeds.empty()) throw UsageError("empty seed list");
    return seeds;
}

fs::path runs_root() {
    const char* env = std::getenv("QXFER_RUNS_DIR");
    return env && *env ? fs::path(env) : fs::path("runs");
}

std::string timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

fs::path fresh_run_dir(const std::string& hash) {
    const fs::path root = runs_root();
    const std::string base = timestamp() + "-" + hash.substr(0, 8);
    fs::path dir = root / base;
    for (int i = 1; fs::exists(dir); ++i) {
        dir = root / (base + "." + std::to_string(i) + "-" + hash.substr(0, 8));
    }
    return dir;
}

// Latest run directory for this config hash, or a new one.
fs::path latest_run_dir(const std::string& hash) {
    const fs::path root = runs_root();
    const std::string suffix = "-" + hash.substr(0, 8);
    std::optional<fs::path> best;
    if (fs::is_directory(root)) {
        for (const auto& entry : fs::directory_iterator(root)) {
            const std::string name = entry.path().filename().string();
            if (!entry.is_directory() || name.size() < suffix.size() ||
                name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
                continue;
            }
            if (!best || name > best->filename().string()) best = entry.path();
        }
    }
    return best ? *best : fresh_run_dir(hash);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Few-shot cross-device noise correction for quantum circuit outputs"};
    app.require_subcommand(1);

    std::string config_path;
    std::string run_dir_opt;
    app.add_option("--config", config_path, "JSON config file (defaults when omitted)")->check(CLI::ExistingFile);
    app.add_option("--run-dir", run_dir_opt,
                   "run directory (default: $QXFER_RUNS_DIR or ./runs, <timestamp>-<hash>)");

    auto* gen = app.add_subcommand("gen", "write the circuit suite manifest");
    auto* simulate = app.add_subcommand("simulate", "simulate one backend and write its dataset");
    std::string backend;
    simulate->add_option("--backend", backend, "device profile name")->required();
    auto* train = app.add_subcommand("train", "train the adapter on the source device");
    auto* eval = app.add_subcommand("eval", "evaluate a condition");
    std::string condition;
    eval->add_option("--condition", condition, "in-domain | zero-shot")
        ->required()
        ->check(CLI::IsMember({"in-domain", "zero-shot"}));
    auto* adapt = app.add_subcommand("adapt", "few-shot adaptation grid on the target device");
    std::string ks_text;
    std::string seeds_text;
    bool no_replay = false;
    adapt->add_option("--k", ks_text, "comma-separated K values (default from config)");
    adapt->add_option("--seeds", seeds_text, "seeds, e.g. 0..4 or 0,1,2 (default from config)");
    adapt->add_flag("--no-replay", no_replay, "fine-tune without the source replay buffer");
    auto* ablate = app.add_subcommand("ablate", "leave-one-out calibration feature ablation");
    auto* report = app.add_subcommand("report", "aggregate results into report/");
    auto* all = app.add_subcommand("all", "run the full pipeline");
    auto* show = app.add_subcommand("config", "print the effective config as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        const RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
        validate_config(cfg);
        const std::string hash = config_hash(cfg);
        if (*show) {
            std::cout << config_to_json(cfg) << "\n";
            return 0;
        }
        fs::path dir;
        if (!run_dir_opt.empty()) {
            dir = run_dir_opt;
        } else {
            dir = *all ? fresh_run_dir(hash) : latest_run_dir(hash);
        }
        const Pipeline pipe(cfg, dir);

        if (*gen) {
            const auto suite = pipe.gen();
            std::cout << "wrote " << suite.circuits.size() << " circuits to " << (dir / "suite.json").string()
                      << "\n";
        } else if (*simulate) {
            const auto samples = pipe.simulate(backend);
            std::cout << "wrote " << samples.size() << " samples to " << (dir / "data" / (backend + ".jsonl")).string()
                      << "\n";
        } else if (*train) {
            const auto r = pipe.train();
            std::cout << "best epoch " << r.log.best_epoch << ", val KL " << r.log.best_val_kl << ", stopped at "
                      << r.log.stopped_epoch << "\n";
        } else if (*eval) {
            const auto m = pipe.eval(condition_from_string(condition));
            std::cout << condition << ": KL " << m.kl << ", TV " << m.tv << "\n";
        } else if (*adapt) {
            const auto ks = ks_text.empty() ? cfg.adapt.ks : parse_ks(ks_text);
            const auto seeds = seeds_text.empty() ? cfg.adapt.seeds : parse_seeds(seeds_text);
            const auto runs = pipe.adapt(ks, seeds, !no_replay);
            for (const auto& r : runs) {
                std::cout << "K=" << r.k << " seed=" << r.seed << ": KL " << r.kl << ", TV " << r.tv << "\n";
            }
        } else if (*ablate) {
            for (const auto& r : pipe.ablate()) {
                std::cout << r.feature_name << ": KL " << r.kl << ", delta " << r.delta
                          << (r.within_noise ? " (within numerical noise)" : "") << "\n";
            }
        } else if (*report) {
            for (const auto& w : pipe.report()) std::cerr << "warning: partial report: " << w << "\n";
            std::cout << "wrote " << (dir / "report").string() << "\n";
        } else if (*all) {
            pipe.all();
            std::cout << "wrote " << dir.string() << "\n";
        }
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
