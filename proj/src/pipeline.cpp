#include "qxfer/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "qxfer/errors.hpp"

namespace qxfer {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::string num(double v) { return fmt("%.10g", v); }

ordered_json read_json_file(const fs::path& path) {
    try {
        return ordered_json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void check_hash(const ordered_json& j, const std::string& expected, const fs::path& path) {
    const std::string found = j.value("config_hash", std::string{});
    if (found != expected) {
        throw ConfigError(path.string() + " was produced with config hash '" + found +
                          "', current config hash is '" + expected + "'");
    }
}

ordered_json run_to_json(const FewShotRun& r, bool replay, const std::string& hash) {
    ordered_json j;
    j["k"] = r.k;
    j["seed"] = r.seed;
    j["kl"] = r.kl;
    j["tv"] = r.tv;
    j["epochs_run"] = r.epochs_run;
    j["source_val_kl"] = r.source_val_kl;
    j["frozen_intact"] = r.frozen_intact;
    j["replay"] = replay;
    j["config_hash"] = hash;
    return j;
}

std::string condition_label(Condition c, const RunConfig& cfg) {
    return c == Condition::InDomain ? "In-domain (" + cfg.source.name + "->" + cfg.source.name + ")"
                                    : "Zero-shot (" + cfg.source.name + "->" + cfg.target.name + ")";
}

}  // namespace

Condition condition_from_string(const std::string& name) {
    if (name == "in-domain") return Condition::InDomain;
    if (name == "zero-shot") return Condition::ZeroShot;
    throw UsageError("unknown condition '" + name + "' (expected in-domain or zero-shot)");
}

std::string to_string(Condition c) { return c == Condition::InDomain ? "in-domain" : "zero-shot"; }

void write_text_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    out << text;
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("missing input '" + path.string() + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Pipeline::Pipeline(RunConfig cfg, fs::path run_dir)
    : cfg_(std::move(cfg)), hash_(config_hash(cfg_)), dir_(std::move(run_dir)) {
    validate_config(cfg_);
}

fs::path Pipeline::dataset_path(const std::string& backend) const { return dir_ / "data" / (backend + ".jsonl"); }

fs::path Pipeline::fewshot_path(bool use_replay) const {
    return dir_ / "results" / (use_replay ? "fewshot.jsonl" : "fewshot_no_replay.jsonl");
}

void Pipeline::write_manifest() const {
    ordered_json j;
    j["config_hash"] = hash_;
    j["config"] = ordered_json::parse(config_to_json(cfg_));
    j["seeds"] = {{"suite", cfg_.suite_seed},
                  {"shots", cfg_.shot_seed},
                  {"split", cfg_.split_seed},
                  {"train", cfg_.train_seed},
                  {"adapt", cfg_.adapt.seeds}};
    write_text_file(dir_ / "run.json", j.dump(2) + "\n");
}

CircuitSuite Pipeline::gen() const {
    write_manifest();
    CircuitSuite suite = generate_suite(cfg_.suite_seed);
    write_text_file(dir_ / "suite.json", suite_manifest_json(suite, hash_));
    return suite;
}

std::vector<Sample> Pipeline::simulate(const std::string& backend) const {
    const DeviceProfile* profile = nullptr;
    if (backend == cfg_.source.name) {
        profile = &cfg_.source;
    } else if (backend == cfg_.target.name) {
        profile = &cfg_.target;
    } else {
        throw UsageError("unknown backend '" + backend + "' (configured: " + cfg_.source.name + ", " +
                         cfg_.target.name + ")");
    }
    write_manifest();
    const CircuitSuite suite = generate_suite(cfg_.suite_seed);
    Rng rng(derive_seed(cfg_.shot_seed, "shots/" + backend));
    std::vector<Sample> samples = build_dataset(suite, *profile, cfg_.shots, rng,
                                                DatasetOptions{cfg_.durations, cfg_.jitter_sigma});
    write_jsonl(dataset_path(backend), samples, hash_);
    return samples;
}

std::vector<Sample> Pipeline::load_backend(const std::string& backend) const {
    const fs::path path = dataset_path(backend);
    if (!fs::exists(path)) {
        throw ConfigError("missing dataset '" + path.string() + "'; run `simulate --backend " + backend + "` first");
    }
    LoadedDataset loaded = read_jsonl(path);
    if (loaded.config_hash != hash_) {
        throw ConfigError(path.string() + " was produced with config hash '" + loaded.config_hash +
                          "', current config hash is '" + hash_ + "'");
    }
    for (std::size_t i = 0; i < loaded.samples.size(); ++i) {
        if (loaded.samples[i].backend != backend) {
            throw DataError(path.string() + ":" + std::to_string(i + 1) + ": backend '" +
                            loaded.samples[i].backend + "' in the " + backend + " dataset");
        }
    }
    return std::move(loaded.samples);
}

PreparedData Pipeline::load_data() const {
    PreparedData d;
    d.source = load_backend(cfg_.source.name);
    d.target = load_backend(cfg_.target.name);
    d.split = split_train_val(d.source.size(), cfg_.split_seed);
    const std::vector<Sample> raw_train = select(d.source, d.split.train_idx);
    d.scaler = fit_scaler(raw_train, cfg_.scaler_mode);
    standardize(d.source, d.scaler);
    standardize(d.target, d.scaler);
    d.source_train = select(d.source, d.split.train_idx);
    d.source_val = select(d.source, d.split.val_idx);
    return d;
}

TrainResult Pipeline::train() const {
    write_manifest();
    const PreparedData d = load_data();
    TrainResult r = train_source(d.source, d.split, cfg_.train, cfg_.train_seed);
    save_checkpoint(dir_ / "model" / "checkpoint.json", r.best_params, hash_);
    write_text_file(dir_ / "model" / "train_log.csv", train_log_csv(r.log));

    ordered_json s;
    s["config_hash"] = hash_;
    s["fitted_backends"] = d.scaler.fitted_backends;
    s["mean"] = d.scaler.mean;
    s["std"] = d.scaler.std;
    s["train_idx"] = d.split.train_idx;
    s["val_idx"] = d.split.val_idx;
    s["best_epoch"] = r.log.best_epoch;
    s["best_val_kl"] = r.log.best_val_kl;
    s["stopped_epoch"] = r.log.stopped_epoch;
    write_text_file(dir_ / "model" / "scaler.json", s.dump(2) + "\n");
    return r;
}

RnaParams Pipeline::load_model() const {
    const fs::path path = dir_ / "model" / "checkpoint.json";
    if (!fs::exists(path)) {
        throw ConfigError("missing checkpoint '" + path.string() + "'; run `train` first");
    }
    LoadedCheckpoint ck = load_checkpoint(path);
    if (ck.config_hash != hash_) {
        throw ConfigError(path.string() + " was produced with config hash '" + ck.config_hash +
                          "', current config hash is '" + hash_ + "'");
    }
    return std::move(ck.params);
}

MetricPair Pipeline::eval(Condition condition) const {
    const PreparedData d = load_data();
    const RnaParams params = load_model();
    const auto& set = condition == Condition::InDomain ? d.source_val : d.target;
    const MetricPair m = evaluate_set(params, set);
    ordered_json j;
    j["condition"] = to_string(condition);
    j["kl"] = m.kl;
    j["tv"] = m.tv;
    j["n_samples"] = set.size();
    j["config_hash"] = hash_;
    write_text_file(dir_ / "metrics" / (to_string(condition) + ".json"), j.dump(2) + "\n");
    return m;
}

std::vector<FewShotRun> Pipeline::load_fewshot(bool use_replay) const {
    const fs::path path = fewshot_path(use_replay);
    std::vector<FewShotRun> runs;
    if (!fs::exists(path)) {
        return runs;
    }
    std::istringstream in(read_text_file(path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where + ": " + e.what());
        }
        check_hash(j, hash_, where);
        try {
            FewShotRun r;
            r.k = j.at("k").get<int>();
            r.seed = j.at("seed").get<std::uint64_t>();
            r.kl = j.at("kl").get<double>();
            r.tv = j.at("tv").get<double>();
            r.epochs_run = j.at("epochs_run").get<int>();
            r.source_val_kl = j.at("source_val_kl").get<double>();
            r.frozen_intact = j.at("frozen_intact").get<bool>();
            if (!(r.kl >= 0.0) || !(r.tv >= 0.0 && r.tv <= 1.0)) {
                throw DataError("metric out of range");
            }
            runs.push_back(r);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError(where + ": " + e.what());
        }
    }
    return runs;
}

std::vector<FewShotRun> Pipeline::adapt(const std::vector<int>& ks, const std::vector<std::uint64_t>& seeds,
                                        bool use_replay) const {
    write_manifest();
    const PreparedData d = load_data();
    const RnaParams params = load_model();
    FewShotOptions opt;
    opt.ks = ks;
    opt.seeds = seeds;
    opt.use_replay = use_replay;
    opt.dropout = cfg_.adapt.dropout;
    opt.replay_size = cfg_.adapt.replay_size;
    opt.patience = cfg_.adapt.patience;
    opt.threads = cfg_.adapt.threads;
    const std::vector<FewShotRun> fresh = run_fewshot(params, d.target, d.source_train, d.source_val, opt);

    // Merge with earlier records; a (K, seed) cell is replaced by its rerun.
    std::map<std::pair<int, std::uint64_t>, FewShotRun> merged;
    for (const auto& r : load_fewshot(use_replay)) merged[{r.k, r.seed}] = r;
    for (const auto& r : fresh) merged[{r.k, r.seed}] = r;
    std::string text;
    for (const auto& [key, r] : merged) {
        text += run_to_json(r, use_replay, hash_).dump() + "\n";
    }
    write_text_file(fewshot_path(use_replay), text);
    return fresh;
}

std::vector<AblationRow> Pipeline::ablate() const {
    const PreparedData d = load_data();
    const RnaParams params = load_model();
    const double baseline = evaluate_set(params, d.target).kl;
    std::vector<AblationRow> rows;
    for (std::size_t i = kFirstCalibrationIndex; i <= kLastCalibrationIndex; ++i) {
        rows.push_back(ablate_feature(params, d.target, i, baseline));
    }
    ordered_json j;
    j["config_hash"] = hash_;
    j["condition"] = "zero-shot";
    j["baseline_kl"] = baseline;
    auto arr = ordered_json::array();
    for (const auto& r : rows) {
        arr.push_back({{"feature_index", r.feature_index},
                       {"feature", r.feature_name},
                       {"kl", r.kl},
                       {"delta", r.delta},
                       {"within_noise", r.within_noise}});
    }
    j["rows"] = arr;
    write_text_file(dir_ / "results" / "ablation.json", j.dump(2) + "\n");
    return rows;
}

std::vector<std::string> Pipeline::report() const {
    std::vector<std::string> warnings;
    const fs::path report_dir = dir_ / "report";

    std::map<Condition, MetricPair> conditions;
    for (const Condition c : {Condition::InDomain, Condition::ZeroShot}) {
        const fs::path path = dir_ / "metrics" / (to_string(c) + ".json");
        if (!fs::exists(path)) {
            warnings.push_back("missing " + to_string(c) + " metrics (" + path.string() + ")");
            continue;
        }
        const auto j = read_json_file(path);
        check_hash(j, hash_, path);
        conditions[c] = {j.at("kl").get<double>(), j.at("tv").get<double>()};
    }
    const std::vector<FewShotRun> runs = load_fewshot(true);
    const std::vector<FewShotAggregate> aggs = aggregate_runs(runs);
    if (runs.empty()) {
        warnings.push_back("missing few-shot records (" + fewshot_path(true).string() + ")");
    }

    // (a) results table
    std::ostringstream md;
    md << "# Cross-device transfer results\n\n";
    md << "config_hash: " << hash_ << "  \n";
    md << "source: " << cfg_.source.name << ", target: " << cfg_.target.name << ", shots: " << cfg_.shots
       << ", suite seed: " << cfg_.suite_seed << ", train seed: " << cfg_.train_seed << "  \n";
    md << "few-shot seeds:";
    for (const auto s : cfg_.adapt.seeds) md << ' ' << s;
    md << "\n\n";
    md << "| Condition | KL Div. | TV Dist. | KL Improv. |\n";
    md << "|---|---|---|---|\n";
    const auto cell = [](const std::optional<MetricPair>& m, bool kl) {
        return m ? fmt("%.4f", kl ? m->kl : m->tv) : std::string("n/a");
    };
    const auto get = [&](Condition c) -> std::optional<MetricPair> {
        const auto it = conditions.find(c);
        return it == conditions.end() ? std::nullopt : std::optional<MetricPair>(it->second);
    };
    const auto in_domain = get(Condition::InDomain);
    const auto zero_shot = get(Condition::ZeroShot);
    md << "| " << condition_label(Condition::InDomain, cfg_) << " | " << cell(in_domain, true) << " | "
       << cell(in_domain, false) << " | - |\n";
    md << "| " << condition_label(Condition::ZeroShot, cfg_) << " | " << cell(zero_shot, true) << " | "
       << cell(zero_shot, false) << " | baseline |\n";
    for (const int k : cfg_.adapt.ks) {
        const auto it = std::find_if(aggs.begin(), aggs.end(), [&](const auto& a) { return a.k == k; });
        if (it == aggs.end()) {
            warnings.push_back("missing few-shot records for K=" + std::to_string(k));
            md << "| Few-shot K=" << k << " | n/a | n/a | n/a |\n";
            continue;
        }
        std::string improv = "n/a";
        if (zero_shot) {
            const auto st = improvement_stats(zero_shot->kl, it->kl_mean, in_domain ? in_domain->kl : 0.0);
            improv = fmt("%+.1f%%", -st.improvement_pct);
        }
        md << "| Few-shot K=" << k << " | " << fmt("%.4f", it->kl_mean) << " ± " << fmt("%.4f", it->kl_std)
           << " | " << fmt("%.4f", it->tv_mean) << " ± " << fmt("%.4f", it->tv_std) << " | " << improv << " |\n";
    }
    md << "\n";
    if (zero_shot && in_domain) {
        md << "Zero-shot / in-domain KL ratio: " << fmt("%.2f", zero_shot->kl / in_domain->kl) << "x\n\n";
        for (const auto& a : aggs) {
            const auto st = improvement_stats(zero_shot->kl, a.kl_mean, in_domain->kl);
            md << "- K=" << a.k << ": improvement " << fmt("%.1f%%", st.improvement_pct) << ", gap recovery "
               << (st.gap_recovery_pct ? fmt("%.1f%%", *st.gap_recovery_pct) : "undefined (" + st.warning + ")")
               << "\n";
        }
        md << "\n";
    }

    // (b) plot data
    std::ostringstream points, kl_csv, tv_csv;
    points << "k,seed,kl,tv,epochs_run,source_val_kl\n";
    for (const auto& r : runs) {
        points << r.k << ',' << r.seed << ',' << num(r.kl) << ',' << num(r.tv) << ',' << r.epochs_run << ','
               << num(r.source_val_kl) << '\n';
    }
    kl_csv << "k,kl_mean,kl_std,zero_shot_kl,in_domain_kl\n";
    tv_csv << "k,tv_mean,tv_std,zero_shot_tv,in_domain_tv\n";
    const auto opt_num = [](const std::optional<MetricPair>& m, bool kl) {
        return m ? num(kl ? m->kl : m->tv) : std::string();
    };
    for (const auto& a : aggs) {
        kl_csv << a.k << ',' << num(a.kl_mean) << ',' << num(a.kl_std) << ',' << opt_num(zero_shot, true) << ','
               << opt_num(in_domain, true) << '\n';
        tv_csv << a.k << ',' << num(a.tv_mean) << ',' << num(a.tv_std) << ',' << opt_num(zero_shot, false) << ','
               << opt_num(in_domain, false) << '\n';
    }
    write_text_file(report_dir / "fewshot_points.csv", points.str());
    write_text_file(report_dir / "kl_vs_k.csv", kl_csv.str());
    write_text_file(report_dir / "tv_vs_k.csv", tv_csv.str());

    // (c) ablation bars
    const fs::path ablation_path = dir_ / "results" / "ablation.json";
    std::ostringstream ab;
    ab << "feature_index,feature,kl,delta,within_noise\n";
    if (fs::exists(ablation_path)) {
        const auto j = read_json_file(ablation_path);
        check_hash(j, hash_, ablation_path);
        md << "## Calibration feature ablation (zero-shot, baseline KL " << fmt("%.4f", j.at("baseline_kl").get<double>())
           << ")\n\n| Feature | KL Div. | Delta vs. baseline |\n|---|---|---|\n";
        for (const auto& r : j.at("rows")) {
            const double delta = r.at("delta").get<double>();
            const bool noise = r.at("within_noise").get<bool>();
            ab << r.at("feature_index").get<int>() << ',' << r.at("feature").get<std::string>() << ','
               << num(r.at("kl").get<double>()) << ',' << num(delta) << ',' << (noise ? "true" : "false") << '\n';
            md << "| remove " << r.at("feature").get<std::string>() << " (index " << r.at("feature_index").get<int>()
               << ") | " << fmt("%.4f", r.at("kl").get<double>()) << " | " << fmt("%+.4f", delta)
               << (noise ? " (within numerical noise)" : "") << " |\n";
        }
        md << "\n";
    } else {
        warnings.push_back("missing ablation results (" + ablation_path.string() + ")");
    }
    write_text_file(report_dir / "ablation.csv", ab.str());

    // (d) calibration comparison
    std::ostringstream cal;
    cal << "property," << cfg_.source.name << ',' << cfg_.target.name << ",delta,delta_pct\n";
    const auto src = calibration_features(cfg_.source);
    const auto tgt = calibration_features(cfg_.target);
    const char* names[] = {"t1_us", "t2_us", "readout_error", "cx_error"};
    md << "## Calibration comparison\n\n| Property | " << cfg_.source.name << " | " << cfg_.target.name
       << " | Delta |\n|---|---|---|---|\n";
    for (std::size_t i = 0; i < 4; ++i) {
        const double delta = tgt[i] - src[i];
        const double pct = delta / src[i] * 100.0;
        cal << names[i] << ',' << num(src[i]) << ',' << num(tgt[i]) << ',' << num(delta) << ',' << num(pct) << '\n';
        md << "| " << names[i] << " | " << num(src[i]) << " | " << num(tgt[i]) << " | " << fmt("%+.4g", delta) << " ("
           << fmt("%+.1f%%", pct) << ") |\n";
    }
    write_text_file(report_dir / "calibration.csv", cal.str());

    // (e) hardest target example
    if (fs::exists(dataset_path(cfg_.target.name)) && fs::exists(dataset_path(cfg_.source.name)) &&
        fs::exists(dir_ / "model" / "checkpoint.json")) {
        const PreparedData d = load_data();
        const RnaParams params = load_model();
        std::size_t worst = 0;
        double worst_kl = -1.0;
        for (std::size_t i = 0; i < d.target.size(); ++i) {
            const double kl = kl_metric(d.target[i].y, d.target[i].noisy);
            if (kl > worst_kl) {
                worst_kl = kl;
                worst = i;
            }
        }
        const Sample& s = d.target[worst];
        const Padded pred = predict(params, s.x);
        const std::size_t dim = std::size_t{1} << s.n_qubits;
        ordered_json ex;
        ex["config_hash"] = hash_;
        ex["circuit_id"] = s.circuit_id;
        ex["family"] = std::string(to_string(s.family));
        ex["backend"] = s.backend;
        ex["n_qubits"] = s.n_qubits;
        ex["model"] = "source checkpoint (zero-shot)";
        ex["noisy"] = std::vector<double>(s.noisy.begin(), s.noisy.begin() + static_cast<std::ptrdiff_t>(dim));
        ex["ideal"] = std::vector<double>(s.y.begin(), s.y.begin() + static_cast<std::ptrdiff_t>(dim));
        ex["prediction"] = std::vector<double>(pred.begin(), pred.begin() + static_cast<std::ptrdiff_t>(dim));
        ex["metrics"] = {{"noisy_vs_ideal", {{"kl", worst_kl}, {"tv", tv_metric(s.y, s.noisy)}}},
                         {"prediction_vs_ideal", {{"kl", kl_metric(s.y, pred)}, {"tv", tv_metric(s.y, pred)}}},
                         {"noisy_vs_prediction", {{"kl", kl_metric(pred, s.noisy)}, {"tv", tv_metric(pred, s.noisy)}}}};
        write_text_file(report_dir / "example.json", ex.dump(2) + "\n");
    } else {
        warnings.push_back("missing datasets or checkpoint; example.json not written");
    }

    if (!warnings.empty()) {
        md << "## Warnings\n\n";
        for (const auto& w : warnings) md << "- partial report: " << w << "\n";
    }
    write_text_file(report_dir / "results.md", md.str());
    return warnings;
}

void Pipeline::all() const {
    gen();
    simulate(cfg_.source.name);
    simulate(cfg_.target.name);
    train();
    eval(Condition::InDomain);
    eval(Condition::ZeroShot);
    // A fresh grid, not merged with stale records.
    fs::remove(fewshot_path(true));
    adapt(cfg_.adapt.ks, cfg_.adapt.seeds, true);
    ablate();
    report();
}

}  // namespace qxfer
