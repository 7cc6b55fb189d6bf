#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qxfer/adapt.hpp"
#include "qxfer/circuits.hpp"
#include "qxfer/config.hpp"
#include "qxfer/dataset.hpp"
#include "qxfer/evalrep.hpp"
#include "qxfer/nn.hpp"
#include "qxfer/train.hpp"

namespace qxfer {

enum class Condition { InDomain, ZeroShot };
Condition condition_from_string(const std::string& name);
std::string to_string(Condition c);

// Source and target samples, standardized with statistics of the source
// training split.
struct PreparedData {
    std::vector<Sample> source;
    std::vector<Sample> target;
    SplitSpec split;
    Scaler scaler;
    std::vector<Sample> source_train;
    std::vector<Sample> source_val;
};

// Run-directory layout:
//   run.json                    config, config hash, seeds
//   suite.json                  circuit manifest
//   data/<backend>.jsonl        datasets
//   model/checkpoint.json, model/train_log.csv, model/scaler.json
//   metrics/<condition>.json
//   results/fewshot.jsonl, results/fewshot_no_replay.jsonl, results/ablation.json
//   report/...                  tables and plot data
class Pipeline {
  public:
    Pipeline(RunConfig cfg, std::filesystem::path run_dir);

    const RunConfig& config() const { return cfg_; }
    const std::string& hash() const { return hash_; }
    const std::filesystem::path& dir() const { return dir_; }

    void write_manifest() const;
    CircuitSuite gen() const;
    std::vector<Sample> simulate(const std::string& backend) const;
    TrainResult train() const;
    MetricPair eval(Condition condition) const;
    std::vector<FewShotRun> adapt(const std::vector<int>& ks, const std::vector<std::uint64_t>& seeds,
                                  bool use_replay = true) const;
    std::vector<AblationRow> ablate() const;
    // Returns warnings for missing inputs (partial report).
    std::vector<std::string> report() const;
    void all() const;

    PreparedData load_data() const;
    RnaParams load_model() const;
    std::vector<FewShotRun> load_fewshot(bool use_replay = true) const;

  private:
    std::filesystem::path dataset_path(const std::string& backend) const;
    std::filesystem::path fewshot_path(bool use_replay) const;
    std::vector<Sample> load_backend(const std::string& backend) const;

    RunConfig cfg_;
    std::string hash_;
    std::filesystem::path dir_;
};

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace qxfer
