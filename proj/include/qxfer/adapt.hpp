#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "qxfer/dataset.hpp"
#include "qxfer/nn.hpp"
#include "qxfer/train.hpp"

namespace qxfer {

struct AdaptConfig {
    int k = 5;
    std::set<std::string> trainable;
    double lr = 1e-4;
    int max_epochs = 60;
    int patience = 12;
    std::size_t replay_size = 24;
    double weight_decay = 1e-4;
    double tolerance = 1e-6;
    bool use_replay = true;
    bool dropout = true;

    // K <= 10: head only, lr 1e-4, 60 epochs. Larger K: last hidden block
    // plus head, lr 5e-5, 80 epochs.
    static AdaptConfig for_k(int k);
};

struct ShotSelection {
    std::uint64_t seed = 0;
    std::vector<std::size_t> adapt_idx;
    std::vector<std::size_t> eval_idx;
};

// Throws std::invalid_argument when k >= n.
ShotSelection select_shots(std::size_t n, int k, std::uint64_t seed);

// `size` distinct samples drawn without replacement. Throws ConfigError when
// the source set is too small.
std::vector<Sample> build_replay(std::span<const Sample> source_train, std::size_t size,
                                 std::uint64_t seed);

struct FinetuneResult {
    RnaParams params;
    int epochs_run = 0;
    double best_loss = 0.0;
};

// Full-batch fine-tuning on adapt ∪ replay. The pooled eval-mode loss of the
// updated parameters is monitored after each step; the best parameters seen
// (including the starting point) are returned.
FinetuneResult finetune(const RnaParams& start, std::span<const Sample> adapt,
                        std::span<const Sample> replay, const AdaptConfig& cfg, std::uint64_t seed);

struct FewShotRun {
    int k = 0;
    std::uint64_t seed = 0;
    double kl = 0.0;
    double tv = 0.0;
    int epochs_run = 0;
    // In-domain (source validation) KL of the adapted model.
    double source_val_kl = 0.0;
    // Every tensor outside the trainable set is bit-identical to the start.
    bool frozen_intact = false;
};

struct FewShotAggregate {
    int k = 0;
    std::vector<std::uint64_t> seeds;
    std::vector<double> kl;
    std::vector<double> tv;
    double kl_mean = 0.0;
    double kl_std = 0.0;
    double tv_mean = 0.0;
    double tv_std = 0.0;
};

struct FewShotOptions {
    std::vector<int> ks{5, 10, 20};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    bool use_replay = true;
    bool dropout = true;
    std::size_t replay_size = 24;
    int patience = 12;
    unsigned threads = 1;
};

// Runs every (K, seed) cell. Results are ordered by K, then seed, and do not
// depend on the thread count.
std::vector<FewShotRun> run_fewshot(const RnaParams& source_params, std::span<const Sample> target,
                                    std::span<const Sample> source_train,
                                    std::span<const Sample> source_val, const FewShotOptions& options);

std::vector<FewShotAggregate> aggregate_runs(std::span<const FewShotRun> runs);

}  // namespace qxfer
