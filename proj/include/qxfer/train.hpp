#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qxfer/dataset.hpp"
#include "qxfer/nn.hpp"

namespace qxfer {

struct AdamWState {
    std::array<std::vector<double>, kTensorCount> m;
    std::array<std::vector<double>, kTensorCount> v;
    std::int64_t step = 0;

    static AdamWState for_params(const RnaParams& params);
};

struct AdamWHyper {
    double lr = 1e-3;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Decoupled weight decay. Tensors outside `mask` are left untouched (no
// moment update, no decay).
void adamw_step(RnaParams& params, const Gradients& grads, AdamWState& state, const AdamWHyper& hyper,
                const TrainableMask& mask = all_trainable());

// ReduceLROnPlateau in "min" mode with a relative threshold.
class PlateauScheduler {
  public:
    PlateauScheduler(double lr, double factor = 0.5, int patience = 12, double rel_threshold = 1e-4);

    // Reports one epoch's monitored value and returns the learning rate to
    // use from now on.
    double step(double value);
    double lr() const { return lr_; }

  private:
    double lr_;
    double factor_;
    int patience_;
    double rel_threshold_;
    double best_;
    int bad_epochs_ = 0;
    bool has_best_ = false;
};

struct TrainConfig {
    double lr = 1e-3;
    double weight_decay = 1e-4;
    std::size_t batch_train = 16;
    std::size_t batch_val = 32;
    int max_epochs = 250;
    int early_stop_patience = 25;
    double plateau_factor = 0.5;
    int plateau_patience = 12;
    double plateau_threshold = 1e-4;
    double early_stop_tolerance = 1e-6;
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_kl = 0.0;
    double val_kl = 0.0;
    double lr = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    double best_val_kl = 0.0;
    int stopped_epoch = 0;
    bool early_stopped = false;
};

struct TrainResult {
    RnaParams best_params;
    TrainLog log;
};

struct MetricPair {
    double kl = 0.0;
    double tv = 0.0;
};

// Mean eval-mode KL(y || yhat) over the samples, computed from logits.
double mean_loss(const RnaParams& params, std::span<const Sample> samples);

// Mean per-sample KL and TV of eval-mode predictions. Throws ConfigError on
// an empty set.
MetricPair evaluate_set(const RnaParams& params, std::span<const Sample> samples);

// Source-device training. `samples` must already be standardized.
TrainResult train_source(std::span<const Sample> samples, const SplitSpec& split,
                         const TrainConfig& cfg, std::uint64_t seed);

std::string train_log_csv(const TrainLog& log);

}  // namespace qxfer
