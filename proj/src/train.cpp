#include "qxfer/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "qxfer/errors.hpp"
#include "qxfer/evalrep.hpp"

namespace qxfer {

AdamWState AdamWState::for_params(const RnaParams& params) {
    AdamWState s;
    for (std::size_t id = 0; id < kTensorCount; ++id) {
        s.m[id].assign(params[id].size(), 0.0);
        s.v[id].assign(params[id].size(), 0.0);
    }
    return s;
}

void adamw_step(RnaParams& params, const Gradients& grads, AdamWState& state, const AdamWHyper& h,
                const TrainableMask& mask) {
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(h.beta1, t);
    const double bc2 = 1.0 - std::pow(h.beta2, t);
    for (std::size_t id = 0; id < kTensorCount; ++id) {
        if (!mask[id]) {
            continue;
        }
        auto& theta = params[id].data;
        const auto& g = grads[id].data;
        auto& m = state.m[id];
        auto& v = state.v[id];
        if (g.size() != theta.size() || m.size() != theta.size()) {
            throw std::invalid_argument("adamw_step: shape mismatch on " + params[id].name);
        }
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
            v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            theta[i] -= h.lr * (m_hat / (std::sqrt(v_hat) + h.eps) + h.weight_decay * theta[i]);
        }
    }
    ++params.generation;
}

PlateauScheduler::PlateauScheduler(double lr, double factor, int patience, double rel_threshold)
    : lr_(lr), factor_(factor), patience_(patience), rel_threshold_(rel_threshold), best_(0.0) {}

double PlateauScheduler::step(double value) {
    if (!has_best_ || value < best_ * (1.0 - rel_threshold_)) {
        best_ = value;
        has_best_ = true;
        bad_epochs_ = 0;
        return lr_;
    }
    if (++bad_epochs_ >= patience_) {
        lr_ *= factor_;
        bad_epochs_ = 0;
    }
    return lr_;
}

double mean_loss(const RnaParams& params, std::span<const Sample> samples) {
    if (samples.empty()) {
        throw ConfigError("mean_loss: empty sample set");
    }
    double sum = 0.0;
    for (const auto& s : samples) {
        const ForwardTrace t = forward_train(params, s.x, nullptr);
        sum += kl_from_logits(s.y, t.logits);
    }
    return sum / static_cast<double>(samples.size());
}

MetricPair evaluate_set(const RnaParams& params, std::span<const Sample> samples) {
    if (samples.empty()) {
        throw ConfigError("evaluate_set: empty sample set");
    }
    MetricPair m;
    for (const auto& s : samples) {
        const Padded yhat = predict(params, s.x);
        m.kl += kl_metric(s.y, yhat);
        m.tv += tv_metric(s.y, yhat);
    }
    m.kl /= static_cast<double>(samples.size());
    m.tv /= static_cast<double>(samples.size());
    return m;
}

TrainResult train_source(std::span<const Sample> samples, const SplitSpec& split,
                         const TrainConfig& cfg, std::uint64_t seed) {
    if (split.train_idx.empty() || split.val_idx.empty()) {
        throw ConfigError("train_source: empty train or validation split");
    }
    if (cfg.batch_train == 0 || cfg.batch_val == 0 || cfg.max_epochs <= 0) {
        throw ConfigError("train_source: batch sizes and max_epochs must be positive");
    }
    for (const std::size_t i : split.train_idx) {
        if (i >= samples.size()) throw ConfigError("train_source: split index out of range");
    }
    const std::vector<Sample> val = select(samples, split.val_idx);

    RnaParams params = init_params(seed);
    AdamWState opt = AdamWState::for_params(params);
    PlateauScheduler sched(cfg.lr, cfg.plateau_factor, cfg.plateau_patience, cfg.plateau_threshold);
    Rng shuffle_rng(derive_seed(seed, "train-shuffle"));
    Rng dropout_rng(derive_seed(seed, "train-dropout"));

    TrainResult result{params, {}};
    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;
    double lr = cfg.lr;
    std::vector<std::size_t> order = split.train_idx;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double train_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_train) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_train);
            const double scale = 1.0 / static_cast<double>(end - start);
            Gradients grads = TensorSet::zeros();
            for (std::size_t k = start; k < end; ++k) {
                const Sample& s = samples[order[k]];
                const ForwardTrace t = forward_train(params, s.x, &dropout_rng);
                train_sum += kl_from_logits(s.y, t.logits);
                accumulate_backward(params, t, s.y, scale, grads);
            }
            adamw_step(params, grads, opt, {lr, cfg.weight_decay});
        }
        const double train_kl = train_sum / static_cast<double>(order.size());
        const double val_kl = mean_loss(params, val);
        result.log.epochs.push_back({epoch, train_kl, val_kl, lr});

        if (val_kl < best - cfg.early_stop_tolerance) {
            best = val_kl;
            since_best = 0;
            result.best_params = params;
            result.log.best_epoch = epoch;
            result.log.best_val_kl = val_kl;
        } else {
            ++since_best;
        }
        result.log.stopped_epoch = epoch;
        lr = sched.step(val_kl);
        if (since_best >= cfg.early_stop_patience) {
            result.log.early_stopped = true;
            break;
        }
    }
    return result;
}

std::string train_log_csv(const TrainLog& log) {
    std::ostringstream out;
    out << "epoch,train_kl,val_kl,lr\n";
    char line[128];
    for (const auto& e : log.epochs) {
        std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g\n", e.epoch, e.train_kl, e.val_kl, e.lr);
        out << line;
    }
    return out.str();
}

}  // namespace qxfer
