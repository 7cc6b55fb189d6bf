#include "qxfer/adapt.hpp"

#include <algorithm>
#include <atomic>
#include <limits>
#include <map>
#include <stdexcept>
#include <thread>

#include "qxfer/errors.hpp"
#include "qxfer/evalrep.hpp"

namespace qxfer {

AdaptConfig AdaptConfig::for_k(int k) {
    if (k < 1) {
        throw std::invalid_argument("few-shot K must be >= 1");
    }
    AdaptConfig cfg;
    cfg.k = k;
    if (k <= 10) {
        cfg.trainable = {"head.W", "head.b"};
        cfg.lr = 1e-4;
        cfg.max_epochs = 60;
    } else {
        cfg.trainable = {"block3.W", "block3.b", "block3.ln_gamma", "block3.ln_beta", "head.W", "head.b"};
        cfg.lr = 5e-5;
        cfg.max_epochs = 80;
    }
    return cfg;
}

ShotSelection select_shots(std::size_t n, int k, std::uint64_t seed) {
    if (k < 1 || static_cast<std::size_t>(k) >= n) {
        throw std::invalid_argument("select_shots: K must satisfy 1 <= K < target set size");
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(seed, "shot-selection"));
    rng.shuffle(order);
    ShotSelection sel;
    sel.seed = seed;
    sel.adapt_idx.assign(order.begin(), order.begin() + k);
    sel.eval_idx.assign(order.begin() + k, order.end());
    return sel;
}

std::vector<Sample> build_replay(std::span<const Sample> source_train, std::size_t size,
                                 std::uint64_t seed) {
    if (source_train.size() < size) {
        throw ConfigError("build_replay: " + std::to_string(size) + " replay samples requested but only " +
                          std::to_string(source_train.size()) + " source samples available");
    }
    std::vector<std::size_t> order(source_train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(seed, "replay"));
    rng.shuffle(order);
    order.resize(size);
    return select(source_train, order);
}

FinetuneResult finetune(const RnaParams& start, std::span<const Sample> adapt,
                        std::span<const Sample> replay, const AdaptConfig& cfg, std::uint64_t seed) {
    if (cfg.trainable.empty()) {
        throw ConfigError("finetune: trainable tensor set is empty");
    }
    const TrainableMask mask = mask_from_names(cfg.trainable);
    std::vector<Sample> pool(adapt.begin(), adapt.end());
    if (cfg.use_replay) {
        pool.insert(pool.end(), replay.begin(), replay.end());
    }
    if (pool.empty()) {
        throw ConfigError("finetune: no samples to adapt on");
    }

    RnaParams params = start;
    AdamWState opt = AdamWState::for_params(params);
    Rng dropout_rng(derive_seed(seed, "finetune-dropout-k" + std::to_string(cfg.k)));
    const double scale = 1.0 / static_cast<double>(pool.size());

    FinetuneResult result{params, 0, mean_loss(params, pool)};
    int since_best = 0;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Gradients grads = TensorSet::zeros();
        for (const auto& s : pool) {
            const ForwardTrace t = forward_train(params, s.x, cfg.dropout ? &dropout_rng : nullptr);
            accumulate_backward(params, t, s.y, scale, grads, mask);
        }
        adamw_step(params, grads, opt, {cfg.lr, cfg.weight_decay}, mask);
        result.epochs_run = epoch;
        const double loss = mean_loss(params, pool);
        if (loss < result.best_loss - cfg.tolerance) {
            result.best_loss = loss;
            result.params = params;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    return result;
}

std::vector<FewShotRun> run_fewshot(const RnaParams& source_params, std::span<const Sample> target,
                                    std::span<const Sample> source_train,
                                    std::span<const Sample> source_val, const FewShotOptions& options) {
    struct Cell {
        int k;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (const int k : options.ks) {
        for (const auto seed : options.seeds) {
            cells.push_back({k, seed});
        }
    }
    std::vector<FewShotRun> runs(cells.size());

    const auto run_cell = [&](std::size_t i) {
        const Cell& cell = cells[i];
        AdaptConfig cfg = AdaptConfig::for_k(cell.k);
        cfg.use_replay = options.use_replay;
        cfg.dropout = options.dropout;
        cfg.replay_size = options.replay_size;
        cfg.patience = options.patience;
        const ShotSelection sel = select_shots(target.size(), cell.k, cell.seed);
        const std::vector<Sample> adapt = select(target, sel.adapt_idx);
        const std::vector<Sample> eval = select(target, sel.eval_idx);
        const std::vector<Sample> replay =
            cfg.use_replay ? build_replay(source_train, cfg.replay_size, cell.seed) : std::vector<Sample>{};
        const FinetuneResult ft = finetune(source_params, adapt, replay, cfg, cell.seed);
        const MetricPair m = evaluate_set(ft.params, eval);

        const TrainableMask mask = mask_from_names(cfg.trainable);
        bool intact = true;
        for (std::size_t id = 0; id < kTensorCount; ++id) {
            if (!mask[id] && ft.params[id].data != source_params[id].data) {
                intact = false;
            }
        }
        runs[i] = {cell.k, cell.seed, m.kl, m.tv, ft.epochs_run,
                   source_val.empty() ? 0.0 : evaluate_set(ft.params, source_val).kl, intact};
    };

    const unsigned threads = std::max(1U, std::min<unsigned>(options.threads, static_cast<unsigned>(cells.size())));
    if (threads == 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
        return runs;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < cells.size(); i = next++) {
                    try {
                        run_cell(i);
                    } catch (...) {
                        if (!failed.exchange(true)) failure = std::current_exception();
                        return;
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
    return runs;
}

std::vector<FewShotAggregate> aggregate_runs(std::span<const FewShotRun> runs) {
    std::map<int, FewShotAggregate> by_k;
    for (const auto& r : runs) {
        auto& agg = by_k[r.k];
        agg.k = r.k;
        agg.seeds.push_back(r.seed);
        agg.kl.push_back(r.kl);
        agg.tv.push_back(r.tv);
    }
    std::vector<FewShotAggregate> out;
    for (auto& [k, agg] : by_k) {
        agg.kl_mean = mean(agg.kl);
        agg.kl_std = sample_std(agg.kl);
        agg.tv_mean = mean(agg.tv);
        agg.tv_std = sample_std(agg.tv);
        out.push_back(std::move(agg));
    }
    return out;
}

}  // namespace qxfer
