#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qxfer/dataset.hpp"
#include "qxfer/rng.hpp"

namespace qxfer {

inline constexpr std::size_t kHidden1 = 128;
inline constexpr std::size_t kHidden2 = 128;
inline constexpr std::size_t kHidden3 = 64;
inline constexpr std::size_t kOutputDim = kPaddedStates;
inline constexpr double kDropoutRate = 0.10;
inline constexpr double kLayerNormEps = 1e-5;

// Stable tensor order; names are "block1.W", ..., "head.b".
enum TensorId : std::size_t {
    kBlock1W, kBlock1B, kBlock1Gamma, kBlock1Beta,
    kBlock2W, kBlock2B, kBlock2Gamma, kBlock2Beta,
    kBlock3W, kBlock3B, kBlock3Gamma, kBlock3Beta,
    kHeadW, kHeadB,
    kTensorCount
};

struct Tensor {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 1;
    std::vector<double> data;

    std::size_t size() const { return data.size(); }
    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

// All parameters of the residual adapter, or a shape-congruent gradient.
struct TensorSet {
    std::array<Tensor, kTensorCount> tensors;
    // Bumped by every in-place update so stale traces can be detected.
    std::uint64_t generation = 0;

    static TensorSet zeros();

    Tensor& operator[](std::size_t id) { return tensors[id]; }
    const Tensor& operator[](std::size_t id) const { return tensors[id]; }

    std::size_t parameter_count() const;
    void fill(double value);

    // FNV-1a over the raw bytes of every tensor in order.
    std::uint64_t checksum() const;
    std::uint64_t tensor_checksum(std::size_t id) const;

    bool same_values(const TensorSet& other) const { return tensors == other.tensors; }
};

using RnaParams = TensorSet;
using Gradients = TensorSet;

std::string_view tensor_name(std::size_t id);
std::size_t tensor_id(std::string_view name);

// Which tensors receive updates.
using TrainableMask = std::array<bool, kTensorCount>;
TrainableMask all_trainable();
// Throws std::invalid_argument on unknown names.
TrainableMask mask_from_names(const std::set<std::string>& names);

RnaParams init_params(std::uint64_t seed);

struct BlockTrace {
    std::vector<double> z;     // W a + b
    std::vector<double> xhat;  // normalized z
    double rstd = 0.0;
    std::vector<double> u;     // gamma * xhat + beta
    std::vector<double> mask;  // dropout scale per unit (1 when inactive)
    std::vector<double> h;     // block output
};

struct ForwardTrace {
    Features x{};
    std::array<BlockTrace, 3> blocks;
    Padded logits{};
    Padded yhat{};
    std::uint64_t generation = 0;
    bool valid = false;
};

// Eval-mode prediction: softmax(x[9:] + f(x)).
Padded predict(const RnaParams& params, const Features& x);

// Traced forward pass for backpropagation. Dropout is applied when
// `dropout_rng` is non-null.
ForwardTrace forward_train(const RnaParams& params, const Features& x, Rng* dropout_rng);

// KL(y || yhat) of a single row computed from logits (log-softmax form).
double kl_from_logits(const Padded& y, const Padded& logits);

// (1/B) sum_b sum_i y_i (ln y_i - ln yhat_i), with 0 ln 0 = 0. Throws
// std::domain_error when yhat has a non-positive entry.
double kl_batchmean_loss(std::span<const Padded> y_true, std::span<const Padded> yhat);

// Adds the gradient of scale * KL(y || yhat) to `grads`, skipping tensors
// that are not trainable. Throws std::logic_error for a missing or stale trace.
void accumulate_backward(const RnaParams& params, const ForwardTrace& trace, const Padded& y,
                         double scale, Gradients& grads, const TrainableMask& mask = all_trainable());

Gradients backward(const RnaParams& params, const ForwardTrace& trace, const Padded& y,
                   std::size_t batch_size = 1, const TrainableMask& mask = all_trainable());

struct GradCheckOptions {
    double tolerance = 1e-4;
    double epsilon = 1e-5;
    std::size_t coordinates = 200;
    std::uint64_t seed = 0;
};

struct GradCheckEntry {
    std::string tensor;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
};

struct GradCheckReport {
    bool passed = false;
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    // Largest relative errors first, at most 10.
    std::vector<GradCheckEntry> worst;
};

// Central differences on the dropout-free loss against `analytic`.
GradCheckReport grad_check_against(const RnaParams& params, const Features& x, const Padded& y,
                                   const Gradients& analytic, const GradCheckOptions& options = {});
GradCheckReport grad_check(const RnaParams& params, const Features& x, const Padded& y,
                           const GradCheckOptions& options = {});

inline constexpr int kCheckpointFormatVersion = 1;

std::string checkpoint_json(const RnaParams& params, const std::string& config_hash = {});
void save_checkpoint(const std::filesystem::path& path, const RnaParams& params,
                     const std::string& config_hash = {});

struct LoadedCheckpoint {
    RnaParams params;
    std::string config_hash;
};
// Throws DataError on version, name or shape mismatches.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace qxfer
