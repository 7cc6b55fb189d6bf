#include "qxfer/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "qxfer/errors.hpp"

namespace qxfer {

namespace {

constexpr std::array<std::string_view, kTensorCount> kNames = {
    "block1.W", "block1.b", "block1.ln_gamma", "block1.ln_beta",
    "block2.W", "block2.b", "block2.ln_gamma", "block2.ln_beta",
    "block3.W", "block3.b", "block3.ln_gamma", "block3.ln_beta",
    "head.W",   "head.b"};

struct LayerDims {
    std::size_t in;
    std::size_t out;
};

constexpr std::array<LayerDims, 4> kLayers = {
    LayerDims{kFeatureDim, kHidden1}, LayerDims{kHidden1, kHidden2}, LayerDims{kHidden2, kHidden3},
    LayerDims{kHidden3, kOutputDim}};

// First tensor id of block `b` (0..2) or the head (3).
constexpr std::size_t first_tensor(std::size_t b) { return b * 4; }

double gelu(double u) { return 0.5 * u * std::erfc(-u / std::numbers::sqrt2); }

double gelu_grad(double u) {
    const double cdf = 0.5 * std::erfc(-u / std::numbers::sqrt2);
    const double pdf = std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + u * pdf;
}

void linear(const Tensor& w, const Tensor& b, std::span<const double> in, std::vector<double>& out) {
    out.assign(w.rows, 0.0);
    for (std::size_t r = 0; r < w.rows; ++r) {
        double acc = b.data[r];
        const double* row = &w.data[r * w.cols];
        for (std::size_t c = 0; c < w.cols; ++c) {
            acc += row[c] * in[c];
        }
        out[r] = acc;
    }
}

void run_block(const RnaParams& p, std::size_t block, std::span<const double> in, BlockTrace& t,
               Rng* dropout_rng) {
    const std::size_t base = first_tensor(block);
    linear(p[base], p[base + 1], in, t.z);
    const std::size_t n = t.z.size();
    double mean = 0.0;
    for (const double v : t.z) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const double v : t.z) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    t.rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    t.xhat.resize(n);
    t.u.resize(n);
    t.mask.assign(n, 1.0);
    t.h.resize(n);
    const Tensor& gamma = p[base + 2];
    const Tensor& beta = p[base + 3];
    // The last hidden block has no dropout.
    const bool dropout = dropout_rng != nullptr && block < 2;
    for (std::size_t i = 0; i < n; ++i) {
        t.xhat[i] = (t.z[i] - mean) * t.rstd;
        t.u[i] = gamma.data[i] * t.xhat[i] + beta.data[i];
        if (dropout) {
            t.mask[i] = dropout_rng->bernoulli(1.0 - kDropoutRate) ? 1.0 / (1.0 - kDropoutRate) : 0.0;
        }
        t.h[i] = gelu(t.u[i]) * t.mask[i];
    }
}

void check_finite(const Features& x) {
    for (const double v : x) {
        if (!std::isfinite(v)) {
            throw std::domain_error("RNA input contains a non-finite value");
        }
    }
}

Padded softmax(const Padded& logits) {
    const double hi = *std::max_element(logits.begin(), logits.end());
    Padded out{};
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - hi);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

void forward_into(const RnaParams& p, const Features& x, ForwardTrace& t, Rng* dropout_rng) {
    check_finite(x);
    t.x = x;
    run_block(p, 0, x, t.blocks[0], dropout_rng);
    run_block(p, 1, t.blocks[0].h, t.blocks[1], dropout_rng);
    run_block(p, 2, t.blocks[1].h, t.blocks[2], dropout_rng);
    std::vector<double> r;
    linear(p[kHeadW], p[kHeadB], t.blocks[2].h, r);
    for (std::size_t i = 0; i < kOutputDim; ++i) {
        t.logits[i] = x[kScalarCount + i] + r[i];
    }
    t.yhat = softmax(t.logits);
    t.generation = p.generation;
    t.valid = true;
}

// Eval-mode loss with one coordinate shifted by `delta`, evaluated in
// extended precision. A double-precision loss carries roundoff near 1e-16,
// which after dividing by 2 eps swamps gradients of order 1e-7.
long double shifted_loss(const RnaParams& p, const Features& x, const Padded& y, std::size_t shift_id,
                         std::size_t shift_idx, long double delta) {
    using real = long double;
    const auto param = [&](std::size_t id, std::size_t i) {
        const real v = p[id].data[i];
        return (id == shift_id && i == shift_idx) ? v + delta : v;
    };
    std::vector<real> h(x.begin(), x.end());
    for (std::size_t block = 0; block < 4; ++block) {
        const std::size_t w = first_tensor(block);
        const Tensor& W = p[w];
        std::vector<real> z(W.rows);
        for (std::size_t r = 0; r < W.rows; ++r) {
            real acc = param(w + 1, r);
            for (std::size_t c = 0; c < W.cols; ++c) acc += param(w, r * W.cols + c) * h[c];
            z[r] = acc;
        }
        if (block == 3) {
            h = std::move(z);
            break;
        }
        real mean = 0.0L;
        for (const real v : z) mean += v;
        mean /= static_cast<real>(z.size());
        real var = 0.0L;
        for (const real v : z) var += (v - mean) * (v - mean);
        var /= static_cast<real>(z.size());
        const real rstd = 1.0L / std::sqrt(var + static_cast<real>(kLayerNormEps));
        for (std::size_t i = 0; i < z.size(); ++i) {
            const real u = param(w + 2, i) * (z[i] - mean) * rstd + param(w + 3, i);
            z[i] = 0.5L * u * (1.0L + std::erf(u / std::sqrt(2.0L)));
        }
        h = std::move(z);
    }
    std::array<real, kOutputDim> logits{};
    for (std::size_t i = 0; i < kOutputDim; ++i) logits[i] = x[kScalarCount + i] + h[i];
    const real hi = *std::max_element(logits.begin(), logits.end());
    real total = 0.0L;
    for (const real l : logits) total += std::exp(l - hi);
    const real log_z = hi + std::log(total);
    real loss = 0.0L;
    for (std::size_t i = 0; i < kOutputDim; ++i) {
        if (y[i] > 0.0) loss += y[i] * (std::log(static_cast<real>(y[i])) - (logits[i] - log_z));
    }
    return loss;
}

}  // namespace

TensorSet TensorSet::zeros() {
    TensorSet s;
    for (std::size_t layer = 0; layer < kLayers.size(); ++layer) {
        const auto [in, out] = kLayers[layer];
        const std::size_t base = first_tensor(layer);
        s[base] = {std::string(kNames[base]), out, in, std::vector<double>(out * in, 0.0)};
        s[base + 1] = {std::string(kNames[base + 1]), out, 1, std::vector<double>(out, 0.0)};
        if (layer < 3) {
            s[base + 2] = {std::string(kNames[base + 2]), out, 1, std::vector<double>(out, 0.0)};
            s[base + 3] = {std::string(kNames[base + 3]), out, 1, std::vector<double>(out, 0.0)};
        }
    }
    return s;
}

std::size_t TensorSet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.size();
    return n;
}

void TensorSet::fill(double value) {
    for (auto& t : tensors) std::fill(t.data.begin(), t.data.end(), value);
    ++generation;
}

std::uint64_t TensorSet::tensor_checksum(std::size_t id) const {
    const auto& d = tensors[id].data;
    return fnv1a64(std::string_view(reinterpret_cast<const char*>(d.data()), d.size() * sizeof(double)));
}

std::uint64_t TensorSet::checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& t : tensors) {
        h = fnv1a64(std::string_view(reinterpret_cast<const char*>(t.data.data()),
                                     t.data.size() * sizeof(double)),
                    h);
    }
    return h;
}

std::string_view tensor_name(std::size_t id) { return kNames.at(id); }

std::size_t tensor_id(std::string_view name) {
    for (std::size_t i = 0; i < kTensorCount; ++i) {
        if (kNames[i] == name) return i;
    }
    throw std::invalid_argument("unknown tensor name '" + std::string(name) + "'");
}

TrainableMask all_trainable() {
    TrainableMask m;
    m.fill(true);
    return m;
}

TrainableMask mask_from_names(const std::set<std::string>& names) {
    TrainableMask m{};
    for (const auto& n : names) {
        m[tensor_id(n)] = true;
    }
    return m;
}

RnaParams init_params(std::uint64_t seed) {
    RnaParams p = TensorSet::zeros();
    Rng rng(derive_seed(seed, "rna-init"));
    for (std::size_t layer = 0; layer < kLayers.size(); ++layer) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(kLayers[layer].in));
        const std::size_t base = first_tensor(layer);
        for (const std::size_t id : {base, base + 1}) {
            for (double& v : p[id].data) v = bound * (2.0 * rng.uniform() - 1.0);
        }
        if (layer < 3) {
            std::fill(p[base + 2].data.begin(), p[base + 2].data.end(), 1.0);
        }
    }
    return p;
}

Padded predict(const RnaParams& params, const Features& x) {
    ForwardTrace t;
    forward_into(params, x, t, nullptr);
    return t.yhat;
}

ForwardTrace forward_train(const RnaParams& params, const Features& x, Rng* dropout_rng) {
    ForwardTrace t;
    forward_into(params, x, t, dropout_rng);
    return t;
}

double kl_from_logits(const Padded& y, const Padded& logits) {
    const double hi = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (const double l : logits) total += std::exp(l - hi);
    const double log_norm = hi + std::log(total);
    double kl = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] > 0.0) {
            kl += y[i] * (std::log(y[i]) - (logits[i] - log_norm));
        }
    }
    return kl;
}

double kl_batchmean_loss(std::span<const Padded> y_true, std::span<const Padded> yhat) {
    if (y_true.size() != yhat.size() || y_true.empty()) {
        throw std::invalid_argument("kl_batchmean_loss: batch sizes differ or are empty");
    }
    double sum = 0.0;
    for (std::size_t b = 0; b < y_true.size(); ++b) {
        for (std::size_t i = 0; i < kOutputDim; ++i) {
            if (!(yhat[b][i] > 0.0)) {
                throw std::domain_error("kl_batchmean_loss: prediction has a non-positive entry");
            }
            const double p = y_true[b][i];
            if (p > 0.0) {
                sum += p * (std::log(p) - std::log(yhat[b][i]));
            }
        }
    }
    return sum / static_cast<double>(y_true.size());
}

void accumulate_backward(const RnaParams& p, const ForwardTrace& t, const Padded& y, double scale,
                         Gradients& g, const TrainableMask& mask) {
    if (!t.valid) {
        throw std::logic_error("backward: missing forward trace");
    }
    if (t.generation != p.generation) {
        throw std::logic_error("backward: trace is stale (parameters changed since forward)");
    }
    // Deepest layer that still needs an upstream gradient.
    std::size_t earliest = 4;
    for (std::size_t id = 0; id < kTensorCount; ++id) {
        if (mask[id]) {
            earliest = std::min(earliest, id / 4);
        }
    }
    if (earliest == 4) {
        return;
    }

    // Softmax + KL: d/dlogits = yhat - y.
    std::vector<double> delta(kOutputDim);
    for (std::size_t i = 0; i < kOutputDim; ++i) {
        delta[i] = scale * (t.yhat[i] - y[i]);
    }

    // Walk layers from the head down: delta holds dL/d(linear output).
    for (std::size_t layer = 4; layer-- > earliest;) {
        const std::size_t base = first_tensor(layer);
        const std::span<const double> input =
            layer == 0 ? std::span<const double>(t.x) : std::span<const double>(t.blocks[layer - 1].h);
        const Tensor& w = p[base];
        if (mask[base]) {
            Tensor& gw = g[base];
            for (std::size_t r = 0; r < w.rows; ++r) {
                double* row = &gw.data[r * w.cols];
                for (std::size_t c = 0; c < w.cols; ++c) row[c] += delta[r] * input[c];
            }
        }
        if (mask[base + 1]) {
            for (std::size_t r = 0; r < w.rows; ++r) g[base + 1].data[r] += delta[r];
        }
        if (layer == earliest) {
            break;
        }
        // dL/d(input), then back through the previous block's
        // dropout, GELU and LayerNorm to its linear output.
        const BlockTrace& prev = t.blocks[layer - 1];
        const std::size_t n = w.cols;
        std::vector<double> dh(n, 0.0);
        for (std::size_t r = 0; r < w.rows; ++r) {
            const double* row = &w.data[r * w.cols];
            for (std::size_t c = 0; c < n; ++c) dh[c] += row[c] * delta[r];
        }
        const std::size_t pbase = first_tensor(layer - 1);
        const Tensor& gamma = p[pbase + 2];
        std::vector<double> dxhat(n);
        double mean_dxhat = 0.0;
        double mean_dxhat_xhat = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double du = dh[i] * prev.mask[i] * gelu_grad(prev.u[i]);
            if (mask[pbase + 2]) g[pbase + 2].data[i] += du * prev.xhat[i];
            if (mask[pbase + 3]) g[pbase + 3].data[i] += du;
            dxhat[i] = du * gamma.data[i];
            mean_dxhat += dxhat[i];
            mean_dxhat_xhat += dxhat[i] * prev.xhat[i];
        }
        mean_dxhat /= static_cast<double>(n);
        mean_dxhat_xhat /= static_cast<double>(n);
        delta.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            delta[i] = prev.rstd * (dxhat[i] - mean_dxhat - prev.xhat[i] * mean_dxhat_xhat);
        }
    }
}

Gradients backward(const RnaParams& params, const ForwardTrace& trace, const Padded& y,
                   std::size_t batch_size, const TrainableMask& mask) {
    if (batch_size == 0) {
        throw std::invalid_argument("backward: batch_size must be positive");
    }
    Gradients g = TensorSet::zeros();
    accumulate_backward(params, trace, y, 1.0 / static_cast<double>(batch_size), g, mask);
    return g;
}

GradCheckReport grad_check_against(const RnaParams& params, const Features& x, const Padded& y,
                                   const Gradients& analytic, const GradCheckOptions& options) {
    Rng rng(derive_seed(options.seed, "grad-check"));
    const std::size_t per_tensor = (options.coordinates + kTensorCount - 1) / kTensorCount;
    std::vector<GradCheckEntry> entries;
    for (std::size_t id = 0; id < kTensorCount; ++id) {
        for (std::size_t k = 0; k < per_tensor; ++k) {
            const auto idx = static_cast<std::size_t>(rng.uniform_index(params[id].size()));
            const long double eps = options.epsilon;
            const long double up = shifted_loss(params, x, y, id, idx, eps);
            const long double down = shifted_loss(params, x, y, id, idx, -eps);
            const auto numeric = static_cast<double>((up - down) / (2.0L * eps));
            const double a = analytic[id].data[idx];
            const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
            entries.push_back({std::string(kNames[id]), idx, a, numeric, rel});
        }
    }
    GradCheckReport report;
    report.checked = entries.size();
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& l, const auto& r) { return l.rel_error > r.rel_error; });
    report.max_rel_error = entries.empty() ? 0.0 : entries.front().rel_error;
    report.passed = report.max_rel_error < options.tolerance;
    entries.resize(std::min<std::size_t>(entries.size(), 10));
    report.worst = std::move(entries);
    return report;
}

GradCheckReport grad_check(const RnaParams& params, const Features& x, const Padded& y,
                           const GradCheckOptions& options) {
    const ForwardTrace t = forward_train(params, x, nullptr);
    const Gradients g = backward(params, t, y);
    return grad_check_against(params, x, y, g, options);
}

std::string checkpoint_json(const RnaParams& params, const std::string& config_hash) {
    nlohmann::ordered_json j;
    j["format_version"] = kCheckpointFormatVersion;
    j["model"] = "residual-noise-adapter";
    if (!config_hash.empty()) {
        j["config_hash"] = config_hash;
    }
    auto tensors = nlohmann::ordered_json::array();
    for (const auto& t : params.tensors) {
        nlohmann::ordered_json e;
        e["name"] = t.name;
        e["shape"] = {t.rows, t.cols};
        e["data"] = t.data;
        tensors.push_back(std::move(e));
    }
    j["tensors"] = std::move(tensors);
    return j.dump() + "\n";
}

void save_checkpoint(const std::filesystem::path& path, const RnaParams& params,
                     const std::string& config_hash) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    out << checkpoint_json(params, config_hash);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open checkpoint '" + path.string() + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    LoadedCheckpoint out;
    out.params = TensorSet::zeros();
    try {
        const auto j = nlohmann::json::parse(buf.str());
        if (j.at("format_version").get<int>() != kCheckpointFormatVersion) {
            throw DataError("unsupported checkpoint format_version");
        }
        out.config_hash = j.value("config_hash", std::string{});
        const auto& tensors = j.at("tensors");
        if (tensors.size() != kTensorCount) {
            throw DataError("checkpoint has the wrong number of tensors");
        }
        for (std::size_t id = 0; id < kTensorCount; ++id) {
            const auto& e = tensors.at(id);
            Tensor& t = out.params[id];
            if (e.at("name").get<std::string>() != t.name) {
                throw DataError("checkpoint tensor " + std::to_string(id) + " is not " + t.name);
            }
            const auto shape = e.at("shape").get<std::vector<std::size_t>>();
            if (shape.size() != 2 || shape[0] != t.rows || shape[1] != t.cols) {
                throw DataError("checkpoint tensor " + t.name + " has the wrong shape");
            }
            auto data = e.at("data").get<std::vector<double>>();
            if (data.size() != t.size()) {
                throw DataError("checkpoint tensor " + t.name + " has the wrong length");
            }
            for (const double v : data) {
                if (!std::isfinite(v)) throw DataError("checkpoint tensor " + t.name + " is not finite");
            }
            t.data = std::move(data);
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return out;
}

}  // namespace qxfer
