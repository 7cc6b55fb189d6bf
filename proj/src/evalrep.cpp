#include "qxfer/evalrep.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qxfer/train.hpp"

namespace qxfer {

namespace {

constexpr double kDistributionTolerance = 1e-6;

void check_distribution(std::span<const double> d, const char* which) {
    double total = 0.0;
    for (const double v : d) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw std::domain_error(std::string("kl_metric: ") + which + " has a negative or non-finite entry");
        }
        total += v;
    }
    if (std::abs(total - 1.0) > kDistributionTolerance) {
        throw std::domain_error(std::string("kl_metric: ") + which + " does not sum to 1");
    }
}

}  // namespace

double kl_metric(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size() || p.empty()) {
        throw std::domain_error("kl_metric: length mismatch");
    }
    check_distribution(p, "p");
    check_distribution(q, "q");
    bool needs_clamp = false;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0 && q[i] <= 0.0) {
            needs_clamp = true;
            break;
        }
    }
    std::vector<double> clamped;
    if (needs_clamp) {
        clamped.assign(q.begin(), q.end());
        double total = 0.0;
        for (double& v : clamped) {
            v = std::max(v, kKlClampFloor);
            total += v;
        }
        for (double& v : clamped) v /= total;
        q = clamped;
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) {
            kl += p[i] * (std::log(p[i]) - std::log(q[i]));
        }
    }
    // Rounding can leave a tiny negative value for p == q.
    return std::max(kl, 0.0);
}

double tv_metric(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) {
        throw std::invalid_argument("tv_metric: length mismatch");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        sum += std::abs(p[i] - q[i]);
    }
    return 0.5 * sum;
}

ImprovementStats improvement_stats(double zs, double fs, double id) {
    ImprovementStats s;
    s.improvement_pct = (zs - fs) / zs * 100.0;
    if (zs > id) {
        s.gap_recovery_pct = (zs - fs) / (zs - id) * 100.0;
    } else {
        s.warning = "zero-shot KL does not exceed in-domain KL; gap recovery undefined";
    }
    return s;
}

std::string calibration_feature_name(std::size_t feature_index) {
    switch (feature_index) {
        case 5: return "t1";
        case 6: return "t2";
        case 7: return "readout_error";
        case 8: return "cx_error";
        default: throw std::invalid_argument("ablation index must be in 5..8");
    }
}

AblationRow ablate_feature(const RnaParams& params, std::span<const Sample> samples,
                           std::size_t feature_index, double baseline_kl) {
    AblationRow row;
    row.feature_index = feature_index;
    row.feature_name = calibration_feature_name(feature_index);
    std::vector<Sample> ablated(samples.begin(), samples.end());
    for (auto& s : ablated) {
        s.x[feature_index] = 0.0;
    }
    row.kl = evaluate_set(params, ablated).kl;
    row.delta = row.kl - baseline_kl;
    row.within_noise = std::abs(row.delta) < kAblationNoiseThreshold;
    return row;
}

std::vector<AblationRow> ablate_all(const RnaParams& params, std::span<const Sample> samples) {
    const double baseline = evaluate_set(params, samples).kl;
    std::vector<AblationRow> rows;
    for (std::size_t i = kFirstCalibrationIndex; i <= kLastCalibrationIndex; ++i) {
        rows.push_back(ablate_feature(params, samples, i, baseline));
    }
    return rows;
}

double mean(std::span<const double> values) {
    if (values.empty()) return 0.0;
    double s = 0.0;
    for (const double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double sample_std(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    const double m = mean(values);
    double s = 0.0;
    for (const double v : values) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(values.size() - 1));
}

}  // namespace qxfer
