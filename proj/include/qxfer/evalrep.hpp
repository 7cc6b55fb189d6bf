#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qxfer/dataset.hpp"
#include "qxfer/nn.hpp"

namespace qxfer {

inline constexpr double kKlClampFloor = 1e-10;
inline constexpr double kAblationNoiseThreshold = 1e-3;

// KL(p || q) = sum p_i (ln p_i - ln q_i) with 0 ln 0 = 0. When q has a zero
// where p has mass, q is clamped at 1e-10 and renormalized first. Throws
// std::domain_error for inputs that are not distributions.
double kl_metric(std::span<const double> p, std::span<const double> q);

// 0.5 * sum |p_i - q_i|
double tv_metric(std::span<const double> p, std::span<const double> q);

struct ImprovementStats {
    double improvement_pct = 0.0;
    // Empty when zero-shot KL does not exceed in-domain KL.
    std::optional<double> gap_recovery_pct;
    std::string warning;
};

ImprovementStats improvement_stats(double kl_zero_shot, double kl_few_shot, double kl_in_domain);

struct AblationRow {
    std::size_t feature_index = 0;
    std::string feature_name;
    double kl = 0.0;
    double delta = 0.0;
    bool within_noise = false;
};

std::string calibration_feature_name(std::size_t feature_index);

// Zeroes x[feature_index] (the source-train mean in standardized space) on a
// copy of every sample and reports mean KL against `baseline_kl`. Throws
// std::invalid_argument for indices outside 5..8.
AblationRow ablate_feature(const RnaParams& params, std::span<const Sample> samples,
                           std::size_t feature_index, double baseline_kl);

// Rows for indices 5..8 against the unablated mean KL.
std::vector<AblationRow> ablate_all(const RnaParams& params, std::span<const Sample> samples);

double mean(std::span<const double> values);
// Sample standard deviation (n - 1); 0 for fewer than two values.
double sample_std(std::span<const double> values);

}  // namespace qxfer
