"""Python bindings for the qxfer cross-device noise-correction pipeline."""

from ._qxfer import (
    ConfigError,
    DataError,
    DeviceProfile,
    Pipeline,
    UsageError,
    default_config,
    device_preset,
    generate_suite,
    ideal_distribution,
    improvement_stats,
    kl_metric,
    noisy_distribution,
    tv_metric,
)

__all__ = [
    "ConfigError",
    "DataError",
    "DeviceProfile",
    "Pipeline",
    "UsageError",
    "default_config",
    "device_preset",
    "generate_suite",
    "ideal_distribution",
    "improvement_stats",
    "kl_metric",
    "noisy_distribution",
    "tv_metric",
]
