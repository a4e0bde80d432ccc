#pragma once

#include "powerlag/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace powerlag {

/// Zero-mean Gaussian field with separable AR(1)-in-time x AR(1)-in-unit
/// correlation and the stated marginal variance.
struct NoiseField {
    Eigen::MatrixXd values; // units x times
    double rho_time = 0.0;
    double rho_space = 0.0;
    double marginal_var = 1.0;
};

NoiseField gen_noise_field(int units, int days, double rho_time, double rho_space,
                           double marginal_var, std::uint64_t seed);

/// Synthetic exposure panel: Gaussian AR(1) x AR(1) field shifted/scaled to
/// (mean, var) and truncated at 0, exposures being concentrations.
ExposurePanel gen_exposure_panel(int units, int days, double mean, double var, double rho_time,
                                 double rho_space, std::uint64_t seed);

/// Family-dispatched error transform producing the measured panel:
///   additive_linear       x^ep = g0 + g1 x + u^L,  u^L iid N(0, phi^2)
///   additive_linear_like  x^ep = g0 + g1 x + kappa e1 (+ iid u^L)
///   mult_classical        x^ep = x exp(u),         u iid N(0, phi^2)
///   mult_linear_like      x^ep = exp(gm0 + gm1 log x + kappa e1 - e2/2)
///   *berkson_like         x^new = exp(g1 x + kappa e1 - e2)
///   additive_berkson      identity (the Berkson structure arises from
///                         group aggregation, not a per-cell transform)
/// e1 is a NoiseField with spec.autocorr; e2 is iid gamma(shape, rate),
/// disabled when shape == 0. Strictly positive truth is required wherever a
/// logarithm is taken; values below 1e-6 are floored first.
ExposurePanel apply_error(const ExposurePanel &truth, const ErrorSpec &spec,
                          std::uint64_t seed);

/// unit -> (group, population weight), aligned with the unit panel order.
struct GroupMapping {
    std::vector<std::string> group_of_unit;
    std::vector<double> weight_of_unit;
};

/// Contiguous equal-weight blocks of units, groups named g0..g{k-1}.
GroupMapping block_group_mapping(int units, int groups);

enum class AggregationMode { Additive, Multiplicative };

/// Population-weighted group panel: arithmetic mean per group-time, or the
/// exp of the weighted mean of logs.
ExposurePanel aggregate_groups(const ExposurePanel &unit_panel, const GroupMapping &mapping,
                               AggregationMode mode);

/// Broadcasts a group panel back onto units so each unit row carries its
/// group's series.
ExposurePanel expand_to_units(const ExposurePanel &group_panel,
                              const GroupMapping &mapping,
                              const std::vector<std::string> &unit_ids);

} // namespace powerlag
