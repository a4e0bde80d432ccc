#pragma once

#include "powerlag/types.hpp"

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

namespace powerlag {

/// Aligned truth/measured lag matrices (rows = observations, columns =
/// lags 0..L) plus optional extra covariates. Lags are taken by consecutive
/// panel column, matching the pre-lagged MatchedDesign convention.
struct ValidationDesign {
    Eigen::MatrixXd true_lags;
    Eigen::MatrixXd meas_lags;
    Eigen::MatrixXd covariates; // N x p, p may be 0

    int lag_count() const { return static_cast<int>(true_lags.cols()); }
    void validate() const;
};

/// Builds lagged validation rows from paired panels: one row per (unit, t)
/// with t >= L, columns panel[t], panel[t-1], ..., panel[t-L].
ValidationDesign build_validation_design(const ExposurePanel &truth,
                                         const ExposurePanel &measured, int max_lag);

/// Regression-calibration description of an error-prone lag set:
/// eta_star[j][l] is the coefficient of measured lag l in the regression of
/// true lag j on all measured lags and z; resid_coefs[k][l] is the
/// coefficient of measured lag l when residual u*_{t-k} is regressed on the
/// same design. In-sample the resid_coefs vanish by OLS orthogonality; they
/// are nonzero only on holdout data.
struct CalibrationFit {
    Eigen::MatrixXd eta_star;
    std::vector<Eigen::VectorXd> resid_vectors;
    Eigen::MatrixXd resid_coefs;
};

CalibrationFit compute_calibration(const ValidationDesign &validation);

struct BiasReport {
    std::vector<double> theta_biased;
    double theta_bar_biased = 0.0;
    std::string method;
    std::vector<double> correction; // BL-style additive terms, when applicable
    std::vector<std::pair<std::string, double>> inputs;
};

/// Bias factor lambda = gamma1 V / (gamma1^2 V + V_u); the classical-error
/// attenuation when gamma1 = 1, and possibly > 1 otherwise.
double lambda_linear(double gamma1, double var_x_given_z, double var_u);

enum class Eq19Sign { Plus, Minus };

/// No-validation bound: R^2 (theta_l +/- (1-R^2) sum_{j!=l} theta_j) / gamma1.
double theta_eq19(const LagEffect &theta, double r2, double gamma1, Eq19Sign sign, int lag);

/// Negligible residual confounding: R^2 theta / gamma1.
double theta_eq20(double theta_or_bar, double r2, double gamma1);

/// Regression-calibration approximation
///   theta^{L(L)}_l = sum_j theta_j eta*[j][l] + sum_k theta_k resid_coefs[k][l].
BiasReport calib_bias_approx(const ValidationDesign &validation, const LagEffect &theta);

/// Berkson-like bias: regresses u^BL_{t-k} = x_{i,t-k} - x_{g,t-k} on all
/// group lags (+z); theta^BL_l = theta_l + sum_k theta_k coef[k][l].
BiasReport bl_bias_approx(const ExposurePanel &unit_truth, const ExposurePanel &group_measured,
                          const std::vector<std::string> &group_of_unit,
                          const LagEffect &theta, int max_lag);

/// Multiplicative Berkson: theta * E[exp(u)].
double mb_bias(double theta, double mean_exp_u);

/// Multiplicative classical attenuation:
///   theta * V / ( V (1 + V_u) + E[x|z]^2 V_u ),
/// V_u being the variance of the mean-one error factor.
double mc_attenuation(double theta, double var_x_given_z, double mean_x_given_z, double var_u);

/// Second-order polynomial bias factor (R^2)^2 / gamma1^2.
double poly_bias_factor(double r2, double gamma1);

/// Compound error: per-lag sum of LL-biased values and BL correction terms.
BiasReport compose_ce(const BiasReport &theta_ll, const BiasReport &bl_terms);

} // namespace powerlag
