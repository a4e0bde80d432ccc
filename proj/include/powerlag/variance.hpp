#pragma once

#include "powerlag/types.hpp"

#include <Eigen/Dense>

#include <vector>

namespace powerlag {

/// Least-squares fit. Coefficients follow the column order of X
/// (intercept first when the caller prepends one).
struct OlsFit {
    Eigen::VectorXd coef;
    Eigen::VectorXd residuals;
    double r2 = 0.0;        // 1 - SSR/SST
    double resid_var = 0.0; // SSR / (n - p)
};

/// Within-stratum variance with divisor m_h (no -1 correction).
double stratum_variance(const Eigen::VectorXd &values);
double stratum_variance(const std::vector<double> &values);

/// Null-hypothesis Fisher information: sum over strata of the within-stratum
/// variance of the lag-l column.
double fisher_info_null(const MatchedDesign &design, int lag);

/// Fisher information at the supplied effect. With cumulative=true each
/// stratum's rows are collapsed to the weighted average exposure and the
/// scalar coefficient is theta_bar; otherwise the design must carry a single
/// lag column and theta_0 is used. Exponentials are centered per stratum.
double fisher_info_alt(const MatchedDesign &design, const LagEffect &effect, bool cumulative);

/// Weighted mean of per-stratum variances; weights are expected case counts
/// (or any nonnegative weights, e.g. Pop x rate sums).
double sigma_bar_weighted(const std::vector<double> &variances,
                          const std::vector<double> &weights);

/// Per-row inner product x_bar = sum_l w_l x_{t-l}.
Eigen::VectorXd cumulative_exposure(const Eigen::MatrixXd &rows,
                                    const std::vector<double> &weights);

/// QR-based least squares; X must include any intercept column. Rank
/// tolerance 1e-10 x largest R diagonal; deficiency raises NumericError.
OlsFit ols_fit(const Eigen::VectorXd &y, const Eigen::MatrixXd &X);

/// Mean per-stratum variance of one lag column: fisher_info_null / n.
double design_sigma_bar_sq(const MatchedDesign &design, int lag);

/// Same for the collapsed cumulative exposure x_bar.
double design_sigma_bar_sq_cumulative(const MatchedDesign &design,
                                      const std::vector<double> &weights);

/// Deflation R^2 of the target lag on all other columns (remaining lags and
/// covariates), computed on within-stratum-centered data; the matched sets
/// are the stratum dummies of the conditional model, so centering is the
/// conditioning.
double design_deflation_r2(const MatchedDesign &design, int target_lag);

/// Deflation R^2 of the cumulative exposure on the covariates alone.
double design_deflation_r2_cumulative(const MatchedDesign &design,
                                      const std::vector<double> &weights);

/// Delta-method variance of x^gamma at (mean, var): gamma^2 mean^(2gamma-2) var.
double delta_var_pow(double mean_x, double var_x, double gamma);

/// Delta-method route for sigma_bar^2 of the multiplicative exposure
/// (x)^{gamma_m1}: mean log-scale variance x E[x]^{2 gamma_m1} x R^2_log.
double sigma_bar_multiplicative(const std::vector<double> &log_ep_variances, double mean_x,
                                double gamma_m1, double r2_log);

/// Sensitivity knob when no validation data exists.
double sigma_bar_factor_c(double sigma_bar_ep, double c);

} // namespace powerlag
