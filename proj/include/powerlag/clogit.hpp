#pragma once

#include "powerlag/types.hpp"

#include <Eigen/Dense>

namespace powerlag {

enum class FitStatus { Converged, Separated, MaxIter };

struct ClogitFit {
    Eigen::VectorXd theta_hat;
    Eigen::MatrixXd cov; // inverse observed information at theta_hat
    double loglik = 0.0;
    int iterations = 0;
    FitStatus status = FitStatus::MaxIter;

    double se(int i) const { return std::sqrt(cov(i, i)); }
};

/// Stratified conditional log-likelihood
///   sum_h [ theta.x_{h,1} - log sum_j exp(theta.x_{h,j}) ],
/// stabilized by per-stratum max subtraction. Covariate columns, when
/// present, extend the linear predictor after the lag columns.
double clogit_loglik(const Eigen::VectorXd &theta, const MatchedDesign &design);

/// Score U(theta) and observed information I(theta) of the conditional
/// likelihood (the per-stratum weighted mean/covariance form).
void clogit_score_info(const Eigen::VectorXd &theta, const MatchedDesign &design,
                       Eigen::VectorXd &score, Eigen::MatrixXd &info);

/// Newton-Raphson with step halving on log-likelihood decrease. Monotone
/// likelihood is reported as FitStatus::Separated once |theta| exceeds 50
/// with the likelihood still increasing; singular information raises
/// NumericError.
ClogitFit clogit_fit(const MatchedDesign &design, const Eigen::VectorXd &start,
                     int max_iter = 100, double tol = 1e-10);
ClogitFit clogit_fit(const MatchedDesign &design);

struct WaldResult {
    double statistic = 0.0;
    bool reject = false;
};

/// z = contrast.theta_hat / sqrt(contrast' cov contrast). Two-sided tests
/// reject on |z|; one-sided on the upper tail. The all-ones contrast over
/// the lag columns gives the cumulative-effect test.
WaldResult wald_test(const ClogitFit &fit, const Eigen::VectorXd &contrast, double alpha,
                     Sidedness sided);

} // namespace powerlag
