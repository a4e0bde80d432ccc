#include "powerlag/variance.hpp"

#include "powerlag/errors.hpp"

#include <cmath>
#include <numeric>

namespace powerlag {

double stratum_variance(const Eigen::VectorXd &values) {
    const Eigen::Index m = values.size();
    if (m < 2) {
        throw DataError("stratum_variance: degenerate stratum (fewer than 2 values)");
    }
    const double mean = values.mean();
    return (values.array() - mean).square().sum() / static_cast<double>(m);
}

double stratum_variance(const std::vector<double> &values) {
    return stratum_variance(Eigen::Map<const Eigen::VectorXd>(
        values.data(), static_cast<Eigen::Index>(values.size())));
}

double fisher_info_null(const MatchedDesign &design, int lag) {
    if (lag < 0 || lag >= design.lag_count()) {
        throw DataError("fisher_info_null: lag out of range");
    }
    double info = 0.0;
    for (const auto &s : design.strata) {
        info += stratum_variance(Eigen::VectorXd(s.rows.col(lag)));
    }
    return info;
}

namespace {
// Weighted within-stratum variance of x with weights softmax(theta * x).
double exp_weighted_variance(const Eigen::VectorXd &x, double theta) {
    Eigen::ArrayXd tx = theta * x.array();
    const double shift = tx.maxCoeff();
    Eigen::ArrayXd w = (tx - shift).exp();
    const double wsum = w.sum();
    const double m1 = (w * x.array()).sum() / wsum;
    const double m2 = (w * x.array().square()).sum() / wsum;
    return m2 - m1 * m1;
}
} // namespace

double fisher_info_alt(const MatchedDesign &design, const LagEffect &effect, bool cumulative) {
    double info = 0.0;
    if (cumulative) {
        for (const auto &s : design.strata) {
            Eigen::VectorXd xbar = cumulative_exposure(s.rows, effect.weights);
            info += exp_weighted_variance(xbar, effect.theta_bar);
        }
    } else {
        if (design.lag_count() != 1 || effect.theta.size() != 1) {
            throw DataError("fisher_info_alt: non-cumulative form requires a single lag column");
        }
        for (const auto &s : design.strata) {
            info += exp_weighted_variance(Eigen::VectorXd(s.rows.col(0)), effect.theta[0]);
        }
    }
    return info;
}

double sigma_bar_weighted(const std::vector<double> &variances,
                          const std::vector<double> &weights) {
    if (variances.size() != weights.size()) {
        throw DataError("sigma_bar_weighted: length mismatch");
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < variances.size(); ++i) {
        if (weights[i] < 0.0) {
            throw DataError("sigma_bar_weighted: negative weight");
        }
        num += weights[i] * variances[i];
        den += weights[i];
    }
    if (den <= 0.0) {
        throw DataError("sigma_bar_weighted: all weights zero");
    }
    return num / den;
}

Eigen::VectorXd cumulative_exposure(const Eigen::MatrixXd &rows,
                                    const std::vector<double> &weights) {
    if (static_cast<Eigen::Index>(weights.size()) != rows.cols()) {
        throw DataError("cumulative_exposure: weight length must equal lag count");
    }
    Eigen::Map<const Eigen::VectorXd> w(weights.data(),
                                        static_cast<Eigen::Index>(weights.size()));
    return rows * w;
}

OlsFit ols_fit(const Eigen::VectorXd &y, const Eigen::MatrixXd &X) {
    if (X.rows() != y.size()) {
        throw DataError("ols_fit: row count mismatch");
    }
    if (X.rows() < X.cols()) {
        throw DataError("ols_fit: fewer rows than columns");
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    // Lagged, autocorrelated regressors can be ill-conditioned; reject rank
    // deficiency instead of returning an arbitrary solution.
    const Eigen::MatrixXd &R = qr.matrixR();
    double max_diag = 0.0;
    for (Eigen::Index i = 0; i < std::min(R.rows(), R.cols()); ++i) {
        max_diag = std::max(max_diag, std::abs(R(i, i)));
    }
    qr.setThreshold(1e-10);
    if (qr.rank() < X.cols()) {
        throw NumericError("ols_fit: singular design (rank " + std::to_string(qr.rank()) +
                           " of " + std::to_string(X.cols()) + ")");
    }
    for (Eigen::Index i = 0; i < X.cols(); ++i) {
        if (std::abs(R(i, i)) <= 1e-10 * max_diag) {
            throw NumericError("ols_fit: singular design (diagonal collapse)");
        }
    }

    OlsFit fit;
    fit.coef = qr.solve(y);
    fit.residuals = y - X * fit.coef;

    const double ssr = fit.residuals.squaredNorm();
    const double ybar = y.mean();
    const double sst = (y.array() - ybar).square().sum();
    fit.r2 = sst > 0.0 ? 1.0 - ssr / sst : 0.0;
    const Eigen::Index dof = X.rows() - X.cols();
    fit.resid_var = dof > 0 ? ssr / static_cast<double>(dof) : 0.0;
    return fit;
}

double design_sigma_bar_sq(const MatchedDesign &design, int lag) {
    if (design.strata.empty()) {
        throw DataError("design_sigma_bar_sq: empty design");
    }
    return fisher_info_null(design, lag) / static_cast<double>(design.n_strata());
}

double design_sigma_bar_sq_cumulative(const MatchedDesign &design,
                                      const std::vector<double> &weights) {
    if (design.strata.empty()) {
        throw DataError("design_sigma_bar_sq_cumulative: empty design");
    }
    double info = 0.0;
    for (const auto &s : design.strata) {
        info += stratum_variance(cumulative_exposure(s.rows, weights));
    }
    return info / static_cast<double>(design.n_strata());
}

namespace {

// Stacks stratum-centered response/regressor columns. `collapse` switches
// between a single lag column and the weighted cumulative exposure.
double centered_r2(const MatchedDesign &design, int target_lag,
                   const std::vector<double> *weights) {
    Eigen::Index total_rows = 0;
    for (const auto &s : design.strata) {
        total_rows += s.rows.rows();
    }
    const int lp1 = design.lag_count();
    const int n_cov = design.strata.front().covariates
                          ? static_cast<int>(design.strata.front().covariates->cols())
                          : 0;
    const int n_reg = weights ? n_cov : (lp1 - 1 + n_cov);
    if (n_reg == 0) {
        return 0.0;
    }

    Eigen::VectorXd y(total_rows);
    Eigen::MatrixXd x(total_rows, n_reg);
    Eigen::Index r = 0;
    for (const auto &s : design.strata) {
        const Eigen::Index m = s.rows.rows();
        Eigen::VectorXd target =
            weights ? cumulative_exposure(s.rows, *weights) : Eigen::VectorXd(s.rows.col(target_lag));
        y.segment(r, m) = target.array() - target.mean();
        int c = 0;
        if (!weights) {
            for (int l = 0; l < lp1; ++l) {
                if (l == target_lag) {
                    continue;
                }
                Eigen::VectorXd col = s.rows.col(l);
                x.block(r, c++, m, 1) = col.array() - col.mean();
            }
        }
        for (int k = 0; k < n_cov; ++k) {
            Eigen::VectorXd col = s.covariates->col(k);
            x.block(r, c++, m, 1) = col.array() - col.mean();
        }
        r += m;
    }

    const double sst = y.squaredNorm();
    if (!(sst > 0.0)) {
        return 0.0;
    }
    OlsFit fit = ols_fit(y, x);
    const double ssr = fit.residuals.squaredNorm();
    return std::max(0.0, 1.0 - ssr / sst);
}

} // namespace

double design_deflation_r2(const MatchedDesign &design, int target_lag) {
    if (target_lag < 0 || target_lag >= design.lag_count()) {
        throw DataError("design_deflation_r2: lag out of range");
    }
    return centered_r2(design, target_lag, nullptr);
}

double design_deflation_r2_cumulative(const MatchedDesign &design,
                                      const std::vector<double> &weights) {
    return centered_r2(design, 0, &weights);
}

double delta_var_pow(double mean_x, double var_x, double gamma) {
    return gamma * gamma * std::pow(mean_x, 2.0 * (gamma - 1.0)) * var_x;
}

double sigma_bar_multiplicative(const std::vector<double> &log_ep_variances, double mean_x,
                                double gamma_m1, double r2_log) {
    if (!(mean_x > 0.0)) {
        throw DataError("sigma_bar_multiplicative: mean_x must be positive");
    }
    if (!(gamma_m1 > 0.0)) {
        throw DataError("sigma_bar_multiplicative: gamma_m1 must be positive");
    }
    if (!(r2_log > 0.0 && r2_log <= 1.0)) {
        throw DataError("sigma_bar_multiplicative: r2_log must be in (0,1]");
    }
    const double mean_var =
        std::accumulate(log_ep_variances.begin(), log_ep_variances.end(), 0.0) /
        static_cast<double>(log_ep_variances.size());
    return mean_var * std::pow(mean_x, 2.0 * gamma_m1) * r2_log;
}

double sigma_bar_factor_c(double sigma_bar_ep, double c) {
    if (!(c > 0.0)) {
        throw ConfigError("sigma_bar_factor_c: c must be positive");
    }
    return sigma_bar_ep * c;
}

} // namespace powerlag
