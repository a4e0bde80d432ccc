#include "powerlag/bias.hpp"

#include "powerlag/errors.hpp"
#include "powerlag/variance.hpp"

#include <cmath>
#include <unordered_map>

namespace powerlag {

void ValidationDesign::validate() const {
    if (true_lags.rows() != meas_lags.rows() || true_lags.cols() != meas_lags.cols()) {
        throw DataError("validation: truth and measured lag matrices not aligned");
    }
    if (covariates.size() > 0 && covariates.rows() != true_lags.rows()) {
        throw DataError("validation: covariate rows not aligned");
    }
    const Eigen::Index need = 10 * (true_lags.cols() + 2);
    if (true_lags.rows() < need) {
        throw DataError("validation: needs at least 10 x (L+2) rows, got " +
                        std::to_string(true_lags.rows()));
    }
}

ValidationDesign build_validation_design(const ExposurePanel &truth,
                                         const ExposurePanel &measured, int max_lag) {
    truth.validate();
    measured.validate();
    if (truth.n_units() != measured.n_units() || truth.n_times() != measured.n_times()) {
        throw DataError("validation: truth and measured panels have different shape");
    }
    const int T = static_cast<int>(truth.n_times());
    const int U = static_cast<int>(truth.n_units());
    if (T <= max_lag) {
        throw DataError("validation: not enough time points for the requested lag");
    }

    const Eigen::Index rows = static_cast<Eigen::Index>(U) * (T - max_lag);
    ValidationDesign v;
    v.true_lags.resize(rows, max_lag + 1);
    v.meas_lags.resize(rows, max_lag + 1);
    Eigen::Index r = 0;
    for (int i = 0; i < U; ++i) {
        for (int t = max_lag; t < T; ++t, ++r) {
            for (int l = 0; l <= max_lag; ++l) {
                v.true_lags(r, l) = truth.values(i, t - l);
                v.meas_lags(r, l) = measured.values(i, t - l);
            }
        }
    }
    return v;
}

namespace {

Eigen::MatrixXd calibration_regressors(const ValidationDesign &v) {
    const Eigen::Index n = v.meas_lags.rows();
    const Eigen::Index p = 1 + v.meas_lags.cols() + v.covariates.cols();
    Eigen::MatrixXd x(n, p);
    x.col(0).setOnes();
    x.middleCols(1, v.meas_lags.cols()) = v.meas_lags;
    if (v.covariates.cols() > 0) {
        x.rightCols(v.covariates.cols()) = v.covariates;
    }
    return x;
}

} // namespace

CalibrationFit compute_calibration(const ValidationDesign &validation) {
    validation.validate();
    const int lp1 = validation.lag_count();
    const Eigen::MatrixXd x = calibration_regressors(validation);

    CalibrationFit fit;
    fit.eta_star.resize(lp1, lp1);
    fit.resid_vectors.reserve(lp1);
    for (int j = 0; j < lp1; ++j) {
        OlsFit ols = ols_fit(validation.true_lags.col(j), x);
        fit.eta_star.row(j) = ols.coef.segment(1, lp1).transpose();
        fit.resid_vectors.push_back(std::move(ols.residuals));
    }
    fit.resid_coefs.resize(lp1, lp1);
    for (int k = 0; k < lp1; ++k) {
        OlsFit ols = ols_fit(fit.resid_vectors[k], x);
        fit.resid_coefs.row(k) = ols.coef.segment(1, lp1).transpose();
    }
    return fit;
}

double lambda_linear(double gamma1, double var_x_given_z, double var_u) {
    if (!(var_x_given_z > 0.0)) {
        throw NumericError("lambda_linear: var_x_given_z must be positive");
    }
    if (var_u < 0.0) {
        throw NumericError("lambda_linear: var_u must be nonnegative");
    }
    return gamma1 * var_x_given_z / (gamma1 * gamma1 * var_x_given_z + var_u);
}

double theta_eq19(const LagEffect &theta, double r2, double gamma1, Eq19Sign sign, int lag) {
    if (!(r2 > 0.0 && r2 <= 1.0)) {
        throw ConfigError("theta_eq19: r2 must be in (0,1]");
    }
    if (gamma1 == 0.0) {
        throw ConfigError("theta_eq19: gamma1 must be nonzero");
    }
    if (lag < 0 || lag > theta.max_lag()) {
        throw ConfigError("theta_eq19: lag out of range");
    }
    double others = 0.0;
    for (int j = 0; j <= theta.max_lag(); ++j) {
        if (j != lag) {
            others += theta.theta[j];
        }
    }
    const double s = sign == Eq19Sign::Plus ? 1.0 : -1.0;
    return r2 * (theta.theta[lag] + s * (1.0 - r2) * others) / gamma1;
}

double theta_eq20(double theta_or_bar, double r2, double gamma1) {
    if (gamma1 == 0.0) {
        throw ConfigError("theta_eq20: gamma1 must be nonzero");
    }
    return r2 * theta_or_bar / gamma1;
}

BiasReport calib_bias_approx(const ValidationDesign &validation, const LagEffect &theta) {
    const int lp1 = validation.lag_count();
    if (static_cast<int>(theta.theta.size()) != lp1) {
        throw DataError("calib_bias_approx: effect lag count differs from validation data");
    }
    const CalibrationFit fit = compute_calibration(validation);

    BiasReport report;
    report.method = "calibration";
    report.theta_biased.assign(lp1, 0.0);
    double max_resid_coef = 0.0;
    for (int l = 0; l < lp1; ++l) {
        double value = 0.0;
        for (int j = 0; j < lp1; ++j) {
            value += theta.theta[j] * fit.eta_star(j, l);
        }
        for (int k = 0; k < lp1; ++k) {
            value += theta.theta[k] * fit.resid_coefs(k, l);
            max_resid_coef = std::max(max_resid_coef, std::abs(fit.resid_coefs(k, l)));
        }
        report.theta_biased[l] = value;
        report.theta_bar_biased += value;
    }
    // In-sample calibration makes the residual term vanish identically;
    // users wanting a nonzero term must supply holdout data.
    report.inputs.emplace_back("max_resid_coef", max_resid_coef);
    report.inputs.emplace_back("rows", static_cast<double>(validation.true_lags.rows()));
    return report;
}

BiasReport bl_bias_approx(const ExposurePanel &unit_truth, const ExposurePanel &group_measured,
                          const std::vector<std::string> &group_of_unit,
                          const LagEffect &theta, int max_lag) {
    unit_truth.validate();
    group_measured.validate();
    if (group_of_unit.size() != unit_truth.n_units()) {
        throw DataError("bl_bias_approx: mapping size differs from unit panel");
    }
    if (unit_truth.n_times() != group_measured.n_times()) {
        throw DataError("bl_bias_approx: panels cover different times");
    }
    std::unordered_map<std::string, int> group_index;
    for (std::size_t g = 0; g < group_measured.n_units(); ++g) {
        group_index[group_measured.unit_ids[g]] = static_cast<int>(g);
    }

    const int lp1 = max_lag + 1;
    if (static_cast<int>(theta.theta.size()) != lp1) {
        throw DataError("bl_bias_approx: effect lag count differs from max_lag");
    }
    const int T = static_cast<int>(unit_truth.n_times());
    const int U = static_cast<int>(unit_truth.n_units());
    if (T <= max_lag) {
        throw DataError("bl_bias_approx: not enough time points");
    }

    const Eigen::Index rows = static_cast<Eigen::Index>(U) * (T - max_lag);
    Eigen::MatrixXd u_bl(rows, lp1); // u^BL_{t-k} per column k
    Eigen::MatrixXd x(rows, 1 + lp1);
    x.col(0).setOnes();
    Eigen::Index r = 0;
    for (int i = 0; i < U; ++i) {
        auto it = group_index.find(group_of_unit[i]);
        if (it == group_index.end()) {
            throw DataError("bl_bias_approx: unit " + unit_truth.unit_ids[i] +
                            " maps to unknown group " + group_of_unit[i]);
        }
        const int g = it->second;
        for (int t = max_lag; t < T; ++t, ++r) {
            for (int l = 0; l <= max_lag; ++l) {
                const double xg = group_measured.values(g, t - l);
                u_bl(r, l) = unit_truth.values(i, t - l) - xg;
                x(r, 1 + l) = xg;
            }
        }
    }

    Eigen::MatrixXd rho(lp1, lp1);
    for (int k = 0; k < lp1; ++k) {
        OlsFit ols = ols_fit(u_bl.col(k), x);
        rho.row(k) = ols.coef.segment(1, lp1).transpose();
    }

    BiasReport report;
    report.method = "bl";
    report.theta_biased.assign(lp1, 0.0);
    report.correction.assign(lp1, 0.0);
    for (int l = 0; l < lp1; ++l) {
        double corr = 0.0;
        for (int k = 0; k < lp1; ++k) {
            corr += theta.theta[k] * rho(k, l);
        }
        report.correction[l] = corr;
        report.theta_biased[l] = theta.theta[l] + corr;
        report.theta_bar_biased += report.theta_biased[l];
    }
    return report;
}

double mb_bias(double theta, double mean_exp_u) {
    if (!(mean_exp_u > 0.0)) {
        throw NumericError("mb_bias: mean_exp_u must be positive");
    }
    return theta * mean_exp_u;
}

double mc_attenuation(double theta, double var_x_given_z, double mean_x_given_z, double var_u) {
    if (!(var_x_given_z > 0.0)) {
        throw NumericError("mc_attenuation: var_x_given_z must be positive");
    }
    const double denom = var_x_given_z * (1.0 + var_u) +
                         mean_x_given_z * mean_x_given_z * var_u;
    return theta * var_x_given_z / denom;
}

double poly_bias_factor(double r2, double gamma1) {
    if (gamma1 == 0.0) {
        throw ConfigError("poly_bias_factor: gamma1 must be nonzero");
    }
    return r2 * r2 / (gamma1 * gamma1);
}

BiasReport compose_ce(const BiasReport &theta_ll, const BiasReport &bl_terms) {
    if (theta_ll.theta_biased.size() != bl_terms.correction.size()) {
        throw DataError("compose_ce: lag count mismatch");
    }
    BiasReport report;
    report.method = "ce";
    report.theta_biased.resize(theta_ll.theta_biased.size());
    for (std::size_t l = 0; l < report.theta_biased.size(); ++l) {
        report.theta_biased[l] = theta_ll.theta_biased[l] + bl_terms.correction[l];
        report.theta_bar_biased += report.theta_biased[l];
    }
    return report;
}

} // namespace powerlag
