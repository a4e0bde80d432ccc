#include "powerlag/clogit.hpp"

#include "powerlag/errors.hpp"
#include "powerlag/mathutil.hpp"

#include <cmath>

namespace powerlag {

namespace {

// Full predictor matrix for one stratum: lag columns then covariates.
Eigen::MatrixXd stratum_predictors(const Stratum &s) {
    if (!s.covariates) {
        return s.rows;
    }
    Eigen::MatrixXd x(s.rows.rows(), s.rows.cols() + s.covariates->cols());
    x << s.rows, *s.covariates;
    return x;
}

int predictor_count(const MatchedDesign &design) {
    const auto &s = design.strata.front();
    return static_cast<int>(s.rows.cols() + (s.covariates ? s.covariates->cols() : 0));
}

} // namespace

double clogit_loglik(const Eigen::VectorXd &theta, const MatchedDesign &design) {
    double ll = 0.0;
    for (const auto &s : design.strata) {
        const Eigen::MatrixXd x = stratum_predictors(s);
        Eigen::VectorXd eta = x * theta;
        const double shift = eta.maxCoeff();
        ll += eta(0) - shift - std::log((eta.array() - shift).exp().sum());
    }
    return ll;
}

void clogit_score_info(const Eigen::VectorXd &theta, const MatchedDesign &design,
                       Eigen::VectorXd &score, Eigen::MatrixXd &info) {
    const int p = static_cast<int>(theta.size());
    score = Eigen::VectorXd::Zero(p);
    info = Eigen::MatrixXd::Zero(p, p);
    for (const auto &s : design.strata) {
        const Eigen::MatrixXd x = stratum_predictors(s);
        Eigen::VectorXd eta = x * theta;
        const double shift = eta.maxCoeff();
        Eigen::VectorXd w = (eta.array() - shift).exp();
        w /= w.sum();

        Eigen::VectorXd mean = x.transpose() * w;
        score += x.row(0).transpose() - mean;
        // Cov_w[x] = E_w[x x'] - mean mean'
        Eigen::MatrixXd second = x.transpose() * w.asDiagonal() * x;
        info += second - mean * mean.transpose();
    }
}

ClogitFit clogit_fit(const MatchedDesign &design, const Eigen::VectorXd &start, int max_iter,
                     double tol) {
    if (design.strata.empty()) {
        throw DataError("clogit_fit: empty design");
    }
    design.validate();
    const int p = predictor_count(design);
    if (start.size() != p) {
        throw DataError("clogit_fit: start vector dimension mismatch");
    }

    bool informative = false;
    for (const auto &s : design.strata) {
        const Eigen::MatrixXd x = stratum_predictors(s);
        if ((x.rowwise() - x.colwise().mean()).squaredNorm() > 0.0) {
            informative = true;
            break;
        }
    }
    if (!informative) {
        throw DataError("clogit_fit: no informative stratum (zero within-stratum variation)");
    }

    ClogitFit fit;
    fit.theta_hat = start;
    fit.loglik = clogit_loglik(fit.theta_hat, design);

    Eigen::VectorXd score(p);
    Eigen::MatrixXd info(p, p);
    constexpr double separation_bound = 50.0;

    for (int iter = 1; iter <= max_iter; ++iter) {
        fit.iterations = iter;
        clogit_score_info(fit.theta_hat, design, score, info);

        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
            throw NumericError("clogit_fit: singular information matrix");
        }
        Eigen::VectorXd step = ldlt.solve(score);

        // Monotone likelihoods drive the score to numerical zero while the
        // Newton step stays O(1); converge only when both are small. A flat
        // score with collapsed information is saturated separation, not an
        // interior optimum.
        if (score.lpNorm<Eigen::Infinity>() <= tol * (1.0 + std::abs(fit.loglik)) &&
            step.lpNorm<Eigen::Infinity>() <=
                1e-6 * (1.0 + fit.theta_hat.lpNorm<Eigen::Infinity>())) {
            const double dmax = info.diagonal().cwiseAbs().maxCoeff();
            fit.status = ldlt.vectorD().minCoeff() <= 1e-10 * (1.0 + dmax)
                             ? FitStatus::Separated
                             : FitStatus::Converged;
            break;
        }

        // Step-halve until the likelihood does not decrease; the tolerance is
        // relative, since rounding noise in the log-sum-exp sum scales with
        // |loglik| and would otherwise block the final step near the optimum.
        const double ll_tol = 1e-12 * (1.0 + std::abs(fit.loglik));
        double scale = 1.0;
        Eigen::VectorXd candidate;
        double ll_new = -std::numeric_limits<double>::infinity();
        for (int half = 0; half < 30; ++half) {
            candidate = fit.theta_hat + scale * step;
            ll_new = clogit_loglik(candidate, design);
            if (ll_new >= fit.loglik - ll_tol) {
                break;
            }
            scale *= 0.5;
        }

        fit.theta_hat = candidate;
        fit.loglik = ll_new;

        if (fit.theta_hat.lpNorm<Eigen::Infinity>() > separation_bound) {
            fit.status = FitStatus::Separated;
            break;
        }
    }

    clogit_score_info(fit.theta_hat, design, score, info);
    if (fit.status == FitStatus::Converged) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
            throw NumericError("clogit_fit: singular information at the optimum");
        }
        fit.cov = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    } else {
        fit.cov = Eigen::MatrixXd::Constant(p, p, std::numeric_limits<double>::quiet_NaN());
    }
    return fit;
}

ClogitFit clogit_fit(const MatchedDesign &design) {
    const auto &s = design.strata.front();
    const int p =
        static_cast<int>(s.rows.cols() + (s.covariates ? s.covariates->cols() : 0));
    return clogit_fit(design, Eigen::VectorXd::Zero(p));
}

WaldResult wald_test(const ClogitFit &fit, const Eigen::VectorXd &contrast, double alpha,
                     Sidedness sided) {
    if (fit.status != FitStatus::Converged) {
        throw NumericError("wald_test: fit did not converge");
    }
    if (contrast.size() != fit.theta_hat.size()) {
        throw DataError("wald_test: contrast dimension mismatch");
    }
    const double var = contrast.dot(fit.cov * contrast);
    if (!(var > 0.0)) {
        throw NumericError("wald_test: nonpositive contrast variance");
    }
    WaldResult res;
    res.statistic = contrast.dot(fit.theta_hat) / std::sqrt(var);
    if (sided == Sidedness::TwoSided) {
        res.reject = std::abs(res.statistic) >= norm_quantile(1.0 - alpha / 2.0);
    } else {
        res.reject = res.statistic >= norm_quantile(1.0 - alpha);
    }
    return res;
}

} // namespace powerlag
