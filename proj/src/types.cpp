#include "powerlag/types.hpp"

#include "powerlag/errors.hpp"
#include "powerlag/mathutil.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace powerlag {

LagEffect LagEffect::from_theta(std::vector<double> theta) {
    if (theta.empty()) {
        throw ConfigError("effect.theta: at least one lag coefficient required");
    }
    LagEffect e;
    e.theta = std::move(theta);
    e.theta_bar = std::accumulate(e.theta.begin(), e.theta.end(), 0.0);
    if (e.theta_bar == 0.0) {
        throw ConfigError("effect.theta: theta_bar is zero, weights cannot be derived");
    }
    e.weights.reserve(e.theta.size());
    for (double t : e.theta) {
        e.weights.push_back(t / e.theta_bar);
    }
    return e;
}

LagEffect LagEffect::with_weights(std::vector<double> theta, std::vector<double> weights) {
    if (theta.size() != weights.size()) {
        throw ConfigError("effect.weights: length must match effect.theta");
    }
    LagEffect e;
    e.theta = std::move(theta);
    e.theta_bar = std::accumulate(e.theta.begin(), e.theta.end(), 0.0);
    e.weights = std::move(weights);
    return e;
}

void TestSpec::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ConfigError("test.alpha: must be in (0,1)");
    }
    if (!(power_target > 0.0 && power_target < 1.0)) {
        throw ConfigError("test.power: must be in (0,1)");
    }
    if (!(alpha + (1.0 - power_target) < 1.0)) {
        throw ConfigError("test: alpha + (1 - power) must be < 1");
    }
}

double TestSpec::z_alpha() const {
    double a = sided == Sidedness::TwoSided ? alpha / 2.0 : alpha;
    return norm_quantile(1.0 - a);
}

double TestSpec::z_power() const { return norm_quantile(power_target); }

void ExposurePanel::validate() const {
    if (static_cast<Eigen::Index>(unit_ids.size()) != values.rows() ||
        static_cast<Eigen::Index>(times.size()) != values.cols()) {
        throw DataError("panel: matrix dimensions inconsistent with id lists");
    }
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (times[i] <= times[i - 1]) {
            throw DataError("panel: times must be strictly increasing");
        }
    }
    if (!values.allFinite()) {
        throw DataError("panel: missing or non-finite cells");
    }
}

int MatchedDesign::lag_count() const {
    return strata.empty() ? 0 : static_cast<int>(strata.front().rows.cols());
}

void MatchedDesign::validate() const {
    const int cols = lag_count();
    for (std::size_t h = 0; h < strata.size(); ++h) {
        const auto &s = strata[h];
        if (s.rows.rows() < 2) {
            throw DataError("design: stratum " + std::to_string(h) + " has fewer than 2 rows");
        }
        if (s.rows.cols() != cols) {
            throw DataError("design: stratum " + std::to_string(h) + " lag count differs");
        }
        if (s.covariates && s.covariates->rows() != s.rows.rows()) {
            throw DataError("design: stratum " + std::to_string(h) +
                            " covariates not aligned with rows");
        }
    }
}

bool is_multiplicative(ErrorFamily family) {
    switch (family) {
    case ErrorFamily::MultBerksonLike:
    case ErrorFamily::MultLinearLike:
    case ErrorFamily::MultClassical:
        return true;
    default:
        return false;
    }
}

bool needs_aggregation(ErrorFamily family) {
    switch (family) {
    case ErrorFamily::AdditiveBerkson:
    case ErrorFamily::AdditiveBerksonLike:
    case ErrorFamily::MultBerksonLike:
        return true;
    default:
        return false;
    }
}

std::string family_name(ErrorFamily family) {
    switch (family) {
    case ErrorFamily::AdditiveBerkson:
        return "additive_berkson";
    case ErrorFamily::AdditiveBerksonLike:
        return "additive_berkson_like";
    case ErrorFamily::AdditiveLinear:
        return "additive_linear";
    case ErrorFamily::AdditiveLinearLike:
        return "additive_linear_like";
    case ErrorFamily::MultBerksonLike:
        return "mult_berkson_like";
    case ErrorFamily::MultLinearLike:
        return "mult_linear_like";
    case ErrorFamily::MultClassical:
        return "mult_classical";
    }
    return "?";
}

std::string bias_mode_name(BiasMode mode) {
    switch (mode) {
    case BiasMode::None:
        return "none";
    case BiasMode::Eq19Plus:
        return "eq19_plus";
    case BiasMode::Eq19Minus:
        return "eq19_minus";
    case BiasMode::Eq20:
        return "eq20";
    case BiasMode::Calibration:
        return "calibration";
    case BiasMode::Bl:
        return "bl";
    case BiasMode::Mb:
        return "mb";
    case BiasMode::Mc:
        return "mc";
    case BiasMode::Poly:
        return "poly";
    }
    return "?";
}

void ErrorSpec::validate() const {
    if (noise_scale < 0.0 || iid_noise_var < 0.0) {
        throw ConfigError("error: noise scales must be nonnegative");
    }
    if (!(autocorr.rho_time >= 0.0 && autocorr.rho_time < 1.0) ||
        !(autocorr.rho_space >= 0.0 && autocorr.rho_space < 1.0)) {
        throw ConfigError("error.autocorr: coefficients must lie in [0,1)");
    }
    // shape == 0 disables the e2 component entirely.
    if (gamma_noise.shape < 0.0 || (gamma_noise.shape > 0.0 && !(gamma_noise.rate > 0.0))) {
        throw ConfigError("error.gamma_noise: shape must be >= 0 and rate positive");
    }
}

std::string ValidationReport::to_string() const {
    std::ostringstream os;
    for (const auto &v : violations) {
        os << v.field << ": " << v.message << "\n";
    }
    return os.str();
}

ValidationReport validate_scenario(ScenarioConfig &cfg) {
    ValidationReport report;
    auto fail = [&](std::string field, std::string msg) {
        report.violations.push_back({std::move(field), std::move(msg)});
    };

    if (!(cfg.test.alpha > 0.0 && cfg.test.alpha < 1.0)) {
        fail("test.alpha", "must be in (0,1)");
    }
    if (!(cfg.test.power_target > 0.0 && cfg.test.power_target < 1.0)) {
        fail("test.power", "must be in (0,1)");
    } else if (!(cfg.test.alpha + (1.0 - cfg.test.power_target) < 1.0)) {
        fail("test", "alpha + (1 - power) must be < 1");
    }

    if (cfg.effect.theta.empty()) {
        fail("effect.theta", "at least one lag coefficient required");
    } else {
        double sum = std::accumulate(cfg.effect.theta.begin(), cfg.effect.theta.end(), 0.0);
        cfg.effect.theta_bar = sum;
        if (cfg.effect.weights.empty()) {
            if (sum == 0.0 && cfg.target.cumulative) {
                fail("effect.theta", "theta_bar is zero, weights cannot be derived");
            } else if (sum != 0.0) {
                cfg.effect.weights.clear();
                for (double t : cfg.effect.theta) {
                    cfg.effect.weights.push_back(t / sum);
                }
            }
        } else if (cfg.effect.weights.size() != cfg.effect.theta.size()) {
            fail("effect.weights", "length must match effect.theta");
        }
    }
    if (!cfg.target.cumulative &&
        (cfg.target.lag < 0 || cfg.target.lag > cfg.effect.max_lag())) {
        fail("effect.target", "lag index out of range");
    }

    if (!(cfg.deflation_r2 >= 0.0 && cfg.deflation_r2 < 1.0)) {
        fail("variance.deflation_r2", "must be < 1");
    }
    for (double r2 : cfg.deflation_r2_sweep) {
        if (!(r2 >= 0.0 && r2 < 1.0)) {
            fail("variance.deflation_r2", "sweep value must be < 1");
        }
    }

    if (cfg.error) {
        try {
            cfg.error->validate();
        } catch (const ConfigError &e) {
            fail("error", e.what());
        }
    }

    if ((cfg.bias_mode == BiasMode::Calibration || cfg.bias_mode == BiasMode::Bl) &&
        cfg.validation_path.empty()) {
        fail("bias.validation", "required for calibration/bl modes");
    }
    if (cfg.bias_mode == BiasMode::Eq19Plus || cfg.bias_mode == BiasMode::Eq19Minus ||
        cfg.bias_mode == BiasMode::Eq20 || cfg.bias_mode == BiasMode::Poly) {
        if (!(cfg.bias_r2 > 0.0 && cfg.bias_r2 <= 1.0)) {
            fail("bias.r2", "must be in (0,1]");
        }
        if (cfg.bias_gamma1 == 0.0) {
            fail("bias.gamma1", "must be nonzero");
        }
    }

    if (cfg.sim.replicates < 0) {
        fail("sim.replicates", "must be >= 1 when simulation is enabled");
    }
    if (cfg.sim.units < 1 || cfg.sim.days < 1) {
        fail("sim", "units and days must be positive");
    }
    if (cfg.sim.groups < 1 || cfg.sim.groups > cfg.sim.units) {
        fail("sim.groups", "must be in [1, units]");
    }
    if (cfg.variance_source == ScenarioConfig::VarianceSource::Value &&
        !(cfg.sigma_bar_sq > 0.0)) {
        fail("variance.sigma_bar_sq", "must be positive");
    }
    if (cfg.variance_source == ScenarioConfig::VarianceSource::File && cfg.panel_path.empty()) {
        fail("variance.panel", "required when source = file");
    }
    if (cfg.controls_per_case < 1) {
        fail("variance.controls_per_case", "must be >= 1");
    }

    return report;
}

} // namespace powerlag
