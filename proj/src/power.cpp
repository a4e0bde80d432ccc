#include "powerlag/power.hpp"

#include "powerlag/errors.hpp"
#include "powerlag/mathutil.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace powerlag {

namespace {
void check_se_inputs(int n, double sigma_bar_sq, double deflation_r2) {
    if (n < 1) {
        throw ConfigError("se_approx: n must be >= 1");
    }
    if (!(sigma_bar_sq > 0.0)) {
        throw NumericError("se_approx: sigma_bar_sq must be positive");
    }
    if (!(deflation_r2 >= 0.0 && deflation_r2 < 1.0)) {
        throw ConfigError("se_approx: deflation_r2 must be in [0,1)");
    }
}
} // namespace

double se_approx(int n, double sigma_bar_sq, double deflation_r2) {
    check_se_inputs(n, sigma_bar_sq, deflation_r2);
    return 1.0 / std::sqrt(static_cast<double>(n) * sigma_bar_sq * (1.0 - deflation_r2));
}

double se_multiplicative(int n, double sigma_bar_ml, double sigma_bar_errfactor,
                         double theta_ml, double deflation_r2) {
    check_se_inputs(n, sigma_bar_ml, deflation_r2);
    if (!(sigma_bar_errfactor > 0.0)) {
        throw NumericError("se_multiplicative: sigma_bar_errfactor must be positive");
    }
    const double nf = static_cast<double>(n) * (1.0 - deflation_r2);
    const double a = 1.0 / (nf * sigma_bar_ml);
    const double b = 1.0 / (nf * sigma_bar_errfactor);
    return std::sqrt(a + theta_ml * theta_ml * b);
}

double vcf(double sigma_bar_ml, double sigma_bar_errfactor, double theta_ml) {
    if (!(sigma_bar_ml > 0.0) || !(sigma_bar_errfactor > 0.0)) {
        throw NumericError("vcf: variances must be positive");
    }
    const double a = 1.0 / sigma_bar_ml;
    const double b = 1.0 / sigma_bar_errfactor;
    return a / (a + theta_ml * theta_ml * b);
}

namespace {
double n_unrounded(double effective_effect, double sigma_bar_sq, double deflation_r2,
                   const TestSpec &test, double vcf_value) {
    test.validate();
    if (effective_effect == 0.0) {
        throw NumericError("sample_size: zero effect implies infinite n");
    }
    if (!(sigma_bar_sq > 0.0)) {
        throw NumericError("sample_size: sigma_bar_sq must be positive");
    }
    if (!(deflation_r2 >= 0.0 && deflation_r2 < 1.0)) {
        throw ConfigError("sample_size: deflation_r2 must be in [0,1)");
    }
    if (!(vcf_value > 0.0 && vcf_value <= 1.0)) {
        throw ConfigError("sample_size: vcf must be in (0,1]");
    }
    const double z = test.z_alpha() + test.z_power();
    return z * z / (effective_effect * effective_effect * sigma_bar_sq *
                    (1.0 - deflation_r2) * vcf_value);
}
} // namespace

SampleSizeResult sample_size(double effective_effect, double sigma_bar_sq, double deflation_r2,
                             const TestSpec &test, double vcf) {
    SampleSizeResult res;
    res.n_unrounded = n_unrounded(effective_effect, sigma_bar_sq, deflation_r2, test, vcf);
    res.n = std::max(1, static_cast<int>(std::ceil(res.n_unrounded)));
    res.effective_effect = effective_effect;
    res.sigma_bar_sq = sigma_bar_sq;
    res.deflation_r2 = deflation_r2;
    res.vcf = vcf;
    res.achieved_power = power_at(res.n, effective_effect, sigma_bar_sq, deflation_r2, test, vcf);
    res.trace.push_back({res.n, sigma_bar_sq});
    return res;
}

SampleSizeResult sample_size_iterative(const VarianceStream &variances, double effective_effect,
                                       double deflation_r2, const TestSpec &test,
                                       std::size_t initial_k) {
    std::vector<double> pool;   // cached sigma_h^2 pulled so far
    std::vector<double> prefix; // running prefix sums
    auto ensure = [&](std::size_t count) {
        while (pool.size() < count) {
            auto v = variances(pool.size());
            if (!v) {
                throw DataError("sample_size_iterative: variance stream exhausted at stratum " +
                                std::to_string(pool.size()));
            }
            pool.push_back(*v);
            prefix.push_back((prefix.empty() ? 0.0 : prefix.back()) + *v);
        }
    };
    auto mean_first = [&](std::size_t count) {
        ensure(count);
        return prefix[count - 1] / static_cast<double>(count);
    };

    initial_k = std::max<std::size_t>(1, initial_k);
    double sbar = mean_first(initial_k);

    SampleSizeResult res;
    // Relaxation-damped fixed point: the averaged step keeps the trace
    // monotone instead of bouncing across the solution.
    int n = std::max(1, static_cast<int>(std::ceil(
                            n_unrounded(effective_effect, sbar, deflation_r2, test, 1.0))));
    res.trace.push_back({n, sbar});
    int prev = -1;
    for (int iter = 0; iter < 10000; ++iter) {
        sbar = mean_first(static_cast<std::size_t>(n));
        const double raw = n_unrounded(effective_effect, sbar, deflation_r2, test, 1.0);
        const int target = std::max(1, static_cast<int>(std::ceil(raw)));
        const int next = std::max(
            1, static_cast<int>(std::ceil(0.5 * (static_cast<double>(n) + target))));
        if (next == n) {
            break;
        }
        if (next == prev) {
            // 2-cycle: take the conservative (larger) n of the pair.
            const int resolved = std::max(next, n);
            sbar = mean_first(static_cast<std::size_t>(resolved));
            n = resolved;
            res.trace.push_back({n, sbar});
            break;
        }
        prev = n;
        n = next;
        res.trace.push_back({n, sbar});
    }

    res.n = n;
    res.sigma_bar_sq = mean_first(static_cast<std::size_t>(n));
    res.n_unrounded = n_unrounded(effective_effect, sbar, deflation_r2, test, 1.0);
    res.effective_effect = effective_effect;
    res.deflation_r2 = deflation_r2;
    res.vcf = 1.0;
    res.achieved_power = power_at(n, effective_effect, sbar, deflation_r2, test, 1.0);
    return res;
}

double power_at(int n, double effective_effect, double sigma_bar_sq, double deflation_r2,
                const TestSpec &test, double vcf) {
    check_se_inputs(n, sigma_bar_sq, deflation_r2);
    test.validate();
    const double drift = std::abs(effective_effect) *
                         std::sqrt(static_cast<double>(n) * sigma_bar_sq *
                                   (1.0 - deflation_r2) * vcf);
    const double p = norm_cdf(drift - test.z_alpha());
    return std::clamp(p, 0.0, 1.0);
}

double design_modifier(DesignKind kind, double param) {
    switch (kind) {
    case DesignKind::MatchedClr:
        return 1.0;
    case DesignKind::UnconditionalLogistic:
        if (!(param > 0.0 && param < 1.0)) {
            throw ConfigError("design_modifier: incidence must be in (0,1)");
        }
        return 1.0 / (param * (1.0 - param));
    case DesignKind::LinearContinuous:
        if (!(param > 0.0)) {
            throw ConfigError("design_modifier: outcome variance must be positive");
        }
        return param;
    }
    throw ConfigError("design_modifier: unknown kind");
}

} // namespace powerlag
