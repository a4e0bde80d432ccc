#pragma once

#include "powerlag/types.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace powerlag {

struct IterationRecord {
    int n;
    double sigma_bar_sq;
};

struct SampleSizeResult {
    int n = 0;                // number of cases = strata
    double n_unrounded = 0.0; // pre-ceiling value
    double effective_effect = 0.0;
    double sigma_bar_sq = 0.0;
    double deflation_r2 = 0.0;
    double vcf = 1.0;
    double achieved_power = 0.0;
    std::vector<IterationRecord> trace;
};

/// SE(theta_hat) = 1 / sqrt(n sigma_bar^2 (1 - R^2)).
double se_approx(int n, double sigma_bar_sq, double deflation_r2);

/// SE under multiplicative error: sqrt(A + theta^2 B) with
/// A = [n sigma_bar^2_ML (1-R^2)]^-1 and B = [n sigma_bar^2_errfactor (1-R^2)]^-1.
double se_multiplicative(int n, double sigma_bar_ml, double sigma_bar_errfactor,
                         double theta_ml, double deflation_r2);

/// Variance correction factor A / (A + theta^2 B); n cancels; value in (0,1].
double vcf(double sigma_bar_ml, double sigma_bar_errfactor, double theta_ml);

/// n = ceil( (Z_{1-alpha(/2)} + Z_{1-power})^2 / (theta^2 sigma_bar^2 (1-R^2) VCF) ).
/// Any bias to the effect (theta^L, theta^LL, theta^BL, theta^ML...) must be
/// composed into effective_effect by the caller.
SampleSizeResult sample_size(double effective_effect, double sigma_bar_sq, double deflation_r2,
                             const TestSpec &test, double vcf = 1.0);

/// Supplies sigma_h^2 for stratum index h (0-based), or nullopt when the
/// pool is exhausted. Both synthetic pools and ingested panels drive the
/// same fixed-point loop through this signature.
using VarianceStream = std::function<std::optional<double>(std::size_t)>;

/// Fixed-point iteration on (n, sigma_bar^2): start from the mean of the
/// first initial_k variances, recompute sigma_bar^2 over the first n strata,
/// stop when n repeats; a 2-cycle resolves to the larger n.
SampleSizeResult sample_size_iterative(const VarianceStream &variances, double effective_effect,
                                       double deflation_r2, const TestSpec &test,
                                       std::size_t initial_k = 10);

/// Phi( |theta| sqrt(n sigma_bar^2 (1-R^2) VCF) - Z_{1-alpha(/2)} ), clamped to [0,1].
double power_at(int n, double effective_effect, double sigma_bar_sq, double deflation_r2,
                const TestSpec &test, double vcf = 1.0);

enum class DesignKind { MatchedClr, UnconditionalLogistic, LinearContinuous };

/// Multiplier on the n formula for other designs: matched CLR is the base
/// case, unconditional logistic divides by incidence (1 - incidence), linear
/// regression multiplies by the outcome variance.
double design_modifier(DesignKind kind, double param = 0.0);

} // namespace powerlag
