#pragma once

namespace powerlag {

// Standard normal density, CDF, and inverse CDF.
//
// norm_quantile is accurate to ~1e-15 absolute (rational approximation
// refined by one Halley step); sample-size results are quadratically
// sensitive to the quantile sum, so this matters.
double norm_pdf(double x);
double norm_cdf(double x);
double norm_quantile(double p);

} // namespace powerlag
