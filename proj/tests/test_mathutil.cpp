#include "powerlag/mathutil.hpp"

#include <doctest.h>

#include <cmath>
#include <initializer_list>

using namespace powerlag;

TEST_CASE("norm_quantile matches reference values") {
    // Reference quantiles (R qnorm, 15 digits).
    CHECK(norm_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(norm_quantile(0.8) == doctest::Approx(0.841621233572914).epsilon(1e-12));
    CHECK(norm_quantile(0.95) == doctest::Approx(1.644853626951472).epsilon(1e-12));
    CHECK(norm_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(norm_quantile(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-12));
    CHECK(norm_quantile(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-10));
}

TEST_CASE("norm_cdf round-trips the quantile to 1e-10") {
    for (double p = 0.0005; p < 1.0; p += 0.0103) {
        const double x = norm_quantile(p);
        CHECK(norm_cdf(x) == doctest::Approx(p).epsilon(1e-10));
    }
}

TEST_CASE("norm_quantile rejects arguments outside (0,1)") {
    CHECK_THROWS(norm_quantile(0.0));
    CHECK_THROWS(norm_quantile(1.0));
    CHECK_THROWS(norm_quantile(-0.1));
}

TEST_CASE("norm_pdf is the derivative of norm_cdf") {
    for (double x : {-2.0, -0.7, 0.0, 0.3, 1.9}) {
        const double h = 1e-6;
        const double fd = (norm_cdf(x + h) - norm_cdf(x - h)) / (2 * h);
        CHECK(norm_pdf(x) == doctest::Approx(fd).epsilon(1e-8));
    }
}
