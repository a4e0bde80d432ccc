#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace powerlag {

/// Lag coefficient vector theta_0..theta_L (log-odds per exposure unit),
/// its cached sum theta_bar, and cumulative-exposure weights w_l.
/// Weights derived from theta are theta_l / theta_bar and sum to 1;
/// pre-specified weights may be attached instead.
struct LagEffect {
    std::vector<double> theta;
    double theta_bar = 0.0;
    std::vector<double> weights;

    static LagEffect from_theta(std::vector<double> theta);
    static LagEffect with_weights(std::vector<double> theta, std::vector<double> weights);

    int max_lag() const { return static_cast<int>(theta.size()) - 1; }
};

enum class Sidedness { OneSided, TwoSided };

struct TestSpec {
    double alpha = 0.05;
    double power_target = 0.8;
    Sidedness sided = Sidedness::TwoSided;

    void validate() const; // throws ConfigError

    // Z_{1-alpha} (or Z_{1-alpha/2} for two-sided) and Z_{1-beta}.
    double z_alpha() const;
    double z_power() const;
};

enum class PanelKind { Truth, Measured };

/// Dense unit x time matrix of continuous exposure values.
struct ExposurePanel {
    std::vector<std::string> unit_ids;
    std::vector<int> times; // strictly increasing day indices
    Eigen::MatrixXd values; // rows = units, cols = times
    PanelKind kind = PanelKind::Truth;

    std::size_t n_units() const { return unit_ids.size(); }
    std::size_t n_times() const { return times.size(); }
    void validate() const; // throws DataError
};

/// One case (row 0) plus m_h-1 controls with pre-lagged exposure rows.
struct Stratum {
    Eigen::MatrixXd rows;                   // m_h x (L+1), row 0 is the case
    std::optional<Eigen::MatrixXd> covariates; // m_h x p, aligned with rows
};

struct MatchedDesign {
    std::vector<Stratum> strata;

    std::size_t n_strata() const { return strata.size(); }
    int lag_count() const; // L+1; 0 for empty design
    void validate() const; // throws DataError
};

enum class ErrorFamily {
    AdditiveBerkson,
    AdditiveBerksonLike,
    AdditiveLinear,
    AdditiveLinearLike,
    MultBerksonLike,
    MultLinearLike,
    MultClassical,
};

bool is_multiplicative(ErrorFamily family);
bool needs_aggregation(ErrorFamily family);
std::string family_name(ErrorFamily family);

/// Parametric description of one measurement-error regime.
struct ErrorSpec {
    ErrorFamily family = ErrorFamily::AdditiveLinear;
    double gamma0 = 0.0;   // additive-scale intercept
    double gamma1 = 1.0;   // additive-scale slope
    double gamma_m0 = 0.0; // log-scale intercept
    double gamma_m1 = 1.0; // log-scale slope
    double noise_scale = 0.0;  // kappa multiplying the structured noise e1
    double iid_noise_var = 0.0; // phi^2 for the iid u^B / u^L component
    struct {
        double rho_time = 0.0;
        double rho_space = 0.0;
    } autocorr; // structured noise e1
    struct {
        double shape = 1.0;
        double rate = 1.0;
    } gamma_noise; // e2
    void validate() const;
};

enum class BiasMode { None, Eq19Plus, Eq19Minus, Eq20, Calibration, Bl, Mb, Mc, Poly };

std::string bias_mode_name(BiasMode mode);

struct TargetLag {
    bool cumulative = true;
    int lag = 0; // consulted only when !cumulative
};

struct SimConfig {
    int replicates = 0;
    int units = 100;
    int days = 120;
    int groups = 10;
    std::uint64_t seed = 1;
    double K = 1.0;
    // p0(t) = a + b*sin(2*pi*t/365 + phase)
    double baseline_a = 0.02;
    double baseline_b = 0.005;
    double baseline_phase = 0.0;
    double exposure_mean = 12.0;
    double exposure_var = 13.8;
    double exposure_rho_time = 0.5;
    double exposure_rho_space = 0.3;
    bool confounders = false;
    int threads = 0; // 0 = auto
    std::vector<int> n_grid; // power-curve grid
    // civil date of day index 0
    int epoch_year = 2020;
    int epoch_month = 6;
    int epoch_day = 1;
};

/// A full study-design question.
struct ScenarioConfig {
    TestSpec test;
    LagEffect effect;
    TargetLag target;
    double deflation_r2 = 0.0;
    std::optional<ErrorSpec> error;
    BiasMode bias_mode = BiasMode::None;
    // bias inputs (Eq. 19/20, closed forms)
    double bias_r2 = 1.0;    // R^2_{x^ep,x}
    double bias_gamma1 = 1.0;
    std::vector<double> bias_r2_sweep;
    std::vector<double> bias_gamma1_sweep;
    std::vector<double> deflation_r2_sweep;
    std::vector<int> controls_sweep;
    double mean_exp_u = 1.0; // mb mode
    double mc_var_x = 1.0;   // mc mode
    double mc_mean_x = 0.0;
    double mc_var_u = 0.0;
    std::string validation_path;
    // variance source
    enum class VarianceSource { Value, File, Synthetic } variance_source = VarianceSource::Synthetic;
    double sigma_bar_sq = 1.0; // when Value
    std::string panel_path;    // when File
    int variance_strata = 400; // strata resampled for File/Synthetic
    int controls_per_case = 3;
    std::uint64_t resample_seed = 1;
    SimConfig sim;
    std::string output_dir = "out";
};

struct Violation {
    std::string field;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
    std::string to_string() const;
};

/// Normalizes a parsed config (derives weights, fills defaults) or reports
/// every invariant violation with its field path.
ValidationReport validate_scenario(ScenarioConfig &cfg);

/// Heteroskedastic variance summary: sigma_bar_sq is the (weighted) mean of
/// per-stratum variances sigma_h^2.
struct VarianceSummary {
    double sigma_bar_sq = 0.0;
    std::optional<std::vector<double>> per_stratum;
    std::string weights_used;
};

} // namespace powerlag
