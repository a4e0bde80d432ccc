#include "powerlag/commands.hpp"

#include "powerlag/bias.hpp"
#include "powerlag/clogit.hpp"
#include "powerlag/errors.hpp"
#include "powerlag/error_sim.hpp"
#include "powerlag/mathutil.hpp"
#include "powerlag/panel_csv.hpp"
#include "powerlag/power.hpp"
#include "powerlag/rng.hpp"
#include "powerlag/scenario.hpp"
#include "powerlag/study_sim.hpp"
#include "powerlag/svg.hpp"
#include "powerlag/variance.hpp"
#include "powerlag/version.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <thread>

namespace powerlag::commands {

namespace {

struct Prepared {
    ScenarioConfig cfg;
    std::uint64_t hash = 0;
    std::uint64_t seed = 0;
};

Prepared prepare(const Options &opt) {
    if (opt.scenario_path.empty()) {
        throw ConfigError("--scenario <path> is required");
    }
    const std::string text = read_text_file(opt.scenario_path);
    Prepared p;
    p.cfg = parse_scenario(text, opt.scenario_path);
    p.hash = scenario_hash(text);

    ValidationReport report = validate_scenario(p.cfg);
    if (!report.ok()) {
        throw ConfigError(opt.scenario_path + ": invalid scenario\n" + report.to_string());
    }

    p.seed = p.cfg.sim.seed;
    if (const char *env = std::getenv("POWERLAG_SEED")) {
        p.seed = std::strtoull(env, nullptr, 10);
    }
    if (opt.seed) {
        p.seed = *opt.seed;
    }
    p.cfg.sim.seed = p.seed;
    if (!opt.out_dir.empty()) {
        p.cfg.output_dir = opt.out_dir;
    }
    if (opt.threads >= 0) {
        p.cfg.sim.threads = opt.threads;
    }
    return p;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::ofstream open_output(const Prepared &p, const std::string &name) {
    std::filesystem::create_directories(p.cfg.output_dir);
    const std::string path = p.cfg.output_dir + "/" + name;
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError(path + ": cannot open for writing");
    }
    out << "# powerlag " << kVersion << " scenario=" << hex64(p.hash) << " seed=" << p.seed
        << "\n";
    return out;
}

int guard(std::ostream &err, const std::function<void()> &body) {
    try {
        body();
        return 0;
    } catch (const ConfigError &e) {
        err << "config error: " << e.what() << "\n";
        return ConfigError::exit_code;
    } catch (const DataError &e) {
        err << "data error: " << e.what() << "\n";
        return DataError::exit_code;
    } catch (const NumericError &e) {
        err << "numerical failure: " << e.what() << "\n";
        return NumericError::exit_code;
    } catch (const std::exception &e) {
        err << "numerical failure: " << e.what() << "\n";
        return NumericError::exit_code;
    }
}

// ---- sigma_bar derivation ------------------------------------------------

// Strata resampled from a panel: random eligible (unit, day) case picks with
// referents subsampled to the requested controls-per-case.
MatchedDesign resample_strata(const ExposurePanel &panel, const Calendar &calendar, int max_lag,
                              int controls, int n_strata, std::uint64_t seed) {
    const auto pools = referent_pools(panel, calendar, max_lag);
    const int days = static_cast<int>(panel.n_times());
    const int units = static_cast<int>(panel.n_units());

    std::vector<int> eligible_days;
    for (int t = max_lag; t < days; ++t) {
        if (!pools[t].empty()) {
            eligible_days.push_back(t);
        }
    }
    if (eligible_days.empty()) {
        throw DataError("resample_strata: no day has a nonempty referent pool");
    }

    Rng rng(seed);
    MatchedDesign design;
    design.strata.reserve(n_strata);
    for (int s = 0; s < n_strata; ++s) {
        const int u = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(units));
        const int t = eligible_days[rng.next_u64() % eligible_days.size()];
        std::vector<int> refs = pools[t];
        // partial Fisher-Yates, keep the first `controls`
        const int keep = std::min<int>(controls, static_cast<int>(refs.size()));
        for (int i = 0; i < keep; ++i) {
            const int j = i + static_cast<int>(rng.next_u64() % (refs.size() - i));
            std::swap(refs[i], refs[j]);
        }
        refs.resize(keep);

        Stratum st;
        st.rows.resize(1 + keep, max_lag + 1);
        auto fill = [&](int row, int day) {
            for (int l = 0; l <= max_lag; ++l) {
                st.rows(row, l) = panel.values(u, day - l);
            }
        };
        fill(0, t);
        for (int j = 0; j < keep; ++j) {
            fill(1 + j, refs[j]);
        }
        design.strata.push_back(std::move(st));
    }
    return design;
}

struct SigmaBar {
    double value = 0.0;
    std::string source;
};

SigmaBar derive_sigma_bar(const ScenarioConfig &cfg, int controls, std::uint64_t seed) {
    SigmaBar sb;
    switch (cfg.variance_source) {
    case ScenarioConfig::VarianceSource::Value:
        sb.value = cfg.sigma_bar_sq;
        sb.source = "value";
        return sb;
    case ScenarioConfig::VarianceSource::File:
    case ScenarioConfig::VarianceSource::Synthetic: {
        ExposurePanel panel;
        if (cfg.variance_source == ScenarioConfig::VarianceSource::File) {
            panel = load_panel_csv(cfg.panel_path);
            sb.source = "file:" + cfg.panel_path;
        } else {
            panel = gen_exposure_panel(cfg.sim.units, cfg.sim.days, cfg.sim.exposure_mean,
                                       cfg.sim.exposure_var, cfg.sim.exposure_rho_time,
                                       cfg.sim.exposure_rho_space, mix_seed(seed, 901));
            sb.source = "synthetic";
        }
        const Calendar cal{cfg.sim.epoch_year, cfg.sim.epoch_month, cfg.sim.epoch_day};
        MatchedDesign design = resample_strata(panel, cal, cfg.effect.max_lag(), controls,
                                               cfg.variance_strata, seed);
        sb.value = cfg.target.cumulative
                       ? design_sigma_bar_sq_cumulative(design, cfg.effect.weights)
                       : design_sigma_bar_sq(design, cfg.target.lag);
        return sb;
    }
    }
    throw ConfigError("variance.source: unknown source");
}

// ---- effective (possibly biased) effect ----------------------------------

struct EffectiveEffect {
    double value = 0.0;                // the target's effective effect
    std::vector<double> per_lag;       // when the method yields one per lag
    std::string note;
};

double target_of(const ScenarioConfig &cfg, const std::vector<double> &per_lag,
                 double theta_bar) {
    return cfg.target.cumulative ? theta_bar : per_lag[cfg.target.lag];
}

EffectiveEffect effective_effect(const ScenarioConfig &cfg, double bias_r2, double bias_gamma1) {
    EffectiveEffect eff;
    const auto &theta = cfg.effect.theta;
    const int lp1 = static_cast<int>(theta.size());

    switch (cfg.bias_mode) {
    case BiasMode::None: {
        eff.per_lag = theta;
        eff.value = target_of(cfg, theta, cfg.effect.theta_bar);
        return eff;
    }
    case BiasMode::Eq19Plus:
    case BiasMode::Eq19Minus: {
        const Eq19Sign sign =
            cfg.bias_mode == BiasMode::Eq19Plus ? Eq19Sign::Plus : Eq19Sign::Minus;
        eff.per_lag.resize(lp1);
        double bar = 0.0;
        for (int l = 0; l < lp1; ++l) {
            eff.per_lag[l] = theta_eq19(cfg.effect, bias_r2, bias_gamma1, sign, l);
            bar += eff.per_lag[l];
        }
        eff.value = target_of(cfg, eff.per_lag, bar);
        return eff;
    }
    case BiasMode::Eq20: {
        eff.per_lag.resize(lp1);
        for (int l = 0; l < lp1; ++l) {
            eff.per_lag[l] = theta_eq20(theta[l], bias_r2, bias_gamma1);
        }
        eff.value = cfg.target.cumulative
                        ? theta_eq20(cfg.effect.theta_bar, bias_r2, bias_gamma1)
                        : eff.per_lag[cfg.target.lag];
        return eff;
    }
    case BiasMode::Calibration: {
        auto [truth, measured] = load_validation_csv(cfg.validation_path);
        ValidationDesign v = build_validation_design(truth, measured, cfg.effect.max_lag());
        BiasReport report = calib_bias_approx(v, cfg.effect);
        eff.per_lag = report.theta_biased;
        eff.value = target_of(cfg, report.theta_biased, report.theta_bar_biased);
        eff.note = "calibration rows=" + std::to_string(v.true_lags.rows());
        return eff;
    }
    case BiasMode::Bl: {
        auto [truth, measured] = load_validation_csv(cfg.validation_path);
        // The measured column carries each unit's group-level value, so the
        // identity mapping reproduces x_{g(i),t}.
        std::vector<std::string> identity = truth.unit_ids;
        BiasReport report =
            bl_bias_approx(truth, measured, identity, cfg.effect, cfg.effect.max_lag());
        eff.per_lag = report.theta_biased;
        eff.value = target_of(cfg, report.theta_biased, report.theta_bar_biased);
        return eff;
    }
    case BiasMode::Mb: {
        double mean_exp_u = cfg.mean_exp_u;
        if (!cfg.validation_path.empty()) {
            auto [truth, measured] = load_validation_csv(cfg.validation_path);
            mean_exp_u = (truth.values.array() / measured.values.array()).mean();
        }
        eff.per_lag.resize(lp1);
        double bar = 0.0;
        for (int l = 0; l < lp1; ++l) {
            eff.per_lag[l] = mb_bias(theta[l], mean_exp_u);
            bar += eff.per_lag[l];
        }
        eff.value = target_of(cfg, eff.per_lag, bar);
        eff.note = "mean_exp_u=" + fmt(mean_exp_u);
        return eff;
    }
    case BiasMode::Mc: {
        double var_x = cfg.mc_var_x, mean_x = cfg.mc_mean_x, var_u = cfg.mc_var_u;
        if (!cfg.validation_path.empty()) {
            auto [truth, measured] = load_validation_csv(cfg.validation_path);
            const auto t = truth.values.array();
            mean_x = t.mean();
            var_x = (t - mean_x).square().mean();
            const auto w = measured.values.array() / t;
            const double wbar = w.mean();
            var_u = ((w / wbar) - 1.0).square().mean();
        }
        eff.per_lag.resize(lp1);
        double bar = 0.0;
        for (int l = 0; l < lp1; ++l) {
            eff.per_lag[l] = mc_attenuation(theta[l], var_x, mean_x, var_u);
            bar += eff.per_lag[l];
        }
        eff.value = target_of(cfg, eff.per_lag, bar);
        return eff;
    }
    case BiasMode::Poly: {
        const double factor = poly_bias_factor(bias_r2, bias_gamma1);
        eff.per_lag.resize(lp1);
        double bar = 0.0;
        for (int l = 0; l < lp1; ++l) {
            eff.per_lag[l] = theta[l] * factor;
            bar += eff.per_lag[l];
        }
        eff.value = target_of(cfg, eff.per_lag, bar);
        return eff;
    }
    }
    throw ConfigError("bias.mode: unknown mode");
}

// VCF for multiplicative error when validation data allows estimating both
// variance pieces; 1 otherwise (the small-theta regime).
double derive_vcf(const ScenarioConfig &cfg, double effective) {
    if (!cfg.error || !is_multiplicative(cfg.error->family) || cfg.validation_path.empty()) {
        return 1.0;
    }
    auto [truth, measured] = load_validation_csv(cfg.validation_path);
    const double gm1 = cfg.error->gamma_m1;
    Eigen::ArrayXXd ml = truth.values.array().pow(gm1);
    Eigen::ArrayXXd factor = measured.values.array() / ml;
    auto var_of = [](const Eigen::ArrayXXd &a) {
        const double m = a.mean();
        return (a - m).square().mean();
    };
    return vcf(var_of(ml), var_of(factor), effective);
}

} // namespace

int validate_config(const Options &opt, std::ostream &out, std::ostream &err) {
    return guard(err, [&] {
        Prepared p = prepare(opt);
        out << "ok: scenario " << hex64(p.hash) << " seed " << p.seed << "\n";
    });
}

int samplesize(const Options &opt, std::ostream &out, std::ostream &err) {
    return guard(err, [&] {
        Prepared p = prepare(opt);
        const ScenarioConfig &cfg = p.cfg;

        std::vector<double> defl = cfg.deflation_r2_sweep.empty()
                                       ? std::vector<double>{cfg.deflation_r2}
                                       : cfg.deflation_r2_sweep;
        std::vector<double> r2s =
            cfg.bias_r2_sweep.empty() ? std::vector<double>{cfg.bias_r2} : cfg.bias_r2_sweep;
        std::vector<double> g1s = cfg.bias_gamma1_sweep.empty()
                                      ? std::vector<double>{cfg.bias_gamma1}
                                      : cfg.bias_gamma1_sweep;
        std::vector<int> controls = cfg.controls_sweep.empty()
                                        ? std::vector<int>{cfg.controls_per_case}
                                        : cfg.controls_sweep;

        std::ofstream csv = open_output(p, "samplesize.csv");
        csv << "bias_mode,deflation_r2,r2,gamma1,controls_per_case,effective_theta,"
               "sigma_bar_sq,vcf,n_cases,n_controls\n";

        out << "bias_mode  defl_R2  R2     gamma1  m-1  eff_theta    sigma_bar^2  vcf     "
               "n_cases  n_controls\n";
        for (int m : controls) {
            const SigmaBar sb = derive_sigma_bar(cfg, m, cfg.resample_seed);
            for (double r2 : r2s) {
                for (double g1 : g1s) {
                    const EffectiveEffect eff = effective_effect(cfg, r2, g1);
                    const double v = derive_vcf(cfg, eff.value);
                    for (double d : defl) {
                        SampleSizeResult res =
                            sample_size(eff.value, sb.value, d, cfg.test, v);
                        csv << bias_mode_name(cfg.bias_mode) << ',' << fmt(d) << ',' << fmt(r2)
                            << ',' << fmt(g1) << ',' << m << ',' << fmt(eff.value) << ','
                            << fmt(sb.value) << ',' << fmt(v) << ',' << res.n << ','
                            << static_cast<long long>(res.n) * m << '\n';
                        char line[256];
                        std::snprintf(line, sizeof(line),
                                      "%-10s %-8.3g %-6.3g %-7.3g %-4d %-12.6g %-12.6g "
                                      "%-7.4g %-8d %lld\n",
                                      bias_mode_name(cfg.bias_mode).c_str(), d, r2, g1, m,
                                      eff.value, sb.value, v, res.n,
                                      static_cast<long long>(res.n) * m);
                        out << line;
                    }
                }
            }
        }
        out << "wrote " << cfg.output_dir << "/samplesize.csv\n";
    });
}

int bias(const Options &opt, std::ostream &out, std::ostream &err) {
    return guard(err, [&] {
        Prepared p = prepare(opt);
        const ScenarioConfig &cfg = p.cfg;
        const auto &theta = cfg.effect.theta;
        const int lp1 = static_cast<int>(theta.size());

        std::vector<double> eq19p(lp1), eq19m(lp1), eq20v(lp1);
        for (int l = 0; l < lp1; ++l) {
            eq19p[l] = theta_eq19(cfg.effect, cfg.bias_r2, cfg.bias_gamma1, Eq19Sign::Plus, l);
            eq19m[l] = theta_eq19(cfg.effect, cfg.bias_r2, cfg.bias_gamma1, Eq19Sign::Minus, l);
            eq20v[l] = theta_eq20(theta[l], cfg.bias_r2, cfg.bias_gamma1);
        }

        std::vector<double> calib, blv;
        if (!cfg.validation_path.empty()) {
            auto [truth, measured] = load_validation_csv(cfg.validation_path);
            ValidationDesign v = build_validation_design(truth, measured, cfg.effect.max_lag());
            calib = calib_bias_approx(v, cfg.effect).theta_biased;
            std::vector<std::string> identity = truth.unit_ids;
            blv = bl_bias_approx(truth, measured, identity, cfg.effect, cfg.effect.max_lag())
                      .theta_biased;
        }

        std::ofstream csv = open_output(p, "bias.csv");
        csv << "lag,theta_true,theta_eq19_plus,theta_eq19_minus,theta_eq20,"
               "theta_calibration,theta_bl\n";
        auto row = [&](const std::string &label, double t, double p19, double m19, double e20,
                       const double *c, const double *b) {
            csv << label << ',' << fmt(t) << ',' << fmt(p19) << ',' << fmt(m19) << ','
                << fmt(e20) << ',' << (c ? fmt(*c) : "") << ',' << (b ? fmt(*b) : "") << '\n';
            out << label << "\t" << fmt(t) << "\t" << fmt(p19) << "\t" << fmt(m19) << "\t"
                << fmt(e20) << "\t" << (c ? fmt(*c) : "-") << "\t" << (b ? fmt(*b) : "-")
                << "\n";
        };
        out << "lag\ttrue\teq19+\teq19-\teq20\tcalibration\tbl\n";
        double sum_p19 = 0, sum_m19 = 0, sum_e20 = 0, sum_c = 0, sum_b = 0;
        for (int l = 0; l < lp1; ++l) {
            sum_p19 += eq19p[l];
            sum_m19 += eq19m[l];
            sum_e20 += eq20v[l];
            if (!calib.empty()) {
                sum_c += calib[l];
                sum_b += blv[l];
            }
            row(std::to_string(l), theta[l], eq19p[l], eq19m[l], eq20v[l],
                calib.empty() ? nullptr : &calib[l], blv.empty() ? nullptr : &blv[l]);
        }
        const double eq20_bar = theta_eq20(cfg.effect.theta_bar, cfg.bias_r2, cfg.bias_gamma1);
        (void)sum_e20;
        row("cumulative", cfg.effect.theta_bar, sum_p19, sum_m19, eq20_bar,
            calib.empty() ? nullptr : &sum_c, blv.empty() ? nullptr : &sum_b);
        out << "wrote " << cfg.output_dir << "/bias.csv\n";
    });
}

int simulate(const Options &opt, std::ostream &out, std::ostream &err) {
    return guard(err, [&] {
        Prepared p = prepare(opt);
        const ScenarioConfig &cfg = p.cfg;
        if (cfg.sim.replicates < 1) {
            throw ConfigError("sim.replicates: must be >= 1 for simulate");
        }

        ReplicateBatch batch =
            run_replicates(cfg, cfg.sim.replicates, p.seed, cfg.sim.threads);
        const int lp1 = static_cast<int>(cfg.effect.theta.size());

        std::ofstream rep = open_output(p, "replicates.csv");
        rep << "replicate,status,n_strata,dropped_strata";
        auto col_names = [&](const std::string &prefix) {
            for (int l = 0; l < lp1; ++l) {
                rep << ',' << prefix << "_lag" << l;
            }
            rep << ',' << prefix << "_cumulative";
        };
        col_names("theta_hat");
        col_names("se_hat");
        col_names("reject");
        rep << '\n';
        for (const auto &r : batch.records) {
            rep << r.replicate << ','
                << (r.status == FitStatus::Converged
                        ? "converged"
                        : (r.status == FitStatus::Separated ? "separated" : "failed"))
                << ',' << r.n_strata << ',' << r.dropped_strata;
            for (int i = 0; i <= lp1; ++i) {
                rep << ',' << (r.usable ? fmt(r.theta_hat[i]) : "");
            }
            for (int i = 0; i <= lp1; ++i) {
                rep << ',' << (r.usable ? fmt(r.se_hat[i]) : "");
            }
            for (int i = 0; i <= lp1; ++i) {
                rep << ',' << (r.usable ? std::to_string(r.reject[i]) : "");
            }
            rep << '\n';
        }

        std::ofstream sum = open_output(p, "summary.csv");
        sum << "target,mean_theta_hat,sd_theta_hat,mean_se_hat,reject_rate,"
               "replicates_converged\n";
        const auto &s = batch.summary;
        out << "target        mean_theta   sd_theta     mean_se      reject_rate  converged\n";
        for (int i = 0; i <= lp1; ++i) {
            const std::string label = i < lp1 ? "lag" + std::to_string(i) : "cumulative";
            sum << label << ',' << fmt(s.mean_theta_hat[i]) << ',' << fmt(s.sd_theta_hat[i])
                << ',' << fmt(s.mean_se_hat[i]) << ',' << fmt(s.reject_rate[i]) << ','
                << s.replicates_converged << '\n';
            char line[200];
            std::snprintf(line, sizeof(line), "%-13s %-12.6g %-12.6g %-12.6g %-12.4g %d\n",
                          label.c_str(), s.mean_theta_hat[i], s.sd_theta_hat[i],
                          s.mean_se_hat[i], s.reject_rate[i], s.replicates_converged);
            out << line;
        }
        out << "wrote " << cfg.output_dir << "/replicates.csv, summary.csv\n";
    });
}

int power_curve(const Options &opt, std::ostream &out, std::ostream &err) {
    return guard(err, [&] {
        Prepared p = prepare(opt);
        const ScenarioConfig &cfg = p.cfg;

        const EffectiveEffect eff = effective_effect(cfg, cfg.bias_r2, cfg.bias_gamma1);
        const bool empirical = cfg.sim.replicates > 0;

        // Calculated-curve inputs: with simulation enabled they come from a
        // pooled pilot of the same replicate stream, so curve and points
        // describe the same design.
        double sigma_bar = 0.0, defl = cfg.deflation_r2;
        if (empirical) {
            MatchedDesign pooled;
            const int pilot = std::min(cfg.sim.replicates, 20);
            for (int r = 0; r < pilot; ++r) {
                const std::uint64_t seed_r = mix_seed(p.seed, static_cast<std::uint64_t>(r));
                ReplicatePanels panels = build_replicate_panels(cfg, seed_r);
                OutcomeModel model;
                model.K = cfg.sim.K;
                model.baseline_a = cfg.sim.baseline_a;
                model.baseline_b = cfg.sim.baseline_b;
                model.baseline_phase = cfg.sim.baseline_phase;
                model.effects.push_back({"exposure", cfg.effect});
                std::vector<const ExposurePanel *> tp{&panels.truth};
                std::vector<Event> events = gen_outcomes(tp, model, mix_seed(seed_r, 10));
                Calendar cal{cfg.sim.epoch_year, cfg.sim.epoch_month, cfg.sim.epoch_day};
                MatchResult match =
                    match_case_crossover(events, cal, panels.analysis, cfg.effect.max_lag());
                for (auto &s : match.design.strata) {
                    pooled.strata.push_back(std::move(s));
                }
            }
            if (pooled.strata.empty()) {
                throw NumericError("power_curve: pilot produced no strata");
            }
            sigma_bar = cfg.target.cumulative
                            ? design_sigma_bar_sq_cumulative(pooled, cfg.effect.weights)
                            : design_sigma_bar_sq(pooled, cfg.target.lag);
            defl = cfg.target.cumulative
                       ? design_deflation_r2_cumulative(pooled, cfg.effect.weights)
                       : design_deflation_r2(pooled, cfg.target.lag);
        } else {
            sigma_bar = derive_sigma_bar(cfg, cfg.controls_per_case, cfg.resample_seed).value;
        }

        std::vector<int> grid = cfg.sim.n_grid;
        if (grid.empty()) {
            // Default grid: invert the power formula at a ladder of powers.
            for (double pw : {0.2, 0.3, 0.5, 0.7, 0.8, 0.9, 0.95}) {
                TestSpec t = cfg.test;
                t.power_target = pw;
                grid.push_back(sample_size(eff.value, sigma_bar, defl, t).n);
            }
            std::sort(grid.begin(), grid.end());
            grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        }

        struct Point {
            int n;
            double calculated;
            int rejects = 0;
            int used = 0;
        };
        std::vector<Point> points;
        for (int n : grid) {
            points.push_back({n, power_at(n, eff.value, sigma_bar, defl, cfg.test), 0, 0});
        }

        if (empirical) {
            const int R = cfg.sim.replicates;
            // -1 unusable, 0 accept, 1 reject; indexed [replicate][point]
            std::vector<std::vector<signed char>> verdicts(
                R, std::vector<signed char>(points.size(), -1));

            auto run_replicate = [&](int r) {
                const std::uint64_t seed_r = mix_seed(p.seed, static_cast<std::uint64_t>(r));
                try {
                    ReplicatePanels panels = build_replicate_panels(cfg, seed_r);
                    OutcomeModel model;
                    model.K = cfg.sim.K;
                    model.baseline_a = cfg.sim.baseline_a;
                    model.baseline_b = cfg.sim.baseline_b;
                    model.baseline_phase = cfg.sim.baseline_phase;
                    model.effects.push_back({"exposure", cfg.effect});
                    std::vector<const ExposurePanel *> tp{&panels.truth};
                    std::vector<Event> events = gen_outcomes(tp, model, mix_seed(seed_r, 10));
                    Calendar cal{cfg.sim.epoch_year, cfg.sim.epoch_month, cfg.sim.epoch_day};
                    MatchResult match = match_case_crossover(events, cal, panels.analysis,
                                                             cfg.effect.max_lag());
                    auto &design = match.design;
                    const int have = static_cast<int>(design.n_strata());
                    if (have == 0) {
                        return;
                    }
                    // One shuffle per replicate; grid points use nested prefixes.
                    Rng shuffle_rng(mix_seed(seed_r, 77));
                    for (int i = have - 1; i > 0; --i) {
                        const int j = static_cast<int>(shuffle_rng.next_u64() %
                                                       static_cast<std::uint64_t>(i + 1));
                        std::swap(design.strata[i], design.strata[j]);
                    }
                    // Cumulative targets fit the collapsed weighted-average
                    // regressor, the estimator the cumulative formulas
                    // describe; per-lag targets keep the full lag fit.
                    if (cfg.target.cumulative) {
                        for (auto &s : design.strata) {
                            Eigen::VectorXd xbar =
                                cumulative_exposure(s.rows, cfg.effect.weights);
                            s.rows = xbar;
                        }
                    }
                    for (std::size_t k = 0; k < points.size(); ++k) {
                        if (points[k].n > have) {
                            continue;
                        }
                        MatchedDesign sub;
                        sub.strata.assign(design.strata.begin(),
                                          design.strata.begin() + points[k].n);
                        try {
                            ClogitFit fit = clogit_fit(sub);
                            if (fit.status != FitStatus::Converged) {
                                continue;
                            }
                            Eigen::VectorXd contrast =
                                Eigen::VectorXd::Zero(fit.theta_hat.size());
                            contrast(cfg.target.cumulative ? 0 : cfg.target.lag) = 1.0;
                            WaldResult w =
                                wald_test(fit, contrast, cfg.test.alpha, cfg.test.sided);
                            verdicts[r][k] = w.reject ? 1 : 0;
                        } catch (const std::exception &) {
                            // leave unusable
                        }
                    }
                } catch (const std::exception &) {
                    // whole replicate unusable
                }
            };

            int workers = cfg.sim.threads > 0
                              ? cfg.sim.threads
                              : static_cast<int>(std::thread::hardware_concurrency());
            workers = std::clamp(workers, 1, R);
            if (workers == 1) {
                for (int r = 0; r < R; ++r) {
                    run_replicate(r);
                }
            } else {
                std::atomic<int> next{0};
                auto worker = [&] {
                    for (;;) {
                        const int r = next.fetch_add(1);
                        if (r >= R) {
                            return;
                        }
                        run_replicate(r);
                    }
                };
                std::vector<std::thread> pool;
                for (int w = 0; w < workers; ++w) {
                    pool.emplace_back(worker);
                }
                for (auto &t : pool) {
                    t.join();
                }
            }

            for (int r = 0; r < R; ++r) {
                for (std::size_t k = 0; k < points.size(); ++k) {
                    if (verdicts[r][k] >= 0) {
                        ++points[k].used;
                        points[k].rejects += verdicts[r][k];
                    }
                }
            }
        }

        std::ofstream csv = open_output(p, "power_curve.csv");
        csv << "n,calculated_power,empirical_power,empirical_lo,empirical_hi,replicates_used\n";
        SvgChart chart;
        chart.title = "Power curve";
        chart.x_label = "number of cases (n)";
        chart.y_label = "power";
        SvgSeries calc;
        calc.dashed = true;
        calc.color = "#d62728";
        calc.label = "calculated";
        SvgSeries emp;
        emp.markers = true;
        emp.color = "#1f77b4";
        emp.label = empirical ? "empirical" : "";

        out << "n        calculated  empirical    95% CI        used\n";
        for (const auto &pt : points) {
            calc.x.push_back(pt.n);
            calc.y.push_back(pt.calculated);
            std::string e, lo, hi, used;
            if (empirical && pt.used > 0) {
                const double phat = static_cast<double>(pt.rejects) / pt.used;
                const double half = 1.959963985 * std::sqrt(std::max(
                                        0.0, phat * (1.0 - phat) / pt.used));
                const double l = std::max(0.0, phat - half);
                const double h = std::min(1.0, phat + half);
                e = fmt(phat);
                lo = fmt(l);
                hi = fmt(h);
                used = std::to_string(pt.used);
                emp.x.push_back(pt.n);
                emp.y.push_back(phat);
                emp.y_lo.push_back(l);
                emp.y_hi.push_back(h);
            }
            csv << pt.n << ',' << fmt(pt.calculated) << ',' << e << ',' << lo << ',' << hi
                << ',' << used << '\n';
            char line[160];
            std::snprintf(line, sizeof(line), "%-8d %-11.4f %-12s [%s,%s]  %s\n", pt.n,
                          pt.calculated, e.empty() ? "-" : e.c_str(),
                          lo.empty() ? "-" : lo.c_str(), hi.empty() ? "-" : hi.c_str(),
                          used.empty() ? "-" : used.c_str());
            out << line;
        }
        chart.series.push_back(std::move(calc));
        if (!emp.x.empty()) {
            chart.series.push_back(std::move(emp));
        }
        std::filesystem::create_directories(cfg.output_dir);
        write_svg(chart, cfg.output_dir + "/power_curve.svg");
        out << "wrote " << cfg.output_dir << "/power_curve.csv, power_curve.svg\n";
    });
}

} // namespace powerlag::commands
