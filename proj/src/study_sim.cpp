#include "powerlag/study_sim.hpp"

#include "powerlag/errors.hpp"
#include "powerlag/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <thread>

namespace powerlag {

long days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2u) / 5u + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

void civil_from_days(long z, int &y, int &m, int &d) {
    z += 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long yy = static_cast<long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

int weekday_from_days(long z) {
    return static_cast<int>(z >= -4 ? (z + 4) % 7 : (z + 5) % 7 + 6);
}

double OutcomeModel::baseline(int t) const {
    return baseline_a + baseline_b * std::sin(2.0 * M_PI * t / 365.0 + baseline_phase);
}

std::vector<Event> gen_outcomes(const std::vector<const ExposurePanel *> &truth_panels,
                                const OutcomeModel &model, std::uint64_t seed) {
    if (truth_panels.size() != model.effects.size() || truth_panels.empty()) {
        throw DataError("gen_outcomes: one truth panel per effect required");
    }
    const auto &first = *truth_panels.front();
    int burn_in = 0;
    for (std::size_t c = 0; c < truth_panels.size(); ++c) {
        truth_panels[c]->validate();
        if (truth_panels[c]->n_units() != first.n_units() ||
            truth_panels[c]->n_times() != first.n_times()) {
            throw DataError("gen_outcomes: panels must share shape");
        }
        burn_in = std::max(burn_in, model.effects[c].effect.max_lag());
    }
    const int units = static_cast<int>(first.n_units());
    const int days = static_cast<int>(first.n_times());
    if (days <= burn_in) {
        throw DataError("gen_outcomes: panel shorter than the lag history");
    }

    std::vector<Event> events;
    for (int u = 0; u < units; ++u) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(u)));
        for (int t = burn_in; t < days; ++t) {
            double lin = 0.0;
            for (std::size_t c = 0; c < truth_panels.size(); ++c) {
                const auto &theta = model.effects[c].effect.theta;
                for (int l = 0; l < static_cast<int>(theta.size()); ++l) {
                    lin += theta[l] * truth_panels[c]->values(u, t - l);
                }
            }
            const double p = model.K * model.baseline(t) * std::exp(lin);
            if (p >= 1.0) {
                throw NumericError("gen_outcomes: p >= 1 at unit " + first.unit_ids[u] +
                                   " day " + std::to_string(first.times[t]));
            }
            if (rng.bernoulli(p)) {
                events.push_back({u, t});
            }
        }
    }
    return events;
}

std::vector<std::vector<int>> referent_pools(const ExposurePanel &panel,
                                             const Calendar &calendar, int max_lag) {
    panel.validate();
    const int days = static_cast<int>(panel.n_times());
    for (int t = 1; t < days; ++t) {
        if (panel.times[t] != panel.times[t - 1] + 1) {
            throw DataError("referent_pools: panel times must be consecutive days");
        }
    }
    const long epoch = days_from_civil(calendar.year, calendar.month, calendar.day);

    // Bucket panel days by (year, month, weekday); only days with full lag
    // history are usable as case or referent days.
    std::map<std::tuple<int, int, int>, std::vector<int>> buckets;
    std::vector<std::tuple<int, int, int>> key_of_day(days);
    for (int t = 0; t < days; ++t) {
        const long z = epoch + panel.times[t];
        int y, m, d;
        civil_from_days(z, y, m, d);
        const int wd = weekday_from_days(z);
        key_of_day[t] = {y, m, wd};
        if (t >= max_lag) {
            buckets[key_of_day[t]].push_back(t);
        }
    }

    std::vector<std::vector<int>> pools(days);
    for (int t = max_lag; t < days; ++t) {
        for (int other : buckets[key_of_day[t]]) {
            if (other != t) {
                pools[t].push_back(other);
            }
        }
    }
    return pools;
}

MatchResult match_case_crossover(const std::vector<Event> &events, const Calendar &calendar,
                                 const ExposurePanel &analysis_panel, int max_lag,
                                 const std::vector<CovariatePanel> &covariates) {
    const std::vector<std::vector<int>> pools =
        referent_pools(analysis_panel, calendar, max_lag);
    const int days = static_cast<int>(analysis_panel.n_times());

    int extra_cols = 0;
    for (const auto &c : covariates) {
        c.panel->validate();
        if (c.panel->n_times() != analysis_panel.n_times() ||
            c.panel->n_units() != analysis_panel.n_units()) {
            throw DataError("match_case_crossover: covariate panel shape mismatch");
        }
        extra_cols += c.max_lag + 1;
    }

    MatchResult result;
    for (const auto &ev : events) {
        if (ev.day < max_lag || ev.day >= days) {
            ++result.dropped_strata;
            continue;
        }
        const std::vector<int> &referents = pools[ev.day];
        if (referents.empty()) {
            ++result.dropped_strata;
            continue;
        }

        Stratum s;
        const int m_h = 1 + static_cast<int>(referents.size());
        s.rows.resize(m_h, max_lag + 1);
        Eigen::MatrixXd cov(m_h, extra_cols);
        auto fill_row = [&](int row, int t) {
            for (int l = 0; l <= max_lag; ++l) {
                s.rows(row, l) = analysis_panel.values(ev.unit, t - l);
            }
            int c0 = 0;
            for (const auto &c : covariates) {
                for (int l = 0; l <= c.max_lag; ++l) {
                    cov(row, c0 + l) = c.panel->values(ev.unit, t - l);
                }
                c0 += c.max_lag + 1;
            }
        };
        fill_row(0, ev.day);
        for (std::size_t j = 0; j < referents.size(); ++j) {
            fill_row(static_cast<int>(j) + 1, referents[j]);
        }
        if (extra_cols > 0) {
            s.covariates = std::move(cov);
        }
        result.design.strata.push_back(std::move(s));
    }
    return result;
}

ReplicatePanels build_replicate_panels(const ScenarioConfig &cfg, std::uint64_t seed) {
    const auto &sim = cfg.sim;
    ReplicatePanels panels;
    panels.truth = gen_exposure_panel(sim.units, sim.days, sim.exposure_mean, sim.exposure_var,
                                      sim.exposure_rho_time, sim.exposure_rho_space,
                                      mix_seed(seed, 0));

    if (cfg.error) {
        ExposurePanel transformed = apply_error(panels.truth, *cfg.error, mix_seed(seed, 1));
        if (needs_aggregation(cfg.error->family)) {
            const GroupMapping mapping = block_group_mapping(sim.units, sim.groups);
            const AggregationMode mode = cfg.error->family == ErrorFamily::MultBerksonLike
                                             ? AggregationMode::Multiplicative
                                             : AggregationMode::Additive;
            ExposurePanel grouped = aggregate_groups(transformed, mapping, mode);
            panels.analysis = expand_to_units(grouped, mapping, panels.truth.unit_ids);
        } else {
            panels.analysis = std::move(transformed);
        }
    } else {
        panels.analysis = panels.truth;
        panels.analysis.kind = PanelKind::Measured;
    }

    if (sim.confounders) {
        // Ozone- and temperature-flavored adjusters, generated error-free.
        panels.confounders.push_back(gen_exposure_panel(sim.units, sim.days, 35.0, 164.6,
                                                        sim.exposure_rho_time,
                                                        sim.exposure_rho_space,
                                                        mix_seed(seed, 2)));
        panels.confounder_lags.push_back(2);
        panels.confounders.push_back(gen_exposure_panel(sim.units, sim.days, 7.0, 9.0,
                                                        sim.exposure_rho_time,
                                                        sim.exposure_rho_space,
                                                        mix_seed(seed, 3)));
        panels.confounder_lags.push_back(1);
    }
    return panels;
}

namespace {

OutcomeModel outcome_model_for(const ScenarioConfig &cfg) {
    OutcomeModel model;
    model.K = cfg.sim.K;
    model.baseline_a = cfg.sim.baseline_a;
    model.baseline_b = cfg.sim.baseline_b;
    model.baseline_phase = cfg.sim.baseline_phase;
    model.effects.push_back({"exposure", cfg.effect});
    if (cfg.sim.confounders) {
        model.effects.push_back(
            {"o3", LagEffect::from_theta({0.0001, 0.0003, 0.0001})});
        model.effects.push_back({"temp", LagEffect::from_theta({0.01, 0.005})});
    }
    return model;
}

} // namespace

ReplicateRecord run_single_replicate(const ScenarioConfig &cfg, int replicate,
                                     std::uint64_t master_seed) {
    const std::uint64_t seed = mix_seed(master_seed, static_cast<std::uint64_t>(replicate));
    const int lp1 = static_cast<int>(cfg.effect.theta.size());

    ReplicateRecord rec;
    rec.replicate = replicate;
    try {
        ReplicatePanels panels = build_replicate_panels(cfg, seed);
        const OutcomeModel model = outcome_model_for(cfg);

        std::vector<const ExposurePanel *> truth_panels{&panels.truth};
        for (const auto &c : panels.confounders) {
            truth_panels.push_back(&c);
        }
        std::vector<Event> events = gen_outcomes(truth_panels, model, mix_seed(seed, 10));

        Calendar cal{cfg.sim.epoch_year, cfg.sim.epoch_month, cfg.sim.epoch_day};
        std::vector<CovariatePanel> covs;
        for (std::size_t c = 0; c < panels.confounders.size(); ++c) {
            covs.push_back({&panels.confounders[c], panels.confounder_lags[c]});
        }
        MatchResult match =
            match_case_crossover(events, cal, panels.analysis, cfg.effect.max_lag(), covs);
        rec.n_strata = static_cast<int>(match.design.n_strata());
        rec.dropped_strata = match.dropped_strata;
        if (match.design.strata.empty()) {
            return rec;
        }

        ClogitFit fit = clogit_fit(match.design);
        rec.status = fit.status;
        if (fit.status != FitStatus::Converged) {
            return rec;
        }

        rec.usable = true;
        rec.theta_hat.resize(lp1 + 1);
        rec.se_hat.resize(lp1 + 1);
        rec.reject.resize(lp1 + 1);
        const int p = static_cast<int>(fit.theta_hat.size());
        for (int l = 0; l < lp1; ++l) {
            Eigen::VectorXd contrast = Eigen::VectorXd::Zero(p);
            contrast(l) = 1.0;
            rec.theta_hat[l] = fit.theta_hat(l);
            rec.se_hat[l] = fit.se(l);
            rec.reject[l] =
                wald_test(fit, contrast, cfg.test.alpha, cfg.test.sided).reject ? 1 : 0;
        }
        Eigen::VectorXd ones = Eigen::VectorXd::Zero(p);
        ones.head(lp1).setOnes();
        rec.theta_hat[lp1] = ones.dot(fit.theta_hat);
        rec.se_hat[lp1] = std::sqrt(ones.dot(fit.cov * ones));
        rec.reject[lp1] =
            wald_test(fit, ones, cfg.test.alpha, cfg.test.sided).reject ? 1 : 0;
    } catch (const std::exception &) {
        rec.usable = false;
    }
    return rec;
}

ReplicateSummary summarize(const std::vector<ReplicateRecord> &records, int lag_count) {
    const int k = lag_count + 1;
    ReplicateSummary s;
    s.mean_theta_hat.assign(k, 0.0);
    s.sd_theta_hat.assign(k, 0.0);
    s.mean_se_hat.assign(k, 0.0);
    s.reject_rate.assign(k, 0.0);
    s.replicates_total = static_cast<int>(records.size());

    for (const auto &r : records) {
        if (!r.usable) {
            continue;
        }
        ++s.replicates_converged;
        for (int i = 0; i < k; ++i) {
            s.mean_theta_hat[i] += r.theta_hat[i];
            s.mean_se_hat[i] += r.se_hat[i];
            s.reject_rate[i] += r.reject[i];
        }
    }
    if (s.replicates_converged == 0) {
        return s;
    }
    const double n = static_cast<double>(s.replicates_converged);
    for (int i = 0; i < k; ++i) {
        s.mean_theta_hat[i] /= n;
        s.mean_se_hat[i] /= n;
        s.reject_rate[i] /= n;
    }
    if (s.replicates_converged > 1) {
        for (const auto &r : records) {
            if (!r.usable) {
                continue;
            }
            for (int i = 0; i < k; ++i) {
                const double d = r.theta_hat[i] - s.mean_theta_hat[i];
                s.sd_theta_hat[i] += d * d;
            }
        }
        for (int i = 0; i < k; ++i) {
            s.sd_theta_hat[i] = std::sqrt(s.sd_theta_hat[i] / (n - 1.0));
        }
    }
    return s;
}

ReplicateBatch run_replicates(const ScenarioConfig &cfg, int replicates,
                              std::uint64_t master_seed, int threads) {
    if (replicates < 1) {
        throw ConfigError("run_replicates: replicates must be >= 1");
    }
    ReplicateBatch batch;
    batch.records.resize(replicates);

    int workers = threads > 0 ? threads
                              : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::clamp(workers, 1, replicates);

    if (workers == 1) {
        for (int r = 0; r < replicates; ++r) {
            batch.records[r] = run_single_replicate(cfg, r, master_seed);
        }
    } else {
        std::atomic<int> next{0};
        auto worker = [&]() {
            for (;;) {
                const int r = next.fetch_add(1);
                if (r >= replicates) {
                    return;
                }
                batch.records[r] = run_single_replicate(cfg, r, master_seed);
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
        for (auto &t : pool) {
            t.join();
        }
    }

    batch.summary = summarize(batch.records, cfg.effect.max_lag() + 1);
    return batch;
}

} // namespace powerlag
