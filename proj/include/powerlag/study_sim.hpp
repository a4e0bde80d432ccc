#pragma once

#include "powerlag/clogit.hpp"
#include "powerlag/error_sim.hpp"
#include "powerlag/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace powerlag {

/// Civil date of panel day index 0; day t = epoch + t days.
struct Calendar {
    int year = 2020;
    int month = 6;
    int day = 1;
};

// Proleptic Gregorian day arithmetic (days since 1970-01-01).
long days_from_civil(int y, int m, int d);
void civil_from_days(long z, int &y, int &m, int &d);
int weekday_from_days(long z); // 0 = Sunday .. 6 = Saturday

struct Event {
    int unit;
    int day;
};

/// p_{i,t} = K p0(t) exp( sum_c sum_l theta_{c,l} x_c[i][t-l] ) with the
/// seasonal baseline p0(t) = a + b sin(2 pi t / 365 + phase).
struct OutcomeModel {
    double K = 1.0;
    double baseline_a = 0.02;
    double baseline_b = 0.005;
    double baseline_phase = 0.0;
    struct Effect {
        std::string name;
        LagEffect effect;
    };
    std::vector<Effect> effects; // aligned with the truth panels

    double baseline(int t) const;
};

/// Independent Bernoulli outcome draws from the truth panels; the first
/// max-lag days are burn-in. Any p >= 1 aborts naming the offending cell.
std::vector<Event> gen_outcomes(const std::vector<const ExposurePanel *> &truth_panels,
                                const OutcomeModel &model, std::uint64_t seed);

/// Extra adjustment variable entering the analysis rows as lags 0..max_lag.
struct CovariatePanel {
    const ExposurePanel *panel;
    int max_lag;
};

struct MatchResult {
    MatchedDesign design;
    int dropped_strata = 0; // events with no usable referent
};

/// Referent pool per panel column: the other same-month same-weekday days,
/// restricted to days with full lag history. Entry t is empty when day t is
/// unusable as a case day.
std::vector<std::vector<int>> referent_pools(const ExposurePanel &panel,
                                             const Calendar &calendar, int max_lag);

/// Time-stratified referent selection: all other days in the event's
/// calendar month and year sharing its day of week. Stratum rows are lags
/// 0..L of the analysis panel at the event day (row 0) and referent days;
/// referents lacking lag history are skipped.
MatchResult match_case_crossover(const std::vector<Event> &events, const Calendar &calendar,
                                 const ExposurePanel &analysis_panel, int max_lag,
                                 const std::vector<CovariatePanel> &covariates = {});

struct ReplicateSummary {
    // Index 0..L are lags; the last entry is the cumulative effect theta_bar.
    std::vector<double> mean_theta_hat;
    std::vector<double> sd_theta_hat;
    std::vector<double> mean_se_hat;
    std::vector<double> reject_rate;
    int replicates_converged = 0;
    int replicates_total = 0;
};

struct ReplicateRecord {
    int replicate = 0;
    FitStatus status = FitStatus::MaxIter;
    bool usable = false;
    std::vector<double> theta_hat; // lags then cumulative
    std::vector<double> se_hat;
    std::vector<int> reject;
    int n_strata = 0;
    int dropped_strata = 0;
};

/// Panels backing one replicate: the outcome-generating truth, the analysis
/// (measured) panel, and any confounder panels (measured without error).
struct ReplicatePanels {
    ExposurePanel truth;
    ExposurePanel analysis;
    std::vector<ExposurePanel> confounders;
    std::vector<int> confounder_lags;
};

ReplicatePanels build_replicate_panels(const ScenarioConfig &cfg, std::uint64_t seed);

/// One full replicate: panels -> outcomes from truth -> matching on the
/// measured panel -> conditional logistic fit -> Wald tests per lag and for
/// the all-ones lag contrast.
ReplicateRecord run_single_replicate(const ScenarioConfig &cfg, int replicate,
                                     std::uint64_t master_seed);

struct ReplicateBatch {
    std::vector<ReplicateRecord> records;
    ReplicateSummary summary;
};

/// Deterministic batch: replicate r always uses seed mix(master_seed, r);
/// workers only fill a pre-indexed slot, so any thread count produces the
/// identical batch. Per-replicate failures count as non-converged.
ReplicateBatch run_replicates(const ScenarioConfig &cfg, int replicates,
                              std::uint64_t master_seed, int threads = 0);

ReplicateSummary summarize(const std::vector<ReplicateRecord> &records, int lag_count);

} // namespace powerlag
