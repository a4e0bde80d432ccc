#include "powerlag/error_sim.hpp"

#include "powerlag/errors.hpp"
#include "powerlag/rng.hpp"

#include <cmath>
#include <unordered_map>

namespace powerlag {

namespace {
constexpr double kLogFloor = 1e-6;

// Unit-variance field: iid normals per unit row (per-unit child seed, so
// rows may be generated concurrently), AR(1) filter along time, then AR(1)
// mixing across the unit index. Both filters preserve marginal variance.
Eigen::MatrixXd standard_field(int units, int days, double rho_time, double rho_space,
                               std::uint64_t seed) {
    Eigen::MatrixXd m(units, days);
    for (int u = 0; u < units; ++u) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(u)));
        for (int t = 0; t < days; ++t) {
            m(u, t) = rng.normal();
        }
    }
    if (rho_time > 0.0) {
        const double s = std::sqrt(1.0 - rho_time * rho_time);
        for (int u = 0; u < units; ++u) {
            for (int t = 1; t < days; ++t) {
                m(u, t) = rho_time * m(u, t - 1) + s * m(u, t);
            }
        }
    }
    if (rho_space > 0.0) {
        const double s = std::sqrt(1.0 - rho_space * rho_space);
        for (int u = 1; u < units; ++u) {
            m.row(u) = rho_space * m.row(u - 1) + s * m.row(u);
        }
    }
    return m;
}

void check_field_params(int units, int days, double rho_time, double rho_space) {
    if (units < 1 || days < 1) {
        throw ConfigError("field: units and days must be positive");
    }
    if (!(rho_time >= 0.0 && rho_time < 1.0) || !(rho_space >= 0.0 && rho_space < 1.0)) {
        throw ConfigError("field: autocorrelation coefficients must lie in [0,1)");
    }
}

std::vector<std::string> default_unit_ids(int units) {
    std::vector<std::string> ids;
    ids.reserve(units);
    for (int u = 0; u < units; ++u) {
        ids.push_back("u" + std::to_string(u));
    }
    return ids;
}

} // namespace

NoiseField gen_noise_field(int units, int days, double rho_time, double rho_space,
                           double marginal_var, std::uint64_t seed) {
    check_field_params(units, days, rho_time, rho_space);
    if (!(marginal_var >= 0.0)) {
        throw ConfigError("field: marginal_var must be nonnegative");
    }
    NoiseField f;
    f.rho_time = rho_time;
    f.rho_space = rho_space;
    f.marginal_var = marginal_var;
    f.values = std::sqrt(marginal_var) * standard_field(units, days, rho_time, rho_space, seed);
    return f;
}

ExposurePanel gen_exposure_panel(int units, int days, double mean, double var, double rho_time,
                                 double rho_space, std::uint64_t seed) {
    check_field_params(units, days, rho_time, rho_space);
    if (!(var > 0.0)) {
        throw ConfigError("panel: var must be positive");
    }
    ExposurePanel p;
    p.unit_ids = default_unit_ids(units);
    p.times.resize(days);
    for (int t = 0; t < days; ++t) {
        p.times[t] = t;
    }
    p.values = (mean + std::sqrt(var) * standard_field(units, days, rho_time, rho_space, seed)
                           .array())
                   .cwiseMax(0.0)
                   .matrix();
    p.kind = PanelKind::Truth;
    return p;
}

ExposurePanel apply_error(const ExposurePanel &truth, const ErrorSpec &spec,
                          std::uint64_t seed) {
    truth.validate();
    spec.validate();
    const int units = static_cast<int>(truth.n_units());
    const int days = static_cast<int>(truth.n_times());

    ExposurePanel out = truth;
    out.kind = PanelKind::Measured;

    if (spec.family == ErrorFamily::AdditiveBerkson) {
        return out;
    }

    const bool wants_e1 =
        spec.noise_scale > 0.0 && spec.family != ErrorFamily::AdditiveLinear &&
        spec.family != ErrorFamily::MultClassical;
    Eigen::MatrixXd e1;
    if (wants_e1) {
        e1 = standard_field(units, days, spec.autocorr.rho_time, spec.autocorr.rho_space,
                            mix_seed(seed, 1));
    }

    const bool wants_e2 = spec.gamma_noise.shape > 0.0 &&
                          (spec.family == ErrorFamily::MultLinearLike ||
                           spec.family == ErrorFamily::AdditiveBerksonLike ||
                           spec.family == ErrorFamily::MultBerksonLike);
    Eigen::MatrixXd e2;
    if (wants_e2) {
        e2.resize(units, days);
        const std::uint64_t e2_seed = mix_seed(seed, 2);
        for (int u = 0; u < units; ++u) {
            Rng rng(mix_seed(e2_seed, static_cast<std::uint64_t>(u)));
            for (int t = 0; t < days; ++t) {
                e2(u, t) = rng.gamma(spec.gamma_noise.shape, spec.gamma_noise.rate);
            }
        }
    }

    const bool wants_iid =
        spec.iid_noise_var > 0.0 && (spec.family == ErrorFamily::AdditiveLinear ||
                                     spec.family == ErrorFamily::AdditiveLinearLike ||
                                     spec.family == ErrorFamily::MultClassical);
    Eigen::MatrixXd iid;
    if (wants_iid) {
        iid.resize(units, days);
        const double sd = std::sqrt(spec.iid_noise_var);
        const std::uint64_t iid_seed = mix_seed(seed, 3);
        for (int u = 0; u < units; ++u) {
            Rng rng(mix_seed(iid_seed, static_cast<std::uint64_t>(u)));
            for (int t = 0; t < days; ++t) {
                iid(u, t) = sd * rng.normal();
            }
        }
    }

    auto floored_log = [](double v) {
        if (v <= 0.0) {
            v = kLogFloor;
        }
        return std::log(std::max(v, kLogFloor));
    };

    for (int u = 0; u < units; ++u) {
        for (int t = 0; t < days; ++t) {
            const double x = truth.values(u, t);
            double v = 0.0;
            switch (spec.family) {
            case ErrorFamily::AdditiveLinear:
                v = spec.gamma0 + spec.gamma1 * x + (wants_iid ? iid(u, t) : 0.0);
                break;
            case ErrorFamily::AdditiveLinearLike:
                v = spec.gamma0 + spec.gamma1 * x +
                    (wants_e1 ? spec.noise_scale * e1(u, t) : 0.0) +
                    (wants_iid ? iid(u, t) : 0.0);
                break;
            case ErrorFamily::MultClassical:
                if (x <= 0.0) {
                    throw DataError("apply_error: nonpositive value under multiplicative error");
                }
                v = x * std::exp(wants_iid ? iid(u, t) : 0.0);
                break;
            case ErrorFamily::MultLinearLike:
                v = std::exp(spec.gamma_m0 + spec.gamma_m1 * floored_log(x) +
                             (wants_e1 ? spec.noise_scale * e1(u, t) : 0.0) -
                             (wants_e2 ? 0.5 * e2(u, t) : 0.0));
                break;
            case ErrorFamily::AdditiveBerksonLike:
            case ErrorFamily::MultBerksonLike:
                v = std::exp(spec.gamma1 * x + (wants_e1 ? spec.noise_scale * e1(u, t) : 0.0) -
                             (wants_e2 ? e2(u, t) : 0.0));
                break;
            case ErrorFamily::AdditiveBerkson:
                v = x;
                break;
            }
            out.values(u, t) = v;
        }
    }
    return out;
}

GroupMapping block_group_mapping(int units, int groups) {
    if (groups < 1 || groups > units) {
        throw ConfigError("mapping: groups must be in [1, units]");
    }
    GroupMapping m;
    m.group_of_unit.reserve(units);
    m.weight_of_unit.assign(units, 1.0);
    for (int u = 0; u < units; ++u) {
        const int g = static_cast<int>(static_cast<long long>(u) * groups / units);
        m.group_of_unit.push_back("g" + std::to_string(g));
    }
    return m;
}

ExposurePanel aggregate_groups(const ExposurePanel &unit_panel, const GroupMapping &mapping,
                               AggregationMode mode) {
    unit_panel.validate();
    const int units = static_cast<int>(unit_panel.n_units());
    if (static_cast<int>(mapping.group_of_unit.size()) != units ||
        static_cast<int>(mapping.weight_of_unit.size()) != units) {
        throw DataError("aggregate_groups: mapping not aligned with panel (unmapped unit)");
    }

    // Group order is first appearance in unit order.
    std::vector<std::string> group_ids;
    std::unordered_map<std::string, int> index;
    for (const auto &g : mapping.group_of_unit) {
        if (index.emplace(g, static_cast<int>(group_ids.size())).second) {
            group_ids.push_back(g);
        }
    }
    const int n_groups = static_cast<int>(group_ids.size());
    const int days = static_cast<int>(unit_panel.n_times());

    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n_groups, days);
    Eigen::VectorXd wsum = Eigen::VectorXd::Zero(n_groups);
    for (int u = 0; u < units; ++u) {
        const double w = mapping.weight_of_unit[u];
        if (!(w > 0.0)) {
            throw DataError("aggregate_groups: weights must be positive");
        }
        const int g = index[mapping.group_of_unit[u]];
        wsum(g) += w;
        if (mode == AggregationMode::Additive) {
            acc.row(g) += w * unit_panel.values.row(u);
        } else {
            for (int t = 0; t < days; ++t) {
                const double v = unit_panel.values(u, t);
                if (!(v > 0.0)) {
                    throw DataError("aggregate_groups: nonpositive value under log aggregation");
                }
                acc(g, t) += w * std::log(v);
            }
        }
    }

    ExposurePanel out;
    out.unit_ids = group_ids;
    out.times = unit_panel.times;
    out.kind = PanelKind::Measured;
    out.values.resize(n_groups, days);
    for (int g = 0; g < n_groups; ++g) {
        if (!(wsum(g) > 0.0)) {
            throw DataError("aggregate_groups: empty group " + group_ids[g]);
        }
        if (mode == AggregationMode::Additive) {
            out.values.row(g) = acc.row(g) / wsum(g);
        } else {
            out.values.row(g) = (acc.row(g) / wsum(g)).array().exp();
        }
    }
    return out;
}

ExposurePanel expand_to_units(const ExposurePanel &group_panel, const GroupMapping &mapping,
                              const std::vector<std::string> &unit_ids) {
    group_panel.validate();
    if (mapping.group_of_unit.size() != unit_ids.size()) {
        throw DataError("expand_to_units: mapping not aligned with unit ids");
    }
    std::unordered_map<std::string, int> index;
    for (std::size_t g = 0; g < group_panel.n_units(); ++g) {
        index[group_panel.unit_ids[g]] = static_cast<int>(g);
    }
    ExposurePanel out;
    out.unit_ids = unit_ids;
    out.times = group_panel.times;
    out.kind = group_panel.kind;
    out.values.resize(static_cast<Eigen::Index>(unit_ids.size()), group_panel.values.cols());
    for (std::size_t u = 0; u < unit_ids.size(); ++u) {
        auto it = index.find(mapping.group_of_unit[u]);
        if (it == index.end()) {
            throw DataError("expand_to_units: unit " + unit_ids[u] + " maps to unknown group");
        }
        out.values.row(static_cast<Eigen::Index>(u)) = group_panel.values.row(it->second);
    }
    return out;
}

} // namespace powerlag
