#include "powerlag/scenario.hpp"

#include "powerlag/errors.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace powerlag {

namespace {

std::string trim(const std::string &s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double to_double(const std::string &s, const std::string &field) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError(field + ": not a number: '" + s + "'");
    }
    return v;
}

long long to_int(const std::string &s, const std::string &field) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError(field + ": not an integer: '" + s + "'");
    }
    return v;
}

std::uint64_t to_u64(const std::string &s, const std::string &field) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ConfigError(field + ": not an unsigned integer: '" + s + "'");
    }
    return v;
}

std::vector<std::string> split_list(const std::string &s) {
    std::vector<std::string> out;
    std::string::size_type start = 0;
    for (;;) {
        auto comma = s.find(',', start);
        out.push_back(trim(s.substr(start, comma == std::string::npos ? comma : comma - start)));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

std::vector<double> to_double_list(const std::string &s, const std::string &field) {
    std::vector<double> out;
    for (const auto &item : split_list(s)) {
        out.push_back(to_double(item, field));
    }
    return out;
}

ErrorFamily parse_family(const std::string &s, const std::string &field) {
    if (s == "additive_berkson") return ErrorFamily::AdditiveBerkson;
    if (s == "additive_berkson_like") return ErrorFamily::AdditiveBerksonLike;
    if (s == "additive_linear") return ErrorFamily::AdditiveLinear;
    if (s == "additive_linear_like") return ErrorFamily::AdditiveLinearLike;
    if (s == "mult_berkson_like") return ErrorFamily::MultBerksonLike;
    if (s == "mult_linear_like") return ErrorFamily::MultLinearLike;
    if (s == "mult_classical") return ErrorFamily::MultClassical;
    throw ConfigError(field + ": unknown error family '" + s + "'");
}

} // namespace

std::uint64_t scenario_hash(const std::string &text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string read_text_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError(path + ": cannot open");
    }
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ScenarioConfig parse_scenario(const std::string &text, const std::string &origin) {
    ScenarioConfig cfg;
    std::string eq19_sign;
    std::string bias_mode_raw;
    bool has_error_section = false;
    bool error_family_none = false;
    ErrorSpec err;

    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') {
            continue;
        }
        auto where = [&](const std::string &key) {
            return section + "." + key + " (" + origin + ":" + std::to_string(line_no) + ")";
        };
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw ConfigError(origin + ":" + std::to_string(line_no) +
                                  ": malformed section header");
            }
            section = t.substr(1, t.size() - 2);
            if (section != "test" && section != "effect" && section != "variance" &&
                section != "error" && section != "bias" && section != "sim" &&
                section != "output") {
                throw ConfigError(origin + ":" + std::to_string(line_no) +
                                  ": unknown section [" + section + "]");
            }
            if (section == "error") {
                has_error_section = true;
            }
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (section.empty()) {
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": key outside any section");
        }

        if (section == "test") {
            if (key == "alpha") {
                cfg.test.alpha = to_double(value, where(key));
            } else if (key == "power") {
                cfg.test.power_target = to_double(value, where(key));
            } else if (key == "sided") {
                if (value == "one" || value == "one-sided") {
                    cfg.test.sided = Sidedness::OneSided;
                } else if (value == "two" || value == "two-sided") {
                    cfg.test.sided = Sidedness::TwoSided;
                } else {
                    throw ConfigError(where(key) + ": expected one|two");
                }
            } else {
                throw ConfigError(where(key) + ": unknown key");
            }
        } else if (section == "effect") {
            if (key == "theta") {
                cfg.effect.theta = to_double_list(value, where(key));
            } else if (key == "weights") {
                cfg.effect.weights = to_double_list(value, where(key));
            } else if (key == "target") {
                if (value == "cumulative") {
                    cfg.target.cumulative = true;
                } else {
                    cfg.target.cumulative = false;
                    cfg.target.lag = static_cast<int>(to_int(value, where(key)));
                }
            } else {
                throw ConfigError(where(key) + ": unknown key");
            }
        } else if (section == "variance") {
            if (key == "source") {
                if (value == "value") {
                    cfg.variance_source = ScenarioConfig::VarianceSource::Value;
                } else if (value == "file") {
                    cfg.variance_source = ScenarioConfig::VarianceSource::File;
                } else if (value == "synthetic") {
                    cfg.variance_source = ScenarioConfig::VarianceSource::Synthetic;
                } else {
                    throw ConfigError(where(key) + ": expected value|file|synthetic");
                }
            } else if (key == "sigma_bar_sq") {
                cfg.sigma_bar_sq = to_double(value, where(key));
            } else if (key == "panel") {
                cfg.panel_path = value;
            } else if (key == "deflation_r2") {
                auto list = to_double_list(value, where(key));
                cfg.deflation_r2 = list.front();
                if (list.size() > 1) {
                    cfg.deflation_r2_sweep = list;
                }
            } else if (key == "controls_per_case") {
                auto list = to_double_list(value, where(key));
                cfg.controls_per_case = static_cast<int>(list.front());
                if (list.size() > 1) {
                    for (double v : list) {
                        cfg.controls_sweep.push_back(static_cast<int>(v));
                    }
                }
            } else if (key == "strata") {
                cfg.variance_strata = static_cast<int>(to_int(value, where(key)));
            } else if (key == "resample_seed") {
                cfg.resample_seed = to_u64(value, where(key));
            } else {
                throw ConfigError(where(key) + ": unknown key");
            }
        } else if (section == "error") {
            if (key == "family") {
                if (value == "none") {
                    error_family_none = true;
                } else {
                    error_family_none = false;
                    err.family = parse_family(value, where(key));
                }
            } else if (key == "gamma0") {
                err.gamma0 = to_double(value, where(key));
            } else if (key == "gamma1") {
                err.gamma1 = to_double(value, where(key));
            } else if (key == "gamma_m0") {
                err.gamma_m0 = to_double(value, where(key));
            } else if (key == "gamma_m1") {
                err.gamma_m1 = to_double(value, where(key));
            } else if (key == "kappa") {
                err.noise_scale = to_double(value, where(key));
            } else if (key == "iid_noise_var") {
                err.iid_noise_var = to_double(value, where(key));
            } else if (key == "rho_time") {
                err.autocorr.rho_time = to_double(value, where(key));
            } else if (key == "rho_space") {
                err.autocorr.rho_space = to_double(value, where(key));
            } else if (key == "gamma_shape") {
                err.gamma_noise.shape = to_double(value, where(key));
            } else if (key == "gamma_rate") {
                err.gamma_noise.rate = to_double(value, where(key));
            } else {
                throw ConfigError(where(key) + ": unknown key");
            }
        } else if (section == "bias") {
            if (key == "mode") {
                bias_mode_raw = value;
            } else if (key == "sign") {
                if (value != "plus" && value != "minus") {
                    throw ConfigError(where(key) + ": expected plus|minus");
                }
                eq19_sign = value;
            } else if (key == "r2") {
                auto list = to_double_list(value, where(key));
                cfg.bias_r2 = list.front();
                if (list.size() > 1) {
                    cfg.bias_r2_sweep = list;
                }
            } else if (key == "gamma1") {
                auto list = to_double_list(value, where(key));
                cfg.bias_gamma1 = list.front();
                if (list.size() > 1) {
                    cfg.bias_gamma1_sweep = list;
                }
            } else if (key == "validation") {
                cfg.validation_path = value;
            } else if (key == "mean_exp_u") {
                cfg.mean_exp_u = to_double(value, where(key));
            } else if (key == "var_x") {
                cfg.mc_var_x = to_double(value, where(key));
            } else if (key == "mean_x") {
                cfg.mc_mean_x = to_double(value, where(key));
            } else if (key == "var_u") {
                cfg.mc_var_u = to_double(value, where(key));
            } else {
                throw ConfigError(where(key) + ": unknown key");
            }
        } else if (section == "sim") {
            if (key == "replicates") {
                cfg.sim.replicates = static_cast<int>(to_int(value, where(key)));
            } else if (key == "units") {
                cfg.sim.units = static_cast<int>(to_int(value, where(key)));
            } else if (key == "days") {
                cfg.sim.days = static_cast<int>(to_int(value, where(key)));
            } else if (key == "groups") {
                cfg.sim.groups = static_cast<int>(to_int(value, where(key)));
            } else if (key == "seed") {
                cfg.sim.seed = to_u64(value, where(key));
            } else if (key == "K") {
                cfg.sim.K = to_double(value, where(key));
            } else if (key == "threads") {
                cfg.sim.threads = static_cast<int>(to_int(value, where(key)));
            } else if (key == "baseline") {
                auto list = to_double_list(value, where(key));
                if (list.size() != 3) {
                    throw ConfigError(where(key) + ": expected a,b,phase");
                }
                cfg.sim.baseline_a = list[0];
                cfg.sim.baseline_b = list[1];
                cfg.sim.baseline_phase = list[2];
            } else if (key == "exposure_mean") {
                cfg.sim.exposure_mean = to_double(value, where(key));
            } else if (key == "exposure_var") {
                cfg.sim.exposure_var = to_double(value, where(key));
            } else if (key == "rho_time") {
                cfg.sim.exposure_rho_time = to_double(value, where(key));
            } else if (key == "rho_space") {
                cfg.sim.exposure_rho_space = to_double(value, where(key));
            } else if (key == "confounders") {
                cfg.sim.confounders = to_int(value, where(key)) != 0;
            } else if (key == "n_grid") {
                for (double v : to_double_list(value, where(key))) {
                    cfg.sim.n_grid.push_back(static_cast<int>(v));
                }
            } else if (key == "epoch") {
                int y = 0, mo = 0, d = 0;
                if (std::sscanf(value.c_str(), "%d-%d-%d", &y, &mo, &d) != 3) {
                    throw ConfigError(where(key) + ": expected YYYY-MM-DD");
                }
                cfg.sim.epoch_year = y;
                cfg.sim.epoch_month = mo;
                cfg.sim.epoch_day = d;
            } else {
                throw ConfigError(where(key) + ": unknown key");
            }
        } else if (section == "output") {
            if (key == "dir") {
                cfg.output_dir = value;
            } else {
                throw ConfigError(where(key) + ": unknown key");
            }
        }
    }

    if (!bias_mode_raw.empty()) {
        if (bias_mode_raw == "none") {
            cfg.bias_mode = BiasMode::None;
        } else if (bias_mode_raw == "eq19_plus") {
            cfg.bias_mode = BiasMode::Eq19Plus;
        } else if (bias_mode_raw == "eq19_minus") {
            cfg.bias_mode = BiasMode::Eq19Minus;
        } else if (bias_mode_raw == "eq19") {
            if (eq19_sign.empty()) {
                throw ConfigError("bias.mode: eq19 requires bias.sign = plus|minus");
            }
            cfg.bias_mode = eq19_sign == "plus" ? BiasMode::Eq19Plus : BiasMode::Eq19Minus;
        } else if (bias_mode_raw == "eq20") {
            cfg.bias_mode = BiasMode::Eq20;
        } else if (bias_mode_raw == "calibration") {
            cfg.bias_mode = BiasMode::Calibration;
        } else if (bias_mode_raw == "bl") {
            cfg.bias_mode = BiasMode::Bl;
        } else if (bias_mode_raw == "mb") {
            cfg.bias_mode = BiasMode::Mb;
        } else if (bias_mode_raw == "mc") {
            cfg.bias_mode = BiasMode::Mc;
        } else if (bias_mode_raw == "poly") {
            cfg.bias_mode = BiasMode::Poly;
        } else {
            throw ConfigError("bias.mode: unknown mode '" + bias_mode_raw + "'");
        }
    }
    if (has_error_section && !error_family_none) {
        cfg.error = err;
    }
    return cfg;
}

ScenarioConfig load_scenario_file(const std::string &path) {
    return parse_scenario(read_text_file(path), path);
}

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string join(const std::vector<double> &v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += (i ? ", " : "") + num(v[i]);
    }
    return s;
}

std::string join_int(const std::vector<int> &v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += (i ? ", " : "") + std::to_string(v[i]);
    }
    return s;
}

} // namespace

std::string scenario_to_text(const ScenarioConfig &cfg) {
    std::ostringstream os;
    os << "[test]\n";
    os << "alpha = " << num(cfg.test.alpha) << "\n";
    os << "power = " << num(cfg.test.power_target) << "\n";
    os << "sided = " << (cfg.test.sided == Sidedness::TwoSided ? "two" : "one") << "\n";

    os << "\n[effect]\n";
    os << "theta = " << join(cfg.effect.theta) << "\n";
    if (!cfg.effect.weights.empty()) {
        os << "weights = " << join(cfg.effect.weights) << "\n";
    }
    os << "target = "
       << (cfg.target.cumulative ? std::string("cumulative") : std::to_string(cfg.target.lag))
       << "\n";

    os << "\n[variance]\n";
    switch (cfg.variance_source) {
    case ScenarioConfig::VarianceSource::Value:
        os << "source = value\n";
        os << "sigma_bar_sq = " << num(cfg.sigma_bar_sq) << "\n";
        break;
    case ScenarioConfig::VarianceSource::File:
        os << "source = file\n";
        os << "panel = " << cfg.panel_path << "\n";
        break;
    case ScenarioConfig::VarianceSource::Synthetic:
        os << "source = synthetic\n";
        break;
    }
    os << "deflation_r2 = "
       << (cfg.deflation_r2_sweep.empty() ? num(cfg.deflation_r2)
                                          : join(cfg.deflation_r2_sweep))
       << "\n";
    if (cfg.controls_sweep.empty()) {
        os << "controls_per_case = " << cfg.controls_per_case << "\n";
    } else {
        os << "controls_per_case = " << join_int(cfg.controls_sweep) << "\n";
    }
    os << "strata = " << cfg.variance_strata << "\n";
    os << "resample_seed = " << cfg.resample_seed << "\n";

    if (cfg.error) {
        const auto &e = *cfg.error;
        os << "\n[error]\n";
        os << "family = " << family_name(e.family) << "\n";
        os << "gamma0 = " << num(e.gamma0) << "\n";
        os << "gamma1 = " << num(e.gamma1) << "\n";
        os << "gamma_m0 = " << num(e.gamma_m0) << "\n";
        os << "gamma_m1 = " << num(e.gamma_m1) << "\n";
        os << "kappa = " << num(e.noise_scale) << "\n";
        os << "iid_noise_var = " << num(e.iid_noise_var) << "\n";
        os << "rho_time = " << num(e.autocorr.rho_time) << "\n";
        os << "rho_space = " << num(e.autocorr.rho_space) << "\n";
        os << "gamma_shape = " << num(e.gamma_noise.shape) << "\n";
        os << "gamma_rate = " << num(e.gamma_noise.rate) << "\n";
    }

    os << "\n[bias]\n";
    os << "mode = " << bias_mode_name(cfg.bias_mode) << "\n";
    os << "r2 = " << (cfg.bias_r2_sweep.empty() ? num(cfg.bias_r2) : join(cfg.bias_r2_sweep))
       << "\n";
    os << "gamma1 = "
       << (cfg.bias_gamma1_sweep.empty() ? num(cfg.bias_gamma1) : join(cfg.bias_gamma1_sweep))
       << "\n";
    if (!cfg.validation_path.empty()) {
        os << "validation = " << cfg.validation_path << "\n";
    }
    os << "mean_exp_u = " << num(cfg.mean_exp_u) << "\n";
    os << "var_x = " << num(cfg.mc_var_x) << "\n";
    os << "mean_x = " << num(cfg.mc_mean_x) << "\n";
    os << "var_u = " << num(cfg.mc_var_u) << "\n";

    os << "\n[sim]\n";
    os << "replicates = " << cfg.sim.replicates << "\n";
    os << "units = " << cfg.sim.units << "\n";
    os << "days = " << cfg.sim.days << "\n";
    os << "groups = " << cfg.sim.groups << "\n";
    os << "seed = " << cfg.sim.seed << "\n";
    os << "K = " << num(cfg.sim.K) << "\n";
    os << "threads = " << cfg.sim.threads << "\n";
    os << "baseline = " << num(cfg.sim.baseline_a) << ", " << num(cfg.sim.baseline_b) << ", "
       << num(cfg.sim.baseline_phase) << "\n";
    os << "exposure_mean = " << num(cfg.sim.exposure_mean) << "\n";
    os << "exposure_var = " << num(cfg.sim.exposure_var) << "\n";
    os << "rho_time = " << num(cfg.sim.exposure_rho_time) << "\n";
    os << "rho_space = " << num(cfg.sim.exposure_rho_space) << "\n";
    os << "confounders = " << (cfg.sim.confounders ? 1 : 0) << "\n";
    if (!cfg.sim.n_grid.empty()) {
        os << "n_grid = " << join_int(cfg.sim.n_grid) << "\n";
    }
    char epoch[32];
    std::snprintf(epoch, sizeof(epoch), "%04d-%02d-%02d", cfg.sim.epoch_year,
                  cfg.sim.epoch_month, cfg.sim.epoch_day);
    os << "epoch = " << epoch << "\n";

    os << "\n[output]\n";
    os << "dir = " << cfg.output_dir << "\n";
    return os.str();
}

} // namespace powerlag
