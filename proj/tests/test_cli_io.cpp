#include "powerlag/commands.hpp"
#include "powerlag/errors.hpp"
#include "powerlag/error_sim.hpp"
#include "powerlag/panel_csv.hpp"
#include "powerlag/scenario.hpp"
#include "powerlag/svg.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace powerlag;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string &name) {
    fs::path dir = fs::temp_directory_path() / ("powerlag_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path &path, const std::string &content) {
    std::ofstream out(path);
    out << content;
}

std::string slurp(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

} // namespace

TEST_CASE("scenario parsing accepts the documented grammar") {
    const std::string text = R"([test]
alpha = 0.05
power = 0.8
sided = two

[effect]
theta = 0.1
target = 0

[variance]
source = value
sigma_bar_sq = 1.0
deflation_r2 = 0
)";
    ScenarioConfig cfg = parse_scenario(text);
    CHECK(cfg.test.alpha == 0.05);
    CHECK(cfg.effect.theta.size() == 1);
    CHECK(cfg.variance_source == ScenarioConfig::VarianceSource::Value);
    CHECK(validate_scenario(cfg).ok());
}

TEST_CASE("unknown keys and sections are hard errors") {
    CHECK_THROWS_AS(parse_scenario("[test]\nalfa = 0.05\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario("[testing]\nalpha = 0.05\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario("alpha = 0.05\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario("[test]\nalpha = zero\n"), ConfigError);
}

TEST_CASE("panel csv round-trip and error reporting") {
    auto dir = temp_dir("csv");
    ExposurePanel p = gen_exposure_panel(3, 4, 10.0, 2.0, 0.2, 0.0, 9);
    write_panel_csv(p, (dir / "panel.csv").string());
    ExposurePanel back = load_panel_csv((dir / "panel.csv").string());
    CHECK(back.unit_ids == p.unit_ids);
    CHECK(back.times == p.times);
    CHECK((back.values - p.values).norm() == 0.0);

    write_file(dir / "dup.csv", "unit,time,value\nu1,5,1.0\nu1,5,2.0\n");
    try {
        load_panel_csv((dir / "dup.csv").string());
        FAIL("expected DataError");
    } catch (const DataError &e) {
        CHECK(std::string(e.what()).find(":3") != std::string::npos);
        CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
    }

    write_file(dir / "ragged.csv", "unit,time,value\nu1,0,1.0\nu1,1,2.0\nu2,0,3.0\n");
    CHECK_THROWS_AS(load_panel_csv((dir / "ragged.csv").string()), DataError);

    write_file(dir / "bad.csv", "unit,time,value\nu1,0,abc\n");
    CHECK_THROWS_AS(load_panel_csv((dir / "bad.csv").string()), DataError);

    write_file(dir / "val.csv",
               "unit,time,true_value,measured_value\nu1,0,1.0,1.1\nu1,1,2.0,2.1\n");
    auto [truth, measured] = load_validation_csv((dir / "val.csv").string());
    CHECK(truth.values(0, 1) == 2.0);
    CHECK(measured.values(0, 1) == 2.1);
}

TEST_CASE("samplesize command reproduces the worked case and sweeps") {
    auto dir = temp_dir("samplesize");
    const std::string scenario = R"([test]
alpha = 0.05
power = 0.8
sided = two

[effect]
theta = 0.1
target = 0

[variance]
source = value
sigma_bar_sq = 1.0
deflation_r2 = 0, 0.25, 0.5, 0.75

[output]
dir = )" + (dir / "out").string() + "\n";
    write_file(dir / "scenario.ini", scenario);

    commands::Options opt;
    opt.scenario_path = (dir / "scenario.ini").string();
    std::ostringstream out, err;
    const int rc = commands::samplesize(opt, out, err);
    CHECK(rc == 0);

    const std::string csv = slurp(dir / "out" / "samplesize.csv");
    CHECK(csv.find("# powerlag") != std::string::npos);
    CHECK(csv.find("bias_mode,deflation_r2,") != std::string::npos);
    // Eq. 2 worked case: first row has n_cases = 785
    CHECK(csv.find(",785,") != std::string::npos);

    // deflation sweep: n strictly increasing across the four rows
    std::istringstream lines(csv);
    std::string line;
    std::vector<long> ns;
    while (std::getline(lines, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("bias_mode", 0) == 0) {
            continue;
        }
        // n_cases is the 9th comma-separated field
        std::istringstream fields(line);
        std::string f;
        for (int i = 0; i < 9; ++i) {
            std::getline(fields, f, ',');
        }
        ns.push_back(std::stol(f));
    }
    REQUIRE(ns.size() == 4);
    CHECK(ns[0] == 785);
    CHECK(ns[1] == 1047);
    CHECK(ns[2] == 1570);
    CHECK(ns[3] == 3140);
    for (std::size_t i = 1; i < ns.size(); ++i) {
        CHECK(ns[i] > ns[i - 1]);
    }
}

TEST_CASE("eq20 mode scales the effective effect by R^2/gamma1") {
    auto dir = temp_dir("eq20");
    const std::string scenario = R"([test]
alpha = 0.05
power = 0.8
sided = two

[effect]
theta = 0.001, 0.0024, 0.0006
target = cumulative

[variance]
source = value
sigma_bar_sq = 13.8

[bias]
mode = eq20
r2 = 0.919
gamma1 = 0.88

[output]
dir = )" + (dir / "out").string() + "\n";
    write_file(dir / "scenario.ini", scenario);

    commands::Options opt;
    opt.scenario_path = (dir / "scenario.ini").string();
    std::ostringstream out, err;
    REQUIRE(commands::samplesize(opt, out, err) == 0);
    const std::string csv = slurp(dir / "out" / "samplesize.csv");
    // effective theta = 0.919 * 0.004 / 0.88 = 1.0443x the true cumulative
    CHECK(csv.find("0.004177272727") != std::string::npos);
}

TEST_CASE("config errors exit with code 2, data errors with 3") {
    auto dir = temp_dir("codes");
    write_file(dir / "bad.ini", "[test]\nalpha = 2.0\n[effect]\ntheta = 0.1\n");
    commands::Options opt;
    opt.scenario_path = (dir / "bad.ini").string();
    std::ostringstream out, err;
    CHECK(commands::validate_config(opt, out, err) == 2);

    const std::string missing_panel = R"([test]
alpha = 0.05
power = 0.8

[effect]
theta = 0.1
target = 0

[variance]
source = file
panel = )" + (dir / "absent.csv").string() +
                                      "\n[output]\ndir = " + (dir / "out").string() + "\n";
    write_file(dir / "missing.ini", missing_panel);
    commands::Options opt2;
    opt2.scenario_path = (dir / "missing.ini").string();
    std::ostringstream out2, err2;
    CHECK(commands::samplesize(opt2, out2, err2) == 3);
}

TEST_CASE("simulate command writes deterministic per-replicate rows") {
    auto dir = temp_dir("simulate");
    const std::string scenario = R"([test]
alpha = 0.05
power = 0.8

[effect]
theta = 0.05, 0.12, 0.03
target = cumulative

[sim]
replicates = 2
units = 25
days = 70
seed = 31415
baseline = 0.03, 0, 0

[output]
dir = )" + (dir / "out").string() + "\n";
    write_file(dir / "scenario.ini", scenario);

    commands::Options opt;
    opt.scenario_path = (dir / "scenario.ini").string();
    std::ostringstream out1, err1;
    REQUIRE(commands::simulate(opt, out1, err1) == 0);
    const std::string first = slurp(dir / "out" / "replicates.csv");
    const std::string summary1 = slurp(dir / "out" / "summary.csv");

    std::ostringstream out2, err2;
    REQUIRE(commands::simulate(opt, out2, err2) == 0);
    CHECK(slurp(dir / "out" / "replicates.csv") == first);
    CHECK(slurp(dir / "out" / "summary.csv") == summary1);

    CHECK(first.find("replicate,status,n_strata") != std::string::npos);
}

TEST_CASE("power-curve command emits a monotone calculated curve and an SVG") {
    auto dir = temp_dir("powercurve");
    const std::string scenario = R"([test]
alpha = 0.05
power = 0.8

[effect]
theta = 0.1
target = 0

[variance]
source = value
sigma_bar_sq = 1.0

[sim]
replicates = 0
n_grid = 200, 400, 600, 785, 1000

[output]
dir = )" + (dir / "out").string() + "\n";
    write_file(dir / "scenario.ini", scenario);

    commands::Options opt;
    opt.scenario_path = (dir / "scenario.ini").string();
    std::ostringstream out, err;
    REQUIRE(commands::power_curve(opt, out, err) == 0);

    const std::string csv = slurp(dir / "out" / "power_curve.csv");
    std::istringstream lines(csv);
    std::string line;
    double prev = -1.0;
    int rows = 0;
    bool saw_785 = false;
    while (std::getline(lines, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("n,", 0) == 0) {
            continue;
        }
        std::istringstream fields(line);
        std::string n_str, p_str;
        std::getline(fields, n_str, ',');
        std::getline(fields, p_str, ',');
        const double p = std::stod(p_str);
        CHECK(p >= prev);
        prev = p;
        ++rows;
        if (n_str == "785") {
            saw_785 = true;
            CHECK(p >= 0.8); // curve passes through the design point
            CHECK(p < 0.81);
        }
    }
    CHECK(rows == 5);
    CHECK(saw_785);

    const std::string svg = slurp(dir / "out" / "power_curve.svg");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("stroke-dasharray") != std::string::npos);

    // determinism of the SVG
    std::ostringstream out2, err2;
    REQUIRE(commands::power_curve(opt, out2, err2) == 0);
    CHECK(slurp(dir / "out" / "power_curve.svg") == svg);
}

TEST_CASE("bias command emits the per-lag table with a cumulative row") {
    auto dir = temp_dir("bias");

    // validation file: truth and a pure linear transform of it
    ExposurePanel truth = gen_exposure_panel(10, 40, 10.0, 4.0, 0.4, 0.0, 3);
    std::ofstream val(dir / "val.csv");
    val << "unit,time,true_value,measured_value\n";
    for (std::size_t u = 0; u < truth.n_units(); ++u) {
        for (std::size_t t = 0; t < truth.n_times(); ++t) {
            val << truth.unit_ids[u] << ',' << truth.times[t] << ','
                << truth.values(u, t) << ',' << truth.values(u, t) << "\n";
        }
    }
    val.close();

    const std::string scenario = R"([test]
alpha = 0.05
power = 0.8

[effect]
theta = 0.001, 0.0024, 0.0006
target = cumulative

[bias]
mode = calibration
r2 = 1.0
gamma1 = 1.0
validation = )" + (dir / "val.csv").string() +
                                 "\n[output]\ndir = " + (dir / "out").string() + "\n";
    write_file(dir / "scenario.ini", scenario);

    commands::Options opt;
    opt.scenario_path = (dir / "scenario.ini").string();
    std::ostringstream out, err;
    REQUIRE(commands::bias(opt, out, err) == 0);
    const std::string csv = slurp(dir / "out" / "bias.csv");
    CHECK(csv.find("lag,theta_true,") != std::string::npos);
    CHECK(csv.find("cumulative,0.004,") != std::string::npos);
    // perfect validation data: calibration column equals theta_true;
    // R^2 = 1, gamma1 = 1: eq19/eq20 columns equal theta_true as well
    CHECK(csv.find("0,0.001,0.001,0.001,0.001,0.001,") != std::string::npos);
}

TEST_CASE("svg output is deterministic") {
    SvgChart chart;
    chart.title = "t";
    SvgSeries s;
    s.x = {1, 2, 3};
    s.y = {0.1, 0.5, 0.9};
    s.dashed = true;
    chart.series.push_back(s);
    CHECK(render_svg(chart) == render_svg(chart));
}
