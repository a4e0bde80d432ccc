#include "powerlag/panel_csv.hpp"

#include "powerlag/errors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <vector>

namespace powerlag {

namespace {

std::vector<std::string> split_csv_line(const std::string &line) {
    std::vector<std::string> fields;
    std::string::size_type start = 0;
    for (;;) {
        auto comma = line.find(',', start);
        std::string f = line.substr(start, comma == std::string::npos ? comma : comma - start);
        // trim spaces and a trailing CR
        while (!f.empty() && (f.back() == ' ' || f.back() == '\r' || f.back() == '\t')) {
            f.pop_back();
        }
        std::string::size_type b = 0;
        while (b < f.size() && (f[b] == ' ' || f[b] == '\t')) {
            ++b;
        }
        fields.push_back(f.substr(b));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return fields;
}

double parse_double(const std::string &s, const std::string &path, int line_no) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw DataError(path + ":" + std::to_string(line_no) + ": non-numeric value '" + s + "'");
    }
    return value;
}

int parse_int(const std::string &s, const std::string &path, int line_no) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw DataError(path + ":" + std::to_string(line_no) + ": non-integer time '" + s + "'");
    }
    return value;
}

struct RawRows {
    std::vector<std::string> units;          // first-appearance order
    std::vector<int> times;                  // sorted distinct
    std::map<std::pair<std::string, int>, std::vector<double>> cells;
    int value_count = 0;
};

RawRows read_rows(const std::string &path, const std::vector<std::string> &expected_header) {
    std::ifstream in(path);
    if (!in) {
        throw DataError(path + ": cannot open");
    }
    RawRows raw;
    raw.value_count = static_cast<int>(expected_header.size()) - 2;

    std::set<std::string> seen_units;
    std::set<int> seen_times;
    std::string line;
    int line_no = 0;
    bool header_done = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') {
            continue;
        }
        auto fields = split_csv_line(line);
        if (!header_done) {
            if (fields != expected_header) {
                std::string want;
                for (std::size_t i = 0; i < expected_header.size(); ++i) {
                    want += (i ? "," : "") + expected_header[i];
                }
                throw DataError(path + ":" + std::to_string(line_no) + ": expected header '" +
                                want + "'");
            }
            header_done = true;
            continue;
        }
        if (fields.size() != expected_header.size()) {
            throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(expected_header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        }
        const std::string &unit = fields[0];
        if (unit.empty()) {
            throw DataError(path + ":" + std::to_string(line_no) + ": empty unit id");
        }
        const int t = parse_int(fields[1], path, line_no);
        std::vector<double> values;
        for (int v = 0; v < raw.value_count; ++v) {
            values.push_back(parse_double(fields[2 + v], path, line_no));
        }
        auto key = std::make_pair(unit, t);
        if (!raw.cells.emplace(key, std::move(values)).second) {
            throw DataError(path + ":" + std::to_string(line_no) + ": duplicate (unit,time) (" +
                            unit + "," + std::to_string(t) + ")");
        }
        if (seen_units.insert(unit).second) {
            raw.units.push_back(unit);
        }
        seen_times.insert(t);
    }
    if (!header_done) {
        throw DataError(path + ": empty file");
    }
    raw.times.assign(seen_times.begin(), seen_times.end());
    if (raw.units.empty() || raw.times.empty()) {
        throw DataError(path + ": no data rows");
    }
    return raw;
}

ExposurePanel panel_from(const RawRows &raw, const std::string &path, int value_index,
                         PanelKind kind) {
    ExposurePanel p;
    p.unit_ids = raw.units;
    p.times = raw.times;
    p.kind = kind;
    p.values.resize(static_cast<Eigen::Index>(raw.units.size()),
                    static_cast<Eigen::Index>(raw.times.size()));
    for (std::size_t u = 0; u < raw.units.size(); ++u) {
        for (std::size_t t = 0; t < raw.times.size(); ++t) {
            auto it = raw.cells.find({raw.units[u], raw.times[t]});
            if (it == raw.cells.end()) {
                throw DataError(path + ": missing cell (" + raw.units[u] + "," +
                                std::to_string(raw.times[t]) + ")");
            }
            p.values(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(t)) =
                it->second[value_index];
        }
    }
    return p;
}

} // namespace

ExposurePanel load_panel_csv(const std::string &path) {
    RawRows raw = read_rows(path, {"unit", "time", "value"});
    return panel_from(raw, path, 0, PanelKind::Truth);
}

std::pair<ExposurePanel, ExposurePanel> load_validation_csv(const std::string &path) {
    RawRows raw = read_rows(path, {"unit", "time", "true_value", "measured_value"});
    return {panel_from(raw, path, 0, PanelKind::Truth),
            panel_from(raw, path, 1, PanelKind::Measured)};
}

void write_panel_csv(const ExposurePanel &panel, const std::string &path) {
    std::ofstream out(path);
    if (!out) {
        throw DataError(path + ": cannot open for writing");
    }
    out << "unit,time,value\n";
    char buf[64];
    for (std::size_t u = 0; u < panel.n_units(); ++u) {
        for (std::size_t t = 0; t < panel.n_times(); ++t) {
            std::snprintf(buf, sizeof(buf), "%.17g",
                          panel.values(static_cast<Eigen::Index>(u),
                                       static_cast<Eigen::Index>(t)));
            out << panel.unit_ids[u] << ',' << panel.times[t] << ',' << buf << '\n';
        }
    }
}

} // namespace powerlag
