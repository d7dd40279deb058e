#include "poseuq/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "poseuq/experiment.hpp"

namespace poseuq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    // Avoid "-0.00" so identical geometry always prints identically.
    if (std::string(buf) == "-0.00") return "0.00";
    return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

double parse_num(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ArtifactError("bad number in table: '" + s + "'");
    }
    if (used != s.size()) throw ArtifactError("bad number in table: '" + s + "'");
    return v;
}

std::string opt_num(const std::optional<double>& v) { return v ? fmt_num(*v) : ""; }
std::optional<double> parse_opt(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return parse_num(s);
}

json stats_json(const std::optional<ErrorStats>& s) {
    if (!s) return nullptr;
    return {{"median", s->median}, {"mean", s->mean}, {"std", s->std}};
}

const char* method_color(Method m) {
    switch (m) {
        case Method::DER: return "#d62728";
        case Method::DE: return "#1f77b4";
        case Method::MCD: return "#2ca02c";
    }
    return "#000000";
}

// One rectangular plot area mapping data coordinates to pixels.
struct Panel {
    double left, top, width, height;
    double x0, x1, y0, y1;

    double px(double x) const { return left + (x - x0) / (x1 - x0) * width; }
    double py(double y) const { return top + height - (y - y0) / (y1 - y0) * height; }
};

void draw_frame(std::ostringstream& svg, const Panel& p, const std::string& title, const std::string& xlabel,
                const std::string& ylabel, int ticks) {
    svg << "<rect x=\"" << fixed2(p.left) << "\" y=\"" << fixed2(p.top) << "\" width=\"" << fixed2(p.width)
        << "\" height=\"" << fixed2(p.height) << "\" fill=\"none\" stroke=\"#000000\"/>\n";
    for (int i = 0; i <= ticks; ++i) {
        const double fx = p.x0 + (p.x1 - p.x0) * i / ticks;
        const double fy = p.y0 + (p.y1 - p.y0) * i / ticks;
        svg << "<text x=\"" << fixed2(p.px(fx)) << "\" y=\"" << fixed2(p.top + p.height + 14)
            << "\" font-size=\"10\" text-anchor=\"middle\">" << fixed2(fx) << "</text>\n";
        svg << "<text x=\"" << fixed2(p.left - 4) << "\" y=\"" << fixed2(p.py(fy) + 3)
            << "\" font-size=\"10\" text-anchor=\"end\">" << fixed2(fy) << "</text>\n";
    }
    svg << "<text x=\"" << fixed2(p.left + p.width / 2) << "\" y=\"" << fixed2(p.top - 6)
        << "\" font-size=\"12\" text-anchor=\"middle\">" << title << "</text>\n";
    svg << "<text x=\"" << fixed2(p.left + p.width / 2) << "\" y=\"" << fixed2(p.top + p.height + 28)
        << "\" font-size=\"10\" text-anchor=\"middle\">" << xlabel << "</text>\n";
    svg << "<text x=\"" << fixed2(p.left - 34) << "\" y=\"" << fixed2(p.top + p.height / 2)
        << "\" font-size=\"10\" text-anchor=\"middle\" transform=\"rotate(-90 " << fixed2(p.left - 34) << " "
        << fixed2(p.top + p.height / 2) << ")\">" << ylabel << "</text>\n";
}

void draw_series(std::ostringstream& svg, const Panel& p, const std::vector<std::pair<double, double>>& pts,
                 const char* color) {
    if (pts.empty()) return;
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i) svg << ' ';
        svg << fixed2(p.px(pts[i].first)) << ',' << fixed2(p.py(pts[i].second));
    }
    svg << "\"/>\n";
    for (const auto& [x, y] : pts) {
        svg << "<circle cx=\"" << fixed2(p.px(x)) << "\" cy=\"" << fixed2(p.py(y)) << "\" r=\"2\" fill=\"" << color
            << "\"/>\n";
    }
}

std::string svg_open(int w, int h) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
           std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " + std::to_string(h) +
           "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
}

}  // namespace

std::string fmt_num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArtifactError("missing artifact: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArtifactError("cannot write " + path.string());
    out << content;
    if (!out) throw ArtifactError("failed writing " + path.string());
}

std::string calibration_csv(Method m, const std::vector<CalibrationCurve>& curves) {
    std::string out = std::string(kCalibrationHeader) + "\n";
    for (const auto& c : curves) {
        for (std::size_t i = 0; i < c.levels.size(); ++i) {
            out += to_string(m) + "," + kComponentNames[c.component] + "," + fmt_num(c.levels[i]) + "," +
                   fmt_num(c.observed[i]) + "\n";
        }
    }
    return out;
}

std::vector<CalibrationCurve> parse_calibration_csv(const std::string& text) {
    const auto lines = lines_of(text);
    if (lines.empty() || lines.front() != kCalibrationHeader) throw ArtifactError("calibration table: bad header");
    std::vector<CalibrationCurve> curves;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split(lines[i], ',');
        if (f.size() != 4) throw ArtifactError("calibration table: row " + std::to_string(i) + " needs 4 fields");
        const auto it = std::find(kComponentNames.begin(), kComponentNames.end(), f[1]);
        if (it == kComponentNames.end()) throw ArtifactError("calibration table: unknown component " + f[1]);
        const int comp = static_cast<int>(it - kComponentNames.begin());
        if (curves.empty() || curves.back().component != comp) {
            curves.emplace_back();
            curves.back().component = comp;
        }
        curves.back().levels.push_back(parse_num(f[2]));
        curves.back().observed.push_back(parse_num(f[3]));
    }
    for (auto& c : curves) c.mce = mean_calibration_error(c);
    return curves;
}

SweepRow sweep_row(const GateReport& r) {
    SweepRow row;
    row.percentile = r.thresholds.percentile;
    row.threshold_tr = r.thresholds.tr;
    row.threshold_rot = r.thresholds.rot;
    row.total = r.total;
    row.retained = r.retained;
    row.discarded = r.discarded;
    row.discarded_fraction = r.discarded_fraction;
    if (r.tr_error) {
        row.tr_mean = r.tr_error->mean;
        row.tr_median = r.tr_error->median;
        row.rot_mean_deg = r.rot_error_deg->mean;
        row.rot_median_deg = r.rot_error_deg->median;
    }
    return row;
}

std::string sweep_csv(Method m, const std::vector<SweepRow>& rows) {
    std::string out = std::string(kSweepHeader) + "\n";
    for (const auto& r : rows) {
        out += to_string(m) + "," + fmt_num(r.percentile) + "," + fmt_num(r.threshold_tr) + "," +
               fmt_num(r.threshold_rot) + "," + std::to_string(r.total) + "," + std::to_string(r.retained) + "," +
               std::to_string(r.discarded) + "," + fmt_num(r.discarded_fraction) + "," + opt_num(r.tr_mean) + "," +
               opt_num(r.tr_median) + "," + opt_num(r.rot_mean_deg) + "," + opt_num(r.rot_median_deg) + "\n";
    }
    return out;
}

std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
    const auto lines = lines_of(text);
    if (lines.empty() || lines.front() != kSweepHeader) throw ArtifactError("sweep table: bad header");
    std::vector<SweepRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split(lines[i], ',');
        if (f.size() != 12) throw ArtifactError("sweep table: row " + std::to_string(i) + " needs 12 fields");
        SweepRow r;
        r.percentile = parse_num(f[1]);
        r.threshold_tr = parse_num(f[2]);
        r.threshold_rot = parse_num(f[3]);
        r.total = static_cast<std::size_t>(parse_num(f[4]));
        r.retained = static_cast<std::size_t>(parse_num(f[5]));
        r.discarded = static_cast<std::size_t>(parse_num(f[6]));
        r.discarded_fraction = parse_num(f[7]);
        r.tr_mean = parse_opt(f[8]);
        r.tr_median = parse_opt(f[9]);
        r.rot_mean_deg = parse_opt(f[10]);
        r.rot_median_deg = parse_opt(f[11]);
        rows.push_back(r);
    }
    return rows;
}

json gate_report_json(Method m, const GateReport& r, const PredictionLog& log) {
    json ids = json::array();
    for (std::size_t i = 0; i < r.decisions.size() && i < log.records.size(); ++i) {
        if (r.decisions[i]) ids.push_back(log.records[i].id);
    }
    return {{"method", to_string(m)},
            {"rule", "and"},
            {"percentile", r.thresholds.percentile},
            {"threshold_tr", r.thresholds.tr},
            {"threshold_rot", r.thresholds.rot},
            {"total", r.total},
            {"retained", r.retained},
            {"discarded", r.discarded},
            {"discarded_fraction", r.discarded_fraction},
            {"tr_error", stats_json(r.tr_error)},
            {"rot_error_deg", stats_json(r.rot_error_deg)},
            {"discarded_ids", ids}};
}

SummaryRow summarize(const PredictionLog& log, double gate_percentile, int calibration_levels) {
    SummaryRow row;
    row.method = log.header.method;
    row.records = log.records.size();
    const ErrorSummary noise = injected_noise(log);
    row.noise_tr_median = noise.tr.median;
    row.noise_rot_median_deg = noise.rot_deg.median;
    const ErrorSummary err = ungated_errors(log);
    row.tr = err.tr;
    row.rot_deg = err.rot_deg;
    row.gate_percentile = gate_percentile;
    const GateReport gate = apply_gate(log, percentile_thresholds(log, gate_percentile));
    row.discarded_fraction = gate.discarded_fraction;
    row.gated_tr = gate.tr_error;
    row.gated_rot_deg = gate.rot_error_deg;
    double sum = 0.0;
    for (int c = 0; c < 6; ++c) {
        row.mce[c] = calibration_curve(log, c, calibration_levels).mce;
        sum += row.mce[c];
    }
    row.mce_mean = sum / 6.0;
    return row;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::string out = std::string(kSummaryHeader) + "\n";
    for (const auto& r : rows) {
        std::string line = to_string(r.method) + "," + std::to_string(r.records);
        for (double v : {r.noise_tr_median, r.noise_rot_median_deg, r.tr.mean, r.tr.median, r.tr.std, r.rot_deg.mean,
                         r.rot_deg.median, r.rot_deg.std, r.gate_percentile, r.discarded_fraction}) {
            line += "," + fmt_num(v);
        }
        auto opt = [](const std::optional<ErrorStats>& s, bool mean) -> std::optional<double> {
            if (!s) return std::nullopt;
            return mean ? s->mean : s->median;
        };
        line += "," + opt_num(opt(r.gated_tr, true)) + "," + opt_num(opt(r.gated_tr, false)) + "," +
                opt_num(opt(r.gated_rot_deg, true)) + "," + opt_num(opt(r.gated_rot_deg, false));
        for (double v : r.mce) line += "," + fmt_num(v);
        line += "," + fmt_num(r.mce_mean);
        out += line + "\n";
    }
    return out;
}

json summary_json(const std::vector<SummaryRow>& rows) {
    json arr = json::array();
    for (const auto& r : rows) {
        json mce = json::object();
        for (int c = 0; c < 6; ++c) mce[kComponentNames[c]] = r.mce[c];
        arr.push_back({{"method", to_string(r.method)},
                       {"records", r.records},
                       {"noise_tr_median", r.noise_tr_median},
                       {"noise_rot_median_deg", r.noise_rot_median_deg},
                       {"tr_error", stats_json(r.tr)},
                       {"rot_error_deg", stats_json(r.rot_deg)},
                       {"gate_percentile", r.gate_percentile},
                       {"discarded_fraction", r.discarded_fraction},
                       {"gated_tr_error", stats_json(r.gated_tr)},
                       {"gated_rot_error_deg", stats_json(r.gated_rot_deg)},
                       {"mce", mce},
                       {"mce_mean", r.mce_mean}});
    }
    return {{"methods", arr}};
}

std::string calibration_svg(const std::string& title, const std::vector<CalibrationCurve>& curves) {
    constexpr int kW = 900, kH = 620;
    std::ostringstream svg;
    svg << svg_open(kW, kH);
    svg << "<text x=\"" << kW / 2 << "\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">" << title << "</text>\n";
    for (int c = 0; c < 6; ++c) {
        const Panel p{70.0 + (c % 3) * 280.0, 60.0 + (c / 3) * 280.0, 200.0, 200.0, 0.0, 1.0, 0.0, 1.0};
        const CalibrationCurve* curve = nullptr;
        for (const auto& cc : curves) {
            if (cc.component == c) curve = &cc;
        }
        std::string panel_title = kComponentNames[c];
        if (curve) panel_title += " (mce " + fixed2(curve->mce) + ")";
        draw_frame(svg, p, panel_title, "expected confidence", "observed confidence", 4);
        svg << "<line x1=\"" << fixed2(p.px(0)) << "\" y1=\"" << fixed2(p.py(0)) << "\" x2=\"" << fixed2(p.px(1))
            << "\" y2=\"" << fixed2(p.py(1)) << "\" stroke=\"#888888\" stroke-dasharray=\"4 3\"/>\n";
        if (curve) {
            std::vector<std::pair<double, double>> pts;
            for (std::size_t i = 0; i < curve->levels.size(); ++i) pts.emplace_back(curve->levels[i], curve->observed[i]);
            draw_series(svg, p, pts, "#1f77b4");
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string sweep_svg(const std::map<Method, std::vector<SweepRow>>& series) {
    constexpr int kW = 760, kH = 340;
    double x_max = 0.0, tr_max = 0.0, rot_max = 0.0;
    for (const auto& [m, rows] : series) {
        for (const auto& r : rows) {
            x_max = std::max(x_max, r.percentile);
            if (r.tr_mean) tr_max = std::max(tr_max, *r.tr_mean);
            if (r.rot_mean_deg) rot_max = std::max(rot_max, *r.rot_mean_deg);
        }
    }
    auto upper = [](double v) { return v > 0.0 ? v * 1.1 : 1.0; };
    const Panel tr{70.0, 50.0, 260.0, 220.0, 0.0, upper(x_max), 0.0, upper(tr_max)};
    const Panel rot{440.0, 50.0, 260.0, 220.0, 0.0, upper(x_max), 0.0, upper(rot_max)};

    std::ostringstream svg;
    svg << svg_open(kW, kH);
    draw_frame(svg, tr, "mean translation error (m)", "discarded percentile", "m", 4);
    draw_frame(svg, rot, "mean rotation error (deg)", "discarded percentile", "deg", 4);
    int legend = 0;
    for (const auto& [m, rows] : series) {
        std::vector<std::pair<double, double>> pts_tr, pts_rot;
        for (const auto& r : rows) {
            if (r.tr_mean) pts_tr.emplace_back(r.percentile, *r.tr_mean);
            if (r.rot_mean_deg) pts_rot.emplace_back(r.percentile, *r.rot_mean_deg);
        }
        draw_series(svg, tr, pts_tr, method_color(m));
        draw_series(svg, rot, pts_rot, method_color(m));
        svg << "<text x=\"" << 710 << "\" y=\"" << 60 + 16 * legend << "\" font-size=\"11\" fill=\""
            << method_color(m) << "\">" << to_string(m) << "</text>\n";
        ++legend;
    }
    svg << "</svg>\n";
    return svg.str();
}

void emit_report(const fs::path& dir, const std::vector<Method>& methods, double gate_percentile,
                 int calibration_levels) {
    std::vector<SummaryRow> rows;
    std::map<Method, std::vector<SweepRow>> sweeps;
    for (Method m : methods) {
        const std::string tag = method_tag(m);
        const fs::path log_path = dir / ("predictions_" + tag + ".jsonl");
        if (!fs::exists(log_path)) throw ArtifactError("missing artifact: " + log_path.string());
        const PredictionLog log = read_log(log_path);
        const auto curves = parse_calibration_csv(read_text(dir / ("calibration_" + tag + ".csv")));
        sweeps[m] = parse_sweep_csv(read_text(dir / ("sweep_" + tag + ".csv")));
        write_text(dir / ("calibration_" + tag + ".svg"), calibration_svg(to_string(m) + " calibration", curves));
        rows.push_back(summarize(log, gate_percentile, calibration_levels));
    }
    write_text(dir / "sweep.svg", sweep_svg(sweeps));
    write_text(dir / "summary.csv", summary_csv(rows));
    write_text(dir / "summary.json", summary_json(rows).dump(2) + "\n");
}

}  // namespace poseuq
