#include "memgauge/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json_util.hpp"

namespace memgauge {

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot open '" + path + "' for writing");
    out << content;
    out.flush();
    if (!out) throw Error(ErrorKind::IoFailure, "write error on '" + path + "'");
}

std::string csv_field(const std::string& value) {
    if (value.find_first_of(",\"\n") == std::string::npos) return value;
    std::string quoted = "\"";
    for (char c : value) {
        if (c == '"') quoted += "\"\"";
        else quoted.push_back(c);
    }
    quoted.push_back('"');
    return quoted;
}

} // namespace

void emit_csv(const std::vector<MetricSeries>& collection, const std::string& path) {
    std::vector<const MetricSeries*> sorted;
    sorted.reserve(collection.size());
    for (const auto& series : collection) sorted.push_back(&series);
    std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
        if (a->noise_rate != b->noise_rate) return a->noise_rate < b->noise_rate;
        if (a->run_id != b->run_id) return a->run_id < b->run_id;
        return a->metric < b->metric;
    });
    std::string out = "noise_rate,run_id,metric,epoch,split,value\n";
    for (const auto* series : sorted) {
        const std::size_t epochs = std::max(series->train.size(), series->heldout.size());
        for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
            for (int split = 0; split < 2; ++split) {
                const auto& values = split == 0 ? series->train : series->heldout;
                if (epoch >= values.size()) continue;
                out += detail::format_double9(series->noise_rate);
                out += ',';
                out += csv_field(series->run_id);
                out += ',';
                out += csv_field(series->metric);
                out += ',';
                out += std::to_string(epoch);
                out += ',';
                out += split == 0 ? "train" : "heldout";
                out += ',';
                out += detail::format_double9(values[epoch]);
                out += '\n';
            }
        }
    }
    write_file(path, out);
}

void emit_csv(const std::vector<ScoreCurve>& collection, const std::string& path) {
    std::vector<const ScoreCurve*> sorted;
    sorted.reserve(collection.size());
    for (const auto& curve : collection) sorted.push_back(&curve);
    std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
        if (a->noise_rate != b->noise_rate) return a->noise_rate < b->noise_rate;
        if (a->run_id != b->run_id) return a->run_id < b->run_id;
        return a->split < b->split;
    });
    std::string out = "noise_rate,run_id,split,rank,mean_score\n";
    for (const auto* curve : sorted) {
        for (std::size_t rank = 0; rank < curve->values.size(); ++rank) {
            out += detail::format_double9(curve->noise_rate);
            out += ',';
            out += csv_field(curve->run_id);
            out += ',';
            out += split_name(curve->split);
            out += ',';
            out += std::to_string(rank);
            out += ',';
            out += detail::format_double9(curve->values[rank]);
            out += '\n';
        }
    }
    write_file(path, out);
}

void emit_csv(const std::vector<CsrReport>& collection, const std::string& path) {
    std::vector<const CsrReport*> sorted;
    sorted.reserve(collection.size());
    for (const auto& report : collection) sorted.push_back(&report);
    std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
        if (a->noise_rate != b->noise_rate) return a->noise_rate < b->noise_rate;
        return a->run_id < b->run_id;
    });
    std::string out = "noise_rate,run_id,test_size,critical_count,ratio,queries\n";
    for (const auto* report : sorted) {
        out += detail::format_double9(report->noise_rate);
        out += ',';
        out += csv_field(report->run_id);
        out += ',';
        out += std::to_string(report->test_size);
        out += ',';
        out += std::to_string(report->critical_ids.size());
        out += ',';
        out += detail::format_double9(report->ratio);
        out += ',';
        out += std::to_string(report->queries);
        out += '\n';
    }
    write_file(path, out);
}

// ---------------------------------------------------------------------------
// CSV readers (round-trip at 9 significant digits)

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                current.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                current.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path, std::size_t columns) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open '" + path + "'");
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        auto fields = split_csv_line(line);
        if (fields.size() != columns)
            throw Error(ErrorKind::SchemaViolation, "'" + path + "': expected " +
                                                        std::to_string(columns) + " columns");
        rows.push_back(std::move(fields));
    }
    return rows;
}

} // namespace

std::vector<MetricSeries> read_metric_series_csv(const std::string& path) {
    std::vector<MetricSeries> out;
    auto find = [&](double rate, const std::string& run_id,
                    const std::string& metric) -> MetricSeries& {
        for (auto& series : out) {
            if (series.noise_rate == rate && series.run_id == run_id && series.metric == metric)
                return series;
        }
        out.push_back({run_id, metric, rate, {}, {}});
        return out.back();
    };
    for (const auto& row : read_csv(path, 6)) {
        MetricSeries& series = find(std::stod(row[0]), row[1], row[2]);
        auto& values = row[4] == "train" ? series.train : series.heldout;
        const std::size_t epoch = std::stoul(row[3]);
        if (values.size() <= epoch) values.resize(epoch + 1, 0.0);
        values[epoch] = std::stod(row[5]);
    }
    return out;
}

std::vector<ScoreCurve> read_score_curves_csv(const std::string& path) {
    std::vector<ScoreCurve> out;
    auto find = [&](double rate, const std::string& run_id, Split split) -> ScoreCurve& {
        for (auto& curve : out) {
            if (curve.noise_rate == rate && curve.run_id == run_id && curve.split == split)
                return curve;
        }
        out.push_back({run_id, rate, split, {}});
        return out.back();
    };
    for (const auto& row : read_csv(path, 5)) {
        ScoreCurve& curve = find(std::stod(row[0]), row[1], parse_split(row[2]));
        const std::size_t rank = std::stoul(row[3]);
        if (curve.values.size() <= rank) curve.values.resize(rank + 1, 0.0);
        curve.values[rank] = std::stod(row[4]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// SVG

namespace {

// One color per noise level; other rates fall back on the cycle.
std::string rate_color(double rate, std::size_t index) {
    const int percent = static_cast<int>(std::lround(rate * 100.0));
    switch (percent) {
        case 0: return "#1f77b4";
        case 25: return "#2ca02c";
        case 50: return "#ff7f0e";
        case 75: return "#d62728";
        case 100: return "#9467bd";
        default: break;
    }
    static const char* cycle[] = {"#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return cycle[index % 5];
}

std::string coord(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 2);
    return std::string(buf, ptr);
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

} // namespace

void emit_plot(const std::vector<PlotSeries>& series, PlotStyle style,
               const std::string& metric_name, const std::string& path) {
    if (series.empty()) throw Error(ErrorKind::EmptyInput, "no series to plot");
    if (series.size() > 10)
        throw Error(ErrorKind::TooManySeries, std::to_string(series.size()) + " series, limit 10");
    std::size_t max_len = 0;
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const auto& s : series) {
        if (s.values.empty()) throw Error(ErrorKind::EmptyInput, "series '" + s.label + "' is empty");
        max_len = std::max(max_len, s.values.size());
        for (double v : s.values) {
            if (first) {
                lo = hi = v;
                first = false;
            } else {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
    }
    if (hi == lo) {
        lo -= 1.0;
        hi += 1.0;
    } else {
        const double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }

    // fixed geometry so golden files stay stable: 640x480, 10% margins
    const double width = 640.0, height = 480.0;
    const double mx = 64.0, my = 48.0;
    const double plot_w = width - 2 * mx, plot_h = height - 2 * my;
    const double x_max = max_len > 1 ? static_cast<double>(max_len - 1) : 1.0;
    auto sx = [&](double x) { return mx + plot_w * (x / x_max); };
    auto sy = [&](double v) { return my + plot_h * (1.0 - (v - lo) / (hi - lo)); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 640 480\" "
           "font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"640\" height=\"480\" fill=\"white\"/>\n";
    svg << "<line x1=\"" << coord(mx) << "\" y1=\"" << coord(my + plot_h) << "\" x2=\""
        << coord(mx + plot_w) << "\" y2=\"" << coord(my + plot_h)
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    svg << "<line x1=\"" << coord(mx) << "\" y1=\"" << coord(my) << "\" x2=\"" << coord(mx)
        << "\" y2=\"" << coord(my + plot_h) << "\" stroke=\"black\" stroke-width=\"1\"/>\n";

    for (int tick = 0; tick <= 4; ++tick) {
        const double fx = static_cast<double>(tick) / 4.0;
        const double xv = fx * x_max;
        svg << "<line x1=\"" << coord(sx(xv)) << "\" y1=\"" << coord(my + plot_h) << "\" x2=\""
            << coord(sx(xv)) << "\" y2=\"" << coord(my + plot_h + 5)
            << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
        svg << "<text x=\"" << coord(sx(xv)) << "\" y=\"" << coord(my + plot_h + 18)
            << "\" text-anchor=\"middle\">" << detail::format_double9(xv) << "</text>\n";
        const double yv = lo + fx * (hi - lo);
        svg << "<line x1=\"" << coord(mx - 5) << "\" y1=\"" << coord(sy(yv)) << "\" x2=\""
            << coord(mx) << "\" y2=\"" << coord(sy(yv))
            << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
        svg << "<text x=\"" << coord(mx - 8) << "\" y=\"" << coord(sy(yv) + 4)
            << "\" text-anchor=\"end\">" << detail::format_double9(yv) << "</text>\n";
    }
    svg << "<text x=\"" << coord(mx + plot_w / 2) << "\" y=\"" << coord(height - 8)
        << "\" text-anchor=\"middle\">"
        << (style == PlotStyle::Trajectory ? "epoch" : "sample rank") << "</text>\n";
    svg << "<text x=\"" << coord(mx) << "\" y=\"" << coord(my - 10) << "\">"
        << escape_xml(metric_name) << "</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        svg << "<polyline fill=\"none\" stroke=\"" << rate_color(s.noise_rate, i)
            << "\" stroke-width=\"1.5\"";
        if (s.dashed) svg << " stroke-dasharray=\"6,4\"";
        svg << " points=\"";
        for (std::size_t k = 0; k < s.values.size(); ++k) {
            if (k) svg << ' ';
            svg << coord(sx(static_cast<double>(k))) << ',' << coord(sy(s.values[k]));
        }
        svg << "\"/>\n";
        const double ly = my + 14.0 * static_cast<double>(i);
        svg << "<line x1=\"" << coord(mx + plot_w - 90) << "\" y1=\"" << coord(ly) << "\" x2=\""
            << coord(mx + plot_w - 70) << "\" y2=\"" << coord(ly) << "\" stroke=\""
            << rate_color(s.noise_rate, i) << "\" stroke-width=\"1.5\""
            << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
        svg << "<text x=\"" << coord(mx + plot_w - 65) << "\" y=\"" << coord(ly + 4) << "\">"
            << escape_xml(s.label) << "</text>\n";
    }
    svg << "</svg>\n";
    write_file(path, svg.str());
}

std::vector<PlotSeries> to_plot_series(const std::vector<MetricSeries>& collection, bool heldout) {
    std::vector<PlotSeries> out;
    for (const auto& series : collection) {
        const int percent = static_cast<int>(std::lround(series.noise_rate * 100.0));
        if (!series.train.empty())
            out.push_back({std::to_string(percent) + "% train", series.noise_rate, false,
                           series.train});
        if (heldout && !series.heldout.empty())
            out.push_back({std::to_string(percent) + "% heldout", series.noise_rate, true,
                           series.heldout});
    }
    return out;
}

std::vector<PlotSeries> to_plot_series(const std::vector<ScoreCurve>& collection) {
    std::vector<PlotSeries> out;
    for (const auto& curve : collection) {
        const int percent = static_cast<int>(std::lround(curve.noise_rate * 100.0));
        out.push_back({std::to_string(percent) + "% " + split_name(curve.split), curve.noise_rate,
                       curve.split == Split::Heldout, curve.values});
    }
    return out;
}

// ---------------------------------------------------------------------------
// study summary

std::string study_summary(const std::string& study_name,
                          const std::vector<double>& expected_rates,
                          const std::vector<RunArtifacts>& runs,
                          const std::vector<std::string>& extra_files) {
    std::set<std::uint64_t> seeds;
    for (const auto& run : runs) seeds.insert(run.seed);

    auto find_run = [&](std::uint64_t seed, double rate) -> const RunArtifacts& {
        for (const auto& run : runs) {
            if (run.seed == seed && run.rate == rate) return run;
        }
        throw Error(ErrorKind::MissingRun, "rate " + detail::format_double9(rate) +
                                               " missing for seed " + std::to_string(seed));
    };

    std::vector<double> rates = expected_rates;
    std::sort(rates.begin(), rates.end());

    std::ostringstream doc;
    doc << "# Study summary: " << study_name << "\n\n";
    for (std::uint64_t seed : seeds) {
        for (double rate : rates) find_run(seed, rate);
    }

    for (std::uint64_t seed : seeds) {
        doc << "## Seed " << seed << "\n\n";
        std::set<std::string> metrics;
        for (double rate : rates) {
            for (const auto& [metric, value] : find_run(seed, rate).final_train)
                metrics.insert(metric);
        }
        for (const char* which : {"train", "heldout"}) {
            doc << "Final-epoch " << which << " metrics:\n\n";
            doc << "| metric |";
            for (double rate : rates)
                doc << ' ' << static_cast<int>(std::lround(rate * 100.0)) << "% |";
            doc << "\n|---|";
            for (std::size_t i = 0; i < rates.size(); ++i) doc << "---|";
            doc << "\n";
            for (const auto& metric : metrics) {
                doc << "| " << metric << " |";
                for (double rate : rates) {
                    const RunArtifacts& run = find_run(seed, rate);
                    const auto& table =
                        std::string(which) == "train" ? run.final_train : run.final_heldout;
                    auto it = table.find(metric);
                    doc << ' ' << (it == table.end() ? "-" : detail::format_double9(it->second))
                        << " |";
                }
                doc << "\n";
            }
            doc << "\n";
        }

        // Gini-at-convergence ordering check
        bool have_gini = true;
        std::vector<double> ginis;
        for (double rate : rates) {
            const RunArtifacts& run = find_run(seed, rate);
            auto it = run.final_train.find("gini_loss");
            if (it == run.final_train.end()) {
                have_gini = false;
                break;
            }
            ginis.push_back(it->second);
        }
        if (have_gini && !ginis.empty()) {
            bool ordered = true;
            for (std::size_t i = 1; i < ginis.size(); ++i) {
                if (ginis[i] > ginis[i - 1]) ordered = false;
            }
            doc << "Train-loss Gini by rate:";
            for (std::size_t i = 0; i < ginis.size(); ++i)
                doc << (i ? " > " : " ") << detail::format_double9(ginis[i]);
            doc << " -> non-increasing with noise: " << (ordered ? "yes" : "no") << "\n\n";
        }
    }

    doc << "## Files\n\n";
    std::vector<std::string> files = extra_files;
    for (const auto& run : runs)
        files.insert(files.end(), run.files.begin(), run.files.end());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) doc << "- " << file << "\n";
    return doc.str();
}

} // namespace memgauge
