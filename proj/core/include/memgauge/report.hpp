#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "memgauge/csr.hpp"
#include "memgauge/metrics.hpp"

namespace memgauge {

// CSV emitters, one schema per artifact kind. Decimal values carry 9
// significant digits; rows are sorted by (noise_rate, epoch|rank) so equal
// inputs produce byte-identical files.
//
//   series: noise_rate,run_id,metric,epoch,split,value
//   curves: noise_rate,run_id,split,rank,mean_score
//   csr:    noise_rate,run_id,test_size,critical_count,ratio,queries
void emit_csv(const std::vector<MetricSeries>& collection, const std::string& path);
void emit_csv(const std::vector<ScoreCurve>& collection, const std::string& path);
void emit_csv(const std::vector<CsrReport>& collection, const std::string& path);

std::vector<MetricSeries> read_metric_series_csv(const std::string& path);
std::vector<ScoreCurve> read_score_curves_csv(const std::string& path);

// One polyline of a chart. Solid stroke for train series, dashed for
// heldout; the stroke color is keyed on the noise level.
struct PlotSeries {
    std::string label;
    double noise_rate = 0.0;
    bool dashed = false;
    std::vector<double> values;
};

enum class PlotStyle { Trajectory, Curve };

// Standalone SVG line chart (640x480 viewBox, 10% margins, inline styles
// only, no timestamps). At most 10 series per chart.
void emit_plot(const std::vector<PlotSeries>& series, PlotStyle style,
               const std::string& metric_name, const std::string& path);

std::vector<PlotSeries> to_plot_series(const std::vector<MetricSeries>& collection, bool heldout);
std::vector<PlotSeries> to_plot_series(const std::vector<ScoreCurve>& collection);

// Everything the summary reports about one (seed, rate) run.
struct RunArtifacts {
    std::uint64_t seed = 0;
    double rate = 0.0;
    std::map<std::string, double> final_train;   // metric -> final-epoch value
    std::map<std::string, double> final_heldout; // metric -> final-epoch value
    std::vector<std::string> files;              // study-relative paths
};

// Markdown document: per-seed final-epoch tables across noise levels, the
// train-loss Gini ordering check, and an index of every produced file.
// Throws Error{MissingRun} naming the rate when a seed misses one.
std::string study_summary(const std::string& study_name,
                          const std::vector<double>& expected_rates,
                          const std::vector<RunArtifacts>& runs,
                          const std::vector<std::string>& extra_files);

} // namespace memgauge
