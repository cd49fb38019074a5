#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "memgauge/report.hpp"

using namespace memgauge;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "memgauge_report_tests";
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::size_t count_lines(const std::string& text) {
    std::size_t lines = 0;
    for (char c : text) lines += c == '\n' ? 1 : 0;
    return lines;
}

MetricSeries series(const std::string& run, double rate, std::vector<double> train,
                    std::vector<double> heldout = {}) {
    MetricSeries s;
    s.run_id = run;
    s.metric = "f1";
    s.noise_rate = rate;
    s.train = std::move(train);
    s.heldout = std::move(heldout);
    return s;
}

} // namespace

TEST_CASE("metric series CSV: row counts, header, sorting") {
    const std::vector<MetricSeries> two_runs = {
        series("b", 0.5, {0.1, 0.2, 0.3}),
        series("a", 0.0, {0.9, 0.8, 0.7}),
    };
    const fs::path path = temp_file("series.csv");
    emit_csv(two_runs, path.string());
    const std::string text = slurp(path);
    CHECK(count_lines(text) == 7); // header + 2 runs x 3 epochs
    CHECK(text.rfind("noise_rate,run_id,metric,epoch,split,value\n", 0) == 0);
    CHECK(text.find("0,a,f1,0,train,0.9") < text.find("0.5,b,f1,0,train,0.1"));

    emit_csv(std::vector<MetricSeries>{}, path.string());
    CHECK(slurp(path) == "noise_rate,run_id,metric,epoch,split,value\n");
}

TEST_CASE("CSV emission is deterministic") {
    const std::vector<MetricSeries> input = {series("r", 0.25, {1.0 / 3.0, 2.0 / 7.0}, {0.5})};
    const fs::path a = temp_file("det_a.csv");
    const fs::path b = temp_file("det_b.csv");
    emit_csv(input, a.string());
    emit_csv(input, b.string());
    CHECK(slurp(a) == slurp(b));
}

TEST_CASE("CSV round trip holds to 9 significant digits") {
    const std::vector<MetricSeries> input = {
        series("r1", 0.25, {1.0 / 3.0, 0.123456789123, 9.87654321e-4}, {0.7, 0.6, 0.5}),
        series("r2", 0.75, {2.0 / 7.0}, {1e-11}),
    };
    const fs::path path = temp_file("rt.csv");
    emit_csv(input, path.string());
    const auto loaded = read_metric_series_csv(path.string());
    REQUIRE(loaded.size() == input.size());
    for (const auto& original : input) {
        const auto it = std::find_if(loaded.begin(), loaded.end(), [&](const auto& s) {
            return s.run_id == original.run_id;
        });
        REQUIRE(it != loaded.end());
        REQUIRE(it->train.size() == original.train.size());
        for (std::size_t e = 0; e < original.train.size(); ++e) {
            const double scale = std::max(1.0, std::abs(original.train[e]));
            CHECK(std::abs(it->train[e] - original.train[e]) <= 1e-8 * scale);
        }
    }
}

TEST_CASE("score curve CSV round trip") {
    ScoreCurve curve;
    curve.run_id = "r";
    curve.noise_rate = 0.5;
    curve.split = Split::Heldout;
    curve.values = {0.9, 0.5, 0.1};
    const fs::path path = temp_file("curves.csv");
    emit_csv(std::vector<ScoreCurve>{curve}, path.string());
    const auto loaded = read_score_curves_csv(path.string());
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].values.size() == 3);
    CHECK(loaded[0].split == Split::Heldout);
    CHECK(loaded[0].values[0] == doctest::Approx(0.9).epsilon(1e-9));
}

TEST_CASE("csr CSV schema") {
    CsrReport report;
    report.run_id = "r";
    report.noise_rate = 1.0;
    report.test_size = 4;
    report.critical_ids = {"a", "b"};
    report.ratio = 0.5;
    report.queries = 17;
    const fs::path path = temp_file("csr.csv");
    emit_csv(std::vector<CsrReport>{report}, path.string());
    const std::string text = slurp(path);
    CHECK(text.find("1,r,4,2,0.5,17") != std::string::npos);
}

TEST_CASE("plot: 5 noise levels x 2 splits gives 10 polylines, 5 dashed") {
    std::vector<MetricSeries> collection;
    for (double rate : {0.0, 0.25, 0.5, 0.75, 1.0})
        collection.push_back(series("r", rate, {0.1, 0.5, rate}, {0.2, 0.4, rate / 2}));
    const fs::path path = temp_file("ten.svg");
    emit_plot(to_plot_series(collection, true), PlotStyle::Trajectory, "f1", path.string());
    const std::string svg = slurp(path);

    std::size_t polylines = 0, dashed = 0;
    std::istringstream lines(svg);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.rfind("<polyline", 0) == 0) {
            ++polylines;
            if (line.find("stroke-dasharray") != std::string::npos) ++dashed;
        }
    }
    CHECK(polylines == 10);
    CHECK(dashed == 5);
    CHECK(svg.find("<svg") == 0);
    CHECK(svg.find("epoch") != std::string::npos);
}

TEST_CASE("plot: constant series is a horizontal polyline") {
    const fs::path path = temp_file("flat.svg");
    emit_plot({{"0% train", 0.0, false, {0.5, 0.5, 0.5}}}, PlotStyle::Trajectory, "accuracy",
              path.string());
    const std::string svg = slurp(path);
    const auto start = svg.find("points=\"");
    REQUIRE(start != std::string::npos);
    const auto end = svg.find('"', start + 8);
    const std::string points = svg.substr(start + 8, end - start - 8);
    std::istringstream stream(points);
    std::string pair;
    std::string y_seen;
    while (stream >> pair) {
        const std::string y = pair.substr(pair.find(',') + 1);
        if (y_seen.empty()) y_seen = y;
        CHECK(y == y_seen);
    }
}

TEST_CASE("plot limits and emptiness") {
    std::vector<PlotSeries> too_many;
    for (int i = 0; i < 11; ++i) too_many.push_back({"s", 0.0, false, {0.1, 0.2}});
    try {
        emit_plot(too_many, PlotStyle::Trajectory, "x", temp_file("no.svg").string());
        FAIL("expected TooManySeries");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::TooManySeries);
    }
    try {
        emit_plot({}, PlotStyle::Curve, "x", temp_file("no.svg").string());
        FAIL("expected EmptyInput");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyInput);
    }
    try {
        emit_plot({{"empty", 0.0, false, {}}}, PlotStyle::Curve, "x",
                  temp_file("no.svg").string());
        FAIL("expected EmptyInput");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyInput);
    }
}

TEST_CASE("plots are deterministic") {
    const std::vector<PlotSeries> input = {{"50% train", 0.5, false, {0.1, 0.7, 0.3}},
                                           {"50% heldout", 0.5, true, {0.2, 0.5, 0.4}}};
    const fs::path a = temp_file("p_a.svg");
    const fs::path b = temp_file("p_b.svg");
    emit_plot(input, PlotStyle::Trajectory, "f1", a.string());
    emit_plot(input, PlotStyle::Trajectory, "f1", b.string());
    CHECK(slurp(a) == slurp(b));
}

TEST_CASE("trajectory SVG matches the golden file") {
#ifdef MEMGAUGE_TEST_DATA_DIR
    std::vector<MetricSeries> collection;
    for (double rate : {0.0, 0.5, 1.0})
        collection.push_back(
            series("gold", rate, {0.2, 0.8 - rate / 2, 0.9 - rate / 2}, {0.2, 0.6 - rate / 2, 0.7 - rate / 2}));
    const fs::path path = temp_file("golden_check.svg");
    emit_plot(to_plot_series(collection, true), PlotStyle::Trajectory, "f1", path.string());
    const fs::path golden = fs::path(MEMGAUGE_TEST_DATA_DIR) / "golden" / "trajectory.svg";
    REQUIRE_MESSAGE(fs::exists(golden), ("missing golden file " + golden.string()).c_str());
    CHECK(slurp(path) == slurp(golden));
#endif
}

TEST_CASE("study summary: tables, gini ordering line, missing runs") {
    std::vector<RunArtifacts> runs;
    for (double rate : {0.0, 0.5, 1.0}) {
        RunArtifacts art;
        art.seed = 1;
        art.rate = rate;
        art.final_train = {{"f1", 1.0 - rate / 2}, {"gini_loss", 0.6 - rate / 2}};
        art.final_heldout = {{"f1", 1.0 - rate}, {"gini_loss", 0.5 - rate / 3}};
        art.files = {"rate/trace.jsonl"};
        runs.push_back(std::move(art));
    }
    const std::string doc = study_summary("demo", {0.0, 0.5, 1.0}, runs, {"summary.md"});
    CHECK(doc.find("# Study summary: demo") == 0);
    CHECK(doc.find("| f1 |") != std::string::npos);
    CHECK(doc.find("non-increasing with noise: yes") != std::string::npos);
    CHECK(doc.find("rate/trace.jsonl") != std::string::npos);

    const std::string again = study_summary("demo", {0.0, 0.5, 1.0}, runs, {"summary.md"});
    CHECK(doc == again);

    try {
        study_summary("demo", {0.0, 0.5, 0.75, 1.0}, runs, {});
        FAIL("expected MissingRun");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::MissingRun);
        CHECK(std::string(e.what()).find("0.75") != std::string::npos);
    }
}
