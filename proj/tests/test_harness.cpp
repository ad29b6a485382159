#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>

#include "cvi/harness.hpp"
#include "cvi/models.hpp"
#include "json.hpp"

using namespace cvi;

TEST(Manifest, RoundTripIsBitwiseOverTheZoo) {
  for (const auto& z : model_zoo()) {
    std::string text = chart_manifest(z.chart);
    Chart back = parse_chart_manifest(text, z.name);
    EXPECT_EQ(chart_manifest(back), text) << z.name;
    ASSERT_EQ(back.n, z.chart.n);
    EXPECT_EQ(back.coords, z.chart.coords);
    EXPECT_EQ(back.params, z.chart.params);
    EXPECT_EQ(back.periodic, z.chart.periodic);
    for (int i = 0; i < back.n; ++i) {
      EXPECT_EQ(back.domain[i], z.chart.domain[i]);
      for (int j = 0; j < back.n; ++j) EXPECT_TRUE(structurally_equal(back.metric(i, j), z.chart.metric(i, j))) << z.name;
    }
    // same metric values at the center
    auto c = z.chart.center();
    if (!z.chart.pointwise_only) EXPECT_EQ(volume_density(back, c), volume_density(z.chart, c)) << z.name;
  }
}

TEST(Manifest, ParsesHandWritten) {
  const std::string text = R"(# a warped product
name = warped
dim = 2
coords = r, s
param a = 0.5
g[1][1] = 1
g[2][2] = (1 + a*sin(r))^2   # warping
domain r = 0 .. 3
periodic s = 0 .. 6.283185307179586
quadrature = gauss:16 x trapezoid:16
)";
  Chart c = parse_chart_manifest(text);
  EXPECT_EQ(c.name, "warped");
  EXPECT_EQ(c.n, 2);
  EXPECT_TRUE(c.periodic[1]);
  EXPECT_FALSE(c.periodic[0]);
  std::vector<double> p{1.0, 0.0};
  double w = 1 + 0.5 * std::sin(1.0);
  EXPECT_NEAR(volume_density(c, p), w, 1e-15);
}

TEST(Manifest, RejectsAsymmetricMetric) {
  const std::string text = "dim = 2\ncoords = x, y\ng[1][1] = 1\ng[1][2] = 0.1*x\ng[2][1] = 0.2*x\ng[2][2] = 1\n"
                           "periodic x = 0 .. 1\nperiodic y = 0 .. 1\n";
  try {
    parse_chart_manifest(text, "bad");
    FAIL() << "accepted";
  } catch (const ManifestError& e) {
    EXPECT_NE(std::string(e.what()).find("symmetry"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("line 5"), std::string::npos) << e.what();
  }
}

TEST(Manifest, RejectsIndefiniteMetric) {
  const std::string text = "dim = 2\ncoords = x, y\ng[1][1] = 1\ng[2][2] = -1 + 0.1*cos(x)\n"
                           "periodic x = 0 .. 6.283185307179586\nperiodic y = 0 .. 6.283185307179586\n";
  try {
    parse_chart_manifest(text, "bad");
    FAIL() << "accepted";
  } catch (const ManifestError& e) {
    EXPECT_NE(std::string(e.what()).find("positivity"), std::string::npos) << e.what();
  }
}

TEST(Manifest, ReportsLineOfBadInput) {
  try {
    parse_chart_manifest("dim = 2\ncoords = x, y\ng[1][1] = 1 +\n", "m");
    FAIL();
  } catch (const ManifestError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_chart_manifest("dim = 2\nbogus = 1\n"), ManifestError);
  EXPECT_THROW(parse_chart_manifest("dim = 2\ncoords = x\n"), ManifestError);
  EXPECT_THROW(parse_chart_manifest("dim = 1\ncoords = x, y\ng[1][1] = z\n"), ManifestError);
}

TEST(Manifest, ShippedChartsLoad) {
  namespace fs = std::filesystem;
  int seen = 0;
  for (const auto& f : fs::directory_iterator(std::string(CVI_DATA_DIR) + "/charts")) {
    if (f.path().extension() != ".chart") continue;
    Chart c = load_chart_manifest(f.path().string());
    EXPECT_GE(c.n, 2) << f.path();
    ++seen;
  }
  EXPECT_GE(seen, 4);
  Chart s4 = resolve_chart(std::string(CVI_DATA_DIR) + "/charts/sphere4.chart");
  std::vector<double> p{1.0, 1.1, 0.7, 2.0};
  EXPECT_NEAR(eval_invariant(Inv::Q4, s4, p), 6.0, 1e-9);
  EXPECT_THROW(resolve_chart("no-such-chart"), HarnessError);
}

TEST(Harness, DigestIsFnv1a) {
  EXPECT_EQ(digest(""), "cbf29ce484222325");
  EXPECT_EQ(digest("a"), "af63dc4c8601ec8c");
}

TEST(Harness, UnknownSuiteThrows) {
  EXPECT_THROW(run_suite("nope", Profile::Smoke, 0), HarnessError);
  EXPECT_THROW(run_suite("cones", Profile::Smoke, 0, 0.0), HarnessError);
}

TEST(Harness, ConesSmokeIsFastAndByteStable) {
  auto t0 = std::chrono::steady_clock::now();
  auto a = run_suite("cones", Profile::Smoke, 7);
  double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(dt, 1.0);
  EXPECT_TRUE(a.passed());
  auto b = run_suite("cones", Profile::Smoke, 7);
  EXPECT_EQ(report_json(a), report_json(b));
  auto j = nlohmann::json::parse(report_json(a, true));
  EXPECT_EQ(j["suite"], "cones");
  EXPECT_EQ(j["profile"], "smoke");
  EXPECT_EQ(j["seed"], 7);
  EXPECT_EQ(j["version"], kVersion);
  ASSERT_FALSE(j["cases"].empty());
  for (const auto& c : j["cases"]) {
    EXPECT_TRUE(c.contains("inputs_digest"));
    EXPECT_TRUE(c.contains("wall_seconds"));
    EXPECT_EQ(c["status"], "pass");
  }
  EXPECT_FALSE(nlohmann::json::parse(report_json(a))["cases"][0].contains("wall_seconds"));
}

TEST(Harness, TolScaleMultipliesTolerances) {
  auto a = run_suite("page", Profile::Smoke, 1);
  auto b = run_suite("page", Profile::Smoke, 1, 10.0);
  ASSERT_EQ(a.cases.size(), b.cases.size());
  for (std::size_t i = 0; i < a.cases.size(); ++i) {
    EXPECT_DOUBLE_EQ(b.cases[i].tolerance, 10.0 * a.cases[i].tolerance);
    EXPECT_EQ(a.cases[i].digest, b.cases[i].digest);
  }
}

TEST(Harness, PageDiscrepanciesAreFlaggedNotFailed) {
  auto r = run_suite("page", Profile::Smoke, 3);
  EXPECT_TRUE(r.passed());
  EXPECT_GE(r.count(CaseStatus::Flagged), 1);
  for (const auto& c : r.cases)
    if (c.status == CaseStatus::Flagged) EXPECT_NE(c.note.find("corrected"), std::string::npos);
}

TEST(Harness, CsvShapes) {
  auto rows = sphere_spectrum_table(Inv::Q4, 4, 1.0, 3);
  std::string s = spectrum_csv(rows);
  EXPECT_EQ(s.substr(0, s.find('\n')), "k,lambda,eigenvalue");
  EXPECT_NE(s.find("\n2,10,96\n"), std::string::npos) << s;
  auto grid = cone_grid(4, 5, -1, 1);
  EXPECT_EQ(grid.size(), 24u);
  std::string c = cone_csv(grid);
  EXPECT_EQ(std::count(c.begin(), c.end(), '\n'), 25);
}
