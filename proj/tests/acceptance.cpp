// One line per acceptance criterion. Exit status is the number of failed criteria.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "CLI11.hpp"
#include "cvi/harness.hpp"
#include "cvi/models.hpp"
#include "oracles.hpp"

using namespace cvi;

namespace {

struct Line {
  bool ok = true;
  std::string detail;
};

Profile profile = Profile::Standard;
unsigned seed = 7;

// suites pass at their pinned tolerances; flagged cases are listed, not failed
Line suites(std::initializer_list<const char*> names, double budget_seconds) {
  Line l;
  auto t0 = std::chrono::steady_clock::now();
  for (const char* s : names) {
    SuiteReport r = run_suite(s, profile, seed);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s%s %d/%zu max %.2g", l.detail.empty() ? "" : "; ", s, r.count(CaseStatus::Pass),
                  r.cases.size(), r.max_residual());
    l.detail += buf;
    if (r.count(CaseStatus::Flagged)) l.detail += " flagged " + std::to_string(r.count(CaseStatus::Flagged));
    if (!r.passed()) {
      l.ok = false;
      for (const auto& c : r.cases)
        if (c.status == CaseStatus::Fail) l.detail += " [" + c.id + ": " + c.note + "]";
    }
  }
  double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char buf[64];
  std::snprintf(buf, sizeof buf, "; %.1fs of %.0fs", dt, budget_seconds);
  l.detail += buf;
  if (dt > budget_seconds) l.ok = false;
  return l;
}

oracle::Mat sphere_metric(const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  oracle::Mat g(n, std::vector<double>(n, 0.0));
  double w = 1.0;
  for (int i = 0; i < n; ++i) {
    g[i][i] = w;
    w *= std::sin(x[i]) * std::sin(x[i]);
  }
  return g;
}

// elementary symmetric functions of the eigenvalues of g^{-1}P from FD curvature
std::vector<double> schouten_sigmas(int n) {
  std::vector<double> x(n, 1.1);
  auto curv = oracle::curvature_fd(sphere_metric, x);
  auto g = sphere_metric(x);
  double J = curv.scalar / (2.0 * (n - 1));
  std::vector<double> lam(n);
  for (int i = 0; i < n; ++i) lam[i] = (curv.ricci[i][i] - J * g[i][i]) / (n - 2) / g[i][i];
  std::vector<double> e(4, 0.0);
  e[0] = 1.0;
  for (double l : lam)
    for (int k = 3; k >= 1; --k) e[k] += l * e[k - 1];
  return e;
}

Line golden() {
  Line l;
  struct G {
    const char* name;
    Inv id;
    int n;
    double want;
  };
  // σ_k(P) with P = g/2 gives σ₂ = C(n,2)/4, v₃ = σ₃ at conformally flat metrics = C(n,3)/8;
  // Q_n on Sⁿ is (n−1)!
  std::vector<G> cases{{"Q4(S4)", Inv::Q4, 4, 6.0}, {"Q6(S6)", Inv::Q6, 6, 120.0}, {"v3(S6)", Inv::V3, 6, 2.5}};
  for (int n : {4, 5, 6}) cases.push_back({"sigma2", Inv::Sigma2, n, n * (n - 1) / 8.0});
  // oracle first: FD Schouten on the sphere chart, no jets
  for (int n : {4, 5, 6}) {
    auto e = schouten_sigmas(n);
    double want2 = n * (n - 1) / 8.0, want3 = n * (n - 1) * (n - 2) / 48.0;
    if (std::abs(e[2] - want2) > 1e-6 * want2 || std::abs(e[3] - want3) > 1e-6 * want3) {
      l.ok = false;
      l.detail += "oracle disagrees at n=" + std::to_string(n) + "; ";
    }
    if (n == 4 && std::abs((n / 2.0) * e[1] * e[1] - 2 * (e[1] * e[1] - 2 * e[2]) - 6.0) > 1e-6) {
      l.ok = false;
      l.detail += "oracle Q4 disagrees; ";
    }
  }
  double worst = 0.0;
  for (const auto& c : cases) {
    std::vector<double> p(c.n, 1.1);
    double v = eval_invariant(c.id, round_sphere(c.n), p);
    double r = std::abs(v - c.want) / std::abs(c.want);
    worst = std::max(worst, r);
    if (r > 1e-8) {
      l.ok = false;
      l.detail += std::string(c.name) + " n=" + std::to_string(c.n) + " got " + std::to_string(v) + "; ";
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "6 constants, max rel %.2g (tol 1e-8), FD oracle agrees", worst);
  l.detail += buf;
  return l;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string prof = "standard";
  app.add_option("--profile", prof)->check(CLI::IsMember({"smoke", "standard", "deep"}));
  app.add_option("--seed", seed);
  CLI11_PARSE(app, argc, argv);
  profile = parse_profile(prof);

  struct Criterion {
    int id;
    const char* title;
    std::function<Line()> run;
  };
  const std::vector<Criterion> all{
      {1, "golden constants", golden},
      {2, "geometry identities", [] { return suites({"geometry-identities"}, 300); }},
      {3, "CVI properties", [] { return suites({"catalog-homogeneity", "self-adjointness", "conformal-covariance"}, 900); }},
      {4, "gradient formulas", [] { return suites({"gradients-weight4", "gradients-weight6"}, 1800); }},
      {5, "almost-Schur", [] { return suites({"almost-schur"}, 600); }},
      {6, "spectral stability", [] { return suites({"spectra-stability"}, 600); }},
      {7, "cones", [] { return suites({"cones"}, 60); }},
      {8, "Page metric", [] { return suites({"page"}, 60); }},
      {9, "flat rigidity", [] { return suites({"rigidity"}, 300); }},
      {10, "weight -6 basis rank", [] { return suites({"basis-rank"}, 300); }},
  };
  int failed = 0;
  for (const auto& c : all) {
    Line l;
    try {
      l = c.run();
    } catch (const std::exception& e) {
      l = {false, std::string("error: ") + e.what()};
    }
    failed += !l.ok;
    std::printf("criterion %2d %-22s %s  %s\n", c.id, c.title, l.ok ? "PASS" : "FAIL", l.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria pass (profile %s, seed %u)\n", static_cast<int>(all.size()) - failed, all.size(),
              to_string(profile).c_str(), seed);
  return failed;
}
