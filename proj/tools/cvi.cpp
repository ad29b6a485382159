#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cvi/deform.hpp"
#include "cvi/harness.hpp"
#include "cvi/models.hpp"
#include "cvi/rigidity.hpp"
#include "json.hpp"

using namespace cvi;
using json = nlohmann::ordered_json;

namespace {

struct Globals {
  std::string profile = "standard";
  unsigned seed = 0;
  double tol_scale = 1.0;
  std::string out;
};

// --out names a file for single outputs; verify/report treat it as a directory
void emit(const Globals& g, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(g.out);
  if (!f) throw std::runtime_error("cannot write " + g.out);
  f << text;
}

std::vector<double> parse_point(const std::string& s, const Chart& c) {
  if (s.empty()) return c.center();
  std::vector<double> p;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ',');) p.push_back(std::stod(tok));
  if (static_cast<int>(p.size()) != c.n)
    throw std::runtime_error("point has " + std::to_string(p.size()) + " coordinates, chart has " + std::to_string(c.n));
  return p;
}

json cone_json(const ConeVerdict& v) {
  json j;
  j["alpha"] = v.alpha;
  j["beta"] = v.beta;
  j["n"] = v.n;
  j["E"] = v.in_E;
  j["V"] = v.in_V;
  j["SV"] = v.in_SV;
  j["witness_V"] = v.witness_V;
  j["witness_SV"] = v.witness_SV;
  j["spectrum"] = {{"E", v.spec_E}, {"V", v.spec_V}, {"SV", v.spec_SV}};
  j["routes_agree"] = v.routes_agree;
  j["sphere_route_V"] = v.sphere_route_V;
  if (v.has_gamma)
    j["gamma"] = {{"gamma2", v.gamma2}, {"gamma3", v.gamma3}, {"V", v.gamma_V}, {"SV", v.gamma_SV}, {"agree", v.gamma_agree}};
  return j;
}

json rigidity_json(const RigidityFit& f) {
  json j;
  j["id"] = f.id;
  j["n"] = f.n;
  j["k"] = f.k;
  j["A"] = f.A;
  j["B"] = f.B;
  j["trace_combo"] = f.trace_combo;
  j["C"] = f.C;
  j["fit_residual"] = f.fit_residual;
  j["consistency"] = f.consistency;
  j["distinct_frequencies"] = f.distinct_frequencies;
  j["A_negative"] = f.A_negative;
  j["trace_combo_negative"] = f.trace_combo_negative;
  j["infinitesimally_rigid"] = f.infinitesimally_rigid;
  j["linear_c"] = f.linear_c;
  json ps = json::array();
  for (const auto& p : f.probes)
    ps.push_back({{"kind", p.kind}, {"k", p.k}, {"d2", p.d2}, {"grad_h", p.grad_h}, {"grad_tr", p.grad_tr}});
  j["probes"] = ps;
  return j;
}

// runs suites, writes one JSON per suite when --out is a directory, prints a summary
int verify(const Globals& g, std::vector<std::string> suites, bool timing) {
  if (suites.empty() || (suites.size() == 1 && suites[0] == "all")) suites = suite_names();
  Profile p = parse_profile(g.profile);
  if (!g.out.empty()) std::filesystem::create_directories(g.out);
  bool all = true;
  std::vector<std::string> flagged;
  json summary = json::array();
  for (const auto& s : suites) {
    SuiteReport r = run_suite(s, p, g.seed, g.tol_scale);
    std::string text = report_json(r, timing);
    if (g.out.empty())
      std::cout << text;
    else
      std::ofstream(g.out + "/" + s + ".json") << text;
    all = all && r.passed();
    std::fprintf(stderr, "%-22s %s  pass %d  fail %d  flagged %d  skipped %d  max residual %.3g\n", s.c_str(),
                 r.passed() ? "PASS" : "FAIL", r.count(CaseStatus::Pass), r.count(CaseStatus::Fail),
                 r.count(CaseStatus::Flagged), r.count(CaseStatus::Skipped), r.max_residual());
    for (const auto& c : r.cases) {
      if (c.status == CaseStatus::Fail) std::fprintf(stderr, "  FAIL %s/%s: %s\n", s.c_str(), c.id.c_str(), c.note.c_str());
      if (c.status == CaseStatus::Flagged) flagged.push_back(s + "/" + c.id + ": " + c.note);
    }
    summary.push_back({{"suite", s}, {"passed", r.passed()}, {"flagged", r.count(CaseStatus::Flagged)}});
  }
  if (!flagged.empty()) {
    std::fprintf(stderr, "\nFLAGGED DISCREPANCIES (%zu):\n", flagged.size());
    for (const auto& f : flagged) std::fprintf(stderr, "  %s\n", f.c_str());
  }
  if (!g.out.empty()) std::ofstream(g.out + "/summary.json") << summary.dump(2) << "\n";
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(kVersion) + ": conformally variational invariants on coordinate charts"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Globals g;
  app.add_option("--profile", g.profile, "quadrature profile")
      ->check(CLI::IsMember({"smoke", "standard", "deep"}))
      ->capture_default_str();
  app.add_option("--seed", g.seed, "seed for random samples")->capture_default_str();
  app.add_option("--tol-scale", g.tol_scale, "multiplier on every tolerance")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "output file (directory for verify/report)");

  auto* cat = app.add_subcommand("catalog", "list the invariant catalog");
  std::string cat_format = "json";
  cat->add_option("--format", cat_format)->check(CLI::IsMember({"json", "csv"}));

  auto* ev = app.add_subcommand("eval", "evaluate an invariant at a chart point");
  std::string id = "Q4", chart = "sphere4", point, upsilon = "cos(th1)", h_spec;
  int n = 4;
  ev->add_option("--id", id)->required();
  ev->add_option("--chart", chart, "zoo name or manifest path")->capture_default_str();
  ev->add_option("--point", point, "comma-separated coordinates (default: chart center)");

  auto* lin = app.add_subcommand("linearize", "conformal or metric linearization at a point");
  bool second = false;
  lin->add_option("--id", id)->required();
  lin->add_option("--chart", chart)->capture_default_str();
  lin->add_option("--point", point);
  lin->add_option("--upsilon", upsilon, "conformal direction")->capture_default_str();
  lin->add_option("--metric-direction", h_spec, "metric direction: n*n semicolon-separated expressions (uses g + t h)");
  lin->add_flag("--second", second, "also report the second t-derivative");

  auto* ver = app.add_subcommand("verify", "run verification suites");
  std::vector<std::string> suites;
  bool timing = false;
  ver->add_option("suites", suites, "suite names, or all");
  ver->add_flag("--timing", timing, "include wall times (reports are then not byte-stable)");

  auto* spec = app.add_subcommand("spectrum", "sphere spectrum table as CSV");
  int kmax = 20;
  double radius = 1.0;
  spec->add_option("--id", id)->required();
  spec->add_option("--n", n)->required();
  spec->add_option("--kmax", kmax)->capture_default_str();
  spec->add_option("--radius", radius)->capture_default_str();

  auto* cone = app.add_subcommand("cone", "cone membership of alpha*Q4 + beta*sigma2");
  double alpha = 0, beta = 0, gamma2 = 0, gamma3 = 0;
  bool grid = false;
  auto* oa = cone->add_option("--alpha", alpha);
  auto* ob = cone->add_option("--beta", beta);
  auto* og2 = cone->add_option("--gamma2", gamma2);
  auto* og3 = cone->add_option("--gamma3", gamma3);
  cone->add_option("--n", n)->capture_default_str();
  cone->add_flag("--grid", grid, "21x21 grid over [-3,3]^2 as CSV");
  oa->needs(ob);
  og2->needs(og3);
  oa->excludes(og2);

  auto* rig = app.add_subcommand("rigidity", "flat-metric second variation fit as JSON");
  rig->add_option("--id", id)->required();
  rig->add_option("--n", n)->capture_default_str();

  auto* rep = app.add_subcommand("report", "run every suite and write reports");

  auto* charts = app.add_subcommand("charts", "list the model zoo or export manifests");
  std::string export_dir;
  charts->add_option("--export", export_dir, "write <name>.chart files into this directory");

  for (auto* s : app.get_subcommands({})) s->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cat) {
      if (cat_format == "csv") {
        std::ostringstream os;
        os << "id,weight,k,min_dim,metric_order,cvi,pointwise_conformal,constant_at_einstein,einstein_polynomial\n";
        for (const auto& e : catalog())
          os << e.name << "," << -2 * e.k << "," << e.k << "," << e.min_dim << "," << e.metric_order << "," << e.is_cvi
             << "," << e.pointwise_conformal << "," << e.constant_at_einstein << "," << e.has_einstein_polynomial << "\n";
        emit(g, os.str());
      } else {
        json j = json::array();
        for (const auto& e : catalog())
          j.push_back({{"id", e.name},
                       {"weight", -2 * e.k},
                       {"min_dim", e.min_dim},
                       {"metric_order", e.metric_order},
                       {"cvi", e.is_cvi},
                       {"pointwise_conformal", e.pointwise_conformal},
                       {"constant_at_einstein", e.constant_at_einstein},
                       {"einstein_polynomial", e.has_einstein_polynomial}});
        emit(g, j.dump(2) + "\n");
      }
      return 0;
    }
    if (*ev) {
      Chart c = resolve_chart(chart);
      auto p = parse_point(point, c);
      json j{{"id", entry(id).name}, {"chart", c.name}, {"point", p}, {"value", eval_invariant(entry(id).id, c, p)}};
      emit(g, j.dump(2) + "\n");
      return 0;
    }
    if (*lin) {
      Chart c = resolve_chart(chart);
      auto p = parse_point(point, c);
      const int t_order = second ? 2 : 1;
      MetricFamily fam;
      json j{{"id", entry(id).name}, {"chart", c.name}, {"point", p}};
      if (!h_spec.empty()) {
        std::vector<Expr> h;
        std::stringstream ss(h_spec);
        for (std::string tok; std::getline(ss, tok, ';');) h.push_back(parse_expr(tok, c.symbols()));
        if (static_cast<int>(h.size()) != c.n * c.n) throw std::runtime_error("--metric-direction needs n*n components");
        fam = MetricFamily::path(c, h, t_order);
        j["family"] = "path";
      } else {
        fam = MetricFamily::conformal(c, upsilon, t_order);
        j["family"] = "conformal";
        j["upsilon"] = upsilon;
      }
      auto d = d_dt_invariant(entry(id).id, fam, p);
      j["value"] = d.value;
      j["d1"] = d.d1;
      if (d.has_d2) j["d2"] = d.d2;
      emit(g, j.dump(2) + "\n");
      return 0;
    }
    if (*ver) return verify(g, suites, timing);
    if (*rep) {
      if (g.out.empty()) g.out = "reports";
      return verify(g, {}, false);
    }
    if (*spec) {
      emit(g, spectrum_csv(sphere_spectrum_table(entry(id).id, n, radius, kmax)));
      return 0;
    }
    if (*cone) {
      if (grid) {
        emit(g, cone_csv(cone_grid(n)));
      } else if (og2->count() > 0) {
        emit(g, cone_json(det_gradient_membership(gamma2, gamma3, n)).dump(2) + "\n");
      } else if (oa->count() > 0) {
        emit(g, cone_json(cone_classify(alpha, beta, n)).dump(2) + "\n");
      } else {
        throw std::runtime_error("cone needs --alpha/--beta, --gamma2/--gamma3, or --grid");
      }
      return 0;
    }
    if (*rig) {
      emit(g, rigidity_json(fit_AB(entry(id).id, n)).dump(2) + "\n");
      return 0;
    }
    if (*charts) {
      if (!export_dir.empty()) std::filesystem::create_directories(export_dir);
      for (const auto& z : model_zoo()) {
        std::cout << z.name << "\t" << z.chart.name << "\tn=" << z.chart.n << (z.chart.pointwise_only ? "\tpointwise" : "")
                  << "\n";
        if (!export_dir.empty()) save_chart_manifest(z.chart, export_dir + "/" + z.name + ".chart");
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
