#pragma once

#include <string>
#include <vector>

#include "cvi/quad.hpp"
#include "cvi/spectra.hpp"

namespace cvi {

inline constexpr const char* kVersion = "cvi-lab 0.1.0";

struct HarnessError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class CaseStatus { Pass, Fail, Flagged, Skipped };
std::string to_string(CaseStatus s);  // pass, fail, flagged-discrepancy, skipped

struct CaseRecord {
  std::string id;
  std::string digest;  // FNV-1a of the input description
  CaseStatus status = CaseStatus::Pass;
  double residual = 0.0;
  double tolerance = 0.0;
  double wall_seconds = 0.0;
  std::string note;
};

struct SuiteReport {
  std::string suite;
  Profile profile = Profile::Standard;
  unsigned seed = 0;
  double tol_scale = 1.0;
  std::string version = kVersion;
  std::vector<CaseRecord> cases;

  bool passed() const;  // every non-skipped case passes (flagged cases do not fail a suite)
  int count(CaseStatus s) const;
  double max_residual() const;  // over pass/fail cases
};

const std::vector<std::string>& suite_names();
// Unknown names throw HarnessError; errors inside a case are recorded as failures.
SuiteReport run_suite(const std::string& name, Profile profile, unsigned seed, double tol_scale = 1.0);

// Fixed key order. Wall times are left out unless asked for, so reports stay byte-stable.
std::string report_json(const SuiteReport& r, bool with_timing = false);
std::string digest(const std::string& text);

// ---------------------------------------------------------------- chart manifests

struct ManifestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Chart parse_chart_manifest(const std::string& text, const std::string& origin = "<manifest>");
Chart load_chart_manifest(const std::string& path);
std::string chart_manifest(const Chart& c);
void save_chart_manifest(const Chart& c, const std::string& path);

// named charts used by the suites and the CLI
struct ZooEntry {
  std::string name;
  Chart chart;
};
std::vector<ZooEntry> model_zoo();
// zoo name, or a manifest path
Chart resolve_chart(const std::string& name_or_path);

// ---------------------------------------------------------------- plot data

std::string spectrum_csv(const std::vector<SpectrumRow>& rows);          // k,lambda,eigenvalue
std::string cone_csv(const std::vector<ConeVerdict>& verdicts);         // alpha,beta,E,V,SV
std::vector<ConeVerdict> cone_grid(int n, int steps = 21, double lo = -3.0, double hi = 3.0);

}  // namespace cvi
