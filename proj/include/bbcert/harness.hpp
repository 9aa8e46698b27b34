#pragma once

#include "bbcert/bnb_cert.hpp"

#include <iosfwd>
#include <string>

namespace bbcert {

// A certificate file also records the configuration it was produced with, so validation replays
// the same online solver.
struct CertificateFile {
  Certificate cert;
  CertConfig config;
};

std::string certificate_to_json_text(const Certificate& cert, const CertConfig& config);
CertificateFile certificate_from_json_text(const std::string& text);
void save_certificate(const Certificate& cert, const CertConfig& config, const std::string& path);
CertificateFile load_certificate(const std::string& path);

std::string config_to_json_text(const CertConfig& config);

inline constexpr double kLookupTol = 1e-8;

// Index of the region containing θ with the smallest residual; regions within 1e-8 qualify and
// residual ties (1e-12) go to the first one listed. Every other qualifying region is appended to
// `also` when given. Throws ContractError for θ outside the certified domain and
// SolverError("coverage gap") when no region contains θ.
int lookup(const Certificate& cert, const Vec& theta, std::vector<int>* also = nullptr);

// Uniform lattice over the domain's bounding box with per-axis counts, corners inset by `inset`;
// lattice points outside the domain are dropped.
struct GridSpec {
  std::vector<int> counts;
  double inset = 1e-6;
  bool centers = true;  // also sample every region's Chebyshev center
};
std::vector<Vec> lattice_points(const Polyhedron& domain, const GridSpec& grid);

struct Violation {
  Vec theta;
  Kappa certified;
  Kappa online;
  std::string kind;  // "iterations", "nodes", "objective", "coverage", "overlap"
  int region = -1;
};

struct ValidationReport {
  bool conservative = false;
  long samples = 0;
  long centers = 0;        // how many of the samples were Chebyshev centers
  long exact_matches = 0;  // samples with certified κ == online κ
  long coverage_misses = 0;
  long center_overlaps = 0;  // centers lying in more than one region
  std::vector<Violation> violations;
  double max_overestimate_pct = 0.0;         // max over samples of (cert − online)/online, iterations
  double worst_case_overestimate_pct = 0.0;  // (max cert − max online)/max online, iterations
  Kappa worst_certified;
  Kappa worst_online;

  bool passed() const { return violations.empty() && coverage_misses == 0 && center_overlaps == 0; }
};

// Replays bnb_solve at every lattice point and region center. Exact certificates must match κ
// exactly; conservative ones must not fall below the online κ. Objectives are compared within 1e-6
// wherever either side is finite.
ValidationReport validate_grid(const MpProblem& problem, const Certificate& cert, const GridSpec& grid,
                               const SolverConfig& config);

std::string report_to_json_text(const ValidationReport& report);
void print_summary(const ValidationReport& report, std::ostream& out);

// CSV raster of κ over axes (i, j) at cell centers, other coordinates at the domain's Chebyshev
// center. With n_θ = 1 the 1-D variant "theta,iterations,nodes,region" is written. Cells outside
// the domain are skipped; uncovered cells get region -1 and empty κ fields.
void emit_region_map(const Certificate& cert, int axis_i, int axis_j, int resolution, std::ostream& out);

}  // namespace bbcert
