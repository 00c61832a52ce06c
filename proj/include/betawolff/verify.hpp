#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "betawolff/coeffs.hpp"
#include "betawolff/stopping.hpp"

namespace betawolff {

enum class LhsMode { lattice, grid };

struct VerifyParams {
  LatticeParams lattice;
  StoppingConfig stopping;
  double grid_ratio = 2;
};

// lattice mode: sum of beta2(2B_Q)^2 Theta(Q) mu(Q) over non-leaf cubes;
// grid mode: sum_i w_i sum_j beta2(x_i,r_j)^2 theta(x_i,r_j) ln(ratio) over
// the geometric radius grid between diameter and r_min.
double beta_wolff_lhs(const DiscreteMeasure& mu, const CubeStats* st,
                      LhsMode mode, double grid_ratio = 2);

struct ComparisonReport {
  double lhs_lattice = 0;
  double lhs_grid = 0;
  double riesz = 0;
  double theta0 = 0;
  double theta0_sq_mass = 0;
  double r1 = 0;  // lhs_grid over (riesz + theta0^2 mass)
  double r2 = 0;  // riesz over (lhs_grid + theta0^2 mass)
};

ComparisonReport theorem_check(const DiscreteMeasure& mu,
                               const VerifyParams& params);

struct PotentialSample {
  double sup_theta = 0;
  double beta_integral = 0;  // before the square root
  double U = 0;              // sup_theta + sqrt(beta_integral)
};

PotentialSample jones_wolff_potential(const DiscreteMeasure& mu,
                                      std::span<const double> x,
                                      double grid_ratio = 2);

struct CapacityEstimate {
  double kappa = 0;  // t * mu(E)
  double t = 0;      // 1 over the largest potential on E
  double max_U = 0;
};

CapacityEstimate capacity_estimate(const DiscreteMeasure& mu,
                                   const std::vector<int>& E,
                                   double grid_ratio = 2);

struct SuiteEntry {
  std::string kind;
  std::map<std::string, double> params;
};

struct SuiteOptions {
  VerifyParams verify;
  bool timings = false;
};

// Battery JSON: {"entries":[{"kind":"segment","params":{"N":512}}, ...]}.
std::vector<SuiteEntry> load_battery(const std::string& path);

// Runs theorem_check, corona_top, and a whole-support capacity estimate per
// entry, writes the report JSON to out, and drops per-generator series CSVs
// (x = sweep parameter, y = lhs_grid / riesz_energy) into series_dir when a
// generator appears at least twice. Failures are recorded per entry and do
// not stop the run.
void suite_report(const std::vector<SuiteEntry>& battery,
                  const SuiteOptions& opts, std::ostream& out,
                  const std::string& series_dir);

}  // namespace betawolff
