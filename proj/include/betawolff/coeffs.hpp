#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <vector>

#include "betawolff/lattice.hpp"

namespace betawolff {

// theta_mu(B(x,r)) = mu(B)/r^n.
double theta(const DiscreteMeasure& mu, std::span<const double> x, double r);

struct Beta2Result {
  double beta = 0;      // beta_2 value (square root)
  double beta_sq = 0;   // lambda-min of the weighted scatter over r^(n+2)
  std::vector<double> centroid;
  std::vector<double> normal;  // best-plane unit normal
  bool degenerate = false;     // fewer than two atoms in the ball
};
// Least-squares flatness over hyperplanes: the optimal plane passes through
// the weighted centroid with the smallest-eigenvalue scatter direction as
// normal.
Beta2Result beta2(const DiscreteMeasure& mu, const Ball& ball);

// Geometric radii diam * ratio^-j, descending, stopping at the last radius
// >= r_min. ratio >= 2.
std::vector<double> radius_grid(double diam, double r_min, double ratio);

// Closed-ball mass (and optionally first/second moments of y - x) at every
// grid radius around x, in one pass over the atoms. Moment layout: M1 is
// (J+1) x d, M2 is (J+1) x d(d+1)/2 packed upper triangles.
void radial_moments(const DiscreteMeasure& mu, std::span<const double> x,
                    const std::vector<double>& radii, bool want_moments,
                    std::vector<double>& mass, std::vector<double>& M1,
                    std::vector<double>& M2);

// v^T S v for the unit v minimizing it, where S is the centered scatter
// assembled from moments about the scan origin. Recomputing the form on the
// returned eigenvector keeps exactly-degenerate data at exactly zero.
double scatter_min_form(int d, double m, const double* M1, const double* M2,
                        std::vector<double>* normal = nullptr);

// Per-cube densities on 2 B_Q = B(x_Q, 56 r(Q)): the ball density theta2B,
// the side-normalized density theta_ell = mu(2 B_Q)/ell(Q)^n that the
// dyadic buckets discretize, Theta = A0^(bucket*n) with
// Theta <= theta_ell < A0^n * Theta, the Poisson-style sum
// P(Q) = sum over ancestors R of ell(Q)/ell(R)^(n+1) * mu(2 B_R) and its
// doubling flag P(Q) <= C_d * theta_ell(Q), C_d = 4 A0^n.
struct CubeStats {
  const Lattice* lat = nullptr;
  double C_d = 0;
  std::vector<double> mass2B, theta2B, theta_ell, Theta, P;
  std::vector<int> bucket;
  std::vector<char> p_doubling;
  bool has_beta = false;
  std::vector<double> beta2sq;  // beta_2(2 B_Q)^2, non-leaf cubes

  static CubeStats build(const Lattice& lat, bool with_beta);
};

// Maximal cubes P with ell(P) < ell(Q) and Theta(P) >= A0^(k*n) Theta(Q);
// k may be fractional (corona thresholds). Optionally intersected with
// D_mu(lambda Q). Leaf cells never participate.
std::vector<int> hd_k(const CubeStats& st, int q, double k,
                      std::optional<double> restrict_lambda = {});

// Multiscale energies over D_mu(lambda Q), split into the hd^k layers:
//   E      = sum (ell(P)/ell(Q))^(3/4) Theta(P)^2 mu(P) over D_mu(lambda Q)
//   EH     = same weight, restricted to the hd^k layers, summed over k >= 0
//   Einf   = sup over k >= 1 of the (ell(P)/ell(Q))^(1/2)-weighted layer sum
// slice34/slice12 hold the individual layers, max_len the m_k statistics.
struct EnergyBreakdown {
  double E = 0, EH = 0, Einf = 0;
  double mass_lambda = 0;  // mass of the lambda-neighborhood of Q
  std::map<int, double> slice34, slice12, m_k;
};
EnergyBreakdown energies(const CubeStats& st, int q, double lambda = 9.0);

// E(sigma) = sum_i w_i sum_j r_j^(3/4) theta(x_i, r_j)^2 log(ratio).
double wolff_energy(const DiscreteMeasure& mu, double grid_ratio);

void write_coeff_table_csv(const CubeStats& st, std::ostream& out,
                           double lambda = 9.0);

}  // namespace betawolff
