#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "betawolff/lattice.hpp"
#include "betawolff/measure.hpp"

namespace betawolff {

// Kernel (x-y)/|x-y|^{n+1}; throws on coincident points.
std::vector<double> riesz_kernel(std::span<const double> x,
                                 std::span<const double> y, int n);

// Sum of w_j K(x, x_j) over atoms strictly farther than eps from x.
std::vector<double> riesz_truncated(const DiscreteMeasure& mu,
                                    std::span<const double> x, double eps);

// Self-excluded field at atom i; atoms sharing i's exact location are skipped.
std::vector<double> riesz_pv_discrete(const DiscreteMeasure& mu, std::size_t i);

// All per-atom self-excluded field vectors, row-major size N*d.
std::vector<double> riesz_pv_field(const DiscreteMeasure& mu);

double riesz_energy(const DiscreteMeasure& mu);

// sup over eps >= eps_min of |R_eps mu(x)|; exact via the breakpoint set
// {eps_min} + {pairwise distances >= eps_min}.
double riesz_maximal(const DiscreteMeasure& mu, std::span<const double> x,
                     double eps_min);

struct SuppressionProfile {
  std::vector<double> phi;  // one nonnegative value per atom

  // Phi(x) = min_i (phi_i + |x - x_i|).
  double at(const DiscreteMeasure& mu, std::span<const double> x) const;
};

// Throws listing the worst pair when |phi_i - phi_j| > |x_i - x_j|.
void validate_profile(const DiscreteMeasure& mu, const SuppressionProfile& sp);

// K_phi(x,y) = (x-y)/(|x-y|^2 + Phi(x)Phi(y))^{(n+1)/2}.
std::vector<double> suppressed_kernel(std::span<const double> x,
                                      std::span<const double> y, int n,
                                      double phix, double phiy);

// Sum of w_j K_phi(x, x_j); coincident atoms enter when Phi(x) > 0 and are
// skipped when Phi(x) = 0.
std::vector<double> suppressed_field(const DiscreteMeasure& mu,
                                     std::span<const double> x,
                                     const SuppressionProfile& sp);

// Double sum over distinct ordered atom pairs of F of
// 1/(diam(F) |x-y|^{n-1}); |F| < 2 gives 0 and sets *degenerate.
double w_energy(const DiscreteMeasure& mu, const std::vector<int>& F,
                bool* degenerate = nullptr);

struct CotlarRow {
  int atom = -1;
  double r_star = 0;      // sup over eps >= r0 of |R_eps mu|
  double m_doubling = 0;  // maximal average of |pv field| over doubling balls
  double ratio = 0;       // r_star / (m_doubling + theta1)
};

// Maximal-average candidates are radii r > r0 where either the ball at r or
// the ball at 16r changes; the ball must satisfy mass(16r) <= b * mass(r)
// with b = 128^{n+2}.
std::vector<CotlarRow> cotlar_report(const DiscreteMeasure& mu,
                                     const std::vector<int>& sample, double r0,
                                     double theta1);

// Martingale difference of f on Q's atoms: child averages minus the Q
// average; zero everywhere off Q. Leaf Q gives zero and sets *flat.
std::vector<double> haar_delta(const Lattice& lat,
                               const std::vector<double>& f, int q,
                               bool* flat = nullptr);

// ||Delta_Q f||^2 for every cube (zero at leaves).
std::vector<double> haar_energy(const Lattice& lat,
                                const std::vector<double>& f);

// Returns (sum of per-cube energies, ||f - mean||^2); the two agree when
// every leaf holds a single spatial location.
std::pair<double, double> haar_identity(const Lattice& lat,
                                        const std::vector<double>& f);

struct TreecodeReport {
  double max_abs_dev = 0;
  double rel_dev = 0;  // max abs deviation over max |direct value|
  long long direct_interactions = 0;
  long long tree_interactions = 0;
  double speedup_model = 0;  // direct over tree interaction counts
  double direct_seconds = 0;
  double tree_seconds = 0;
};

// Monopole treecode over the lattice: a cluster is accepted when
// spread/dist <= theta_mac and dist - spread > eps, else it is opened;
// leaves fall back to direct summation. Row-major N*d output.
std::vector<double> riesz_field_tree(const DiscreteMeasure& mu,
                                     const Lattice& lat, double eps,
                                     double theta_mac);

TreecodeReport treecode_certify(const DiscreteMeasure& mu, const Lattice& lat,
                                double eps, double theta_mac);

void write_field_csv(const DiscreteMeasure& mu, const std::vector<double>& field,
                     std::ostream& out);

}  // namespace betawolff
