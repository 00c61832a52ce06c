#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "betawolff/measure.hpp"

namespace betawolff {

struct Cube {
  int id = -1;
  int level = 0;
  int parent = -1;
  std::vector<int> children;
  std::size_t begin = 0, end = 0;  // contiguous slice of the lattice atom order
  int center_atom = -1;            // original atom index, x_Q in supp mu
  double r = 0;                    // clamped into [unit(k), C0*unit(k)]
  double extent = 0;               // max distance from x_Q to an atom of Q
  double mass = 0;
  double f = 0;                    // extent / r, containment factor
  bool leaf = false;
};

struct LatticeParams {
  int A0 = 16;
  double C0 = 30;
};

// Dyadic-style cube hierarchy on the atom cloud. Level k cells have radius
// unit u_k = scale * A0^-k (scale fixed by r(root)); centers of one level are
// pairwise >= 10 u_k apart, children partition their parent, and cell radii
// are clamped into [u_k, C0 u_k]. Side length ell(Q) = 56 C0 u_k and the
// reference ball B_Q is 28 B(Q), so 2 B_Q has radius 56 r(Q).
class Lattice {
 public:
  const DiscreteMeasure& mu() const { return *mu_; }
  int A0() const { return params_.A0; }
  double C0() const { return params_.C0; }
  double scale() const { return scale_; }
  double unit(int k) const { return scale_ * ipow(params_.A0, -k); }
  double side(int k) const { return 56.0 * params_.C0 * unit(k); }
  double ell(int q) const { return side(cubes_[q].level); }

  int root() const { return 0; }
  int size() const { return static_cast<int>(cubes_.size()); }
  const Cube& cube(int q) const { return cubes_[q]; }
  int num_levels() const { return static_cast<int>(levels_.size()); }
  const std::vector<int>& level(int k) const { return levels_[k]; }
  std::span<const int> atoms(int q) const {
    return {order_.data() + cubes_[q].begin, cubes_[q].end - cubes_[q].begin};
  }
  int separation_fallbacks() const { return separation_fallbacks_; }

  std::span<const double> center(int q) const {
    return mu_->point(cubes_[q].center_atom);
  }
  // dist(x, Q) = min over atoms of Q; early exit once <= cutoff.
  double cube_dist(std::span<const double> x, int q, double cutoff) const;
  // Same-level cubes P with dist(x_Q, P) <= lambda * ell(Q); the lambda-Q
  // neighborhood, always containing Q itself.
  std::vector<int> lambda_members(int q, double lambda) const;
  // Members plus all strict descendants: D_mu(lambda Q) when members came
  // from lambda_members.
  std::vector<int> descendants_of(const std::vector<int>& members) const;
  double mass_of(const std::vector<int>& cubes) const;
  // Atoms within unit(k+l) of the cell boundary, inner and outer side,
  // capped to 90 B(Q); small-boundary diagnostic.
  double boundary_mass(int q, int l) const;
  // mu(100 B(Q)) <= C0 mu(B(Q)) flags, computed on first use.
  const std::vector<char>& db_flags() const;

  void export_json(std::ostream& out) const;

 private:
  friend Lattice build_lattice(const DiscreteMeasure&, const LatticeParams&);
  const DiscreteMeasure* mu_ = nullptr;
  LatticeParams params_;
  double scale_ = 1;
  std::vector<Cube> cubes_;
  std::vector<std::vector<int>> levels_;
  std::vector<int> order_;
  std::vector<int> cube_of_atom_;  // finest (leaf) cube per original atom
  int separation_fallbacks_ = 0;
  mutable std::vector<char> db_flags_;
};

Lattice build_lattice(const DiscreteMeasure& mu, const LatticeParams& params = {});

struct LatticeCheck {
  bool partition = true;
  bool nesting = true;
  bool separation = true;
  bool radius_range = true;
  bool mass_additive = true;
  // Diagnostics only: DM-lite does not promise these.
  int ball_containment_violations = 0;  // atoms of E inside B(Q) but outside Q
  int containment_factor_violations = 0;  // f(Q) > 28
  int separation_fallbacks = 0;
  bool ok() const {
    return partition && nesting && separation && radius_range && mass_additive;
  }
};
LatticeCheck check_lattice(const Lattice& lat);

}  // namespace betawolff
