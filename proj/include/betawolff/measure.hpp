#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "betawolff/common.hpp"

namespace betawolff {

struct Ball {
  std::vector<double> center;
  double radius = 0;
};

// Finite weighted atom cloud in R^(n+1). n is the codimension-1 exponent in
// all density quotients mass / r^n; the ambient dimension is d = n + 1.
// The smallest positive pairwise distance r_min acts as a resolution floor:
// every supremum over radii is restricted to r >= r_min.
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;
  static DiscreteMeasure from_atoms(int n, std::vector<double> coords,
                                    std::vector<double> weights);

  int n() const { return n_; }
  int dim() const { return n_ + 1; }
  std::size_t size() const { return weights_.size(); }

  std::span<const double> point(std::size_t i) const {
    return {coords_.data() + i * static_cast<std::size_t>(dim()),
            static_cast<std::size_t>(dim())};
  }
  double weight(std::size_t i) const { return weights_[i]; }
  const std::vector<double>& coords() const { return coords_; }
  const std::vector<double>& weights() const { return weights_; }

  double total_mass() const { return total_mass_; }
  bool r_min_defined() const { return r_min_defined_; }
  double r_min() const;
  double diameter() const { return diam_; }

 private:
  int n_ = 1;
  std::vector<double> coords_;
  std::vector<double> weights_;
  double total_mass_ = 0;
  double r_min_ = 0;
  bool r_min_defined_ = false;
  double diam_ = 0;
};

// CSV: one atom per line, d coordinates then the weight, no header.
// JSON: {"n": 1, "atoms": [[x0, ..., w], ...]}; a JSON "n" field must agree
// with the requested n.
DiscreteMeasure load_measure(const std::string& path, int n);
void save_measure_csv(const DiscreteMeasure& mu, const std::string& path);
void save_measure_json(const DiscreteMeasure& mu, const std::string& path);

DiscreteMeasure generate_segment(std::size_t N, int n);
DiscreteMeasure generate_circle(std::size_t N, int n);
DiscreteMeasure generate_lipschitz_graph(std::size_t N, double slope_bound, int n);
DiscreteMeasure generate_cantor4(int g, double ratio = 0.25);
// Dispatch by kind name with a flat parameter map (N, g, ratio, slope, n).
DiscreteMeasure generate(const std::string& kind,
                         const std::map<std::string, double>& params);

// mu(B) with the closed-ball convention: boundary atoms count.
double ball_mass(const DiscreteMeasure& mu, const Ball& ball);

// theta0 = max over atoms x and candidate radii r >= r_min of mu(B(x,r))/r^n.
// Candidates are the distances from x to the other atoms (clamped below by
// r_min) plus r_min itself; closed balls make the quotient right-attained
// there.
double growth_constant(const DiscreteMeasure& mu);

// Weights multiplied by t > 0; positions untouched.
DiscreteMeasure scaled(const DiscreteMeasure& mu, double t);

}  // namespace betawolff
