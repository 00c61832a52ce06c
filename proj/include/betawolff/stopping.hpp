#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "betawolff/coeffs.hpp"

namespace betawolff {

struct StoppingConfig {
  int k_lambda = 2;      // high-density exponent, Lambda = A0^(k_lambda n)
  double delta0 = 1e-3;  // low-density threshold
  double M = 4;          // domination parameter
  int N_corona = 8;      // corona exponent, Lambda_* = Lambda^(N/(N-1))
  double lambda = 9;     // neighborhood scale for region sums

  double Lambda(int A0, int n) const;
  double B(int A0, int n) const;             // Lambda^(1/(100 n))
  double k_lambda_star() const;              // k_lambda N/(N-1)
  double Lambda_star(int A0, int n) const;   // A0^(k_lambda_star n)
  bool delta0_in_regime(int A0, int n) const;  // delta0 <= Lambda^-2
};

struct StopFamilies {
  std::vector<int> hd;    // hd^{k_lambda}(R), globally maximal, non-leaf
  std::vector<int> ld;    // maximal low-Poisson cubes, leaves allowed
  std::vector<int> stop;  // maximal members of hd+ld contained in R
  bool root_p_doubling = true;
};

StopFamilies stop_families(const CubeStats& st, int R,
                           const StoppingConfig& cfg);

// Sum of Theta(P)^2 mu(P) over non-leaf members; leaves are skipped and
// counted into *skipped_leaves.
double sigma(const CubeStats& st, const std::vector<int>& ids,
             int* skipped_leaves = nullptr);

bool is_mdw(const CubeStats& st, int R, const StoppingConfig& cfg,
            const StopFamilies* fam = nullptr);

// Minimal k >= 1 whose half-weight high-density layer beats
// M^2 Theta(R)^2 mu(9R), if any.
std::pair<bool, std::optional<int>> is_db(const CubeStats& st, int R,
                                          const StoppingConfig& cfg);

// Level-(k+1) cube ids whose distance from R's center stays under
// ell(R)/2 + 2 j ell; R's own children always qualify. Sets *range_warn
// when j exceeds (3/4) A0.
std::vector<int> enlarged_cube(const Lattice& lat, int R, int j,
                               bool* range_warn = nullptr);

// hd-family members of R that live under one of the e_j(R) cubes.
std::vector<int> stop_in_enlarged(const CubeStats& st, int R,
                                  const std::vector<int>& members,
                                  const std::vector<int>& ej);

struct HSelect {
  int j = -1;
  int h = -1;
  bool witnessed = false;
  double ratio = 0;  // sigma_j over B^(1/4) sigma_(j-10) at the chosen j
};

HSelect select_h(const CubeStats& st, int R, const StoppingConfig& cfg);

struct CoronaTree {
  int root = -1;
  std::vector<int> tree_cubes;
  std::vector<int> end_cubes;
  double sigma = 0;      // Theta(root)^2 mu(root)
  double theta_osc = 1;  // max over min Theta across non-leaf tree cubes
  double theta_max = 0;
  double theta_min = 0;
  bool mdw = false;
  double sigma_end = 0;
  double lemma_rhs = 0;  // 2 Lambda_*^(2/N) B^-1 sigma, the decay target
};

struct CoronaForest {
  std::vector<CoronaTree> trees;
  double sigma_top = 0;
  int top_count = 0;
};

CoronaForest corona_top(const CubeStats& st, const StoppingConfig& cfg);

void write_corona_json(const CoronaForest& forest, std::ostream& out);

}  // namespace betawolff
