#include "betawolff/stopping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>

#include "betawolff/common.hpp"

namespace betawolff {

double StoppingConfig::Lambda(int A0, int n) const {
  return ipow(static_cast<double>(A0), k_lambda * n);
}

double StoppingConfig::B(int A0, int n) const {
  return std::pow(Lambda(A0, n), 1.0 / (100.0 * n));
}

double StoppingConfig::k_lambda_star() const {
  return k_lambda * static_cast<double>(N_corona) / (N_corona - 1);
}

double StoppingConfig::Lambda_star(int A0, int n) const {
  return std::pow(static_cast<double>(A0), k_lambda_star() * n);
}

bool StoppingConfig::delta0_in_regime(int A0, int n) const {
  return delta0 <= 1.0 / (Lambda(A0, n) * Lambda(A0, n));
}

namespace {

// Maximal cubes strictly below R's level whose Poisson coefficient stays
// under the threshold; descent stops at the first qualifying cube.
std::vector<int> ld_family(const CubeStats& st, int R, double delta0) {
  const Lattice& lat = *st.lat;
  const double thr = delta0 * st.Theta[R];
  const int lvl = lat.cube(R).level;
  std::vector<int> out;
  std::vector<int> stack;
  for (auto it = lat.level(lvl).rbegin(); it != lat.level(lvl).rend(); ++it)
    for (auto ch = lat.cube(*it).children.rbegin();
         ch != lat.cube(*it).children.rend(); ++ch)
      stack.push_back(*ch);
  while (!stack.empty()) {
    int p = stack.back();
    stack.pop_back();
    if (st.P[p] <= thr) {
      out.push_back(p);
      continue;
    }
    const Cube& cp = lat.cube(p);
    for (auto ch = cp.children.rbegin(); ch != cp.children.rend(); ++ch)
      stack.push_back(*ch);
  }
  return out;
}

int ancestor_at_level(const Lattice& lat, int q, int lvl) {
  while (lat.cube(q).level > lvl) q = lat.cube(q).parent;
  return q;
}

// Members of bad that sit strictly inside R with no other bad member above
// them, in id order.
std::vector<int> maximal_inside(const Lattice& lat, const std::set<int>& bad,
                                int R) {
  const int lvl = lat.cube(R).level;
  std::vector<int> out;
  for (int q : bad) {
    bool blocked = false;
    int a = lat.cube(q).parent;
    while (a >= 0 && lat.cube(a).level > lvl) {
      if (bad.count(a)) {
        blocked = true;
        break;
      }
      a = lat.cube(a).parent;
    }
    if (blocked || a != R) continue;
    out.push_back(q);
  }
  return out;
}

}  // namespace

StopFamilies stop_families(const CubeStats& st, int R,
                           const StoppingConfig& cfg) {
  const Lattice& lat = *st.lat;
  StopFamilies out;
  out.root_p_doubling = st.p_doubling[R] != 0;
  out.hd = hd_k(st, R, static_cast<double>(cfg.k_lambda));
  out.ld = ld_family(st, R, cfg.delta0);
  std::set<int> bad(out.hd.begin(), out.hd.end());
  bad.insert(out.ld.begin(), out.ld.end());
  out.stop = maximal_inside(lat, bad, R);
  return out;
}

double sigma(const CubeStats& st, const std::vector<int>& ids,
             int* skipped_leaves) {
  const Lattice& lat = *st.lat;
  if (skipped_leaves) *skipped_leaves = 0;
  double s = 0;
  for (int q : ids) {
    if (q < 0 || q >= lat.size()) throw ValidationError("sigma: bad cube id");
    if (lat.cube(q).leaf) {
      if (skipped_leaves) ++*skipped_leaves;
      continue;
    }
    s += st.Theta[q] * st.Theta[q] * lat.cube(q).mass;
  }
  return s;
}

bool is_mdw(const CubeStats& st, int R, const StoppingConfig& cfg,
            const StopFamilies* fam) {
  if (st.lat->cube(R).leaf) return false;
  StopFamilies local;
  if (!fam) {
    local = stop_families(st, R, cfg);
    fam = &local;
  }
  std::set<int> hd(fam->hd.begin(), fam->hd.end());
  std::vector<int> both;
  for (int q : fam->stop)
    if (hd.count(q)) both.push_back(q);
  double lhs = sigma(st, both);
  double rhs = sigma(st, {R}) / cfg.B(st.lat->A0(), st.lat->mu().n());
  return lhs >= rhs;
}

std::pair<bool, std::optional<int>> is_db(const CubeStats& st, int R,
                                          const StoppingConfig& cfg) {
  const Lattice& lat = *st.lat;
  if (lat.cube(R).leaf) return {false, std::nullopt};
  EnergyBreakdown eb = energies(st, R, cfg.lambda);
  double thr = cfg.M * cfg.M * st.Theta[R] * st.Theta[R] * eb.mass_lambda;
  for (const auto& [k, v] : eb.slice12)
    if (k >= 1 && v > thr) return {true, k};
  return {false, std::nullopt};
}

std::vector<int> enlarged_cube(const Lattice& lat, int R, int j,
                               bool* range_warn) {
  if (j < 0) throw ValidationError("enlarged_cube needs j >= 0");
  if (range_warn) *range_warn = j > (3 * lat.A0()) / 4;
  const Cube& cr = lat.cube(R);
  const int next = cr.level + 1;
  if (next >= lat.num_levels()) return {};
  auto xr = lat.mu().point(cr.center_atom);
  const double thr = lat.side(cr.level) / 2.0 + 2.0 * j * lat.side(next);
  const double cutoff = std::nextafter(thr, 0.0);
  std::vector<int> out;
  for (int q : lat.level(next))
    if (lat.cube_dist(xr, q, cutoff) < thr) out.push_back(q);
  return out;
}

std::vector<int> stop_in_enlarged(const CubeStats& st, int R,
                                  const std::vector<int>& members,
                                  const std::vector<int>& ej) {
  const Lattice& lat = *st.lat;
  const int next = lat.cube(R).level + 1;
  std::set<int> region(ej.begin(), ej.end());
  std::vector<int> out;
  for (int q : members)
    if (region.count(ancestor_at_level(lat, q, next))) out.push_back(q);
  return out;
}

HSelect select_h(const CubeStats& st, int R, const StoppingConfig& cfg) {
  const Lattice& lat = *st.lat;
  StopFamilies fam = stop_families(st, R, cfg);
  const double b14 =
      std::pow(cfg.B(lat.A0(), lat.mu().n()), 0.25);
  const int jmax = std::max(10, lat.A0() / 4);

  auto sigma_at = [&](int j) {
    std::vector<int> ej = enlarged_cube(lat, R, j);
    return sigma(st, stop_in_enlarged(st, R, fam.hd, ej));
  };

  std::vector<double> sig(jmax + 1, 0.0);
  for (int j = 0; j <= jmax; ++j) sig[j] = sigma_at(j);

  HSelect out;
  double best_ratio = std::numeric_limits<double>::infinity();
  for (int j = 10; j <= jmax; ++j) {
    double lhs = sig[j], rhs = b14 * sig[j - 10];
    if (lhs <= rhs) {
      out.j = j;
      out.h = j - 10;
      out.witnessed = true;
      out.ratio = rhs > 0 ? lhs / rhs : 0.0;
      return out;
    }
    double ratio = rhs > 0 ? lhs / rhs
                           : std::numeric_limits<double>::infinity();
    if (ratio < best_ratio) {
      best_ratio = ratio;
      out.j = j;
      out.h = j - 10;
      out.ratio = ratio;
    }
  }
  if (out.j < 0) {
    out.j = 10;
    out.h = 0;
    out.ratio = std::numeric_limits<double>::infinity();
  }
  out.witnessed = false;
  return out;
}

CoronaForest corona_top(const CubeStats& st, const StoppingConfig& cfg) {
  const Lattice& lat = *st.lat;
  const int A0 = lat.A0();
  const int n = lat.mu().n();
  const double kstar = cfg.k_lambda_star();
  const double decay = 2.0 *
                       std::pow(cfg.Lambda_star(A0, n), 2.0 / cfg.N_corona) /
                       cfg.B(A0, n);

  CoronaForest forest;
  std::vector<int> queue{lat.root()};
  std::set<int> seen{lat.root()};
  std::size_t head = 0;
  while (head < queue.size()) {
    if (forest.trees.size() > static_cast<std::size_t>(lat.size()))
      throw ValidationError("corona iteration failed to terminate");
    int R = queue[head++];
    CoronaTree tree;
    tree.root = R;

    std::vector<int> end_star;
    if (!lat.cube(R).leaf) {
      std::vector<int> hd_star = hd_k(st, R, kstar);
      std::vector<int> ld = ld_family(st, R, cfg.delta0);
      std::set<int> bad(hd_star.begin(), hd_star.end());
      bad.insert(ld.begin(), ld.end());
      std::vector<int> stop_star = maximal_inside(lat, bad, R);
      for (int s : stop_star) {
        std::vector<int> stack{s};
        while (!stack.empty()) {
          int p = stack.back();
          stack.pop_back();
          const Cube& cp = lat.cube(p);
          if (!cp.leaf && st.p_doubling[p]) {
            end_star.push_back(p);
            continue;
          }
          for (auto ch = cp.children.rbegin(); ch != cp.children.rend(); ++ch)
            stack.push_back(*ch);
        }
      }
      std::sort(end_star.begin(), end_star.end());
    }
    tree.end_cubes = end_star;

    std::set<int> ends(end_star.begin(), end_star.end());
    std::vector<int> stack{R};
    double tmax = 0, tmin = std::numeric_limits<double>::infinity();
    while (!stack.empty()) {
      int p = stack.back();
      stack.pop_back();
      tree.tree_cubes.push_back(p);
      if (!lat.cube(p).leaf) {
        tmax = std::max(tmax, st.Theta[p]);
        tmin = std::min(tmin, st.Theta[p]);
      }
      if (ends.count(p)) continue;
      const Cube& cp = lat.cube(p);
      for (auto ch = cp.children.rbegin(); ch != cp.children.rend(); ++ch)
        stack.push_back(*ch);
    }
    std::sort(tree.tree_cubes.begin(), tree.tree_cubes.end());
    if (!(tmin < std::numeric_limits<double>::infinity())) {
      tmax = st.Theta[R];
      tmin = st.Theta[R];
    }
    tree.theta_max = tmax;
    tree.theta_min = tmin;
    tree.theta_osc = tmin > 0 ? tmax / tmin : 0.0;
    tree.sigma = st.Theta[R] * st.Theta[R] * lat.cube(R).mass;
    tree.mdw = lat.cube(R).leaf ? false : is_mdw(st, R, cfg);
    tree.sigma_end = sigma(st, end_star);
    tree.lemma_rhs = decay * tree.sigma;

    forest.sigma_top += tree.sigma;
    forest.trees.push_back(std::move(tree));
    for (int e : end_star)
      if (seen.insert(e).second) queue.push_back(e);
  }
  forest.top_count = static_cast<int>(forest.trees.size());
  return forest;
}

void write_corona_json(const CoronaForest& forest, std::ostream& out) {
  out << "{\"top\":[";
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    const CoronaTree& tr = forest.trees[t];
    if (t) out << ",";
    out << "{\"root\":" << tr.root << ",\"tree_cubes\":[";
    for (std::size_t i = 0; i < tr.tree_cubes.size(); ++i) {
      if (i) out << ",";
      out << tr.tree_cubes[i];
    }
    out << "],\"end_cubes\":[";
    for (std::size_t i = 0; i < tr.end_cubes.size(); ++i) {
      if (i) out << ",";
      out << tr.end_cubes[i];
    }
    out << "],\"sigma\":" << fmt_g17(tr.sigma)
        << ",\"theta_osc\":" << fmt_g17(tr.theta_osc)
        << ",\"theta_max\":" << fmt_g17(tr.theta_max)
        << ",\"theta_min\":" << fmt_g17(tr.theta_min)
        << ",\"mdw\":" << (tr.mdw ? "true" : "false")
        << ",\"sigma_end\":" << fmt_g17(tr.sigma_end)
        << ",\"decay_target\":" << fmt_g17(tr.lemma_rhs) << "}";
  }
  out << "],\"sigma_top\":" << fmt_g17(forest.sigma_top)
      << ",\"top_count\":" << forest.top_count << "}\n";
}

}  // namespace betawolff
