#include "betawolff/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

namespace betawolff {

namespace {

constexpr double kHuge = std::numeric_limits<double>::infinity();

void cell_of(const double* p, int d, double h, long long* out) {
  for (int k = 0; k < d; ++k)
    out[k] = static_cast<long long>(std::floor(p[k] / h));
}

// Static grid over all atoms at pitch h; cells visited in sorted key order,
// atoms inside a cell in index order, so accumulation order is reproducible.
struct PointGrid {
  int d = 0;
  double h = 1;
  const std::vector<double>* coords = nullptr;
  std::vector<long long> keys;
  std::vector<int> idx;

  void build(const std::vector<double>& c, std::size_t N, int dd, double hh) {
    d = dd;
    h = hh;
    coords = &c;
    keys.assign(N * static_cast<std::size_t>(d), 0);
    for (std::size_t i = 0; i < N; ++i)
      cell_of(c.data() + i * d, d, h, keys.data() + i * static_cast<std::size_t>(d));
    idx.resize(N);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      const long long* ka = keys.data() + static_cast<std::size_t>(a) * d;
      const long long* kb = keys.data() + static_cast<std::size_t>(b) * d;
      for (int k = 0; k < d; ++k)
        if (ka[k] != kb[k]) return ka[k] < kb[k];
      return a < b;
    });
  }

  template <class F>
  void visit_neighbors(const double* p, F&& f) const {
    std::vector<long long> base(d), cur(d);
    cell_of(p, d, h, base.data());
    std::vector<int> off(d, -1);
    for (;;) {
      for (int k = 0; k < d; ++k) cur[k] = base[k] + off[k];
      auto lo = std::lower_bound(idx.begin(), idx.end(), cur,
                                 [&](int a, const std::vector<long long>& key) {
                                   const long long* ka =
                                       keys.data() + static_cast<std::size_t>(a) * d;
                                   for (int k = 0; k < d; ++k)
                                     if (ka[k] != key[k]) return ka[k] < key[k];
                                   return false;
                                 });
      auto hi = std::upper_bound(lo, idx.end(), cur,
                                 [&](const std::vector<long long>& key, int a) {
                                   const long long* ka =
                                       keys.data() + static_cast<std::size_t>(a) * d;
                                   for (int k = 0; k < d; ++k)
                                     if (key[k] != ka[k]) return key[k] < ka[k];
                                   return false;
                                 });
      for (auto it = lo; it != hi; ++it) f(*it);
      int k = 0;
      while (k < d && off[k] == 1) off[k++] = -1;
      if (k == d) break;
      ++off[k];
    }
  }
};

// Dynamic grid of already chosen centers at pitch sep, for the pairwise
// >= sep admissibility test.
struct SepGrid {
  int d = 0;
  double sep = 1;
  const std::vector<double>* coords = nullptr;
  std::map<std::vector<long long>, std::vector<int>> cells;

  void init(const std::vector<double>* c, int dd, double s) {
    d = dd;
    sep = s;
    coords = c;
    cells.clear();
  }

  bool admissible(const double* p) const {
    double s2 = sep * sep;
    std::vector<long long> base(d), cur(d);
    cell_of(p, d, sep, base.data());
    std::vector<int> off(d, -1);
    for (;;) {
      for (int k = 0; k < d; ++k) cur[k] = base[k] + off[k];
      auto it = cells.find(cur);
      if (it != cells.end()) {
        for (int a : it->second) {
          const double* q = coords->data() + static_cast<std::size_t>(a) * d;
          double dd = 0;
          for (int k = 0; k < d; ++k) {
            double t = p[k] - q[k];
            dd += t * t;
          }
          if (dd < s2) return false;
        }
      }
      int k = 0;
      while (k < d && off[k] == 1) off[k++] = -1;
      if (k == d) break;
      ++off[k];
    }
    return true;
  }

  void insert(int atom) {
    std::vector<long long> key(d);
    cell_of(coords->data() + static_cast<std::size_t>(atom) * d, d, sep, key.data());
    cells[key].push_back(atom);
  }
};

}  // namespace

Lattice build_lattice(const DiscreteMeasure& mu, const LatticeParams& params) {
  if (params.A0 < 16) throw ValidationError("A0 must be an integer >= 16");
  if (!(params.C0 >= 30)) throw ValidationError("C0 must be >= 30");
  const std::size_t N = mu.size();
  const int d = mu.dim();
  const std::vector<double>& coords = mu.coords();

  Lattice lat;
  lat.mu_ = &mu;
  lat.params_ = params;

  std::vector<double> cen(d, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    auto p = mu.point(i);
    for (int k = 0; k < d; ++k) cen[k] += mu.weight(i) * p[k];
  }
  for (int k = 0; k < d; ++k) cen[k] /= mu.total_mass();
  int root_center = 0;
  double best = kHuge;
  for (std::size_t i = 0; i < N; ++i) {
    double dd = dist2({cen.data(), cen.size()}, mu.point(i));
    if (dd < best) {
      best = dd;
      root_center = static_cast<int>(i);
    }
  }
  double r_bound = 0;
  for (std::size_t i = 0; i < N; ++i)
    r_bound = std::max(r_bound, dist(mu.point(root_center), mu.point(i)));
  lat.scale_ = r_bound > 0 ? r_bound : 1.0;
  double leaf_floor = mu.r_min_defined() ? mu.r_min() : kHuge;

  lat.order_.resize(N);
  std::iota(lat.order_.begin(), lat.order_.end(), 0);

  Cube root;
  root.id = 0;
  root.level = 0;
  root.begin = 0;
  root.end = N;
  root.center_atom = root_center;
  root.extent = r_bound;
  root.r = std::clamp(r_bound, lat.unit(0), params.C0 * lat.unit(0));
  root.mass = mu.total_mass();
  root.f = root.extent / root.r;
  root.leaf = (N == 1) || (root.extent < leaf_floor);
  lat.cubes_.push_back(root);
  lat.levels_.push_back({0});

  for (int k = 0;; ++k) {
    std::vector<int> active;
    for (int q : lat.levels_[k])
      if (!lat.cubes_[q].leaf) active.push_back(q);
    if (active.empty()) break;
    if (k > 200) throw std::runtime_error("lattice depth runaway");

    const double u = lat.unit(k + 1);
    const double sep = 10.0 * u;

    PointGrid grid;
    grid.build(coords, N, d, u);
    std::vector<double> ballw(N, 0.0);
    {
      double u2 = u * u;
      for_chunks(N, 512, [&](std::size_t, std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
          const double* p = coords.data() + i * d;
          double m = 0;
          grid.visit_neighbors(p, [&](int a) {
            const double* q = coords.data() + static_cast<std::size_t>(a) * d;
            double dd = 0;
            for (int kk = 0; kk < d; ++kk) {
              double t = p[kk] - q[kk];
              dd += t * t;
            }
            if (dd <= u2) m += mu.weight(a);
          });
          ballw[i] = m;
        }
      });
    }

    SepGrid centers;
    centers.init(&coords, d, sep);
    std::vector<int> center_atom;                   // creation order
    std::vector<std::vector<int>> parent_centers(lat.cubes_.size());
    std::vector<char> is_center(N, 0);

    auto add_center = [&](int atom, int parent) {
      int ord = static_cast<int>(center_atom.size());
      center_atom.push_back(atom);
      parent_centers[parent].push_back(ord);
      is_center[atom] = 1;
      centers.insert(atom);
      return ord;
    };

    // (a) one seed per parent: best ball weight, lowest index on ties,
    // respecting separation when possible.
    for (int q : active) {
      int best_ok = -1, best_any = -1;
      for (int a : lat.atoms(q)) {
        if (best_any < 0 || ballw[a] > ballw[best_any] ||
            (ballw[a] == ballw[best_any] && a < best_any))
          best_any = a;
      }
      // Second pass restricted to admissible atoms; separate passes keep the
      // unconstrained argmax available as the fallback.
      for (int a : lat.atoms(q)) {
        if (best_ok >= 0 && (ballw[a] < ballw[best_ok] ||
                             (ballw[a] == ballw[best_ok] && a > best_ok)))
          continue;
        if (!centers.admissible(coords.data() + static_cast<std::size_t>(a) * d))
          continue;
        best_ok = a;
      }
      if (best_ok < 0) {
        best_ok = best_any;
        ++lat.separation_fallbacks_;
      }
      add_center(best_ok, q);
    }

    // (b) global greedy extras in descending ball-weight order.
    {
      std::vector<int> cand;
      for (int q : active)
        for (int a : lat.atoms(q)) cand.push_back(a);
      std::sort(cand.begin(), cand.end(), [&](int a, int b) {
        if (ballw[a] != ballw[b]) return ballw[a] > ballw[b];
        return a < b;
      });
      std::vector<int> parent_of_atom(N, -1);
      for (int q : active)
        for (int a : lat.atoms(q)) parent_of_atom[a] = q;
      for (int a : cand) {
        if (is_center[a]) continue;
        if (centers.admissible(coords.data() + static_cast<std::size_t>(a) * d))
          add_center(a, parent_of_atom[a]);
      }
    }

    // (c) assign each atom to the nearest center of its own parent,
    // (d) clamp radii and cut the new cubes.
    std::vector<int> new_level;
    std::vector<int> new_order(lat.order_);
    for (int q : active) {
      const std::size_t par_begin = lat.cubes_[q].begin;
      const std::size_t par_end = lat.cubes_[q].end;
      const std::vector<int>& clist = parent_centers[q];
      std::size_t cnt = par_end - par_begin;
      std::vector<int> assign(cnt, 0);
      std::vector<std::size_t> sizes(clist.size(), 0);
      for (std::size_t t = 0; t < cnt; ++t) {
        int a = lat.order_[par_begin + t];
        const double* p = coords.data() + static_cast<std::size_t>(a) * d;
        int bestc = 0;
        double bestd = kHuge;
        for (std::size_t c = 0; c < clist.size(); ++c) {
          const double* pc =
              coords.data() +
              static_cast<std::size_t>(center_atom[clist[c]]) * d;
          double dd = 0;
          for (int kk = 0; kk < d; ++kk) {
            double tt = p[kk] - pc[kk];
            dd += tt * tt;
          }
          if (dd < bestd) {
            bestd = dd;
            bestc = static_cast<int>(c);
          }
        }
        assign[t] = bestc;
        ++sizes[bestc];
      }
      std::vector<std::size_t> offs(clist.size(), 0);
      std::size_t run = par_begin;
      for (std::size_t c = 0; c < clist.size(); ++c) {
        offs[c] = run;
        run += sizes[c];
      }
      std::vector<std::size_t> fill(offs);
      for (std::size_t t = 0; t < cnt; ++t)
        new_order[fill[assign[t]]++] = lat.order_[par_begin + t];
      for (std::size_t c = 0; c < clist.size(); ++c) {
        if (sizes[c] == 0) continue;  // center atoms always land in their own cell
        Cube cube;
        cube.id = static_cast<int>(lat.cubes_.size());
        cube.level = k + 1;
        cube.parent = q;
        cube.begin = offs[c];
        cube.end = offs[c] + sizes[c];
        cube.center_atom = center_atom[clist[c]];
        const double* pc =
            coords.data() + static_cast<std::size_t>(cube.center_atom) * d;
        double ext = 0, mass = 0;
        for (std::size_t t = cube.begin; t < cube.end; ++t) {
          int a = new_order[t];
          const double* p = coords.data() + static_cast<std::size_t>(a) * d;
          double dd = 0;
          for (int kk = 0; kk < d; ++kk) {
            double tt = p[kk] - pc[kk];
            dd += tt * tt;
          }
          ext = std::max(ext, dd);
          mass += mu.weight(a);
        }
        cube.extent = std::sqrt(ext);
        cube.r = std::clamp(cube.extent, u, params.C0 * u);
        cube.f = cube.extent / cube.r;
        cube.mass = mass;
        cube.leaf = (sizes[c] == 1) || (cube.extent < leaf_floor);
        new_level.push_back(cube.id);
        lat.cubes_.push_back(std::move(cube));
      }
    }
    lat.order_.swap(new_order);
    for (int id : new_level)
      lat.cubes_[lat.cubes_[id].parent].children.push_back(id);
    lat.levels_.push_back(std::move(new_level));
  }

  lat.cube_of_atom_.assign(N, -1);
  for (const Cube& c : lat.cubes_)
    if (c.leaf)
      for (std::size_t t = c.begin; t < c.end; ++t)
        lat.cube_of_atom_[lat.order_[t]] = c.id;
  return lat;
}

double Lattice::cube_dist(std::span<const double> x, int q, double cutoff) const {
  const Cube& c = cubes_[q];
  double best = kHuge;
  for (std::size_t t = c.begin; t < c.end; ++t) {
    double dd = dist(x, mu_->point(order_[t]));
    if (dd < best) {
      best = dd;
      if (best <= cutoff) return best;
    }
  }
  return best;
}

std::vector<int> Lattice::lambda_members(int q, double lambda) const {
  const Cube& c = cubes_[q];
  double thr = lambda * ell(q);
  auto xq = center(q);
  std::vector<int> out;
  for (int p : levels_[c.level]) {
    const Cube& cp = cubes_[p];
    double dc = dist(xq, mu_->point(cp.center_atom));
    if (dc - cp.extent > thr) continue;
    if (cube_dist(xq, p, thr) <= thr) out.push_back(p);
  }
  return out;
}

std::vector<int> Lattice::descendants_of(const std::vector<int>& members) const {
  std::vector<int> out, stack(members);
  std::reverse(stack.begin(), stack.end());
  while (!stack.empty()) {
    int q = stack.back();
    stack.pop_back();
    out.push_back(q);
    const Cube& c = cubes_[q];
    for (auto it = c.children.rbegin(); it != c.children.rend(); ++it)
      stack.push_back(*it);
  }
  return out;
}

double Lattice::mass_of(const std::vector<int>& cubes) const {
  double m = 0;
  for (int q : cubes) m += cubes_[q].mass;
  return m;
}

double Lattice::boundary_mass(int q, int l) const {
  if (l < 0) throw ValidationError("boundary level l must be >= 0");
  const Cube& c = cubes_[q];
  double t = unit(c.level + l);
  double cap = 90.0 * c.r;
  auto xq = center(q);
  std::vector<char> in_q(mu_->size(), 0);
  for (std::size_t s = c.begin; s < c.end; ++s) in_q[order_[s]] = 1;
  double m = 0;
  for (std::size_t i = 0; i < mu_->size(); ++i) {
    auto p = mu_->point(i);
    if (in_q[i]) {
      // inner collar: close to some atom outside Q
      double bd = kHuge;
      for (std::size_t j = 0; j < mu_->size(); ++j) {
        if (in_q[j]) continue;
        bd = std::min(bd, dist(p, mu_->point(j)));
        if (bd <= t) break;
      }
      if (bd <= t) m += mu_->weight(i);
    } else {
      if (dist(p, xq) > cap) continue;
      if (cube_dist(p, q, t) <= t) m += mu_->weight(i);
    }
  }
  return m;
}

const std::vector<char>& Lattice::db_flags() const {
  if (!db_flags_.empty()) return db_flags_;
  db_flags_.assign(cubes_.size(), 0);
  std::size_t nc = cubes_.size();
  for_chunks(nc, 64, [&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t q = lo; q < hi; ++q) {
      const Cube& c = cubes_[q];
      auto x = mu_->point(c.center_atom);
      double r1 = c.r * c.r, r100 = (100.0 * c.r) * (100.0 * c.r);
      double m1 = 0, m100 = 0;
      for (std::size_t i = 0; i < mu_->size(); ++i) {
        double dd = dist2(x, mu_->point(i));
        if (dd <= r1) m1 += mu_->weight(i);
        if (dd <= r100) m100 += mu_->weight(i);
      }
      db_flags_[q] = (m100 <= params_.C0 * m1) ? 1 : 0;
    }
  });
  return db_flags_;
}

void Lattice::export_json(std::ostream& out) const {
  const std::vector<char>& db = db_flags();
  // Iterative DFS printing the nested children arrays.
  struct Frame {
    int q;
    std::size_t next_child;
  };
  std::vector<Frame> stack{{0, 0}};
  auto open = [&](int q) {
    const Cube& c = cubes_[q];
    out << "{\"id\":" << c.id << ",\"k\":" << c.level << ",\"center\":[";
    auto p = mu_->point(c.center_atom);
    for (int k = 0; k < mu_->dim(); ++k) {
      if (k) out << ",";
      out << fmt_g17(p[k]);
    }
    out << "],\"r\":" << fmt_g17(c.r) << ",\"ell\":" << fmt_g17(ell(q))
        << ",\"mass\":" << fmt_g17(c.mass) << ",\"db\":" << (db[q] ? "true" : "false")
        << ",\"f\":" << fmt_g17(c.f) << ",\"children\":[";
  };
  open(0);
  while (!stack.empty()) {
    Frame& fr = stack.back();
    const Cube& c = cubes_[fr.q];
    if (fr.next_child < c.children.size()) {
      int ch = c.children[fr.next_child++];
      if (fr.next_child > 1) out << ",";
      open(ch);
      stack.push_back({ch, 0});
    } else {
      out << "]}";
      stack.pop_back();
    }
  }
  out << "\n";
}

LatticeCheck check_lattice(const Lattice& lat) {
  LatticeCheck chk;
  chk.separation_fallbacks = lat.separation_fallbacks();
  const DiscreteMeasure& mu = lat.mu();
  std::size_t N = mu.size();

  // Partition and nesting, walked level by level.
  std::vector<int> cur(N, lat.root());
  for (int k = 1; k < lat.num_levels(); ++k) {
    std::vector<int> nxt(N, -1);
    std::vector<int> seen(N, 0);
    for (int q : lat.level(k)) {
      const Cube& c = lat.cube(q);
      for (int a : lat.atoms(q)) {
        if (cur[a] != c.parent) chk.nesting = false;
        if (seen[a]++) chk.partition = false;
        nxt[a] = q;
      }
    }
    for (std::size_t a = 0; a < N; ++a) {
      bool expected = !lat.cube(cur[a]).leaf;
      if (expected != (nxt[a] >= 0)) chk.partition = false;
      if (nxt[a] >= 0) cur[a] = nxt[a];
    }
  }

  for (int k = 0; k < lat.num_levels(); ++k) {
    double u = lat.unit(k);
    double sep2 = (10.0 * u) * (10.0 * u);
    const std::vector<int>& lv = lat.level(k);
    for (std::size_t i = 0; i < lv.size(); ++i) {
      const Cube& ci = lat.cube(lv[i]);
      if (!(ci.r >= u && ci.r <= lat.C0() * u)) chk.radius_range = false;
      for (std::size_t j = i + 1; j < lv.size(); ++j) {
        const Cube& cj = lat.cube(lv[j]);
        if (dist2(mu.point(ci.center_atom), mu.point(cj.center_atom)) < sep2)
          chk.separation = false;
      }
    }
  }

  for (int q = 0; q < lat.size(); ++q) {
    const Cube& c = lat.cube(q);
    if (!c.children.empty()) {
      double m = 0;
      for (int ch : c.children) m += lat.cube(ch).mass;
      if (std::abs(m - c.mass) > 1e-12 * c.mass) chk.mass_additive = false;
    }
    if (c.f > 28.0) ++chk.containment_factor_violations;
  }

  // E inside B(Q) should lie in Q; diagnostic under the lite construction.
  std::vector<char> member(N, 0);
  for (int q = 0; q < lat.size(); ++q) {
    const Cube& c = lat.cube(q);
    for (int a : lat.atoms(q)) member[a] = 1;
    auto x = mu.point(c.center_atom);
    double r2 = c.r * c.r;
    for (std::size_t i = 0; i < N; ++i)
      if (!member[i] && dist2(x, mu.point(i)) <= r2)
        ++chk.ball_containment_violations;
    for (int a : lat.atoms(q)) member[a] = 0;
  }
  return chk;
}

}  // namespace betawolff
