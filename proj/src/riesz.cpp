#include "betawolff/riesz.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include "betawolff/common.hpp"

namespace betawolff {

std::vector<double> riesz_kernel(std::span<const double> x,
                                 std::span<const double> y, int n) {
  if (x.size() != y.size()) throw ValidationError("kernel dimension mismatch");
  const int d = static_cast<int>(x.size());
  double r2 = dist2(x, y);
  if (r2 == 0) throw ValidationError("riesz kernel at coincident points");
  double denom = pow_half(r2, n + 1);
  std::vector<double> out(d);
  for (int k = 0; k < d; ++k) out[k] = (x[k] - y[k]) / denom;
  return out;
}

std::vector<double> riesz_truncated(const DiscreteMeasure& mu,
                                    std::span<const double> x, double eps) {
  if (!(eps > 0)) throw ValidationError("truncation needs eps > 0");
  const int d = mu.dim();
  const double e2 = eps * eps;
  std::vector<double> out(d, 0.0);
  for (std::size_t j = 0; j < mu.size(); ++j) {
    auto p = mu.point(j);
    double r2 = dist2(x, p);
    if (r2 <= e2) continue;
    double c = mu.weight(j) / pow_half(r2, mu.n() + 1);
    for (int k = 0; k < d; ++k) out[k] += c * (x[k] - p[k]);
  }
  return out;
}

std::vector<double> riesz_pv_discrete(const DiscreteMeasure& mu,
                                      std::size_t i) {
  if (i >= mu.size()) throw ValidationError("atom index out of range");
  const int d = mu.dim();
  auto x = mu.point(i);
  std::vector<double> out(d, 0.0);
  for (std::size_t j = 0; j < mu.size(); ++j) {
    if (j == i) continue;
    auto p = mu.point(j);
    double r2 = dist2(x, p);
    if (r2 == 0) continue;
    double c = mu.weight(j) / pow_half(r2, mu.n() + 1);
    for (int k = 0; k < d; ++k) out[k] += c * (x[k] - p[k]);
  }
  return out;
}

std::vector<double> riesz_pv_field(const DiscreteMeasure& mu) {
  const int d = mu.dim();
  const std::size_t N = mu.size();
  std::vector<double> field(N * static_cast<std::size_t>(d), 0.0);
  for_chunks(N, 64, [&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      auto x = mu.point(i);
      double* out = field.data() + i * d;
      for (std::size_t j = 0; j < N; ++j) {
        if (j == i) continue;
        auto p = mu.point(j);
        double r2 = dist2(x, p);
        if (r2 == 0) continue;
        double c = mu.weight(j) / pow_half(r2, mu.n() + 1);
        for (int k = 0; k < d; ++k) out[k] += c * (x[k] - p[k]);
      }
    }
  });
  return field;
}

double riesz_energy(const DiscreteMeasure& mu) {
  const int d = mu.dim();
  const std::size_t N = mu.size();
  std::size_t nchunks = (N + 63) / 64;
  std::vector<double> partial(nchunks, 0.0);
  for_chunks(N, 64, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    std::vector<double> f(d);
    double acc = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      auto x = mu.point(i);
      std::fill(f.begin(), f.end(), 0.0);
      for (std::size_t j = 0; j < N; ++j) {
        if (j == i) continue;
        auto p = mu.point(j);
        double r2 = dist2(x, p);
        if (r2 == 0) continue;
        double cc = mu.weight(j) / pow_half(r2, mu.n() + 1);
        for (int k = 0; k < d; ++k) f[k] += cc * (x[k] - p[k]);
      }
      double s = 0;
      for (int k = 0; k < d; ++k) s += f[k] * f[k];
      acc += mu.weight(i) * s;
    }
    partial[c] = acc;
  });
  double total = 0;
  for (double v : partial) total += v;
  return total;
}

double riesz_maximal(const DiscreteMeasure& mu, std::span<const double> x,
                     double eps_min) {
  if (!(eps_min > 0)) throw ValidationError("riesz_maximal needs eps_min > 0");
  const int d = mu.dim();
  struct Entry {
    double dist;
    std::size_t atom;
  };
  std::vector<Entry> ent;
  ent.reserve(mu.size());
  for (std::size_t j = 0; j < mu.size(); ++j) {
    double r2 = dist2(x, mu.point(j));
    if (r2 == 0) continue;
    ent.push_back({std::sqrt(r2), j});
  }
  std::sort(ent.begin(), ent.end(),
            [](const Entry& a, const Entry& b) { return a.dist < b.dist; });
  std::vector<double> running(d, 0.0);
  double best = 0;
  bool eps_done = false;
  auto consider = [&]() {
    double s = 0;
    for (int k = 0; k < d; ++k) s += running[k] * running[k];
    best = std::max(best, s);
  };
  // Walk distances from the outside in; just before absorbing the atoms at
  // distance dist, the running sum equals R_eps for any eps in [prev, dist).
  for (std::size_t k = ent.size(); k-- > 0;) {
    bool group_edge = (k + 1 == ent.size()) || ent[k + 1].dist > ent[k].dist;
    if (group_edge && ent[k].dist >= eps_min) consider();
    if (!eps_done && ent[k].dist <= eps_min) {
      consider();
      eps_done = true;
    }
    auto p = mu.point(ent[k].atom);
    double r2 = ent[k].dist * ent[k].dist;
    double c = mu.weight(ent[k].atom) / pow_half(r2, mu.n() + 1);
    for (int kk = 0; kk < d; ++kk) running[kk] += c * (x[kk] - p[kk]);
  }
  if (!eps_done) consider();
  return std::sqrt(best);
}

double SuppressionProfile::at(const DiscreteMeasure& mu,
                              std::span<const double> x) const {
  if (phi.size() != mu.size())
    throw ValidationError("suppression profile size mismatch");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mu.size(); ++i)
    best = std::min(best, phi[i] + dist(x, mu.point(i)));
  return best;
}

void validate_profile(const DiscreteMeasure& mu, const SuppressionProfile& sp) {
  if (sp.phi.size() != mu.size())
    throw ValidationError("suppression profile size mismatch");
  for (double v : sp.phi)
    if (!(v >= 0) || !std::isfinite(v))
      throw ValidationError("suppression profile values must be nonnegative");
  double worst = 0;
  std::size_t wi = 0, wj = 0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::size_t j = i + 1; j < mu.size(); ++j) {
      double dd = dist(mu.point(i), mu.point(j));
      double gap = std::abs(sp.phi[i] - sp.phi[j]) - dd;
      if (gap > worst) {
        worst = gap;
        wi = i;
        wj = j;
      }
    }
  if (worst > 1e-12 * (1.0 + mu.diameter()))
    throw ValidationError("profile not 1-Lipschitz: atoms " +
                          std::to_string(wi) + "," + std::to_string(wj) +
                          " exceed by " + fmt_g17(worst));
}

std::vector<double> suppressed_kernel(std::span<const double> x,
                                      std::span<const double> y, int n,
                                      double phix, double phiy) {
  const int d = static_cast<int>(x.size());
  double r2 = dist2(x, y);
  double s = r2 + phix * phiy;
  if (s == 0) throw ValidationError("suppressed kernel at coincident points");
  double denom = pow_half(s, n + 1);
  std::vector<double> out(d);
  for (int k = 0; k < d; ++k) out[k] = (x[k] - y[k]) / denom;
  return out;
}

std::vector<double> suppressed_field(const DiscreteMeasure& mu,
                                     std::span<const double> x,
                                     const SuppressionProfile& sp) {
  const int d = mu.dim();
  double phix = sp.at(mu, x);
  std::vector<double> out(d, 0.0);
  for (std::size_t j = 0; j < mu.size(); ++j) {
    auto p = mu.point(j);
    double r2 = dist2(x, p);
    if (r2 == 0) continue;
    double c = mu.weight(j) / pow_half(r2 + phix * sp.phi[j], mu.n() + 1);
    for (int k = 0; k < d; ++k) out[k] += c * (x[k] - p[k]);
  }
  return out;
}

double w_energy(const DiscreteMeasure& mu, const std::vector<int>& F,
                bool* degenerate) {
  if (degenerate) *degenerate = false;
  for (int i : F)
    if (i < 0 || static_cast<std::size_t>(i) >= mu.size())
      throw ValidationError("w_energy index out of range");
  if (F.size() < 2) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  double diam2 = 0;
  for (std::size_t a = 0; a < F.size(); ++a)
    for (std::size_t b = a + 1; b < F.size(); ++b)
      diam2 = std::max(diam2, dist2(mu.point(F[a]), mu.point(F[b])));
  if (diam2 == 0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  double diam = std::sqrt(diam2);
  double total = 0;
  for (std::size_t a = 0; a < F.size(); ++a)
    for (std::size_t b = 0; b < F.size(); ++b) {
      if (a == b) continue;
      double r2 = dist2(mu.point(F[a]), mu.point(F[b]));
      total +=
          mu.weight(F[a]) * mu.weight(F[b]) / (diam * pow_half(r2, mu.n() - 1));
    }
  return total;
}

std::vector<CotlarRow> cotlar_report(const DiscreteMeasure& mu,
                                     const std::vector<int>& sample, double r0,
                                     double theta1) {
  if (!(r0 > 0)) throw ValidationError("cotlar_report needs r0 > 0");
  if (!(theta1 > 0)) throw ValidationError("cotlar_report needs theta1 > 0");
  const std::size_t N = mu.size();
  std::vector<double> field = riesz_pv_field(mu);
  std::vector<double> mag(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    double s = 0;
    for (int k = 0; k < mu.dim(); ++k) {
      double v = field[i * mu.dim() + k];
      s += v * v;
    }
    mag[i] = std::sqrt(s);
  }
  const double b = ipow(128.0, mu.n() + 2);

  std::vector<CotlarRow> rows;
  rows.reserve(sample.size());
  for (int ai : sample) {
    if (ai < 0 || static_cast<std::size_t>(ai) >= N)
      throw ValidationError("cotlar sample index out of range");
    auto x = mu.point(ai);
    CotlarRow row;
    row.atom = ai;
    row.r_star = riesz_maximal(mu, x, r0);

    std::vector<std::pair<double, std::size_t>> ds(N);
    for (std::size_t j = 0; j < N; ++j) ds[j] = {dist(x, mu.point(j)), j};
    std::sort(ds.begin(), ds.end());
    std::vector<double> pm(N + 1, 0.0), pf(N + 1, 0.0);
    for (std::size_t j = 0; j < N; ++j) {
      pm[j + 1] = pm[j] + mu.weight(ds[j].second);
      pf[j + 1] = pf[j] + mu.weight(ds[j].second) * mag[ds[j].second];
    }
    auto mass_at = [&](double r) {
      std::size_t idx = std::upper_bound(ds.begin(), ds.end(),
                                         std::make_pair(
                                             r, std::numeric_limits<
                                                    std::size_t>::max())) -
                        ds.begin();
      return std::pair<double, double>{pm[idx], pf[idx]};
    };
    std::vector<double> cand{r0};
    for (std::size_t j = 0; j < N; ++j) {
      if (ds[j].first > r0) cand.push_back(ds[j].first);
      if (ds[j].first / 16.0 > r0) cand.push_back(ds[j].first / 16.0);
    }
    double best = 0;
    for (double r : cand) {
      auto [m, fsum] = mass_at(r);
      if (m <= 0) continue;
      auto [m16, f16] = mass_at(16.0 * r);
      if (m16 > b * m) continue;
      best = std::max(best, fsum / m);
    }
    row.m_doubling = best;
    row.ratio = row.r_star / (row.m_doubling + theta1);
    rows.push_back(row);
  }
  return rows;
}

namespace {

double cube_mean(const Lattice& lat, const std::vector<double>& f, int q) {
  const DiscreteMeasure& mu = lat.mu();
  double ws = 0;
  for (int i : lat.atoms(q)) ws += mu.weight(i) * f[i];
  return ws / lat.cube(q).mass;
}

}  // namespace

std::vector<double> haar_delta(const Lattice& lat,
                               const std::vector<double>& f, int q,
                               bool* flat) {
  const DiscreteMeasure& mu = lat.mu();
  if (f.size() != mu.size()) throw ValidationError("haar input size mismatch");
  if (flat) *flat = false;
  std::vector<double> out(mu.size(), 0.0);
  const Cube& c = lat.cube(q);
  if (c.leaf) {
    if (flat) *flat = true;
    return out;
  }
  double mq = cube_mean(lat, f, q);
  for (int ch : c.children) {
    double ms = cube_mean(lat, f, ch);
    for (int i : lat.atoms(ch)) out[i] = ms - mq;
  }
  return out;
}

std::vector<double> haar_energy(const Lattice& lat,
                                const std::vector<double>& f) {
  const DiscreteMeasure& mu = lat.mu();
  if (f.size() != mu.size()) throw ValidationError("haar input size mismatch");
  std::vector<double> mean(lat.size(), 0.0);
  for (int q = 0; q < lat.size(); ++q) mean[q] = cube_mean(lat, f, q);
  std::vector<double> out(lat.size(), 0.0);
  for (int q = 0; q < lat.size(); ++q) {
    const Cube& c = lat.cube(q);
    if (c.leaf) continue;
    double e = 0;
    for (int ch : c.children) {
      double dm = mean[ch] - mean[q];
      e += lat.cube(ch).mass * dm * dm;
    }
    out[q] = e;
  }
  return out;
}

std::pair<double, double> haar_identity(const Lattice& lat,
                                        const std::vector<double>& f) {
  const DiscreteMeasure& mu = lat.mu();
  std::vector<double> per = haar_energy(lat, f);
  double lhs = 0;
  for (double v : per) lhs += v;
  double mroot = cube_mean(lat, f, lat.root());
  double rhs = 0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    double dv = f[i] - mroot;
    rhs += mu.weight(i) * dv * dv;
  }
  return {lhs, rhs};
}

namespace {

struct ClusterData {
  std::vector<double> centroid;  // nc x d
  std::vector<double> spread;    // nc
};

ClusterData build_clusters(const DiscreteMeasure& mu, const Lattice& lat) {
  const int d = mu.dim();
  ClusterData cd;
  cd.centroid.assign(static_cast<std::size_t>(lat.size()) * d, 0.0);
  cd.spread.assign(lat.size(), 0.0);
  for (int q = 0; q < lat.size(); ++q) {
    double* c = cd.centroid.data() + static_cast<std::size_t>(q) * d;
    for (int i : lat.atoms(q)) {
      auto p = mu.point(i);
      for (int k = 0; k < d; ++k) c[k] += mu.weight(i) * p[k];
    }
    for (int k = 0; k < d; ++k) c[k] /= lat.cube(q).mass;
    double s2 = 0;
    for (int i : lat.atoms(q))
      s2 = std::max(s2, dist2({c, static_cast<std::size_t>(d)}, mu.point(i)));
    cd.spread[q] = std::sqrt(s2);
  }
  return cd;
}

}  // namespace

std::vector<double> riesz_field_tree(const DiscreteMeasure& mu,
                                     const Lattice& lat, double eps,
                                     double theta_mac) {
  if (!(theta_mac > 0 && theta_mac < 1))
    throw ValidationError("theta_mac must lie in (0,1)");
  if (!(eps >= 0)) throw ValidationError("eps must be nonnegative");
  const int d = mu.dim();
  const std::size_t N = mu.size();
  ClusterData cd = build_clusters(mu, lat);
  std::vector<double> field(N * static_cast<std::size_t>(d), 0.0);
  const double e2 = eps * eps;
  for_chunks(N, 64, [&](std::size_t, std::size_t lo, std::size_t hi) {
    std::vector<int> stack;
    for (std::size_t i = lo; i < hi; ++i) {
      auto x = mu.point(i);
      double* out = field.data() + i * d;
      stack.clear();
      stack.push_back(lat.root());
      while (!stack.empty()) {
        int q = stack.back();
        stack.pop_back();
        const Cube& c = lat.cube(q);
        const double* cen = cd.centroid.data() + static_cast<std::size_t>(q) * d;
        std::span<const double> cs{cen, static_cast<std::size_t>(d)};
        double D = dist(x, cs);
        double s = cd.spread[q];
        if (s > 0 && D - s > eps && s <= theta_mac * D) {
          double cc = c.mass / pow_half(D * D, mu.n() + 1);
          for (int k = 0; k < d; ++k) out[k] += cc * (x[k] - cen[k]);
          continue;
        }
        if (c.leaf) {
          for (int j : lat.atoms(q)) {
            auto p = mu.point(j);
            double r2 = dist2(x, p);
            if (r2 <= e2 || r2 == 0) continue;
            double cc = mu.weight(j) / pow_half(r2, mu.n() + 1);
            for (int k = 0; k < d; ++k) out[k] += cc * (x[k] - p[k]);
          }
          continue;
        }
        for (auto ch = c.children.rbegin(); ch != c.children.rend(); ++ch)
          stack.push_back(*ch);
      }
    }
  });
  return field;
}

TreecodeReport treecode_certify(const DiscreteMeasure& mu, const Lattice& lat,
                                double eps, double theta_mac) {
  const int d = mu.dim();
  const std::size_t N = mu.size();
  TreecodeReport rep;

  auto t0 = std::chrono::steady_clock::now();
  std::vector<double> tree = riesz_field_tree(mu, lat, eps, theta_mac);
  auto t1 = std::chrono::steady_clock::now();

  std::vector<double> direct;
  if (eps == 0) {
    direct = riesz_pv_field(mu);
  } else {
    direct.assign(N * static_cast<std::size_t>(d), 0.0);
    for_chunks(N, 64, [&](std::size_t, std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        auto v = riesz_truncated(mu, mu.point(i), eps);
        std::copy(v.begin(), v.end(), direct.begin() + i * d);
      }
    });
  }
  auto t2 = std::chrono::steady_clock::now();

  rep.tree_seconds = std::chrono::duration<double>(t1 - t0).count();
  rep.direct_seconds = std::chrono::duration<double>(t2 - t1).count();

  double max_direct = 0;
  for (std::size_t i = 0; i < N; ++i) {
    double dv2 = 0, mag2 = 0;
    for (int k = 0; k < d; ++k) {
      double delta = tree[i * d + k] - direct[i * d + k];
      dv2 += delta * delta;
      double m = direct[i * d + k];
      mag2 += m * m;
    }
    rep.max_abs_dev = std::max(rep.max_abs_dev, std::sqrt(dv2));
    max_direct = std::max(max_direct, std::sqrt(mag2));
  }
  rep.rel_dev = max_direct > 0 ? rep.max_abs_dev / max_direct : 0.0;

  // Interaction counts replayed serially; cheap relative to the field passes.
  ClusterData cd = build_clusters(mu, lat);
  long long tree_ops = 0;
  {
    std::vector<int> stack;
    for (std::size_t i = 0; i < N; ++i) {
      auto x = mu.point(i);
      stack.clear();
      stack.push_back(lat.root());
      while (!stack.empty()) {
        int q = stack.back();
        stack.pop_back();
        const Cube& c = lat.cube(q);
        const double* cen = cd.centroid.data() + static_cast<std::size_t>(q) * d;
        double D = dist(x, {cen, static_cast<std::size_t>(d)});
        double s = cd.spread[q];
        if (s > 0 && D - s > eps && s <= theta_mac * D) {
          ++tree_ops;
          continue;
        }
        if (c.leaf) {
          tree_ops += static_cast<long long>(lat.atoms(q).size());
          continue;
        }
        for (int ch : c.children) stack.push_back(ch);
      }
    }
  }
  rep.tree_interactions = tree_ops;
  rep.direct_interactions = static_cast<long long>(N) * static_cast<long long>(N);
  rep.speedup_model =
      tree_ops > 0 ? static_cast<double>(rep.direct_interactions) / tree_ops : 0;
  return rep;
}

void write_field_csv(const DiscreteMeasure& mu, const std::vector<double>& field,
                     std::ostream& out) {
  const int d = mu.dim();
  if (field.size() != mu.size() * static_cast<std::size_t>(d))
    throw ValidationError("field size mismatch");
  out << "id,";
  for (int k = 0; k < d; ++k) out << "f" << k << ",";
  out << "norm\n";
  for (std::size_t i = 0; i < mu.size(); ++i) {
    out << i << ",";
    double s = 0;
    for (int k = 0; k < d; ++k) {
      double v = field[i * d + k];
      s += v * v;
      out << fmt_g17(v) << ",";
    }
    out << fmt_g17(std::sqrt(s)) << "\n";
  }
}

}  // namespace betawolff
