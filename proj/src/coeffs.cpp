#include "betawolff/coeffs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <Eigen/Dense>

namespace betawolff {

double theta(const DiscreteMeasure& mu, std::span<const double> x, double r) {
  if (!(r > 0)) throw ValidationError("theta needs r > 0");
  Ball b{{x.begin(), x.end()}, r};
  return ball_mass(mu, b) / ipow(r, mu.n());
}

double scatter_min_form(int d, double m, const double* M1, const double* M2,
                        std::vector<double>* normal) {
  Eigen::MatrixXd S(d, d);
  for (int i = 0, t = 0; i < d; ++i)
    for (int j = i; j < d; ++j, ++t) {
      double v = M2[t] - M1[i] * M1[j] / m;
      S(i, j) = v;
      S(j, i) = v;
    }
  Eigen::VectorXd v(d);
  if (d == 2) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es;
    es.computeDirect(S);
    v = es.eigenvectors().col(0);
  } else if (d == 3) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
    es.computeDirect(S);
    v = es.eigenvectors().col(0);
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    v = es.eigenvectors().col(0);
  }
  if (normal) normal->assign(v.data(), v.data() + d);
  double q = v.dot(S * v);
  return q > 0 ? q : 0.0;
}

Beta2Result beta2(const DiscreteMeasure& mu, const Ball& ball) {
  if (!(ball.radius > 0)) throw ValidationError("beta2 needs r > 0");
  if (ball.center.size() != static_cast<std::size_t>(mu.dim()))
    throw ValidationError("ball dimension does not match measure");
  const int d = mu.dim();
  const double r2 = ball.radius * ball.radius;
  std::span<const double> c{ball.center.data(), ball.center.size()};

  Beta2Result res;
  res.centroid.assign(d, 0.0);
  double m = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    auto p = mu.point(i);
    if (dist2(c, p) > r2) continue;
    ++count;
    m += mu.weight(i);
    for (int k = 0; k < d; ++k) res.centroid[k] += mu.weight(i) * p[k];
  }
  if (count < 2) {
    res.degenerate = true;
    res.normal.assign(d, 0.0);
    if (count == 1)
      for (int k = 0; k < d; ++k) res.centroid[k] /= m;
    return res;
  }
  for (int k = 0; k < d; ++k) res.centroid[k] /= m;

  // Second pass about the centroid; moments about the exact mean make
  // scatter_min_form's centering correction vanish.
  const int dd2 = d * (d + 1) / 2;
  std::vector<double> M1(d, 0.0), M2(dd2, 0.0), rel(d);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    auto p = mu.point(i);
    if (dist2(c, p) > r2) continue;
    for (int k = 0; k < d; ++k) rel[k] = p[k] - res.centroid[k];
    double w = mu.weight(i);
    for (int a = 0, t = 0; a < d; ++a) {
      M1[a] += w * rel[a];
      for (int b = a; b < d; ++b, ++t) M2[t] += w * rel[a] * rel[b];
    }
  }
  double form = scatter_min_form(d, m, M1.data(), M2.data(), &res.normal);
  res.beta_sq = form / ipow(ball.radius, mu.n() + 2);
  res.beta = std::sqrt(res.beta_sq);
  return res;
}

std::vector<double> radius_grid(double diam, double r_min, double ratio) {
  if (!(ratio >= 2)) throw ValidationError("grid ratio must be >= 2");
  if (!(r_min > 0)) throw ValidationError("radius grid needs r_min > 0");
  if (!(diam >= r_min)) throw ValidationError("radius grid needs diam >= r_min");
  std::vector<double> radii;
  for (int j = 0;; ++j) {
    double r = diam * ipow(ratio, -j);
    if (r < r_min) break;
    radii.push_back(r);
    if (j > 4000) throw ValidationError("radius grid too deep");
  }
  return radii;
}

void radial_moments(const DiscreteMeasure& mu, std::span<const double> x,
                    const std::vector<double>& radii, bool want_moments,
                    std::vector<double>& mass, std::vector<double>& M1,
                    std::vector<double>& M2) {
  const int d = mu.dim();
  const int dd2 = d * (d + 1) / 2;
  const int J = static_cast<int>(radii.size()) - 1;
  if (J < 0) throw ValidationError("empty radius grid");
  mass.assign(radii.size(), 0.0);
  if (want_moments) {
    M1.assign(radii.size() * static_cast<std::size_t>(d), 0.0);
    M2.assign(radii.size() * static_cast<std::size_t>(dd2), 0.0);
  } else {
    M1.clear();
    M2.clear();
  }
  const double lr = std::log(radii.size() > 1 ? radii[0] / radii[1] : 2.0);
  const double r0 = radii[0];
  std::vector<double> rel(d);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    auto p = mu.point(i);
    double dd = dist(x, p);
    // Finest grid ball still containing the atom.
    int j;
    if (dd == 0) {
      j = J;
    } else if (dd > r0) {
      continue;
    } else {
      j = static_cast<int>(std::floor(std::log(r0 / dd) / lr));
      if (j > J) j = J;
      if (j < 0) j = 0;
      while (j + 1 <= J && radii[j + 1] >= dd) ++j;
      while (j > 0 && radii[j] < dd) --j;
      if (radii[j] < dd) continue;
    }
    double w = mu.weight(i);
    mass[j] += w;
    if (want_moments) {
      for (int k = 0; k < d; ++k) rel[k] = p[k] - x[k];
      double* m1 = M1.data() + static_cast<std::size_t>(j) * d;
      double* m2 = M2.data() + static_cast<std::size_t>(j) * dd2;
      for (int a = 0, t = 0; a < d; ++a) {
        m1[a] += w * rel[a];
        for (int b = a; b < d; ++b, ++t) m2[t] += w * rel[a] * rel[b];
      }
    }
  }
  // Suffix sums: the ball at radius r_j collects every finer bucket.
  for (int j = J - 1; j >= 0; --j) {
    mass[j] += mass[j + 1];
    if (want_moments) {
      for (int k = 0; k < d; ++k)
        M1[static_cast<std::size_t>(j) * d + k] +=
            M1[static_cast<std::size_t>(j + 1) * d + k];
      for (int t = 0; t < dd2; ++t)
        M2[static_cast<std::size_t>(j) * dd2 + t] +=
            M2[static_cast<std::size_t>(j + 1) * dd2 + t];
    }
  }
}

CubeStats CubeStats::build(const Lattice& lat, bool with_beta) {
  CubeStats st;
  st.lat = &lat;
  const DiscreteMeasure& mu = lat.mu();
  const int n = mu.n();
  const int d = mu.dim();
  const int dd2 = d * (d + 1) / 2;
  const int A0 = lat.A0();
  st.C_d = 4.0 * ipow(A0, n);
  const std::size_t nc = static_cast<std::size_t>(lat.size());
  st.mass2B.assign(nc, 0.0);
  st.theta2B.assign(nc, 0.0);
  st.theta_ell.assign(nc, 0.0);
  st.Theta.assign(nc, 0.0);
  st.P.assign(nc, 0.0);
  st.bucket.assign(nc, 0);
  st.p_doubling.assign(nc, 0);
  st.has_beta = with_beta;
  if (with_beta) st.beta2sq.assign(nc, 0.0);

  const double logA0n = n * std::log(static_cast<double>(A0));
  for_chunks(nc, 32, [&](std::size_t, std::size_t lo, std::size_t hi) {
    std::vector<double> M1(d), M2(dd2), rel(d);
    for (std::size_t q = lo; q < hi; ++q) {
      const Cube& c = lat.cube(static_cast<int>(q));
      auto x = mu.point(c.center_atom);
      const double R = 56.0 * c.r;
      const double R2 = R * R;
      double m = 0;
      std::fill(M1.begin(), M1.end(), 0.0);
      std::fill(M2.begin(), M2.end(), 0.0);
      for (std::size_t i = 0; i < mu.size(); ++i) {
        auto p = mu.point(i);
        double dd = 0;
        for (int k = 0; k < d; ++k) {
          double t = p[k] - x[k];
          rel[k] = t;
          dd += t * t;
        }
        if (dd > R2) continue;
        double w = mu.weight(i);
        m += w;
        if (with_beta) {
          for (int a = 0, t = 0; a < d; ++a)
            for (int b = a; b < d; ++b, ++t) M2[t] += w * rel[a] * rel[b];
          for (int a = 0; a < d; ++a) M1[a] += w * rel[a];
        }
      }
      st.mass2B[q] = m;
      st.theta2B[q] = m / ipow(R, n);
      double ell = lat.ell(static_cast<int>(q));
      double th = m / ipow(ell, n);
      st.theta_ell[q] = th;
      int b = static_cast<int>(std::floor(std::log(th) / logA0n));
      while (ipow(static_cast<double>(A0), (b + 1) * n) <= th) ++b;
      while (ipow(static_cast<double>(A0), b * n) > th) --b;
      st.bucket[q] = b;
      st.Theta[q] = ipow(static_cast<double>(A0), b * n);
      if (with_beta && !c.leaf)
        st.beta2sq[q] =
            scatter_min_form(d, m, M1.data(), M2.data()) / ipow(R, n + 2);
    }
  });

  for (std::size_t q = 0; q < nc; ++q) {
    const double ellq = lat.ell(static_cast<int>(q));
    double sum = 0;
    for (int r = static_cast<int>(q); r >= 0; r = lat.cube(r).parent)
      sum += ellq / ipow(lat.ell(r), n + 1) * st.mass2B[r];
    st.P[q] = sum;
    st.p_doubling[q] = (sum <= st.C_d * st.theta_ell[q]) ? 1 : 0;
  }
  return st;
}

std::vector<int> hd_k(const CubeStats& st, int q, double k,
                      std::optional<double> restrict_lambda) {
  if (k < 0) throw ValidationError("hd_k needs k >= 0");
  const Lattice& lat = *st.lat;
  if (lat.cube(q).leaf) return {};
  std::vector<char> allowed;
  if (restrict_lambda) {
    auto region = lat.descendants_of(lat.lambda_members(q, *restrict_lambda));
    allowed.assign(lat.size(), 0);
    for (int p : region) allowed[p] = 1;
  }
  const int lvl = lat.cube(q).level;
  const double thr = st.bucket[q] + k - 1e-9;
  std::vector<int> out;
  // Depth-first from every cube of Q's level: first qualifying cube along a
  // branch is maximal; nothing below it can be.
  std::vector<int> stack;
  for (auto it = lat.level(lvl).rbegin(); it != lat.level(lvl).rend(); ++it)
    for (auto ch = lat.cube(*it).children.rbegin();
         ch != lat.cube(*it).children.rend(); ++ch)
      stack.push_back(*ch);
  while (!stack.empty()) {
    int p = stack.back();
    stack.pop_back();
    const Cube& cp = lat.cube(p);
    if (!cp.leaf && st.bucket[p] >= thr) {
      if (!restrict_lambda || allowed[p]) out.push_back(p);
      continue;
    }
    for (auto ch = cp.children.rbegin(); ch != cp.children.rend(); ++ch)
      stack.push_back(*ch);
  }
  return out;
}

EnergyBreakdown energies(const CubeStats& st, int q, double lambda) {
  const Lattice& lat = *st.lat;
  const int A0 = lat.A0();
  EnergyBreakdown out;
  std::vector<int> members = lat.lambda_members(q, lambda);
  out.mass_lambda = lat.mass_of(members);
  const int lvl = lat.cube(q).level;
  const int bq = st.bucket[q];

  struct Item {
    int cube;
    int blocked;  // max depth over qualifying strict ancestors below Q's level
  };
  std::vector<Item> stack;
  for (int m : members) {
    const Cube& cm = lat.cube(m);
    if (!cm.leaf) {
      double term = st.Theta[m] * st.Theta[m] * cm.mass;
      out.E += term;  // same-level members enter with ell ratio 1
    }
    for (auto it = cm.children.rbegin(); it != cm.children.rend(); ++it)
      stack.push_back({*it, std::numeric_limits<int>::min() / 2});
  }
  while (!stack.empty()) {
    Item it = stack.back();
    stack.pop_back();
    const Cube& c = lat.cube(it.cube);
    int blocked = it.blocked;
    if (!c.leaf) {
      int depth_lv = c.level - lvl;
      double ratio34 = std::pow(static_cast<double>(A0), -0.75 * depth_lv);
      double ratio12 = std::pow(static_cast<double>(A0), -0.5 * depth_lv);
      double theta2m = st.Theta[it.cube] * st.Theta[it.cube] * c.mass;
      out.E += ratio34 * theta2m;
      int dp = st.bucket[it.cube] - bq;
      for (int k = std::max(blocked + 1, 0); k <= dp; ++k) {
        out.slice34[k] += ratio34 * theta2m;
        if (k >= 1) {
          out.slice12[k] += ratio12 * theta2m;
          double len = ipow(static_cast<double>(A0), -depth_lv);
          auto cur = out.m_k.find(k);
          if (cur == out.m_k.end() || cur->second < len) out.m_k[k] = len;
        }
      }
      if (dp > blocked) blocked = dp;
    }
    for (auto ch = c.children.rbegin(); ch != c.children.rend(); ++ch)
      stack.push_back({*ch, blocked});
  }
  for (auto& [k, v] : out.slice34) out.EH += v;
  for (auto& [k, v] : out.slice12) out.Einf = std::max(out.Einf, v);
  return out;
}

double wolff_energy(const DiscreteMeasure& mu, double grid_ratio) {
  std::vector<double> radii =
      radius_grid(mu.diameter(), mu.r_min(), grid_ratio);
  const double lr = std::log(grid_ratio);
  const int n = mu.n();
  std::size_t N = mu.size();
  std::size_t nchunks = (N + 127) / 128;
  std::vector<double> partial(nchunks, 0.0);
  for_chunks(N, 128, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    std::vector<double> mass, M1, M2;
    double acc = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      radial_moments(mu, mu.point(i), radii, false, mass, M1, M2);
      double s = 0;
      for (std::size_t j = 0; j < radii.size(); ++j) {
        double th = mass[j] / ipow(radii[j], n);
        s += std::pow(radii[j], 0.75) * th * th * lr;
      }
      acc += mu.weight(i) * s;
    }
    partial[c] = acc;
  });
  double total = 0;
  for (double v : partial) total += v;
  return total;
}

void write_coeff_table_csv(const CubeStats& st, std::ostream& out,
                           double lambda) {
  const Lattice& lat = *st.lat;
  const DiscreteMeasure& mu = lat.mu();
  out << "id,k,";
  for (int k = 0; k < mu.dim(); ++k) out << "c" << k << ",";
  out << "r,ell,mass,leaf,beta2,theta2B,theta_ell,Theta,bucket,P,p_doubling,"
         "E,EH,Einf\n";
  for (int q = 0; q < lat.size(); ++q) {
    const Cube& c = lat.cube(q);
    out << q << "," << c.level << ",";
    auto p = mu.point(c.center_atom);
    for (int k = 0; k < mu.dim(); ++k) out << fmt_g17(p[k]) << ",";
    double E = 0, EH = 0, Einf = 0;
    if (!c.leaf) {
      EnergyBreakdown eb = energies(st, q, lambda);
      E = eb.E;
      EH = eb.EH;
      Einf = eb.Einf;
    }
    out << fmt_g17(c.r) << "," << fmt_g17(lat.ell(q)) << "," << fmt_g17(c.mass)
        << "," << (c.leaf ? 1 : 0) << ","
        << fmt_g17(st.has_beta && !c.leaf ? std::sqrt(st.beta2sq[q]) : 0.0) << ","
        << fmt_g17(st.theta2B[q]) << "," << fmt_g17(st.theta_ell[q]) << ","
        << fmt_g17(st.Theta[q]) << "," << st.bucket[q] << "," << fmt_g17(st.P[q])
        << "," << (st.p_doubling[q] ? 1 : 0) << "," << fmt_g17(E) << ","
        << fmt_g17(EH) << "," << fmt_g17(Einf) << "\n";
  }
}

}  // namespace betawolff
