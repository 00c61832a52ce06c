#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "betawolff/common.hpp"
#include "betawolff/lattice.hpp"
#include "betawolff/measure.hpp"
#include "betawolff/riesz.hpp"

using namespace betawolff;

namespace {

DiscreteMeasure random_cloud(Rng& rng, std::size_t N, double wlo = 0.5) {
  std::vector<double> coords, weights;
  for (std::size_t i = 0; i < N; ++i) {
    coords.push_back(rng.u01());
    coords.push_back(rng.u01());
    weights.push_back(wlo + rng.u01());
  }
  return DiscreteMeasure::from_atoms(1, std::move(coords), std::move(weights));
}

double norm2(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("kernel values, antisymmetry, and magnitude") {
  std::vector<double> x{1.0, 0.0}, y{0.0, 0.0};
  auto k = riesz_kernel(x, y, 1);
  CHECK(k[0] == 1.0);
  CHECK(k[1] == 0.0);

  std::vector<double> a{2.0, 0.0, 0.0}, b{0.0, 0.0, 0.0};
  auto k3 = riesz_kernel(a, b, 2);
  CHECK(k3[0] == 0.25);
  CHECK(k3[1] == 0.0);
  CHECK(k3[2] == 0.0);

  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> p{rng.u01(), rng.u01()}, q{rng.u01(), rng.u01()};
    auto kp = riesz_kernel(p, q, 1);
    auto kq = riesz_kernel(q, p, 1);
    CHECK(kp[0] == -kq[0]);
    CHECK(kp[1] == -kq[1]);
    double d = dist(std::span<const double>(p), std::span<const double>(q));
    CHECK(norm2(kp) == doctest::Approx(1.0 / d).epsilon(1e-13));
  }
  CHECK_THROWS_AS(riesz_kernel(x, x, 1), ValidationError);
}

TEST_CASE("truncated field honors the strict cutoff") {
  auto mu = DiscreteMeasure::from_atoms(1, {0.0, 0.0}, {1.0});
  std::vector<double> x{2.0, 0.0};
  auto f = riesz_truncated(mu, x, 1.0);
  CHECK(f[0] == 0.5);
  CHECK(f[1] == 0.0);
  auto cut = riesz_truncated(mu, x, 2.0);
  CHECK(cut[0] == 0.0);
  CHECK(cut[1] == 0.0);
  auto just = riesz_truncated(mu, x, std::nextafter(2.0, 0.0));
  CHECK(just[0] == 0.5);
}

TEST_CASE("truncated field of a symmetric pair") {
  auto mu = DiscreteMeasure::from_atoms(1, {1.0, 0.0, -1.0, 0.0}, {1.0, 1.0});
  std::vector<double> x{0.0, 1.0};
  auto f = riesz_truncated(mu, x, 0.5);
  CHECK(f[0] == doctest::Approx(0.0));
  CHECK(f[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(riesz_truncated(mu, x, 0.0), ValidationError);
}

TEST_CASE("truncated field is piecewise constant between distances") {
  auto mu = DiscreteMeasure::from_atoms(
      1, {1.0, 0.0, 2.0, 0.0, 3.0, 0.0}, {1.0, 2.0, 3.0});
  std::vector<double> x{0.0, 0.0};
  auto a = riesz_truncated(mu, x, 1.0);
  auto b = riesz_truncated(mu, x, 1.5);
  auto c = riesz_truncated(mu, x, std::nextafter(2.0, 3.0));
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("pv field excludes the atom location only") {
  auto pair = DiscreteMeasure::from_atoms(1, {0.0, 0.0, 1.0, 0.0}, {1.0, 1.0});
  auto f0 = riesz_pv_discrete(pair, 0);
  auto f1 = riesz_pv_discrete(pair, 1);
  CHECK(f0[0] == -1.0);
  CHECK(f1[0] == 1.0);
  CHECK(f0[1] == 0.0);

  // A duplicate at the same location is invisible to the pv field.
  auto dup = DiscreteMeasure::from_atoms(
      1, {0.0, 0.0, 0.0, 0.0, 2.0, 0.0}, {1.0, 5.0, 1.0});
  auto g = riesz_pv_discrete(dup, 0);
  CHECK(g[0] == -0.5);
  CHECK(g[1] == 0.0);

  Rng rng(3);
  auto mu = random_cloud(rng, 40);
  auto field = riesz_pv_field(mu);
  for (std::size_t i = 0; i < mu.size(); i += 7) {
    auto fi = riesz_pv_discrete(mu, i);
    CHECK(field[i * 2] == fi[0]);
    CHECK(field[i * 2 + 1] == fi[1]);
  }
}

TEST_CASE("pv energy of the standard pair is 2") {
  auto mu = DiscreteMeasure::from_atoms(1, {0.0, 0.0, 1.0, 0.0}, {1.0, 1.0});
  CHECK(riesz_energy(mu) == 2.0);
}

TEST_CASE("pv energy scales cubically in mass") {
  auto mu = generate_segment(64, 1);
  double base = riesz_energy(mu);
  CHECK(base > 0);
  CHECK(riesz_energy(scaled(mu, 10.0)) ==
        doctest::Approx(1000.0 * base).epsilon(1e-12));
}

TEST_CASE("maximal field on hand configurations") {
  auto one = DiscreteMeasure::from_atoms(1, {3.0, 0.0}, {2.0});
  std::vector<double> x{0.0, 0.0};
  CHECK(riesz_maximal(one, x, 0.5) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(riesz_maximal(one, x, 5.0) == 0.0);

  auto sym = DiscreteMeasure::from_atoms(1, {1.0, 0.0, -1.0, 0.0}, {1.0, 1.0});
  CHECK(riesz_maximal(sym, x, 0.1) == 0.0);

  auto tie = DiscreteMeasure::from_atoms(1, {1.0, 0.0, -1.0, 0.0}, {3.0, 1.0});
  CHECK(riesz_maximal(tie, x, 0.1) == 2.0);

  auto two = DiscreteMeasure::from_atoms(1, {-1.0, 0.0, 2.0, 0.0}, {1.0, 1.0});
  CHECK(riesz_maximal(two, x, 0.5) == 0.5);
}

TEST_CASE("maximal field equals the brute-force sup over cutoffs") {
  Rng rng(41);
  auto mu = random_cloud(rng, 24);
  for (int rep = 0; rep < 6; ++rep) {
    std::vector<double> x{2.0 * rng.u01() - 0.5, 2.0 * rng.u01() - 0.5};
    double eps_min = 0.03 + 0.1 * rng.u01();
    double got = riesz_maximal(mu, x, eps_min);

    std::set<double> cands{eps_min};
    for (std::size_t i = 0; i < mu.size(); ++i) {
      double d = dist(std::span<const double>(x), mu.point(i));
      if (d >= eps_min) cands.insert(d);
    }
    double brute = 0;
    for (double e : cands)
      brute = std::max(brute, norm2(riesz_truncated(mu, x, e)));
    CHECK(got == doctest::Approx(brute).epsilon(1e-13));
    for (int s = 0; s < 40; ++s) {
      double e = eps_min + rng.u01() * 2.0;
      CHECK(got >= norm2(riesz_truncated(mu, x, e)) - 1e-12);
    }
  }
}

TEST_CASE("maximal field handles exact distance ties") {
  // Four atoms at distance 5, two closer ones breaking symmetry.
  auto mu = DiscreteMeasure::from_atoms(
      1, {3.0, 4.0, -3.0, 4.0, 3.0, -4.0, -3.0, -4.0, 1.0, 0.0, -2.0, 0.0},
      {1.0, 1.0, 1.0, 1.0, 4.0, 1.0});
  std::vector<double> x{0.0, 0.0};
  double got = riesz_maximal(mu, x, 0.5);
  std::set<double> cands{0.5, 1.0, 2.0, 5.0};
  double brute = 0;
  for (double e : cands)
    brute = std::max(brute, norm2(riesz_truncated(mu, x, e)));
  CHECK(got == doctest::Approx(brute).epsilon(1e-14));
}

TEST_CASE("zero suppression reproduces the pv field bit for bit") {
  Rng rng(8);
  auto mu = random_cloud(rng, 30);
  SuppressionProfile sp{std::vector<double>(mu.size(), 0.0)};
  validate_profile(mu, sp);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    auto a = suppressed_field(mu, mu.point(i), sp);
    auto b = riesz_pv_discrete(mu, i);
    CHECK(a == b);
  }
}

TEST_CASE("constant suppression is uniform regularization") {
  Rng rng(9);
  auto mu = random_cloud(rng, 20);
  double c = 0.2;
  SuppressionProfile sp{std::vector<double>(mu.size(), c)};
  validate_profile(mu, sp);
  std::size_t i = 4;
  auto x = mu.point(i);
  auto got = suppressed_field(mu, x, sp);
  std::vector<double> expect(2, 0.0);
  for (std::size_t j = 0; j < mu.size(); ++j) {
    double r2 = dist2(x, mu.point(j));
    if (r2 == 0) continue;
    double cc = mu.weight(j) / pow_half(r2 + c * c, mu.n() + 1);
    expect[0] += cc * (x[0] - mu.point(j)[0]);
    expect[1] += cc * (x[1] - mu.point(j)[1]);
  }
  CHECK(got[0] == doctest::Approx(expect[0]).epsilon(1e-14));
  CHECK(got[1] == doctest::Approx(expect[1]).epsilon(1e-14));
}

TEST_CASE("profile validation rejects non-Lipschitz data") {
  auto mu = DiscreteMeasure::from_atoms(1, {0.0, 0.0, 1.0, 0.0}, {1.0, 1.0});
  SuppressionProfile bad{{0.0, 2.0}};
  CHECK_THROWS_AS(validate_profile(mu, bad), ValidationError);
  SuppressionProfile good{{0.3, 0.9}};
  CHECK_NOTHROW(validate_profile(mu, good));
  SuppressionProfile neg{{-0.1, 0.0}};
  CHECK_THROWS_AS(validate_profile(mu, neg), ValidationError);
}

TEST_CASE("suppressed kernel obeys the size bound") {
  Rng rng(14);
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> x{rng.u01(), rng.u01()}, y{rng.u01(), rng.u01()};
    double px = 0.5 * rng.u01(), py = 0.5 * rng.u01();
    double r2 = dist2(std::span<const double>(x), std::span<const double>(y));
    if (r2 == 0) continue;
    auto k = suppressed_kernel(x, y, 1, px, py);
    double bound = 1.0 / pow_half(r2 + px * py, 1);
    CHECK(norm2(k) <= bound * (1 + 1e-13));
  }
}

TEST_CASE("pairwise interaction energy on hand sets") {
  auto mu = DiscreteMeasure::from_atoms(1, {0.0, 0.0, 1.0, 0.0}, {1.0, 1.0});
  bool deg = false;
  CHECK(w_energy(mu, {0, 1}, &deg) == 2.0);
  CHECK_FALSE(deg);

  CHECK(w_energy(mu, {0}, &deg) == 0.0);
  CHECK(deg);
  CHECK(w_energy(mu, {}, &deg) == 0.0);
  CHECK(deg);

  auto stacked = DiscreteMeasure::from_atoms(
      1, {0.0, 0.0, 0.0, 0.0, 9.0, 0.0}, {1.0, 1.0, 1.0});
  CHECK(w_energy(stacked, {0, 1}, &deg) == 0.0);
  CHECK(deg);
}

TEST_CASE("planar interaction energy matches its closed form") {
  // n = 1 kills the kernel distance factor, leaving mass combinatorics
  // divided by the diameter of the selected subset.
  Rng rng(23);
  auto mu = random_cloud(rng, 15);
  std::vector<int> F{1, 3, 4, 8, 12};
  double sw = 0, sw2 = 0;
  double diam = 0;
  for (int a : F) {
    sw += mu.weight(a);
    sw2 += mu.weight(a) * mu.weight(a);
    for (int b : F) diam = std::max(diam, dist(mu.point(a), mu.point(b)));
  }
  bool deg = true;
  double got = w_energy(mu, F, &deg);
  CHECK_FALSE(deg);
  CHECK(got == doctest::Approx((sw * sw - sw2) / diam).epsilon(1e-13));

  auto twice = w_energy(scaled(mu, 2.0), F);
  CHECK(twice == doctest::Approx(4.0 * got).epsilon(1e-14));
}

TEST_CASE("cotlar rows on degenerate configurations") {
  auto lone = DiscreteMeasure::from_atoms(1, {0.0, 0.0, 9.0, 9.0},
                                          {1.0, 1.0});
  auto rows = cotlar_report(lone, {0}, 0.1, 1.0);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].atom == 0);
  CHECK(rows[0].r_star > 0);

  auto pair = DiscreteMeasure::from_atoms(1, {-0.5, 0.0, 0.5, 0.0},
                                          {1.0, 1.0});
  auto prow = cotlar_report(pair, {0, 1}, 0.25, 1.0);
  REQUIRE(prow.size() == 2);
  CHECK(prow[0].r_star == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(prow[0].m_doubling == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(prow[0].ratio == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(prow[1].r_star == prow[0].r_star);
}

TEST_CASE("cotlar ratios stay stable when the segment is refined") {
  auto ratios = [](std::size_t N) {
    auto mu = generate_segment(N, 1);
    std::vector<int> sample;
    for (int s = 0; s < 64; ++s)
      sample.push_back(static_cast<int>(s * (N - 1) / 63));
    auto rows = cotlar_report(mu, sample, mu.r_min() / 2.0, 1.0);
    double mx = 0;
    for (const auto& r : rows) mx = std::max(mx, r.ratio);
    return mx;
  };
  double a = ratios(512), b = ratios(1024);
  CHECK(a > 0);
  CHECK(b > 0);
  CHECK(b / a >= 0.5);
  CHECK(b / a <= 2.0);
}

TEST_CASE("haar differences: hand case, support, and mean zero") {
  auto mu = DiscreteMeasure::from_atoms(1, {0.0, 0.0, 1.0, 0.0}, {1.0, 3.0});
  auto lat = build_lattice(mu);
  std::vector<double> f{2.0, 6.0};
  bool flat = false;
  auto d0 = haar_delta(lat, f, lat.root(), &flat);
  CHECK_FALSE(flat);
  CHECK(d0[0] == doctest::Approx(-3.0).epsilon(1e-15));
  CHECK(d0[1] == doctest::Approx(1.0).epsilon(1e-15));
  auto en = haar_energy(lat, f);
  CHECK(en[lat.root()] == doctest::Approx(12.0).epsilon(1e-14));
  auto [sum, ref] = haar_identity(lat, f);
  CHECK(sum == doctest::Approx(12.0).epsilon(1e-13));
  CHECK(ref == doctest::Approx(12.0).epsilon(1e-13));

  Rng rng(77);
  auto seg = generate_segment(128, 1);
  auto slat = build_lattice(seg);
  std::vector<double> g(seg.size());
  for (double& v : g) v = rng.u01();
  for (int q = 0; q < slat.size(); q += 11) {
    auto dq = haar_delta(slat, g, q);
    double mean = 0;
    std::set<int> inside(slat.atoms(q).begin(), slat.atoms(q).end());
    for (std::size_t i = 0; i < seg.size(); ++i) {
      mean += seg.weight(i) * dq[i];
      if (!inside.count(static_cast<int>(i))) CHECK(dq[i] == 0.0);
    }
    CHECK(std::abs(mean) <= 1e-12);
  }
}

TEST_CASE("constant functions have zero haar energy") {
  auto mu = generate_segment(100, 1);
  auto lat = build_lattice(mu);
  std::vector<double> f(mu.size(), 4.25);
  auto en = haar_energy(lat, f);
  for (double v : en) CHECK(v <= 1e-25);
  auto [sum, ref] = haar_identity(lat, f);
  CHECK(sum <= 1e-25);
  CHECK(ref <= 1e-25);
}

TEST_CASE("haar identity holds for random data") {
  Rng rng(5150);
  auto mu = generate_segment(256, 1);
  auto lat = build_lattice(mu);
  for (int rep = 0; rep < 3; ++rep) {
    std::vector<double> f(mu.size());
    for (double& v : f) v = 2.0 * rng.u01() - 1.0;
    auto [sum, ref] = haar_identity(lat, f);
    CHECK(sum == doctest::Approx(ref).epsilon(1e-11));
  }
}

TEST_CASE("haar projections at different cubes are orthogonal") {
  Rng rng(31);
  auto mu = generate_segment(64, 1);
  auto lat = build_lattice(mu);
  std::vector<double> f(mu.size());
  for (double& v : f) v = rng.u01();
  std::vector<int> qs;
  for (int q = 0; q < lat.size() && qs.size() < 6; q += 3)
    if (!lat.cube(q).leaf) qs.push_back(q);
  for (std::size_t a = 0; a < qs.size(); ++a) {
    auto da = haar_delta(lat, f, qs[a]);
    for (std::size_t b = a + 1; b < qs.size(); ++b) {
      auto db = haar_delta(lat, f, qs[b]);
      double ip = 0;
      for (std::size_t i = 0; i < mu.size(); ++i)
        ip += mu.weight(i) * da[i] * db[i];
      CHECK(std::abs(ip) <= 1e-12);
    }
  }
}

TEST_CASE("fully opened treecode reproduces the direct field") {
  auto mu = generate_segment(512, 1);
  auto lat = build_lattice(mu);
  auto tree = riesz_field_tree(mu, lat, 0.0, 1e-9);
  auto direct = riesz_pv_field(mu);
  double mx = 0, scale = 0;
  for (std::size_t t = 0; t < tree.size(); ++t) {
    mx = std::max(mx, std::abs(tree[t] - direct[t]));
    scale = std::max(scale, std::abs(direct[t]));
  }
  CHECK(mx <= 1e-13 * scale);
}

TEST_CASE("treecode certification on a mid-size segment") {
  auto mu = generate_segment(2048, 1);
  auto lat = build_lattice(mu);
  auto rep = treecode_certify(mu, lat, 0.0, 0.3);
  CHECK(rep.rel_dev < 1e-2);
  CHECK(rep.tree_interactions < rep.direct_interactions);
  CHECK(rep.speedup_model ==
        doctest::Approx(static_cast<double>(rep.direct_interactions) /
                        static_cast<double>(rep.tree_interactions)));
  CHECK(rep.max_abs_dev >= 0);
}

TEST_CASE("treecode respects a positive truncation radius") {
  auto mu = generate_segment(512, 1);
  auto lat = build_lattice(mu);
  double eps = 0.05;
  auto tree = riesz_field_tree(mu, lat, eps, 0.3);
  double scale = 0, mx = 0;
  std::vector<double> direct(mu.size() * 2);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    auto t = riesz_truncated(mu, mu.point(i), eps);
    direct[2 * i] = t[0];
    direct[2 * i + 1] = t[1];
  }
  for (std::size_t t = 0; t < tree.size(); ++t) {
    mx = std::max(mx, std::abs(tree[t] - direct[t]));
    scale = std::max(scale, std::abs(direct[t]));
  }
  CHECK(mx <= 2e-2 * scale);
}

TEST_CASE("field csv includes a norm column per atom") {
  auto mu = generate_segment(16, 1);
  auto field = riesz_pv_field(mu);
  std::ostringstream os;
  write_field_csv(mu, field, os);
  std::istringstream is(os.str());
  std::string line;
  REQUIRE(std::getline(is, line));
  CHECK(line.find("norm") != std::string::npos);
  int rows = 0;
  while (std::getline(is, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 16);
}
