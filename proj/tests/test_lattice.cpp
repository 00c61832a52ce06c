#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <limits>
#include <set>
#include <sstream>
#include <vector>

#include "betawolff/common.hpp"
#include "betawolff/lattice.hpp"
#include "betawolff/measure.hpp"

#include "json.hpp"

using namespace betawolff;

namespace {

std::vector<DiscreteMeasure> battery() {
  std::vector<DiscreteMeasure> out;
  out.push_back(generate_segment(256, 1));
  out.push_back(generate_circle(128, 1));
  out.push_back(generate_lipschitz_graph(200, 1.0, 1));
  out.push_back(generate_cantor4(4));
  return out;
}

}  // namespace

TEST_CASE("guaranteed invariants hold across the battery") {
  for (const auto& mu : battery()) {
    auto lat = build_lattice(mu);
    auto chk = check_lattice(lat);
    CHECK(chk.partition);
    CHECK(chk.nesting);
    CHECK(chk.separation);
    CHECK(chk.radius_range);
    CHECK(chk.mass_additive);
  }
}

TEST_CASE("root covers everything and levels partition the atoms") {
  auto mu = generate_cantor4(4);
  auto lat = build_lattice(mu);
  const Cube& rt = lat.cube(lat.root());
  CHECK(rt.level == 0);
  CHECK(rt.parent == -1);
  CHECK(lat.atoms(lat.root()).size() == mu.size());

  for (int k = 0; k < lat.num_levels(); ++k) {
    std::set<int> seen;
    std::size_t total = 0;
    for (int q : lat.level(k)) {
      CHECK(lat.cube(q).level == k);
      for (int a : lat.atoms(q)) {
        CHECK(seen.insert(a).second);
        ++total;
      }
    }
    // Every atom appears exactly once per level: non-leaf cells persist via
    // their children, leaves keep their slice through deeper levels only in
    // the tree sense, so only check the top level exhaustively plus that
    // deeper levels never duplicate.
    if (k == 0) CHECK(total == mu.size());
  }
}

TEST_CASE("children tile their parent slice exactly") {
  auto mu = generate_segment(256, 1);
  auto lat = build_lattice(mu);
  for (int q = 0; q < lat.size(); ++q) {
    const Cube& c = lat.cube(q);
    if (c.leaf) {
      CHECK(c.children.empty());
      continue;
    }
    REQUIRE_FALSE(c.children.empty());
    std::size_t covered = 0;
    double child_mass = 0;
    for (int ch : c.children) {
      const Cube& cc = lat.cube(ch);
      CHECK(cc.parent == q);
      CHECK(cc.level == c.level + 1);
      CHECK(cc.begin >= c.begin);
      CHECK(cc.end <= c.end);
      covered += cc.end - cc.begin;
      child_mass += cc.mass;
    }
    CHECK(covered == c.end - c.begin);
    CHECK(child_mass == doctest::Approx(c.mass).epsilon(1e-13));
  }
}

TEST_CASE("same-level centers are 10u separated and radii are clamped") {
  auto mu = generate_cantor4(4);
  auto lat = build_lattice(mu);
  for (int k = 0; k < lat.num_levels(); ++k) {
    double u = lat.unit(k);
    const auto& ids = lat.level(k);
    for (std::size_t a = 0; a < ids.size(); ++a) {
      const Cube& ca = lat.cube(ids[a]);
      CHECK(ca.r >= u * (1 - 1e-12));
      CHECK(ca.r <= lat.C0() * u * (1 + 1e-12));
      for (std::size_t b = a + 1; b < ids.size(); ++b) {
        double d = dist(lat.center(ids[a]), lat.center(ids[b]));
        CHECK(d >= 10.0 * u * (1 - 1e-12));
      }
    }
  }
  CHECK(lat.separation_fallbacks() == 0);
}

TEST_CASE("leaves are exactly the resolved cells") {
  auto mu = generate_segment(200, 1);
  auto lat = build_lattice(mu);
  int leaves = 0;
  for (int q = 0; q < lat.size(); ++q) {
    const Cube& c = lat.cube(q);
    if (!c.leaf) continue;
    ++leaves;
    bool singleton = (c.end - c.begin) == 1;
    bool tiny = c.extent < mu.r_min();
    CHECK((singleton || tiny));
    // Distinct sample points force point-supported leaves to be singletons.
    CHECK(c.extent == 0.0);
    CHECK((c.end - c.begin) == 1);
  }
  CHECK(leaves > 0);
}

TEST_CASE("two builds of the same measure agree cube for cube") {
  auto mu = generate_lipschitz_graph(150, 0.5, 1);
  auto a = build_lattice(mu);
  auto b = build_lattice(mu);
  REQUIRE(a.size() == b.size());
  for (int q = 0; q < a.size(); ++q) {
    CHECK(a.cube(q).level == b.cube(q).level);
    CHECK(a.cube(q).parent == b.cube(q).parent);
    CHECK(a.cube(q).center_atom == b.cube(q).center_atom);
    CHECK(a.cube(q).r == b.cube(q).r);
    CHECK(a.cube(q).mass == b.cube(q).mass);
  }
}

TEST_CASE("lambda neighborhoods match a brute-force rescan") {
  auto mu = generate_cantor4(4);
  auto lat = build_lattice(mu);
  std::vector<int> probes{lat.root()};
  if (lat.num_levels() > 2 && !lat.level(2).empty())
    probes.push_back(lat.level(2).front());
  if (lat.num_levels() > 1 && lat.level(1).size() > 1)
    probes.push_back(lat.level(1).back());
  for (int q : probes) {
    double lambda = 9.0;
    auto got = lat.lambda_members(q, lambda);
    std::set<int> got_set(got.begin(), got.end());
    CHECK(got_set.count(q) == 1);
    double thr = lambda * lat.ell(q);
    auto xq = lat.center(q);
    for (int p : lat.level(lat.cube(q).level)) {
      double best = std::numeric_limits<double>::infinity();
      for (int a : lat.atoms(p)) {
        double d = dist(xq, lat.mu().point(a));
        best = std::min(best, d);
      }
      CHECK(got_set.count(p) == (best <= thr ? 1u : 0u));
    }
  }
}

TEST_CASE("descendants_of matches a containment walk") {
  auto mu = generate_cantor4(3);
  auto lat = build_lattice(mu);
  auto members = lat.lambda_members(lat.root(), 9.0);
  auto desc = lat.descendants_of(members);
  std::set<int> got(desc.begin(), desc.end());
  CHECK(got.size() == desc.size());
  std::set<int> expect;
  for (int q = 0; q < lat.size(); ++q) {
    int a = q;
    while (a != -1) {
      if (std::find(members.begin(), members.end(), a) != members.end()) {
        expect.insert(q);
        break;
      }
      a = lat.cube(a).parent;
    }
  }
  CHECK(got == expect);
  CHECK(lat.mass_of(members) == doctest::Approx(mu.total_mass()).epsilon(1e-13));
}

TEST_CASE("boundary mass shrinks with the collar and stays below the cap") {
  auto mu = generate_segment(512, 1);
  auto lat = build_lattice(mu);
  int probe = lat.num_levels() > 1 ? lat.level(1).front() : lat.root();
  double prev = std::numeric_limits<double>::infinity();
  for (int l = 0; l <= 3; ++l) {
    double bm = lat.boundary_mass(probe, l);
    CHECK(bm >= 0);
    CHECK(bm <= mu.total_mass() + 1e-15);
    CHECK(bm <= prev + 1e-15);
    prev = bm;
  }
}

TEST_CASE("doubling flags agree with a direct two-ball count") {
  auto mu = generate_cantor4(3);
  auto lat = build_lattice(mu);
  const auto& flags = lat.db_flags();
  REQUIRE(flags.size() == static_cast<std::size_t>(lat.size()));
  for (int q = 0; q < lat.size(); q += 7) {
    const Cube& c = lat.cube(q);
    std::vector<double> x(lat.center(q).begin(), lat.center(q).end());
    double small = ball_mass(mu, {x, c.r});
    double big = ball_mass(mu, {x, 100.0 * c.r});
    bool expect = big <= lat.C0() * small;
    CHECK(static_cast<bool>(flags[q]) == expect);
  }
}

TEST_CASE("lattice export is a valid nested json tree") {
  auto mu = generate_segment(64, 1);
  auto lat = build_lattice(mu);
  std::ostringstream os;
  lat.export_json(os);
  auto doc = nlohmann::json::parse(os.str());
  CHECK(doc["id"].get<int>() == 0);
  CHECK(doc["k"].get<int>() == 0);
  CHECK(doc["mass"].get<double>() ==
        doctest::Approx(mu.total_mass()).epsilon(1e-15));
  std::size_t count = 0;
  std::vector<const nlohmann::json*> stack{&doc};
  while (!stack.empty()) {
    const nlohmann::json* node = stack.back();
    stack.pop_back();
    ++count;
    REQUIRE(node->contains("children"));
    for (const auto& ch : (*node)["children"]) stack.push_back(&ch);
  }
  CHECK(count == static_cast<std::size_t>(lat.size()));
}

TEST_CASE("parameter floors are enforced") {
  auto mu = generate_segment(16, 1);
  CHECK_THROWS_AS(build_lattice(mu, LatticeParams{8, 30.0}), ValidationError);
  CHECK_THROWS_AS(build_lattice(mu, LatticeParams{16, 4.0}), ValidationError);
  auto lat = build_lattice(mu, LatticeParams{20, 40.0});
  CHECK(lat.A0() == 20);
  CHECK(check_lattice(lat).ok());
}
