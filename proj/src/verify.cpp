#include "betawolff/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "betawolff/common.hpp"
#include "betawolff/riesz.hpp"

namespace betawolff {

namespace {

double grid_lhs(const DiscreteMeasure& mu, double grid_ratio) {
  std::vector<double> radii =
      radius_grid(mu.diameter(), mu.r_min(), grid_ratio);
  const double lr = std::log(grid_ratio);
  const int n = mu.n();
  const int d = mu.dim();
  const int dd2 = d * (d + 1) / 2;
  const std::size_t N = mu.size();
  std::size_t nchunks = (N + 63) / 64;
  std::vector<double> partial(nchunks, 0.0);
  for_chunks(N, 64, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    std::vector<double> mass, M1, M2;
    double acc = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      radial_moments(mu, mu.point(i), radii, true, mass, M1, M2);
      double s = 0;
      for (std::size_t j = 0; j < radii.size(); ++j) {
        double m = mass[j];
        if (m <= 0) continue;
        double form = scatter_min_form(d, m, M1.data() + j * d,
                                       M2.data() + j * dd2);
        double beta_sq = form / ipow(radii[j], n + 2);
        double th = m / ipow(radii[j], n);
        s += beta_sq * th * lr;
      }
      acc += mu.weight(i) * s;
    }
    partial[c] = acc;
  });
  double total = 0;
  for (double v : partial) total += v;
  return total;
}

}  // namespace

double beta_wolff_lhs(const DiscreteMeasure& mu, const CubeStats* st,
                      LhsMode mode, double grid_ratio) {
  if (mode == LhsMode::grid) return grid_lhs(mu, grid_ratio);
  if (!st || !st->has_beta)
    throw ValidationError("lattice mode needs cube stats with beta values");
  const Lattice& lat = *st->lat;
  double total = 0;
  for (int q = 0; q < lat.size(); ++q) {
    if (lat.cube(q).leaf) continue;
    total += st->beta2sq[q] * st->Theta[q] * lat.cube(q).mass;
  }
  return total;
}

ComparisonReport theorem_check(const DiscreteMeasure& mu,
                               const VerifyParams& params) {
  if (mu.size() < 2) throw ValidationError("theorem_check needs >= 2 atoms");
  Lattice lat = build_lattice(mu, params.lattice);
  CubeStats st = CubeStats::build(lat, true);
  ComparisonReport rep;
  rep.lhs_lattice = beta_wolff_lhs(mu, &st, LhsMode::lattice);
  rep.lhs_grid = beta_wolff_lhs(mu, nullptr, LhsMode::grid, params.grid_ratio);
  rep.riesz = riesz_energy(mu);
  rep.theta0 = growth_constant(mu);
  rep.theta0_sq_mass = rep.theta0 * rep.theta0 * mu.total_mass();
  rep.r1 = rep.lhs_grid / (rep.riesz + rep.theta0_sq_mass);
  rep.r2 = rep.riesz / (rep.lhs_grid + rep.theta0_sq_mass);
  return rep;
}

PotentialSample jones_wolff_potential(const DiscreteMeasure& mu,
                                      std::span<const double> x,
                                      double grid_ratio) {
  std::vector<double> radii =
      radius_grid(mu.diameter(), mu.r_min(), grid_ratio);
  const double lr = std::log(grid_ratio);
  const int n = mu.n();
  const int d = mu.dim();
  const int dd2 = d * (d + 1) / 2;
  std::vector<double> mass, M1, M2;
  radial_moments(mu, x, radii, true, mass, M1, M2);
  PotentialSample out;
  for (std::size_t j = 0; j < radii.size(); ++j) {
    double m = mass[j];
    if (m <= 0) continue;
    double th = m / ipow(radii[j], n);
    out.sup_theta = std::max(out.sup_theta, th);
    double form =
        scatter_min_form(d, m, M1.data() + j * d, M2.data() + j * dd2);
    out.beta_integral += form / ipow(radii[j], n + 2) * th * lr;
  }
  out.U = out.sup_theta + std::sqrt(out.beta_integral);
  return out;
}

CapacityEstimate capacity_estimate(const DiscreteMeasure& mu,
                                   const std::vector<int>& E,
                                   double grid_ratio) {
  if (E.empty()) throw ValidationError("capacity_estimate needs atoms in E");
  for (int i : E)
    if (i < 0 || static_cast<std::size_t>(i) >= mu.size())
      throw ValidationError("capacity_estimate index out of range");
  const std::size_t M = E.size();
  std::size_t nchunks = (M + 63) / 64;
  std::vector<double> partial(nchunks, 0.0);
  for_chunks(M, 64, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    double mx = 0;
    for (std::size_t k = lo; k < hi; ++k)
      mx = std::max(
          mx, jones_wolff_potential(mu, mu.point(E[k]), grid_ratio).U);
    partial[c] = mx;
  });
  CapacityEstimate out;
  for (double v : partial) out.max_U = std::max(out.max_U, v);
  if (!(out.max_U > 0))
    throw ValidationError("potential vanishes on E");
  out.t = 1.0 / out.max_U;
  double me = 0;
  for (int i : E) me += mu.weight(i);
  out.kappa = out.t * me;
  return out;
}

std::vector<SuiteEntry> load_battery(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open battery file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError("battery parse error in " + path + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("entries") || !j["entries"].is_array())
    throw ValidationError("battery must be {\"entries\": [...]}");
  std::vector<SuiteEntry> out;
  for (const auto& e : j["entries"]) {
    if (!e.is_object() || !e.contains("kind") || !e["kind"].is_string())
      throw ValidationError("battery entry needs a string kind");
    SuiteEntry se;
    se.kind = e["kind"].get<std::string>();
    if (e.contains("params")) {
      if (!e["params"].is_object())
        throw ValidationError("battery params must be an object");
      for (auto it = e["params"].begin(); it != e["params"].end(); ++it) {
        if (!it.value().is_number())
          throw ValidationError("battery param " + it.key() +
                                " must be numeric");
        se.params[it.key()] = it.value().get<double>();
      }
    }
    out.push_back(std::move(se));
  }
  return out;
}

namespace {

void write_params(std::ostream& out,
                  const std::map<std::string, double>& params) {
  out << "{";
  bool first = true;
  for (const auto& [k, v] : params) {
    if (!first) out << ",";
    first = false;
    out << "\"" << k << "\":" << fmt_g17(v);
  }
  out << "}";
}

double sweep_x(const SuiteEntry& e) {
  auto g = e.params.find("g");
  if (g != e.params.end()) return g->second;
  auto N = e.params.find("N");
  if (N != e.params.end()) return N->second;
  return 0;
}

}  // namespace

void suite_report(const std::vector<SuiteEntry>& battery,
                  const SuiteOptions& opts, std::ostream& out,
                  const std::string& series_dir) {
  struct Row {
    const SuiteEntry* entry;
    bool failed = false;
    std::string error;
    ComparisonReport rep;
    int top_count = 0;
    double sigma_top = 0;
    CapacityEstimate cap;
    double seconds = 0;
  };
  std::vector<Row> rows;
  for (const SuiteEntry& e : battery) {
    Row row;
    row.entry = &e;
    auto t0 = std::chrono::steady_clock::now();
    try {
      DiscreteMeasure mu = generate(e.kind, e.params);
      Lattice lat = build_lattice(mu, opts.verify.lattice);
      CubeStats st = CubeStats::build(lat, true);
      row.rep.lhs_lattice = beta_wolff_lhs(mu, &st, LhsMode::lattice);
      row.rep.lhs_grid =
          beta_wolff_lhs(mu, nullptr, LhsMode::grid, opts.verify.grid_ratio);
      row.rep.riesz = riesz_energy(mu);
      row.rep.theta0 = growth_constant(mu);
      row.rep.theta0_sq_mass = row.rep.theta0 * row.rep.theta0 * mu.total_mass();
      row.rep.r1 = row.rep.lhs_grid / (row.rep.riesz + row.rep.theta0_sq_mass);
      row.rep.r2 = row.rep.riesz / (row.rep.lhs_grid + row.rep.theta0_sq_mass);
      CoronaForest forest = corona_top(st, opts.verify.stopping);
      row.top_count = forest.top_count;
      row.sigma_top = forest.sigma_top;
      std::vector<int> all(mu.size());
      for (std::size_t i = 0; i < mu.size(); ++i) all[i] = static_cast<int>(i);
      row.cap = capacity_estimate(mu, all, opts.verify.grid_ratio);
    } catch (const std::exception& ex) {
      row.failed = true;
      row.error = ex.what();
    }
    auto t1 = std::chrono::steady_clock::now();
    row.seconds = std::chrono::duration<double>(t1 - t0).count();
    rows.push_back(std::move(row));
  }

  out << "{\"entries\":[";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& row = rows[i];
    if (i) out << ",";
    out << "{\"generator\":\"" << row.entry->kind << "\",\"params\":";
    write_params(out, row.entry->params);
    if (row.failed) {
      std::string msg = row.error;
      for (char& c : msg)
        if (c == '"' || c == '\\') c = '\'';
      out << ",\"error\":\"" << msg << "\"}";
      continue;
    }
    out << ",\"lhs_lattice\":" << fmt_g17(row.rep.lhs_lattice)
        << ",\"lhs_grid\":" << fmt_g17(row.rep.lhs_grid)
        << ",\"riesz_energy\":" << fmt_g17(row.rep.riesz)
        << ",\"theta0_sq_mass\":" << fmt_g17(row.rep.theta0_sq_mass)
        << ",\"r1\":" << fmt_g17(row.rep.r1) << ",\"r2\":" << fmt_g17(row.rep.r2)
        << ",\"corona\":{\"top_count\":" << row.top_count
        << ",\"sigma_top\":" << fmt_g17(row.sigma_top) << "}"
        << ",\"capacity\":{\"kappa\":" << fmt_g17(row.cap.kappa)
        << ",\"t\":" << fmt_g17(row.cap.t) << "}";
    if (opts.timings)
      out << ",\"runtimes\":{\"total_s\":" << fmt_g17(row.seconds) << "}";
    else
      out << ",\"runtimes\":null";
    out << "}";
  }
  out << "]}\n";

  if (series_dir.empty()) return;
  std::map<std::string, std::vector<const Row*>> groups;
  for (const Row& row : rows)
    if (!row.failed) groups[row.entry->kind].push_back(&row);
  for (const auto& [kind, members] : groups) {
    if (members.size() < 2) continue;
    for (const char* metric : {"lhs_grid", "riesz_energy"}) {
      std::string path =
          series_dir + "/series_" + kind + "_" + metric + ".csv";
      std::ofstream f(path);
      if (!f) throw IoError("cannot write series file: " + path);
      f << "x,y\n";
      for (const Row* row : members) {
        double y = std::string(metric) == "lhs_grid" ? row->rep.lhs_grid
                                                     : row->rep.riesz;
        f << fmt_g17(sweep_x(*row->entry)) << "," << fmt_g17(y) << "\n";
      }
    }
  }
}

}  // namespace betawolff
