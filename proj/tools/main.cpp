#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "betawolff/coeffs.hpp"
#include "betawolff/common.hpp"
#include "betawolff/lattice.hpp"
#include "betawolff/measure.hpp"
#include "betawolff/riesz.hpp"
#include "betawolff/stopping.hpp"
#include "betawolff/verify.hpp"

namespace bw = betawolff;

namespace {

struct Defaults {
  int n = 1;
  int A0 = 16;
  double C0 = 30;
  int k_lambda = 2;
  double delta0 = 1e-3;
  double M = 4;
  int N_corona = 8;
  double lambda = 9;
  double grid_ratio = 2;
  double eps = 0;
  double theta_mac = 0.3;
  int threads = 0;
};

void apply_config(const std::string& path, Defaults& d) {
  std::ifstream in(path);
  if (!in) throw bw::IoError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw bw::IoError("config parse error in " + path + ": " + e.what());
  }
  if (!j.is_object())
    throw bw::ValidationError("config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const auto& v = it.value();
    if (!v.is_number())
      throw bw::ValidationError("config key " + k + " must be numeric");
    if (k == "n") d.n = v.get<int>();
    else if (k == "A0") d.A0 = v.get<int>();
    else if (k == "C0") d.C0 = v.get<double>();
    else if (k == "k_lambda") d.k_lambda = v.get<int>();
    else if (k == "delta0") d.delta0 = v.get<double>();
    else if (k == "M") d.M = v.get<double>();
    else if (k == "N_corona") d.N_corona = v.get<int>();
    else if (k == "lambda") d.lambda = v.get<double>();
    else if (k == "grid_ratio") d.grid_ratio = v.get<double>();
    else if (k == "eps") d.eps = v.get<double>();
    else if (k == "theta_mac") d.theta_mac = v.get<double>();
    else if (k == "threads") d.threads = v.get<int>();
    else throw bw::ValidationError("unknown config key: " + k);
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw bw::IoError("cannot write file: " + path);
  return f;
}

bw::StoppingConfig stopping_from(const Defaults& d) {
  bw::StoppingConfig cfg;
  cfg.k_lambda = d.k_lambda;
  cfg.delta0 = d.delta0;
  cfg.M = d.M;
  cfg.N_corona = d.N_corona;
  cfg.lambda = d.lambda;
  return cfg;
}

void warn_stopping(const bw::StoppingConfig& cfg, int A0, int n) {
  if (!cfg.delta0_in_regime(A0, n))
    std::cerr << "warning: delta0 = " << bw::fmt_g17(cfg.delta0)
              << " exceeds Lambda^-2 = "
              << bw::fmt_g17(1.0 / (cfg.Lambda(A0, n) * cfg.Lambda(A0, n)))
              << "; low-density decay bounds are not guaranteed\n";
}

}  // namespace

int main(int argc, char** argv) {
  Defaults d;
  try {
    for (int i = 1; i < argc; ++i) {
      std::string a = argv[i];
      if (a == "--config" && i + 1 < argc) {
        apply_config(argv[i + 1], d);
        break;
      }
      if (a.rfind("--config=", 0) == 0) {
        apply_config(a.substr(9), d);
        break;
      }
    }
  } catch (const bw::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  CLI::App app{"multiscale density, flatness, and Riesz-field toolkit for "
               "discrete measures"};
  app.fallthrough();
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path,
                 "JSON file of numeric defaults; flags override");
  app.add_option("--threads", d.threads,
                 "worker cap (0 = BETAWOLFF_THREADS or hardware)");

  std::string in_path, out_path, kind = "segment", battery_path, series_dir;
  std::size_t genN = 256;
  int g = 4;
  double cratio = 0.25, slope = 1.0;
  bool use_tree = false, timings = false;

  auto* cgen = app.add_subcommand("gen", "generate a measure file");
  cgen->add_option("--kind", kind,
                   "segment | circle | lipschitz_graph | cantor4");
  cgen->add_option("--N", genN, "atom count (segment/circle/graph)");
  cgen->add_option("--g", g, "cantor4 generation");
  cgen->add_option("--ratio", cratio, "cantor4 contraction ratio");
  cgen->add_option("--slope", slope, "lipschitz graph slope bound");
  cgen->add_option("--n", d.n, "density exponent; ambient dim is n+1");
  cgen->add_option("--out", out_path, "output path (.json or CSV)")
      ->required();

  auto add_measure_opts = [&](CLI::App* c) {
    c->add_option("--in", in_path, "measure file (.json or CSV)")->required();
    c->add_option("--n", d.n, "density exponent; ambient dim is n+1");
    c->add_option("--A0", d.A0, "lattice scale ratio (int >= 16)");
    c->add_option("--C0", d.C0, "lattice radius headroom (>= 30)");
  };

  auto* clat = app.add_subcommand("lattice", "build the cube hierarchy");
  add_measure_opts(clat);
  clat->add_option("--out", out_path, "lattice JSON path");

  auto* ccoef = app.add_subcommand("coeffs", "per-cube coefficient table");
  add_measure_opts(ccoef);
  ccoef->add_option("--lambda", d.lambda, "neighborhood scale for energies");
  ccoef->add_option("--out", out_path, "CSV path")->required();

  auto* crz = app.add_subcommand("riesz", "field evaluation and energy");
  add_measure_opts(crz);
  crz->add_option("--eps", d.eps, "truncation radius (0 = self-excluded)");
  crz->add_flag("--tree", use_tree, "treecode evaluator");
  crz->add_option("--theta-mac", d.theta_mac, "treecode opening angle");
  crz->add_option("--out", out_path, "field CSV path");

  auto* ccor = app.add_subcommand("corona", "corona forest decomposition");
  add_measure_opts(ccor);
  ccor->add_option("--k-lambda", d.k_lambda, "high-density exponent");
  ccor->add_option("--delta0", d.delta0, "low-density threshold");
  ccor->add_option("--M", d.M, "domination parameter");
  ccor->add_option("--N-corona", d.N_corona, "corona exponent N");
  ccor->add_option("--lambda", d.lambda, "neighborhood scale");
  ccor->add_option("--out", out_path, "forest JSON path");

  auto* cver = app.add_subcommand("verify", "two-sided comparability report");
  add_measure_opts(cver);
  cver->add_option("--grid-ratio", d.grid_ratio, "radius grid ratio (>= 2)");
  cver->add_flag("--timings", timings, "record wall times in the report");
  cver->add_option("--out", out_path, "report JSON path");

  auto* ccap = app.add_subcommand("capacity", "potential-normalized capacity");
  ccap->add_option("--in", in_path, "measure file (.json or CSV)")->required();
  ccap->add_option("--n", d.n, "density exponent");
  ccap->add_option("--grid-ratio", d.grid_ratio, "radius grid ratio (>= 2)");
  ccap->add_option("--out", out_path, "JSON path (default stdout)");

  auto* csuite = app.add_subcommand("suite", "run a generator battery");
  csuite->add_option("--battery", battery_path, "battery JSON")->required();
  csuite->add_option("--out", out_path, "report JSON path")->required();
  csuite->add_option("--series-dir", series_dir,
                     "directory for plot CSVs (default: alongside --out)");
  csuite->add_option("--grid-ratio", d.grid_ratio, "radius grid ratio");
  csuite->add_option("--A0", d.A0, "lattice scale ratio");
  csuite->add_option("--C0", d.C0, "lattice radius headroom");
  csuite->add_option("--k-lambda", d.k_lambda, "high-density exponent");
  csuite->add_option("--delta0", d.delta0, "low-density threshold");
  csuite->add_option("--M", d.M, "domination parameter");
  csuite->add_option("--N-corona", d.N_corona, "corona exponent N");
  csuite->add_flag("--timings", timings, "record wall times in the report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (d.threads > 0) bw::set_thread_cap(d.threads);

    if (app.got_subcommand(cgen)) {
      std::map<std::string, double> params;
      params["n"] = d.n;
      if (kind == "cantor4") {
        params["g"] = g;
        params["ratio"] = cratio;
      } else {
        params["N"] = static_cast<double>(genN);
        if (kind == "lipschitz_graph") params["slope"] = slope;
      }
      bw::DiscreteMeasure mu = bw::generate(kind, params);
      if (out_path.size() > 5 &&
          out_path.substr(out_path.size() - 5) == ".json")
        bw::save_measure_json(mu, out_path);
      else
        bw::save_measure_csv(mu, out_path);
      std::cout << "wrote " << mu.size() << " atoms to " << out_path << "\n";
      return 0;
    }

    bw::LatticeParams lp{d.A0, d.C0};
    bw::VerifyParams vp;
    vp.lattice = lp;
    vp.stopping = stopping_from(d);
    vp.grid_ratio = d.grid_ratio;

    if (app.got_subcommand(csuite)) {
      auto battery = bw::load_battery(battery_path);
      bw::SuiteOptions opts;
      opts.verify = vp;
      opts.timings = timings;
      std::string sdir = series_dir;
      if (sdir.empty()) {
        auto parent = std::filesystem::path(out_path).parent_path();
        sdir = parent.empty() ? "." : parent.string();
      }
      auto f = open_out(out_path);
      bw::suite_report(battery, opts, f, sdir);
      std::cout << "suite report: " << out_path << " (" << battery.size()
                << " entries)\n";
      return 0;
    }

    bw::DiscreteMeasure mu = bw::load_measure(in_path, d.n);

    if (app.got_subcommand(ccap)) {
      std::vector<int> all(mu.size());
      for (std::size_t i = 0; i < mu.size(); ++i) all[i] = static_cast<int>(i);
      bw::CapacityEstimate ce = bw::capacity_estimate(mu, all, d.grid_ratio);
      std::string doc = "{\"kappa\":" + bw::fmt_g17(ce.kappa) +
                        ",\"t\":" + bw::fmt_g17(ce.t) +
                        ",\"max_U\":" + bw::fmt_g17(ce.max_U) + "}\n";
      if (out_path.empty())
        std::cout << doc;
      else
        open_out(out_path) << doc;
      return 0;
    }

    bw::Lattice lat = bw::build_lattice(mu, lp);

    if (app.got_subcommand(clat)) {
      bw::LatticeCheck chk = bw::check_lattice(lat);
      if (!out_path.empty()) {
        auto f = open_out(out_path);
        lat.export_json(f);
      }
      auto line = [](const char* name, bool v) {
        std::cout << name << ": " << (v ? "ok" : "FAIL") << "\n";
      };
      line("partition", chk.partition);
      line("nesting", chk.nesting);
      line("separation", chk.separation);
      line("radius_range", chk.radius_range);
      line("mass_additive", chk.mass_additive);
      std::cout << "ball_containment_violations: "
                << chk.ball_containment_violations << "\n"
                << "containment_factor_violations: "
                << chk.containment_factor_violations << "\n"
                << "separation_fallbacks: " << chk.separation_fallbacks << "\n"
                << "cubes: " << lat.size() << " levels: " << lat.num_levels()
                << "\n";
      return chk.ok() ? 0 : 1;
    }

    if (app.got_subcommand(ccoef)) {
      bw::CubeStats st = bw::CubeStats::build(lat, true);
      auto f = open_out(out_path);
      bw::write_coeff_table_csv(st, f, d.lambda);
      std::cout << "wrote " << lat.size() << " cube rows to " << out_path
                << "\n";
      return 0;
    }

    if (app.got_subcommand(crz)) {
      std::vector<double> field;
      if (use_tree) {
        field = bw::riesz_field_tree(mu, lat, d.eps, d.theta_mac);
      } else if (d.eps > 0) {
        field.resize(mu.size() * static_cast<std::size_t>(mu.dim()));
        for (std::size_t i = 0; i < mu.size(); ++i) {
          auto v = bw::riesz_truncated(mu, mu.point(i), d.eps);
          std::copy(v.begin(), v.end(), field.begin() + i * mu.dim());
        }
      } else {
        field = bw::riesz_pv_field(mu);
      }
      double energy = 0;
      for (std::size_t i = 0; i < mu.size(); ++i) {
        double s = 0;
        for (int k = 0; k < mu.dim(); ++k) {
          double v = field[i * mu.dim() + k];
          s += v * v;
        }
        energy += mu.weight(i) * s;
      }
      if (!out_path.empty()) {
        auto f = open_out(out_path);
        bw::write_field_csv(mu, field, f);
      }
      std::cout << "energy " << bw::fmt_g17(energy) << "\n";
      return 0;
    }

    if (app.got_subcommand(ccor)) {
      bw::StoppingConfig cfg = stopping_from(d);
      warn_stopping(cfg, lat.A0(), mu.n());
      bw::CubeStats st = bw::CubeStats::build(lat, false);
      if (!st.p_doubling[lat.root()])
        std::cerr << "warning: root cube is not P-doubling\n";
      bw::CoronaForest forest = bw::corona_top(st, cfg);
      if (!out_path.empty()) {
        auto f = open_out(out_path);
        bw::write_corona_json(forest, f);
      } else {
        bw::write_corona_json(forest, std::cout);
      }
      return 0;
    }

    if (app.got_subcommand(cver)) {
      auto t0 = std::chrono::steady_clock::now();
      bw::ComparisonReport rep = bw::theorem_check(mu, vp);
      auto t1 = std::chrono::steady_clock::now();
      std::string doc =
          "{\"input\":\"" + in_path + "\",\"n\":" + std::to_string(mu.n()) +
          ",\"lhs_lattice\":" + bw::fmt_g17(rep.lhs_lattice) +
          ",\"lhs_grid\":" + bw::fmt_g17(rep.lhs_grid) +
          ",\"riesz_energy\":" + bw::fmt_g17(rep.riesz) +
          ",\"theta0\":" + bw::fmt_g17(rep.theta0) +
          ",\"theta0_sq_mass\":" + bw::fmt_g17(rep.theta0_sq_mass) +
          ",\"r1\":" + bw::fmt_g17(rep.r1) + ",\"r2\":" + bw::fmt_g17(rep.r2);
      if (timings)
        doc += ",\"runtimes\":{\"total_s\":" +
               bw::fmt_g17(std::chrono::duration<double>(t1 - t0).count()) +
               "}";
      else
        doc += ",\"runtimes\":null";
      doc += "}\n";
      if (out_path.empty())
        std::cout << doc;
      else
        open_out(out_path) << doc;
      return 0;
    }
  } catch (const bw::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
