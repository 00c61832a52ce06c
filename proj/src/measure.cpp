#include "betawolff/measure.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

namespace betawolff {

namespace {

// r_min and diameter in one O(N^2) sweep; min/max reductions are order free.
void pair_extremes(const std::vector<double>& coords, std::size_t N, int d,
                   double* r_min, bool* r_min_defined, double* diam) {
  std::size_t nchunks = (N + 255) / 256;
  std::vector<double> mins(nchunks, std::numeric_limits<double>::infinity());
  std::vector<double> maxs(nchunks, 0.0);
  for_chunks(N, 256, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    double mn = std::numeric_limits<double>::infinity(), mx = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double* pi = coords.data() + i * d;
      for (std::size_t j = i + 1; j < N; ++j) {
        const double* pj = coords.data() + j * d;
        double s = 0;
        for (int k = 0; k < d; ++k) {
          double dd = pi[k] - pj[k];
          s += dd * dd;
        }
        if (s > 0 && s < mn) mn = s;
        if (s > mx) mx = s;
      }
    }
    mins[c] = mn;
    maxs[c] = mx;
  });
  double mn = std::numeric_limits<double>::infinity(), mx = 0;
  for (double v : mins) mn = std::min(mn, v);
  for (double v : maxs) mx = std::max(mx, v);
  *r_min_defined = std::isfinite(mn);
  *r_min = *r_min_defined ? std::sqrt(mn) : 0.0;
  *diam = std::sqrt(mx);
}

}  // namespace

DiscreteMeasure DiscreteMeasure::from_atoms(int n, std::vector<double> coords,
                                            std::vector<double> weights) {
  if (n < 1) throw ValidationError("n must be >= 1");
  if (weights.empty()) throw ValidationError("measure has no atoms");
  std::size_t d = static_cast<std::size_t>(n) + 1;
  if (coords.size() != weights.size() * d)
    throw ValidationError("coordinate count does not match atom count");
  for (double c : coords)
    if (!std::isfinite(c)) throw ValidationError("non-finite coordinate");
  for (double w : weights) {
    if (!std::isfinite(w)) throw ValidationError("non-finite weight");
    if (w <= 0) throw ValidationError("weights must be positive");
  }
  DiscreteMeasure mu;
  mu.n_ = n;
  mu.coords_ = std::move(coords);
  mu.weights_ = std::move(weights);
  mu.total_mass_ = 0;
  for (double w : mu.weights_) mu.total_mass_ += w;
  pair_extremes(mu.coords_, mu.weights_.size(), static_cast<int>(d), &mu.r_min_,
                &mu.r_min_defined_, &mu.diam_);
  return mu;
}

double DiscreteMeasure::r_min() const {
  if (!r_min_defined_)
    throw ValidationError("r_min undefined: all atoms coincide");
  return r_min_;
}

DiscreteMeasure load_measure(const std::string& path, int n) {
  bool json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<double> coords, weights;
  int d = n + 1;
  if (json) {
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path + ": " + e.what());
    }
    if (doc.contains("n")) {
      if (!doc["n"].is_number_integer() || doc["n"].get<int>() != n)
        throw ValidationError(path + ": JSON n does not match requested n");
    }
    if (!doc.contains("atoms") || !doc["atoms"].is_array())
      throw IoError(path + ": missing atoms array");
    for (const auto& row : doc["atoms"]) {
      if (!row.is_array() || row.size() != static_cast<std::size_t>(d + 1))
        throw ValidationError(path + ": atom row needs d coordinates plus weight");
      for (int k = 0; k < d; ++k) coords.push_back(row[k].get<double>());
      weights.push_back(row[d].get<double>());
    }
  } else {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::vector<double> vals;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) {
        try {
          vals.push_back(std::stod(cell));
        } catch (const std::exception&) {
          throw ValidationError(path + ":" + std::to_string(lineno) +
                                ": bad number '" + cell + "'");
        }
      }
      if (vals.size() != static_cast<std::size_t>(d + 1))
        throw ValidationError(path + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(d + 1) + " columns, got " +
                              std::to_string(vals.size()));
      for (int k = 0; k < d; ++k) coords.push_back(vals[k]);
      weights.push_back(vals[d]);
    }
  }
  return DiscreteMeasure::from_atoms(n, std::move(coords), std::move(weights));
}

void save_measure_csv(const DiscreteMeasure& mu, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  int d = mu.dim();
  for (std::size_t i = 0; i < mu.size(); ++i) {
    auto p = mu.point(i);
    for (int k = 0; k < d; ++k) out << fmt_g17(p[k]) << ",";
    out << fmt_g17(mu.weight(i)) << "\n";
  }
}

void save_measure_json(const DiscreteMeasure& mu, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  int d = mu.dim();
  out << "{\"n\":" << mu.n() << ",\"atoms\":[";
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (i) out << ",";
    out << "[";
    auto p = mu.point(i);
    for (int k = 0; k < d; ++k) out << fmt_g17(p[k]) << ",";
    out << fmt_g17(mu.weight(i)) << "]";
  }
  out << "]}\n";
}

DiscreteMeasure generate_segment(std::size_t N, int n) {
  if (N < 1) throw ValidationError("segment needs N >= 1");
  int d = n + 1;
  std::vector<double> coords(N * d, 0.0);
  std::vector<double> weights(N, 1.0 / static_cast<double>(N));
  for (std::size_t i = 0; i < N; ++i)
    coords[i * d] = N == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(N - 1);
  return DiscreteMeasure::from_atoms(n, std::move(coords), std::move(weights));
}

DiscreteMeasure generate_circle(std::size_t N, int n) {
  if (N < 3) throw ValidationError("circle needs N >= 3");
  int d = n + 1;
  std::vector<double> coords(N * d, 0.0);
  std::vector<double> weights(N, 1.0 / static_cast<double>(N));
  for (std::size_t i = 0; i < N; ++i) {
    double th = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(N);
    coords[i * d] = std::cos(th);
    coords[i * d + 1] = std::sin(th);
  }
  return DiscreteMeasure::from_atoms(n, std::move(coords), std::move(weights));
}

DiscreteMeasure generate_lipschitz_graph(std::size_t N, double slope_bound, int n) {
  if (N < 2) throw ValidationError("lipschitz_graph needs N >= 2");
  if (!(slope_bound >= 0)) throw ValidationError("slope bound must be >= 0");
  int d = n + 1;
  std::vector<double> coords(N * d, 0.0);
  double w0 = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < N; ++i) {
    double t = static_cast<double>(i) / static_cast<double>(N - 1);
    coords[i * d] = t;
    coords[i * d + 1] = slope_bound / w0 * std::sin(w0 * t);
  }
  // Arclength weights: half of each incident polyline edge.
  std::vector<double> weights(N, 0.0);
  for (std::size_t i = 0; i + 1 < N; ++i) {
    double s = 0;
    for (int k = 0; k < d; ++k) {
      double dd = coords[(i + 1) * d + k] - coords[i * d + k];
      s += dd * dd;
    }
    double len = std::sqrt(s);
    weights[i] += 0.5 * len;
    weights[i + 1] += 0.5 * len;
  }
  return DiscreteMeasure::from_atoms(n, std::move(coords), std::move(weights));
}

DiscreteMeasure generate_cantor4(int g, double ratio) {
  if (g < 1) throw ValidationError("cantor4 needs g >= 1");
  if (g > 10) throw ValidationError("cantor4 generation too deep");
  if (!(ratio > 0 && ratio < 0.5))
    throw ValidationError("cantor4 ratio must be in (0, 1/2)");
  // Lower-left corners of the generation-g squares of the four-corner Cantor
  // set in the unit square; atoms sit at the square centers.
  std::vector<std::pair<double, double>> corners{{0.0, 0.0}};
  double side = 1.0;
  for (int step = 0; step < g; ++step) {
    double next = side * ratio;
    std::vector<std::pair<double, double>> out;
    out.reserve(corners.size() * 4);
    for (auto [x, y] : corners) {
      out.emplace_back(x, y);
      out.emplace_back(x + side - next, y);
      out.emplace_back(x, y + side - next);
      out.emplace_back(x + side - next, y + side - next);
    }
    corners.swap(out);
    side = next;
  }
  std::vector<double> coords;
  coords.reserve(corners.size() * 2);
  for (auto [x, y] : corners) {
    coords.push_back(x + side / 2);
    coords.push_back(y + side / 2);
  }
  std::vector<double> weights(corners.size(), ipow(0.25, g));
  return DiscreteMeasure::from_atoms(1, std::move(coords), std::move(weights));
}

DiscreteMeasure generate(const std::string& kind,
                         const std::map<std::string, double>& params) {
  auto get = [&](const std::string& key, double fallback, bool required) {
    auto it = params.find(key);
    if (it == params.end()) {
      if (required) throw ValidationError("generator " + kind + " needs parameter " + key);
      return fallback;
    }
    return it->second;
  };
  int n = static_cast<int>(get("n", 1, false));
  if (kind == "segment")
    return generate_segment(static_cast<std::size_t>(get("N", 0, true)), n);
  if (kind == "circle")
    return generate_circle(static_cast<std::size_t>(get("N", 0, true)), n);
  if (kind == "lipschitz_graph")
    return generate_lipschitz_graph(static_cast<std::size_t>(get("N", 0, true)),
                                    get("slope", 1.0, false), n);
  if (kind == "cantor4")
    return generate_cantor4(static_cast<int>(get("g", 0, true)),
                            get("ratio", 0.25, false));
  throw ValidationError("unknown generator kind '" + kind + "'");
}

double ball_mass(const DiscreteMeasure& mu, const Ball& ball) {
  if (ball.center.size() != static_cast<std::size_t>(mu.dim()))
    throw ValidationError("ball dimension does not match measure");
  if (!(ball.radius >= 0)) throw ValidationError("ball radius must be >= 0");
  double r2 = ball.radius * ball.radius;
  std::span<const double> c{ball.center.data(), ball.center.size()};
  double m = 0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    if (dist2(c, mu.point(i)) <= r2) m += mu.weight(i);
  return m;
}

double growth_constant(const DiscreteMeasure& mu) {
  double rmin = mu.r_min();
  std::size_t N = mu.size();
  int n = mu.n();
  std::size_t nchunks = (N + 63) / 64;
  std::vector<double> best(nchunks, 0.0);
  for_chunks(N, 64, [&](std::size_t c, std::size_t lo, std::size_t hi) {
    std::vector<std::pair<double, double>> dw(N);  // (distance, weight)
    double mx = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      auto pi = mu.point(i);
      for (std::size_t j = 0; j < N; ++j)
        dw[j] = {dist(pi, mu.point(j)), mu.weight(j)};
      std::sort(dw.begin(), dw.end());
      // Cumulative mass at each candidate radius; duplicates of the same
      // radius collapse onto the last entry of the tie block.
      double cum = 0;
      std::size_t j = 0;
      while (j < N) {
        double r = dw[j].first;
        while (j < N && dw[j].first == r) cum += dw[j++].second;
        double cand = std::max(r, rmin);
        // Branches clamping to r_min collapse onto one candidate; evaluate
        // it only once the whole dist <= r_min block is accumulated.
        if (cand == rmin && j < N && dw[j].first <= rmin) continue;
        double th = cum / ipow(cand, n);
        if (th > mx) mx = th;
      }
    }
    best[c] = mx;
  });
  double th0 = 0;
  for (double v : best) th0 = std::max(th0, v);
  return th0;
}

DiscreteMeasure scaled(const DiscreteMeasure& mu, double t) {
  if (!(t > 0) || !std::isfinite(t))
    throw ValidationError("scaling factor must be positive and finite");
  std::vector<double> w(mu.weights());
  for (double& x : w) x *= t;
  return DiscreteMeasure::from_atoms(mu.n(), mu.coords(), std::move(w));
}

}  // namespace betawolff
