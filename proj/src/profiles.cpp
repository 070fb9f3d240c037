#include "ksjko/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>

#include "ksjko/error.hpp"

namespace ksjko {

namespace {

struct Spec {
  std::string name;
  std::map<std::string, std::string> args;
};

Spec split_spec(const std::string& text) {
  Spec s;
  const auto colon = text.find(':');
  s.name = text.substr(0, colon);
  if (colon == std::string::npos) return s;
  std::stringstream ss(text.substr(colon + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::configuration, fmt::format("profile argument '{}' lacks '='", item));
    s.args[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return s;
}

const std::map<std::string, std::vector<std::string>>& known_args() {
  static const std::map<std::string, std::vector<std::string>> k{
      {"uniform", {}},
      {"bump", {"center", "width", "height", "floor"}},
      {"two_bumps", {"c1", "c2", "width", "height", "floor"}},
      {"plateau", {"center", "height", "ramp", "floor"}},
      {"cosine", {"amp", "k"}},
      {"smooth_step", {"center", "width", "contrast"}},
      {"from_file", {"path"}},
  };
  return k;
}

void check(const Spec& s) {
  const auto it = known_args().find(s.name);
  if (it == known_args().end())
    throw Error(ErrorKind::configuration, fmt::format("unknown initial profile '{}'", s.name));
  for (const auto& [key, value] : s.args)
    if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
      throw Error(ErrorKind::configuration,
                  fmt::format("profile '{}' has no argument '{}'", s.name, key));
}

double number(const Spec& s, const std::string& key, std::optional<double> fallback = {}) {
  const auto it = s.args.find(key);
  if (it == s.args.end()) {
    if (fallback) return *fallback;
    throw Error(ErrorKind::configuration,
                fmt::format("profile '{}' needs argument '{}'", s.name, key));
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::configuration,
                fmt::format("profile argument '{}' is not a number: '{}'", key, it->second));
  }
}

// Cell averages of a smooth function by 5-point Gauss-Legendre per axis.
std::vector<double> cell_averages(const Grid& g, const std::function<double(double, double)>& f) {
  static const double xs[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                               0.5384693101056831, 0.9061798459386640};
  static const double ws[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                               0.4786286704993665, 0.2369268850561891};
  std::vector<double> v(g.size(), 0.0);
  for (std::size_t c = 0; c < g.size(); ++c) {
    const auto x = g.center(c);
    const double hx = g.spacing(0), hy = g.dimension() == 2 ? g.spacing(1) : 0.0;
    double s = 0.0;
    for (int a = 0; a < 5; ++a) {
      if (g.dimension() == 1) {
        s += ws[a] * f(x[0] + 0.5 * hx * xs[a], 0.0);
        continue;
      }
      for (int b = 0; b < 5; ++b)
        s += ws[a] * ws[b] * f(x[0] + 0.5 * hx * xs[a], x[1] + 0.5 * hy * xs[b]);
    }
    v[c] = g.dimension() == 1 ? s / 2.0 : s / 4.0;
  }
  return v;
}

// Exact cell averages of the trapezoid profile (1D).
std::vector<double> plateau_averages(const Grid& g, double c, double r, double ramp, double height,
                                     double floor) {
  const double lo = c - r - ramp, l1 = c - r, r1 = c + r, hi = c + r + ramp;
  const auto f = [&](double x) {
    if (x <= lo || x >= hi) return floor;
    if (x >= l1 && x <= r1) return height;
    if (x < l1) return floor + (height - floor) * (x - lo) / ramp;
    return floor + (height - floor) * (hi - x) / ramp;
  };
  std::vector<double> v(g.size());
  const double h = g.spacing();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double a = g.edge(int(i)), b = a + h;
    std::vector<double> pts{a, b};
    for (double k : {lo, l1, r1, hi})
      if (k > a && k < b) pts.push_back(k);
    std::sort(pts.begin(), pts.end());
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k)
      s += 0.5 * (pts[k + 1] - pts[k]) * (f(pts[k]) + f(pts[k + 1]));
    v[i] = s / h;
  }
  return v;
}

std::vector<double> read_values(const std::string& path, std::size_t expected) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, fmt::format("cannot open initial profile '{}'", path));
  std::string line;
  std::vector<double> values;
  int rho_col = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (rho_col < 0 && !cols.empty() && !std::isdigit(static_cast<unsigned char>(cols[0][0])) &&
        cols[0][0] != '-' && cols[0][0] != '.') {
      const auto it = std::find(cols.begin(), cols.end(), "rho");
      if (it == cols.end())
        throw Error(ErrorKind::io, fmt::format("'{}' has a header without a rho column", path));
      rho_col = int(it - cols.begin());
      continue;
    }
    values.push_back(std::stod(cols[rho_col < 0 ? 0 : std::size_t(rho_col)]));
  }
  if (values.size() != expected)
    throw Error(ErrorKind::io, fmt::format("'{}' holds {} values, the grid has {} cells", path,
                                           values.size(), expected));
  return values;
}

}  // namespace

void check_profile_spec(const std::string& spec) { check(split_spec(spec)); }

DensityField make_profile(const std::string& text, const Grid& g) {
  const Spec s = split_spec(text);
  check(s);
  const auto& dom = g.domain();
  const double lo = dom.extent[0].lo, len = dom.extent[0].length();
  const double mid = lo + 0.5 * len;
  const auto radius = [&](double x, double y, double c) {
    if (g.dimension() == 1) return std::abs(x - c);
    const double cy = dom.extent[1].lo + (c - lo) / len * dom.extent[1].length();
    return std::hypot(x - c, y - cy);
  };
  const auto cos_bump = [](double r, double w) {
    if (r >= w) return 0.0;
    const double c = std::cos(0.5 * std::numbers::pi * r / w);
    return c * c;
  };

  std::vector<double> v;
  if (s.name == "uniform") {
    v.assign(g.size(), 1.0);
  } else if (s.name == "bump") {
    const double c = number(s, "center", mid), w = number(s, "width"), ht = number(s, "height");
    const double fl = number(s, "floor", 0.0);
    v = cell_averages(g, [&](double x, double y) { return fl + ht * cos_bump(radius(x, y, c), w); });
  } else if (s.name == "two_bumps") {
    const double c1 = number(s, "c1"), c2 = number(s, "c2"), w = number(s, "width");
    const double ht = number(s, "height"), fl = number(s, "floor", 0.0);
    v = cell_averages(g, [&](double x, double y) {
      return fl + ht * (cos_bump(radius(x, y, c1), w) + cos_bump(radius(x, y, c2), w));
    });
  } else if (s.name == "plateau") {
    if (g.dimension() != 1)
      throw Error(ErrorKind::configuration, "the plateau profile is one-dimensional");
    const double c = number(s, "center", mid), ht = number(s, "height");
    const double ramp = number(s, "ramp"), fl = number(s, "floor", 0.0);
    const auto mass = [&](double r) {
      double m = 0.0;
      for (double x : plateau_averages(g, c, r, ramp, ht, fl)) m += x * g.spacing();
      return m;
    };
    double a = 0.0, b = len;
    if (mass(a) > 1.0 || mass(b) < 1.0)
      throw Error(ErrorKind::configuration,
                  "plateau: no half-width gives unit mass for this height, ramp and floor");
    for (int it = 0; it < 200; ++it) {
      const double r = 0.5 * (a + b);
      (mass(r) < 1.0 ? a : b) = r;
    }
    v = plateau_averages(g, c, 0.5 * (a + b), ramp, ht, fl);
  } else if (s.name == "cosine") {
    const double amp = number(s, "amp"), k = number(s, "k", 1.0);
    v = cell_averages(g, [&](double x, double) {
      return 1.0 + amp * std::cos(k * std::numbers::pi * (x - lo) / len);
    });
  } else if (s.name == "smooth_step") {
    const double c = number(s, "center", mid), w = number(s, "width");
    const double contrast = number(s, "contrast");
    v = cell_averages(g, [&](double x, double) { return 1.0 + contrast * std::tanh((x - c) / w); });
  } else {
    const auto it = s.args.find("path");
    if (it == s.args.end())
      throw Error(ErrorKind::configuration, "profile 'from_file' needs argument 'path'");
    v = read_values(it->second, g.size());
  }
  for (double x : v)
    if (!(x >= 0.0) || !std::isfinite(x))
      throw Error(ErrorKind::configuration,
                  fmt::format("initial profile '{}' is negative or not finite", text));
  DensityField rho(g, std::move(v));
  if (total_mass(rho) <= 0.0)
    throw Error(ErrorKind::configuration, fmt::format("initial profile '{}' has no mass", text));
  return normalized(std::move(rho));
}

}  // namespace ksjko
