#include "ksjko/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "ksjko/error.hpp"
#include "ksjko/profiles.hpp"

namespace ksjko {

namespace {

[[noreturn]] void fail(const std::string& key, const std::string& what) {
  throw Error(ErrorKind::configuration, fmt::format("{}: {}", key, what));
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end) fail(key, fmt::format("'{}' is not a number", v));
  return x;
}

int to_int(const std::string& key, const std::string& v) {
  int x = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end) fail(key, fmt::format("'{}' is not an integer", v));
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(key, fmt::format("'{}' is not a boolean", v));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = {
      {"domain.dimension",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.domain.dimension = to_int(k, v);
       }},
      {"domain.x_min", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.domain.extent[0].lo = to_double(k, v);
       }},
      {"domain.x_max", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.domain.extent[0].hi = to_double(k, v);
       }},
      {"domain.y_min", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.domain.extent[1].lo = to_double(k, v);
       }},
      {"domain.y_max", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.domain.extent[1].hi = to_double(k, v);
       }},
      {"domain.coupling",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         try {
           c.domain.coupling = coupling_from_string(v);
         } catch (const Error& e) {
           fail(k, e.what());
         }
       }},
      {"domain.n", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.n = to_int(k, v);
       }},
      {"physics.chi", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.scheme.chi = to_double(k, v);
       }},
      {"physics.nonlinearity",
       [](RunConfig& c, const std::string&, const std::string& v) { c.nonlinearity = v; }},
      {"physics.initial",
       [](RunConfig& c, const std::string&, const std::string& v) { c.initial = v; }},
      {"scheme.tau", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.scheme.tau = to_double(k, v);
       }},
      {"scheme.t0", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.scheme.t0 = to_double(k, v);
       }},
      {"scheme.lambda", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.scheme.lambda_monitor = to_double(k, v);
       }},
      {"scheme.eps0", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.scheme.eps0 = to_double(k, v);
       }},
      {"scheme.entropic_eps", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.scheme.entropic_eps = to_double(k, v);
       }},
      {"scheme.inner_tol", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.scheme.inner_tol = to_double(k, v);
       }},
      {"scheme.fixed_point_tol", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.scheme.fixed_point_tol = to_double(k, v);
       }},
      {"scheme.max_inner_iters", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.scheme.max_inner_iters = to_int(k, v);
       }},
      {"scheme.max_outer_iters", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.scheme.max_outer_iters = to_int(k, v);
       }},
      {"scheme.cap",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "auto") c.scheme.cap_M.reset();
         else c.scheme.cap_M = to_double(k, v);
       }},
      {"scheme.damping", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.scheme.damping = to_double(k, v);
       }},
      {"scheme.c0_empirical", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.scheme.c0_empirical = to_double(k, v);
       }},
      {"scheme.monitor_slack_rel",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.scheme.monitor_slack_rel = to_double(k, v);
       }},
      {"scheme.check_hypothesis",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.scheme.check_hypothesis = to_bool(k, v);
       }},
      {"output.directory",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v.empty()) fail(k, "must not be empty");
         c.output.directory = v;
       }},
      {"output.stride", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.output.stride = to_int(k, v);
       }},
      {"output.formats",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         auto f = split_list(v);
         for (const auto& x : f)
           if (x != "csv" && x != "json") fail(k, fmt::format("unknown format '{}'", x));
         c.output.formats = std::move(f);
       }},
  };
  return table;
}

const Setter* find_setter(const std::string& key) {
  for (const auto& [name, fn] : setters())
    if (name == key) return &fn;
  return nullptr;
}

// Key named on the line where the INI reader stopped.
std::string key_on_line(const std::string& text, unsigned long line) {
  std::stringstream ss(text);
  std::string s;
  for (unsigned long i = 0; i < line && std::getline(ss, s); ++i) {
  }
  s = trim(s);
  if (!s.empty() && s.front() == '[') return s;
  return trim(s.substr(0, s.find('=')));
}

}  // namespace

Grid RunConfig::grid() const { return build_grid(domain, n); }

Nonlinearity RunConfig::parsed_nonlinearity() const { return Nonlinearity::parse(nonlinearity); }

DensityField RunConfig::initial_density() const { return make_profile(initial, grid()); }

void set_config_value(RunConfig& cfg, const std::string& dotted_key, const std::string& value) {
  const Setter* fn = find_setter(dotted_key);
  if (!fn) fail(dotted_key, "unknown key");
  (*fn)(cfg, dotted_key, trim(value));
}

void check_config(const RunConfig& cfg) {
  try {
    cfg.domain.validate();
  } catch (const Error& e) {
    fail("domain", e.what());
  }
  if (cfg.n < 2) fail("domain.n", "needs at least 2 cells per axis");
  try {
    Nonlinearity::parse(cfg.nonlinearity);
  } catch (const Error& e) {
    fail("physics.nonlinearity", e.what());
  }
  try {
    check_profile_spec(cfg.initial);
  } catch (const Error& e) {
    fail("physics.initial", e.what());
  }
  const auto& s = cfg.scheme;
  if (!(s.chi >= 0.0)) fail("physics.chi", "must be nonnegative");
  if (!(s.tau > 0.0)) fail("scheme.tau", "must be positive");
  if (!(s.t0 >= 0.0)) fail("scheme.t0", "must be nonnegative");
  if (!(s.lambda_monitor > 1.0)) fail("scheme.lambda", "must exceed 1");
  if (!(s.eps0 > 0.0)) fail("scheme.eps0", "must be positive");
  if (!(s.entropic_eps >= 0.0)) fail("scheme.entropic_eps", "must be nonnegative");
  if (!(s.inner_tol > 0.0)) fail("scheme.inner_tol", "must be positive");
  if (!(s.fixed_point_tol > 0.0)) fail("scheme.fixed_point_tol", "must be positive");
  if (s.max_inner_iters < 1) fail("scheme.max_inner_iters", "must be positive");
  if (s.max_outer_iters < 1) fail("scheme.max_outer_iters", "must be positive");
  if (s.cap_M && !(*s.cap_M > 0.0)) fail("scheme.cap", "must be positive");
  if (!(s.damping > 0.0 && s.damping <= 1.0)) fail("scheme.damping", "must lie in (0, 1]");
  if (!(s.c0_empirical >= 0.0)) fail("scheme.c0_empirical", "must be nonnegative");
  if (!(s.monitor_slack_rel >= 0.0)) fail("scheme.monitor_slack_rel", "must be nonnegative");
  if (cfg.output.stride < 1) fail("output.stride", "must be positive");
}

RunConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  {
    std::istringstream in(text);
    try {
      boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      fail(key_on_line(text, e.line()), fmt::format("{} (line {})", e.message(), e.line()));
    }
  }
  RunConfig cfg;
  std::set<std::string> seen;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) fail(section, "key outside a section");
    if (section != "domain" && section != "physics" && section != "scheme" && section != "output")
      fail(section, "unknown section");
    for (const auto& [key, value] : body) {
      const std::string dotted = section + "." + key;
      set_config_value(cfg, dotted, value.data());
      seen.insert(dotted);
    }
  }
  for (const char* required : {"domain.n", "physics.chi", "scheme.tau", "scheme.t0"})
    if (!seen.count(required)) fail(required, "missing required key");
  check_config(cfg);
  if (cfg.scheme.check_hypothesis) {
    const DensityField rho0 = cfg.initial_density();
    try {
      check_start_hypothesis(cfg.scheme, linf_norm(rho0).value);
    } catch (const Error& e) {
      fail("scheme.t0", e.what());
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, fmt::format("cannot read config '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& c) {
  const auto& s = c.scheme;
  std::string formats;
  for (std::size_t i = 0; i < c.output.formats.size(); ++i)
    formats += (i ? "," : "") + c.output.formats[i];
  std::string out;
  out += "[domain]\n";
  out += fmt::format("dimension = {}\n", c.domain.dimension);
  out += fmt::format("x_min = {}\nx_max = {}\n", c.domain.extent[0].lo, c.domain.extent[0].hi);
  out += fmt::format("y_min = {}\ny_max = {}\n", c.domain.extent[1].lo, c.domain.extent[1].hi);
  out += fmt::format("coupling = {}\n", to_string(c.domain.coupling));
  out += fmt::format("n = {}\n\n", c.n);
  out += "[physics]\n";
  out += fmt::format("chi = {}\nnonlinearity = {}\ninitial = {}\n\n", s.chi, c.nonlinearity,
                     c.initial);
  out += "[scheme]\n";
  out += fmt::format("tau = {}\nt0 = {}\nlambda = {}\neps0 = {}\n", s.tau, s.t0,
                     s.lambda_monitor, s.eps0);
  out += fmt::format("entropic_eps = {}\ninner_tol = {}\nfixed_point_tol = {}\n", s.entropic_eps,
                     s.inner_tol, s.fixed_point_tol);
  out += fmt::format("max_inner_iters = {}\nmax_outer_iters = {}\n", s.max_inner_iters,
                     s.max_outer_iters);
  out += s.cap_M ? fmt::format("cap = {}\n", *s.cap_M) : std::string("cap = auto\n");
  out += fmt::format("damping = {}\nc0_empirical = {}\nmonitor_slack_rel = {}\n", s.damping,
                     s.c0_empirical, s.monitor_slack_rel);
  out += fmt::format("check_hypothesis = {}\n\n", s.check_hypothesis ? "true" : "false");
  out += "[output]\n";
  out += fmt::format("directory = {}\nstride = {}\nformats = {}\n", c.output.directory,
                     c.output.stride, formats);
  return out;
}

}  // namespace ksjko
