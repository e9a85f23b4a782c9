#include "mfchaos/config.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "mfchaos/errors.hpp"

namespace mfchaos {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc{} || p != end || !std::isfinite(x)) {
    throw ConfigError(fmt::format("{}: '{}' is not a finite number", key, v));
  }
  return x;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc{} || p != end) {
    throw ConfigError(fmt::format("{}: '{}' is not a nonnegative integer", key, v));
  }
  return x;
}

LawKind to_law_kind(const std::string& key, const std::string& v) {
  if (v == "point") return LawKind::kPoint;
  if (v == "gaussian") return LawKind::kGaussian;
  if (v == "ball") return LawKind::kUniformBall;
  throw ConfigError(fmt::format("{}: unknown law '{}' (point|gaussian|ball)", key, v));
}

std::string_view law_kind_name(LawKind k) {
  switch (k) {
    case LawKind::kPoint:
      return "point";
    case LawKind::kGaussian:
      return "gaussian";
    case LawKind::kUniformBall:
      return "ball";
  }
  return "point";
}

std::vector<double> to_vector(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(to_double(key, item));
  if (out.empty()) throw ConfigError(fmt::format("{}: empty list", key));
  return out;
}

void apply(ExperimentConfig& c, const std::string& key, const std::string& v) {
  auto law_field = [&](InitialLaw& law, const std::string& field) {
    if (field == "kind") {
      law.kind = to_law_kind(key, v);
    } else if (field == "mean") {
      law.mean = to_vector(key, v);
    } else if (field == "scale") {
      law.scale = to_double(key, v);
    } else {
      throw ConfigError(fmt::format("unknown key '{}'", key));
    }
  };

  if (key == "schema_version") {
    c.schema_version = static_cast<int>(to_uint(key, v));
  } else if (key == "model") {
    if (v != "quadratic" && v != "double_well") {
      throw ConfigError(fmt::format("model: unknown model '{}' (quadratic|double_well)", v));
    }
    c.model = v;
  } else if (key == "dim") {
    c.dim = to_uint(key, v);
  } else if (key == "rho") {
    c.rho = to_double(key, v);
  } else if (key == "a") {
    c.a = to_double(key, v);
  } else if (key == "lambda") {
    c.lambda = to_double(key, v);
  } else if (key == "sign") {
    if (v == "1" || v == "+1") {
      c.sign = 1;
    } else if (v == "-1") {
      c.sign = -1;
    } else {
      throw ConfigError(fmt::format("sign: expected +1 or -1, got '{}'", v));
    }
  } else if (key == "eta") {
    c.eta = v == "auto" ? std::nullopt : std::optional<double>(to_double(key, v));
  } else if (key == "h") {
    c.h = to_double(key, v);
  } else if (key == "t_end") {
    c.t_end = to_double(key, v);
  } else if (key == "output_dt") {
    c.output_dt = to_double(key, v);
  } else if (key == "delta") {
    c.delta = v == "auto" ? std::nullopt : std::optional<double>(to_double(key, v));
  } else if (key == "M") {
    c.M = v == "auto" ? std::nullopt : std::optional<std::size_t>(to_uint(key, v));
  } else if (key == "closure") {
    if (v == "auto") {
      c.closure = true;
    } else if (v == "off") {
      c.closure = false;
    } else {
      throw ConfigError(fmt::format("closure: expected auto|off, got '{}'", v));
    }
  } else if (key == "n_list") {
    c.n_list.clear();
    for (const auto& item : split_list(v)) c.n_list.push_back(to_uint(key, item));
  } else if (key == "replications") {
    c.replications = to_uint(key, v);
  } else if (key == "seed") {
    c.seed = to_uint(key, v);
  } else if (key.starts_with("nu.")) {
    law_field(c.nu, key.substr(3));
  } else if (key.starts_with("mu.")) {
    law_field(c.mu, key.substr(3));
  } else if (key == "coupling") {
    if (v == "synchronous") {
      c.coupling = InitialCoupling::kSynchronous;
    } else if (v == "independent") {
      c.coupling = InitialCoupling::kIndependent;
    } else {
      throw ConfigError(fmt::format("coupling: expected synchronous|independent, got '{}'", v));
    }
  } else if (key == "grid_cells") {
    c.grid_cells = to_uint(key, v);
  } else if (key == "quadrature_tol") {
    c.quadrature_tol = to_double(key, v);
  } else if (key == "validation_samples") {
    c.validation_samples = to_uint(key, v);
  } else if (key == "output_dir") {
    c.output_dir = v;
  } else {
    throw ConfigError(fmt::format("unknown key '{}'", key));
  }
}

std::string join(const std::vector<double>& v) { return fmt::format("{}", fmt::join(v, ",")); }

}  // namespace

std::vector<double> ExperimentConfig::output_times() const {
  std::vector<double> times;
  const auto total = std::llround(t_end / h);
  const auto every = std::max<long long>(1, std::llround(output_dt / h));
  for (long long k = 0; k < total; k += every) times.push_back(static_cast<double>(k) * h);
  times.push_back(static_cast<double>(total) * h);
  return times;
}

std::size_t ExperimentConfig::resolved_M(std::size_t N) const {
  return M.value_or(std::max<std::size_t>(4096, 16 * N));
}

double ExperimentConfig::resolved_delta() const { return delta.value_or(default_delta(h)); }

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  bool nu_mean = false, mu_mean = false;
  std::map<std::string, int> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("line {}: expected 'key = value'", lineno));
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (value.empty()) throw ConfigError(fmt::format("line {}: empty value for '{}'", lineno, key));
    if (auto [it, fresh] = seen.emplace(key, lineno); !fresh) {
      throw ConfigError(
          fmt::format("line {}: '{}' already set on line {}", lineno, key, it->second));
    }
    try {
      apply(c, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("line {}: {}", lineno, e.what()));
    }
    nu_mean |= key == "nu.mean";
    mu_mean |= key == "mu.mean";
  }
  if (c.schema_version != kSchemaVersion) {
    throw ConfigError(fmt::format("schema_version {} unsupported (expected {})", c.schema_version,
                                  kSchemaVersion));
  }
  // An omitted mean is the origin of the configured dimension.
  if (!nu_mean) c.nu.mean.assign(c.dim, 0.0);
  if (!mu_mean) c.mu.mean.assign(c.dim, 0.0);
  check_config(c);
  return c;
}

ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path));
  return parse_config(in);
}

std::string serialize_config(const ExperimentConfig& c) {
  std::string s;
  auto out = std::back_inserter(s);
  fmt::format_to(out, "schema_version = {}\n", c.schema_version);
  fmt::format_to(out, "model = {}\n", c.model);
  fmt::format_to(out, "dim = {}\n", c.dim);
  fmt::format_to(out, "rho = {}\n", c.rho);
  fmt::format_to(out, "a = {}\n", c.a);
  fmt::format_to(out, "lambda = {}\n", c.lambda);
  fmt::format_to(out, "sign = {}\n", c.sign);
  fmt::format_to(out, "eta = {}\n", c.eta ? fmt::format("{}", *c.eta) : "auto");
  fmt::format_to(out, "h = {}\n", c.h);
  fmt::format_to(out, "t_end = {}\n", c.t_end);
  fmt::format_to(out, "output_dt = {}\n", c.output_dt);
  fmt::format_to(out, "delta = {}\n", c.delta ? fmt::format("{}", *c.delta) : "auto");
  fmt::format_to(out, "M = {}\n", c.M ? fmt::format("{}", *c.M) : "auto");
  fmt::format_to(out, "closure = {}\n", c.closure ? "auto" : "off");
  fmt::format_to(out, "n_list = {}\n", fmt::join(c.n_list, ","));
  fmt::format_to(out, "replications = {}\n", c.replications);
  fmt::format_to(out, "seed = {}\n", c.seed);
  for (const auto& [prefix, law] : {std::pair{"nu", &c.nu}, std::pair{"mu", &c.mu}}) {
    fmt::format_to(out, "{}.kind = {}\n", prefix, law_kind_name(law->kind));
    fmt::format_to(out, "{}.mean = {}\n", prefix, join(law->mean));
    fmt::format_to(out, "{}.scale = {}\n", prefix, law->scale);
  }
  fmt::format_to(out, "coupling = {}\n",
                 c.coupling == InitialCoupling::kSynchronous ? "synchronous" : "independent");
  fmt::format_to(out, "grid_cells = {}\n", c.grid_cells);
  fmt::format_to(out, "quadrature_tol = {}\n", c.quadrature_tol);
  fmt::format_to(out, "validation_samples = {}\n", c.validation_samples);
  fmt::format_to(out, "output_dir = {}\n", c.output_dir);
  return s;
}

void check_config(const ExperimentConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (c.dim == 0) fail("dim must be positive");
  if (c.nu.mean.size() != c.dim) fail("nu.mean must have dim entries");
  if (c.mu.mean.size() != c.dim) fail("mu.mean must have dim entries");
  if (c.nu.scale < 0.0 || c.mu.scale < 0.0) fail("law scale must be nonnegative");
  if (!(c.h > 0.0)) fail("h must be positive");
  if (!(c.t_end >= 0.0)) fail("t_end must be nonnegative");
  if (!(c.output_dt > 0.0)) fail("output_dt must be positive");
  const double steps = c.t_end / c.h;
  if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps)) {
    fail("t_end must be a multiple of h");
  }
  const double every = c.output_dt / c.h;
  if (std::abs(every - std::round(every)) > 1e-9 * std::max(1.0, every)) {
    fail("output_dt must be a multiple of h");
  }
  if (c.delta && !(*c.delta > 0.0)) fail("delta must be positive");
  if (c.eta && !(*c.eta >= 0.0)) fail("eta must be nonnegative");
  if (c.n_list.empty()) fail("n_list must not be empty");
  for (std::size_t n : c.n_list) {
    if (n < 2) fail("every N in n_list must be >= 2");
    if (c.M && *c.M < n) fail("M must be >= every N");
  }
  if (c.replications < 2) fail("replications must be >= 2");
  if (c.grid_cells < 1000) fail("grid_cells must be >= 1000");
  if (!(c.quadrature_tol > 0.0)) fail("quadrature_tol must be positive");
  if (c.validation_samples < 1000) fail("validation_samples must be >= 1000");
}

}  // namespace mfchaos
