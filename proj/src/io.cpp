// SPDX-License-Identifier: Apache-2.0
#include "vortexflux/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "vortexflux/error.hpp"
#include "vortexflux/version.hpp"

namespace fs = std::filesystem;

namespace vflux {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Splits on commas and whitespace.
std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool to_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

double parse_number(const std::string& s, const std::string& origin) {
  double v = 0.0;
  if (!to_double(trim(s), v)) throw IoError(origin + ": expected a number, got '" + s + "'");
  return v;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

// Known keys in canonical order; a null default marks a required key and an
// empty default a key resolved later (aleph) or an empty list.
struct KeySpec {
  const char* section;
  const char* key;
  const char* fallback;
};

constexpr KeySpec kKeys[] = {
    {"grid", "dimension", nullptr},
    {"grid", "extents", nullptr},
    {"grid", "counts", nullptr},
    {"time", "T", nullptr},
    {"time", "cfl", "0.4"},
    {"time", "dt_max", "0.05"},
    {"time", "output_dt", "0"},
    {"time", "implicit_diffusion", "false"},
    {"model", "epsilon", nullptr},
    {"model", "R", nullptr},
    {"model", "aleph", ""},
    {"model", "picard_tol", "1e-10"},
    {"model", "picard_max_iters", "50"},
    {"model", "relaxation", "1"},
    {"model", "lagged", "false"},
    {"model", "boundary_mode", "neumann"},
    {"model", "robin_kappa", "0"},
    {"model", "solver_tol", "1e-10"},
    {"model", "dense_cap", "4096"},
    {"data", "a", nullptr},
    {"data", "b", nullptr},
    {"data", "omega0", nullptr},
    {"extension", "tol_sign", "0"},
    {"extension", "gamma_extension", "taper"},
    {"extension", "taper_length", "0"},
    {"extension", "heat_dt", "0"},
    {"extension", "heat_implicit", "true"},
    {"extension", "mollifier_scale", "1"},
    {"sweep", "eps_list", ""},
    {"sweep", "refine", "false"},
    {"sweep", "r_star", "true"},
    {"sweep", "r_cap_factor", "1024"},
    {"sweep", "bisection_steps", "6"},
    {"sweep", "workers", "1"},
    {"output", "seed", "0"},
    {"output", "psi_count", "3"},
    {"output", "sigmas", ""},
    {"output", "collar_fraction", "0.125"},
};

std::string full_key(const KeySpec& k) { return std::string(k.section) + "." + k.key; }

struct Entry {
  std::string value;
  int line = 0;
  bool given = false;
};

class KeyTable {
 public:
  KeyTable(const std::string& text, std::vector<std::string>& defaults) : defaults_(defaults) {
    std::istringstream is(text);
    std::string raw, section;
    int line = 0;
    while (std::getline(is, raw)) {
      ++line;
      const std::string s = trim(raw);
      if (s.empty() || s[0] == '#' || s[0] == ';') continue;
      if (s.front() == '[') {
        if (s.back() != ']') throw ConfigError("malformed section header", s, line);
        section = trim(std::string_view(s).substr(1, s.size() - 2));
        bool known = false;
        for (const KeySpec& k : kKeys) known = known || section == k.section;
        if (!known) throw ConfigError("unknown section", section, line);
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("expected 'key = value'", s, line);
      const std::string key = trim(std::string_view(s).substr(0, eq));
      if (section.empty()) throw ConfigError("key outside of a section", key, line);
      const std::string full = section + "." + key;
      bool known = false;
      for (const KeySpec& k : kKeys) known = known || full == full_key(k);
      if (!known) throw ConfigError("unknown key", full, line);
      if (entries_.count(full)) throw ConfigError("duplicate key", full, line);
      entries_[full] = {trim(std::string_view(s).substr(eq + 1)), line, true};
    }
    for (const KeySpec& k : kKeys) {
      const std::string full = full_key(k);
      if (entries_.count(full)) continue;
      if (!k.fallback) throw ConfigError("missing required key", full);
      entries_[full] = {k.fallback, 0, false};
      if (*k.fallback) defaults_.push_back(full + " = " + k.fallback);
    }
  }

  const Entry& at(const std::string& key) const { return entries_.at(key); }
  int line(const std::string& key) const { return entries_.at(key).line; }
  bool given(const std::string& key) const { return entries_.at(key).given; }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(msg, key, line(key));
  }

  std::string text(const std::string& key) const { return at(key).value; }

  double real(const std::string& key) const {
    double v = 0.0;
    if (!to_double(at(key).value, v)) fail(key, "expected a number, got '" + at(key).value + "'");
    return v;
  }

  long long integer(const std::string& key) const {
    const double v = real(key);
    if (v != std::floor(v) || std::abs(v) > 9.0e15) fail(key, "expected an integer, got '" + at(key).value + "'");
    return static_cast<long long>(v);
  }

  std::uint64_t unsigned64(const std::string& key) const {
    const std::string& s = at(key).value;
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      fail(key, "expected a nonnegative integer, got '" + s + "'");
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      fail(key, "integer out of range: '" + s + "'");
    }
  }

  bool boolean(const std::string& key) const {
    std::string s = at(key).value;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
    if (s == "false" || s == "no" || s == "off" || s == "0") return false;
    fail(key, "expected true or false, got '" + at(key).value + "'");
  }

  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& item : split_list(at(key).value)) {
      double v = 0.0;
      if (!to_double(item, v)) fail(key, "expected a list of numbers, got '" + item + "'");
      out.push_back(v);
    }
    return out;
  }

  // Full key for a short name used by validation errors.
  std::string resolve(const std::string& name) const {
    for (const KeySpec& k : kKeys)
      if (name == k.key || name == full_key(k)) return full_key(k);
    return name;
  }

 private:
  std::map<std::string, Entry> entries_;
  std::vector<std::string>& defaults_;
};

// "rows: t arc value; t arc value; ..." inline boundary table.
bool is_inline_rows(const std::string& s) { return s.rfind("rows:", 0) == 0; }

BoundaryTable parse_inline_rows(const std::string& s, const std::string& origin) {
  BoundaryTable table;
  std::string body = s.substr(5);
  std::replace(body.begin(), body.end(), ';', '\n');
  std::istringstream is(body);
  std::string row;
  while (std::getline(is, row)) {
    const auto items = split_list(row);
    if (items.empty()) continue;
    BoundaryTable::Row r;
    if (items.size() != 3 || !to_double(items[0], r.t) || !to_double(items[1], r.arc) || !to_double(items[2], r.value))
      throw IoError(origin + ": each inline row needs time, arc and value");
    table.rows.push_back(r);
  }
  if (table.rows.empty()) throw IoError(origin + ": no inline rows");
  return table;
}

std::string format_rows(const BoundaryTable& t) {
  std::string out = "rows:";
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    out += (i ? "; " : " ") + format_double(t.rows[i].t) + " " + format_double(t.rows[i].arc) + " " +
           format_double(t.rows[i].value);
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i]);
  return out;
}

std::string flag(bool b) { return b ? "true" : "false"; }

// Boundary data: a number, inline rows or a CSV path.
BoundaryTable load_table(const KeyTable& kt, const std::string& key, const fs::path& base, std::string& source) {
  const std::string text = kt.text(key);
  double v = 0.0;
  try {
    if (to_double(text, v)) {
      source = format_double(v);
      return BoundaryTable::constant(v);
    }
    if (is_inline_rows(text)) {
      BoundaryTable t = parse_inline_rows(text, key);
      source = format_rows(t);
      return t;
    }
    const fs::path p = fs::absolute(base / text).lexically_normal();
    source = p.string();
    return BoundaryTable::read_csv_file(source);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    kt.fail(key, e.what());
  }
}

}  // namespace

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

ParsedConfig parse_config(const std::string& path) {
  const fs::path p(path);
  if (!fs::exists(p)) throw IoError("config file not found: " + path);
  return parse_config_text(read_file(p), p.has_parent_path() ? p.parent_path() : fs::path("."), path);
}

ParsedConfig parse_config_text(const std::string& text, const fs::path& base, const std::string& origin) {
  ParsedConfig pc;
  pc.origin = origin;
  const KeyTable kt(text, pc.defaults);
  SimConfig& c = pc.config;

  try {
    const long long dim = kt.integer("grid.dimension");
    if (dim != 1 && dim != 2) kt.fail("grid.dimension", "dimension must be 1 or 2");
    const std::vector<double> extents = kt.reals("grid.extents");
    std::vector<std::size_t> counts;
    for (double n : kt.reals("grid.counts")) {
      if (n != std::floor(n) || n < 0) kt.fail("grid.counts", "counts must be nonnegative integers");
      counts.push_back(static_cast<std::size_t>(n));
    }
    if (extents.size() != static_cast<std::size_t>(dim)) kt.fail("grid.extents", "one extent per dimension");
    if (counts.size() != static_cast<std::size_t>(dim)) kt.fail("grid.counts", "one count per dimension");
    try {
      c.grid = Grid::build(static_cast<int>(dim), extents, counts);
    } catch (const ConfigError& e) {
      const std::string key = kt.resolve(e.key().empty() ? "grid.counts" : "grid." + e.key());
      kt.fail(key, e.message());
    }

    c.T = kt.real("time.T");
    c.cfl = kt.real("time.cfl");
    c.dt_max = kt.real("time.dt_max");
    c.output_dt = kt.real("time.output_dt");
    c.implicit_diffusion = kt.boolean("time.implicit_diffusion");

    c.epsilon = kt.real("model.epsilon");
    c.R = kt.real("model.R");
    c.picard_tol = kt.real("model.picard_tol");
    c.picard_max_iters = static_cast<int>(kt.integer("model.picard_max_iters"));
    c.relaxation = kt.real("model.relaxation");
    c.lagged = kt.boolean("model.lagged");
    try {
      c.elliptic.mode = parse_boundary_mode(kt.text("model.boundary_mode"));
    } catch (const ConfigError& e) {
      kt.fail("model.boundary_mode", e.message());
    }
    c.elliptic.robin_kappa = kt.real("model.robin_kappa");
    c.elliptic.solver_tol = kt.real("model.solver_tol");
    if (!(c.elliptic.solver_tol > 0.0)) kt.fail("model.solver_tol", "solver_tol must be positive");
    const long long cap = kt.integer("model.dense_cap");
    if (cap < 1) kt.fail("model.dense_cap", "dense_cap must be positive");
    c.elliptic.dense_cap = static_cast<std::size_t>(cap);

    c.data.a = load_table(kt, "data.a", base, pc.a_source);
    c.data.b = load_table(kt, "data.b", base, pc.b_source);
    {
      const std::string text0 = kt.text("data.omega0");
      double v = 0.0;
      if (to_double(text0, v)) {
        pc.omega0_source = format_double(v);
        c.data.set_omega0(c.grid, constant_field(c.grid, v));
      } else {
        const fs::path p = fs::absolute(base / text0).lexically_normal();
        pc.omega0_source = p.string();
        try {
          FieldFile f = read_field_file(p);
          c.data.set_omega0(f.grid, std::move(f.values));
        } catch (const ConfigError&) {
          throw;
        } catch (const Error& e) {
          kt.fail("data.omega0", e.what());
        }
      }
    }

    c.extension.tol_sign = kt.real("extension.tol_sign");
    if (!(c.extension.tol_sign >= 0.0)) kt.fail("extension.tol_sign", "tol_sign must be nonnegative");
    try {
      c.extension.gamma = parse_gamma_extension(kt.text("extension.gamma_extension"));
    } catch (const ConfigError& e) {
      kt.fail("extension.gamma_extension", e.message());
    }
    c.extension.taper_length = kt.real("extension.taper_length");
    if (!(c.extension.taper_length >= 0.0)) kt.fail("extension.taper_length", "taper_length must be nonnegative");
    c.extension.heat_dt = kt.real("extension.heat_dt");
    if (!(c.extension.heat_dt >= 0.0)) kt.fail("extension.heat_dt", "heat_dt must be nonnegative");
    c.extension.heat_implicit = kt.boolean("extension.heat_implicit");
    c.extension.mollifier_scale = kt.real("extension.mollifier_scale");
    if (!(c.extension.mollifier_scale >= 0.0))
      kt.fail("extension.mollifier_scale", "mollifier_scale must be nonnegative");

    c.sweep.eps_list = kt.reals("sweep.eps_list");
    c.sweep.refine = kt.boolean("sweep.refine");
    c.sweep.r_star = kt.boolean("sweep.r_star");
    c.sweep.r_cap_factor = kt.real("sweep.r_cap_factor");
    if (!(c.sweep.r_cap_factor >= 2.0)) kt.fail("sweep.r_cap_factor", "r_cap_factor must be at least 2");
    c.sweep.bisection_steps = static_cast<int>(kt.integer("sweep.bisection_steps"));
    if (c.sweep.bisection_steps < 0) kt.fail("sweep.bisection_steps", "bisection_steps must be nonnegative");
    const long long workers = kt.integer("sweep.workers");
    if (workers < 1) kt.fail("sweep.workers", "workers must be at least 1");
    pc.workers = static_cast<std::size_t>(workers);

    c.seed = kt.unsigned64("output.seed");
    const long long psi = kt.integer("output.psi_count");
    if (psi < 0) kt.fail("output.psi_count", "psi_count must be nonnegative");
    c.checks.psi_count = static_cast<std::size_t>(psi);
    c.checks.sigmas = kt.reals("output.sigmas");
    for (double s : c.checks.sigmas)
      if (!(s > 0.0 && 2.0 * s < 0.5 * c.grid.min_extent()))
        kt.fail("output.sigmas", "each sigma must satisfy 0 < 2 sigma < min_extent / 2");
    c.checks.collar_fraction = kt.real("output.collar_fraction");
    if (!(c.checks.collar_fraction > 0.0 && c.checks.collar_fraction < 0.5))
      kt.fail("output.collar_fraction", "collar_fraction must lie in (0, 0.5)");

    if (kt.given("model.aleph")) {
      c.aleph = kt.real("model.aleph");
      if (!(c.aleph >= 0.0) || !std::isfinite(c.aleph)) kt.fail("model.aleph", "aleph must be nonnegative");
    } else {
      c.default_aleph();
      pc.defaults.push_back("model.aleph = " + format_double(c.aleph) + " (max of omega0 and b samples)");
    }
    c.validate();
  } catch (const ConfigError& e) {
    if (e.line() > 0 || e.key().find('.') != std::string::npos) throw;
    const std::string key = kt.resolve(e.key());
    throw ConfigError(e.message(), key, key.find('.') != std::string::npos ? kt.line(key) : 0);
  }
  std::sort(pc.defaults.begin(), pc.defaults.end(), [](const std::string& x, const std::string& y) {
    auto order = [](const std::string& s) {
      const std::string key = s.substr(0, s.find(' '));
      for (std::size_t i = 0; i < std::size(kKeys); ++i)
        if (full_key(kKeys[i]) == key) return i;
      return std::size(kKeys);
    };
    return order(x) < order(y);
  });
  return pc;
}

std::string canonical_text(const ParsedConfig& pc) {
  const SimConfig& c = pc.config;
  const Grid& g = c.grid;
  std::vector<double> extents, counts;
  for (int ax = 0; ax < g.dimension(); ++ax) {
    extents.push_back(g.extent(ax));
    counts.push_back(static_cast<double>(g.count(ax)));
  }
  std::map<std::string, std::string> v = {
      {"grid.dimension", std::to_string(g.dimension())},
      {"grid.extents", join(extents)},
      {"grid.counts", join(counts)},
      {"time.T", format_double(c.T)},
      {"time.cfl", format_double(c.cfl)},
      {"time.dt_max", format_double(c.dt_max)},
      {"time.output_dt", format_double(c.output_dt)},
      {"time.implicit_diffusion", flag(c.implicit_diffusion)},
      {"model.epsilon", format_double(c.epsilon)},
      {"model.R", format_double(c.R)},
      {"model.aleph", format_double(c.aleph)},
      {"model.picard_tol", format_double(c.picard_tol)},
      {"model.picard_max_iters", std::to_string(c.picard_max_iters)},
      {"model.relaxation", format_double(c.relaxation)},
      {"model.lagged", flag(c.lagged)},
      {"model.boundary_mode", to_string(c.elliptic.mode)},
      {"model.robin_kappa", format_double(c.elliptic.robin_kappa)},
      {"model.solver_tol", format_double(c.elliptic.solver_tol)},
      {"model.dense_cap", std::to_string(c.elliptic.dense_cap)},
      {"data.a", pc.a_source},
      {"data.b", pc.b_source},
      {"data.omega0", pc.omega0_source},
      {"extension.tol_sign", format_double(c.extension.tol_sign)},
      {"extension.gamma_extension", to_string(c.extension.gamma)},
      {"extension.taper_length", format_double(c.extension.taper_length)},
      {"extension.heat_dt", format_double(c.extension.heat_dt)},
      {"extension.heat_implicit", flag(c.extension.heat_implicit)},
      {"extension.mollifier_scale", format_double(c.extension.mollifier_scale)},
      {"sweep.eps_list", join(c.sweep.eps_list)},
      {"sweep.refine", flag(c.sweep.refine)},
      {"sweep.r_star", flag(c.sweep.r_star)},
      {"sweep.r_cap_factor", format_double(c.sweep.r_cap_factor)},
      {"sweep.bisection_steps", std::to_string(c.sweep.bisection_steps)},
      {"sweep.workers", std::to_string(pc.workers)},
      {"output.seed", std::to_string(c.seed)},
      {"output.psi_count", std::to_string(c.checks.psi_count)},
      {"output.sigmas", join(c.checks.sigmas)},
      {"output.collar_fraction", format_double(c.checks.collar_fraction)},
  };
  std::ostringstream os;
  std::string section;
  for (const KeySpec& k : kKeys) {
    if (section != k.section) {
      os << (section.empty() ? "" : "\n") << '[' << k.section << "]\n";
      section = k.section;
    }
    const std::string& val = v.at(full_key(k));
    os << k.key << " =" << (val.empty() ? "" : " ") << val << '\n';
  }
  return os.str();
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 1099511628211ull;
  }
  return state;
}

std::uint64_t config_hash(const ParsedConfig& pc) {
  std::string text = canonical_text(pc);
  // Workers do not change the trajectory.
  const auto w = text.find("\nworkers =");
  if (w != std::string::npos) text.erase(w + 1, text.find('\n', w + 1) - w);
  std::uint64_t h = fnv1a64(text);
  const ModelData& d = pc.config.data;
  std::ostringstream os;
  d.a.write_csv(os);
  d.b.write_csv(os);
  write_field_csv(os, d.omega0_grid, 0.0, d.omega0);
  return fnv1a64(os.str(), h);
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

void write_field_csv(std::ostream& os, const Grid& grid, double t, std::span<const double> values) {
  if (values.size() != grid.size()) throw IoError("field size does not match the grid");
  grid.write_header(os);
  os << "# time " << format_double(t) << '\n';
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const auto ij = grid.ij(k);
    os << ij[0];
    if (grid.dimension() == 2) os << ',' << ij[1];
    os << ',' << format_double(values[k]) << '\n';
  }
}

FieldFile read_field_csv(std::istream& is, const std::string& origin) {
  FieldFile f;
  try {
    f.grid = read_grid_header(is);
  } catch (const Error& e) {
    throw IoError(origin + ": " + e.what());
  }
  std::string line;
  if (!std::getline(is, line)) throw IoError(origin + ": missing time header");
  {
    std::istringstream ls(line);
    std::string hash, key, val;
    ls >> hash >> key >> val;
    if (hash != "#" || key != "time" || !to_double(val, f.t)) throw IoError(origin + ": malformed time header");
  }
  const Grid& g = f.grid;
  f.values.assign(g.size(), 0.0);
  std::vector<char> seen(g.size(), 0);
  std::size_t rows = 0;
  int lineno = 4;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto items = split_list(line);
    const std::size_t want = static_cast<std::size_t>(g.dimension()) + 1;
    double idx[2] = {0.0, 0.0}, v = 0.0;
    bool ok = items.size() == want;
    for (std::size_t a = 0; ok && a + 1 < want; ++a) ok = to_double(items[a], idx[a]);
    ok = ok && to_double(items.back(), v);
    if (!ok) throw IoError(origin + ": malformed row at line " + std::to_string(lineno));
    for (int a = 0; a < g.dimension(); ++a)
      if (idx[a] < 0 || idx[a] != std::floor(idx[a]) || idx[a] >= static_cast<double>(g.count(a)))
        throw IoError(origin + ": node index out of range at line " + std::to_string(lineno));
    const std::size_t k = g.index(static_cast<std::size_t>(idx[0]), static_cast<std::size_t>(idx[1]));
    if (seen[k]) throw IoError(origin + ": duplicate node at line " + std::to_string(lineno));
    seen[k] = 1;
    f.values[k] = v;
    ++rows;
  }
  if (rows != g.size())
    throw IoError(origin + ": expected " + std::to_string(g.size()) + " rows, found " + std::to_string(rows));
  return f;
}

FieldFile read_field_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_field_csv(in, path.string());
}

void write_field_file(const fs::path& path, const Grid& grid, double t, std::span<const double> values) {
  auto out = open_out(path);
  write_field_csv(out, grid, t, values);
}

namespace {

constexpr const char* kStepsHeader =
    "t,dt,iterations,contraction,l1,min_omega,max_omega,max_h,max_grad_h,grad_sq,mass_defect,retries";

}  // namespace

void write_steps_csv(std::ostream& os, const std::vector<StepStats>& steps) {
  os << kStepsHeader << '\n';
  for (const StepStats& s : steps)
    os << format_double(s.t) << ',' << format_double(s.dt) << ',' << s.iterations << ',' << format_double(s.contraction)
       << ',' << format_double(s.l1) << ',' << format_double(s.min_omega) << ',' << format_double(s.max_omega) << ','
       << format_double(s.max_h) << ',' << format_double(s.max_grad_h) << ',' << format_double(s.grad_sq) << ','
       << format_double(s.mass_defect) << ',' << s.retries << '\n';
}

std::vector<StepStats> read_steps_csv(std::istream& is, const std::string& origin) {
  std::string line;
  if (!std::getline(is, line) || trim(line) != kStepsHeader) throw IoError(origin + ": unexpected header");
  std::vector<StepStats> out;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto items = split_list(line);
    double v[12];
    bool ok = items.size() == 12;
    for (std::size_t i = 0; ok && i < 12; ++i) ok = to_double(items[i], v[i]);
    if (!ok) throw IoError(origin + ": malformed row at line " + std::to_string(lineno));
    StepStats s;
    s.t = v[0];
    s.dt = v[1];
    s.iterations = static_cast<int>(v[2]);
    s.contraction = v[3];
    s.l1 = v[4];
    s.min_omega = v[5];
    s.max_omega = v[6];
    s.max_h = v[7];
    s.max_grad_h = v[8];
    s.grad_sq = v[9];
    s.mass_defect = v[10];
    s.retries = static_cast<int>(v[11]);
    out.push_back(s);
  }
  return out;
}

void write_dat(const fs::path& path, const std::string& header, const std::vector<std::pair<double, double>>& rows) {
  auto out = open_out(path);
  out << "# " << header << '\n';
  for (const auto& [x, y] : rows) out << format_double(x) << ' ' << format_double(y) << '\n';
}

void write_manifest(const fs::path& path, const RunManifest& m) {
  nlohmann::ordered_json j;
  j["config_hash"] = m.config_hash;
  j["run_id"] = m.run_id;
  j["started"] = m.started;
  j["finished"] = m.finished;
  j["seed"] = m.seed;
  j["files"] = m.files;
  j["defaults"] = m.defaults;
  j["metadata"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.metadata) j["metadata"][k] = v;
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

RunManifest read_manifest(const fs::path& path) {
  RunManifest m;
  try {
    const nlohmann::json j = nlohmann::json::parse(read_file(path));
    m.config_hash = j.at("config_hash").get<std::string>();
    m.run_id = j.at("run_id").get<std::string>();
    m.started = j.at("started").get<std::string>();
    m.finished = j.at("finished").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.files = j.at("files").get<std::vector<std::string>>();
    m.defaults = j.at("defaults").get<std::vector<std::string>>();
    m.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return m;
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

std::string snapshot_name(const char* stem, std::size_t i) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "fields/%s_%05zu.csv", stem, i);
  return buf;
}

std::string compact(const std::string& stamp) {
  std::string out;
  for (char c : stamp)
    if (c != '-' && c != ':') out += c;
  return out;
}

double metadata_number(const RunManifest& m, const std::string& key, const fs::path& path) {
  const auto it = m.metadata.find(key);
  if (it == m.metadata.end()) throw IoError(path.string() + ": manifest lacks " + key);
  return parse_number(it->second, path.string() + " " + key);
}

void write_report(const fs::path& path, const InvariantReport& report) {
  auto out = open_out(path);
  report.write_csv(out);
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

RunManifest base_manifest(const ParsedConfig& pc, const std::string& started) {
  RunManifest m;
  m.config_hash = hex64(config_hash(pc));
  m.started = started;
  m.run_id = "vf-" + m.config_hash.substr(0, 12) + "-" + compact(started);
  m.seed = pc.config.seed;
  m.defaults = pc.defaults;
  m.metadata["version"] = kVersion;
  m.metadata["config_origin"] = pc.origin;
  m.metadata["grid"] = pc.config.grid.describe();
  return m;
}

}  // namespace

std::vector<std::string> write_trajectory(const fs::path& dir, const Trajectory& traj) {
  std::vector<std::string> files;
  for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
    const Snapshot& s = traj.snapshots[i];
    files.push_back(snapshot_name("omega", i));
    write_field_file(dir / files.back(), traj.grid, s.t, s.omega);
    files.push_back(snapshot_name("h", i));
    write_field_file(dir / files.back(), traj.grid, s.t, s.h);
  }
  auto out = open_out(dir / "steps.csv");
  write_steps_csv(out, traj.steps);
  files.push_back("steps.csv");
  return files;
}

Trajectory load_trajectory(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("run directory not found: " + dir.string());
  const RunManifest m = read_manifest(dir / "manifest.json");
  Trajectory traj;
  traj.epsilon = metadata_number(m, "epsilon", dir / "manifest.json");
  traj.R = metadata_number(m, "R", dir / "manifest.json");
  traj.aleph = metadata_number(m, "aleph", dir / "manifest.json");
  const std::size_t count = static_cast<std::size_t>(metadata_number(m, "snapshots", dir / "manifest.json"));
  for (std::size_t i = 0; i < count; ++i) {
    const FieldFile w = read_field_file(dir / snapshot_name("omega", i));
    const FieldFile h = read_field_file(dir / snapshot_name("h", i));
    if (i == 0) traj.grid = w.grid;
    if (!(w.grid == traj.grid) || !(h.grid == traj.grid) || w.t != h.t)
      throw IoError(dir.string() + ": snapshot " + std::to_string(i) + " does not match the first grid or time");
    traj.snapshots.push_back({w.t, w.values, h.values});
  }
  std::ifstream in(dir / "steps.csv");
  if (!in) throw IoError("cannot open " + (dir / "steps.csv").string());
  traj.steps = read_steps_csv(in, (dir / "steps.csv").string());
  return traj;
}

std::map<std::string, std::string> extension_metadata(const ExtensionResult& ext, const SimConfig& cfg) {
  return {{"mollifier", ext.mollifier},
          {"mollifier_radius", format_double(ext.mollifier_radius)},
          {"aleph_measured", format_double(ext.aleph_measured)},
          {"aleph_defaulted", flag(cfg.aleph_defaulted)},
          {"gamma_extension", to_string(cfg.extension.gamma)}};
}

CommandResult write_run_directory(const fs::path& dir, const ParsedConfig& pc, const Trajectory& traj,
                                  const InvariantReport& report, const std::string& started,
                                  const std::map<std::string, std::string>& metadata) {
  CommandResult res;
  res.report = report;
  res.files = write_trajectory(dir, traj);

  std::vector<std::pair<double, double>> l1, mx;
  for (const Snapshot& s : traj.snapshots) {
    l1.emplace_back(s.t, l1_norm(traj.grid, s.omega));
    mx.emplace_back(s.t, *std::max_element(s.omega.begin(), s.omega.end()));
  }
  write_dat(dir / "l1_series.dat", "t l1_norm", l1);
  write_dat(dir / "max_omega.dat", "t max_omega", mx);
  write_report(dir / "diagnostics.csv", report);
  write_text(dir / "config.resolved.ini", canonical_text(pc));
  for (const char* f : {"l1_series.dat", "max_omega.dat", "diagnostics.csv", "config.resolved.ini", "manifest.json"})
    res.files.emplace_back(f);

  RunManifest m = base_manifest(pc, started);
  m.metadata.insert(metadata.begin(), metadata.end());
  m.metadata["epsilon"] = format_double(traj.epsilon);
  m.metadata["R"] = format_double(traj.R);
  m.metadata["aleph"] = format_double(traj.aleph);
  m.metadata["snapshots"] = std::to_string(traj.snapshots.size());
  m.metadata["steps"] = std::to_string(traj.steps.size());
  m.metadata["checks_passed"] = flag(report.passed());
  m.files = res.files;
  m.finished = utc_now();
  write_manifest(dir / "manifest.json", m);
  return res;
}

CommandResult cmd_run(const ParsedConfig& pc, const fs::path& out) {
  const std::string started = utc_now();
  const SimConfig& cfg = pc.config;
  const ExtensionResult ext = make_extension(cfg);
  const Trajectory traj = run(cfg, ext);
  const InvariantReport report = validate_trajectory(traj, ext, cfg);
  auto meta = extension_metadata(ext, cfg);
  meta["command"] = "run";
  return write_run_directory(out, pc, traj, report, started, meta);
}

CommandResult cmd_validate(const fs::path& run_dir) {
  return cmd_validate(parse_config((run_dir / "config.resolved.ini").string()), run_dir);
}

CommandResult cmd_validate(const ParsedConfig& pc, const fs::path& run_dir) {
  const Trajectory traj = load_trajectory(run_dir);
  const RunManifest m = read_manifest(run_dir / "manifest.json");
  const SimConfig& cfg = pc.config;
  const ExtensionResult ext = make_extension(cfg);
  CommandResult res;
  res.report = validate_trajectory(traj, ext, cfg);
  const bool same = m.config_hash == hex64(config_hash(pc));
  res.report.add("config_hash", same, same ? 0.0 : 1.0, 0.0, "manifest hash matches the resolved configuration");
  const bool params = traj.epsilon == cfg.epsilon && traj.R == cfg.R && traj.aleph == cfg.aleph && traj.grid == cfg.grid;
  res.report.add("run_parameters", params, params ? 0.0 : 1.0, 0.0,
                 "stored epsilon, R, aleph and grid match the configuration");
  return res;
}

namespace {

std::string member_dir(std::size_t k) { return "eps_" + std::to_string(k); }

ParsedConfig with_epsilon(const ParsedConfig& pc, double eps) {
  ParsedConfig out = pc;
  out.config.epsilon = eps;
  return out;
}

}  // namespace

CommandResult cmd_sweep(const ParsedConfig& pc, const fs::path& out, std::size_t workers) {
  const std::string started = utc_now();
  const SimConfig& cfg = pc.config;
  if (cfg.sweep.eps_list.empty()) throw ConfigError("a sweep needs a nonempty eps_list", "sweep.eps_list");
  workers = std::max<std::size_t>(1, workers);

  const FamilyResult fam = eps_continuation(cfg, cfg.sweep.eps_list, workers);
  InvariantReport report = family_report(fam);
  CommandResult res;

  std::size_t member_failures = 0;
  std::vector<double> sigmas = cfg.checks.sigmas;
  if (sigmas.empty()) sigmas = {cfg.grid.min_extent() / 16.0, cfg.grid.min_extent() / 32.0, cfg.grid.min_extent() / 64.0};
  struct LayerRow {
    double epsilon;
    LayerFlux flux;
  };
  std::vector<LayerRow> layer;

  std::ostringstream family_csv;
  family_csv << "epsilon,max_l1,max_omega,max_grad_h,gradient_energy,checks_passed,error\n";
  for (std::size_t k = 0; k < fam.members.size(); ++k) {
    const FamilyMember& mem = fam.members[k];
    const fs::path dir = out / member_dir(k);
    bool ok = false;
    if (mem.trajectory) {
      const ParsedConfig mpc = with_epsilon(pc, mem.epsilon);
      const InvariantReport rep = validate_trajectory(*mem.trajectory, *mem.extension, mpc.config);
      ok = rep.passed();
      auto meta = extension_metadata(*mem.extension, mpc.config);
      meta["command"] = "sweep";
      const CommandResult sub = write_run_directory(dir, mpc, *mem.trajectory, rep, started, meta);
      for (const std::string& f : sub.files) res.files.push_back(member_dir(k) + "/" + f);
      const auto psis = make_test_functions(cfg.grid, mem.extension->classification, cfg.T, 1, cfg.seed);
      if (!psis.empty())
        for (double s : sigmas)
          layer.push_back({mem.epsilon, boundary_layer_flux(*mem.trajectory, *mem.extension, s, psis.front(), cfg.data)});
    } else {
      write_text(dir / "error.txt", mem.error + "\n");
      res.files.push_back(member_dir(k) + "/error.txt");
    }
    if (!ok) ++member_failures;
    family_csv << format_double(mem.epsilon) << ',' << format_double(mem.max_l1) << ',' << format_double(mem.max_omega)
               << ',' << format_double(mem.max_grad_h) << ',' << format_double(mem.gradient_energy) << ','
               << flag(ok) << ",\"" << mem.error << "\"\n";
  }
  report.add("member_checks", member_failures == 0, static_cast<double>(member_failures), 0.0,
             "members whose single-run checks failed");

  write_text(out / "family.csv", family_csv.str());
  std::ostringstream cauchy;
  cauchy << "eps_coarse,eps_fine,distance\n";
  std::vector<std::pair<double, double>> cauchy_dat;
  for (const CauchyEntry& c : fam.cauchy) {
    cauchy << format_double(c.eps_coarse) << ',' << format_double(c.eps_fine) << ',' << format_double(c.distance) << '\n';
    cauchy_dat.emplace_back(c.eps_fine, c.distance);
  }
  write_text(out / "cauchy_table.csv", cauchy.str());
  write_dat(out / "cauchy.dat", "eps_fine l2_hminus1_distance", cauchy_dat);

  std::vector<std::pair<double, double>> l1, mx, ge, gh;
  for (const FamilyMember& m : fam.members) {
    if (!m.trajectory) continue;
    l1.emplace_back(m.epsilon, m.max_l1);
    mx.emplace_back(m.epsilon, m.max_omega);
    ge.emplace_back(m.epsilon, m.gradient_energy);
    gh.emplace_back(m.epsilon, m.max_grad_h);
  }
  write_dat(out / "l1_max.dat", "epsilon max_l1_norm", l1);
  write_dat(out / "max_omega.dat", "epsilon max_omega", mx);
  write_dat(out / "gradient_energy.dat", "epsilon sqrt_eps_grad_norm", ge);
  write_dat(out / "grad_h_max.dat", "epsilon max_grad_h", gh);

  std::ostringstream layer_csv;
  layer_csv << "epsilon,sigma,J1,J2,target\n";
  for (const LayerRow& r : layer)
    layer_csv << format_double(r.epsilon) << ',' << format_double(r.flux.sigma) << ',' << format_double(r.flux.J1)
              << ',' << format_double(r.flux.J2) << ',' << format_double(r.flux.target) << '\n';
  write_text(out / "layer_table.csv", layer_csv.str());
  if (!layer.empty()) {
    // Supremum over the family as the limsup surrogate, per sigma in decreasing order.
    std::vector<double> sorted = sigmas;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    std::vector<double> sup;
    for (double s : sorted) {
      double m = 0.0;
      for (const LayerRow& r : layer)
        if (r.flux.sigma == s) m = std::max(m, r.flux.J1);
      sup.push_back(m);
      char name[64];
      std::snprintf(name, sizeof name, "layer_J1_sup_sigma%.6g", s);
      report.info(name, m, "sup over the family of the boundary-layer term with |w - w_breve_eps|");
    }
    bool monotone = sup.size() >= 2;
    double worst = 0.0;
    for (std::size_t i = 1; i < sup.size(); ++i) {
      monotone = monotone && sup[i] < sup[i - 1];
      worst = std::max(worst, sup[i] / sup[i - 1]);
    }
    report.add("layer_J1_decreasing", monotone, worst, 1.0, "sup over epsilon of J1 decreases with sigma (largest ratio)");
    const double finest_eps = fam.members.back().epsilon;
    for (const LayerRow& r : layer) {
      if (r.epsilon != finest_eps || r.flux.sigma != sorted.back()) continue;
      const double err = std::abs(r.flux.J2 - r.flux.target) / std::max(std::abs(r.flux.target), 1e-300);
      report.add("layer_J2_error", err <= 0.05, err, 0.05, "J2 against -int int a b psi at the finest epsilon and sigma");
    }
  }

  if (cfg.sweep.r_star) {
    const RStarResult r = estimate_R_star(cfg, make_extension(cfg), workers);
    add_r_star_entries(report, r);
    std::ostringstream rs;
    rs << "R,max_omega,difference,passed\n";
    for (const RProbe& p : r.probes)
      rs << format_double(p.R) << ',' << format_double(p.max_omega) << ',' << format_double(p.difference) << ','
         << flag(p.passed) << '\n';
    write_text(out / "r_star.csv", rs.str());
    res.files.emplace_back("r_star.csv");
  }

  write_report(out / "diagnostics.csv", report);
  write_text(out / "config.resolved.ini", canonical_text(pc));
  for (const char* f : {"family.csv", "cauchy_table.csv", "cauchy.dat", "l1_max.dat", "max_omega.dat",
                        "gradient_energy.dat", "grad_h_max.dat", "layer_table.csv", "diagnostics.csv",
                        "config.resolved.ini", "manifest.json"})
    res.files.emplace_back(f);
  RunManifest m = base_manifest(pc, started);
  m.metadata["command"] = "sweep";
  m.metadata["members"] = std::to_string(fam.members.size());
  m.metadata["workers"] = std::to_string(workers);
  m.metadata["checks_passed"] = flag(report.passed());
  m.files = res.files;
  m.finished = utc_now();
  write_manifest(out / "manifest.json", m);
  res.report = std::move(report);
  return res;
}

CommandResult cmd_extend(const ParsedConfig& pc, const fs::path& out) {
  const std::string started = utc_now();
  const SimConfig& cfg = pc.config;
  const Grid& g = cfg.grid;
  const ExtensionResult ext = make_extension(cfg);
  CommandResult res;
  InvariantReport& rep = res.report;
  rep.epsilon = cfg.epsilon;
  rep.R = cfg.R;
  rep.grid = g.describe();

  const Field w0 = cfg.data.omega0_on(g);
  const double inputs = std::max(*std::max_element(w0.begin(), w0.end()), ext.b_ext.max());
  rep.add("omega_breve_lower", ext.omega_breve.min() >= 0.0, ext.omega_breve.min(), 0.0,
          "heat extension stays nonnegative");
  rep.add("omega_breve_upper", ext.omega_breve.max() <= inputs + 1e-12, ext.omega_breve.max() - inputs, 1e-12,
          "heat extension stays below max(omega0, b_ext)");
  rep.add("omega_breve_eps_range",
          ext.omega_breve_eps.min() >= 0.0 && ext.omega_breve_eps.max() <= cfg.aleph,
          std::max(-ext.omega_breve_eps.min(), ext.omega_breve_eps.max() - cfg.aleph) + 0.0, 0.0,
          "mollified extension lies in [0, aleph]");
  bool labels_ok = true;
  for (const Field& a : ext.a_eps.values())
    labels_ok = labels_ok && classify_boundary(g, a, cfg.extension.tol_sign).labels == ext.classification.labels;
  rep.add("a_eps_sign_pattern", labels_ok, labels_ok ? 0.0 : 1.0, 0.0, "mollified a keeps the boundary labels");
  rep.info("aleph_measured", ext.aleph_measured, "max of the extension before the clamp");
  rep.info("mollifier_radius", ext.mollifier_radius, "mollifier radius");
  rep.info("measure_plus", ext.classification.measure_plus, "outflow boundary measure");
  rep.info("measure_zero", ext.classification.measure_zero, "tangential boundary measure");
  rep.info("measure_minus", ext.classification.measure_minus, "inflow boundary measure");

  std::ostringstream cls;
  cls << "slot,node,arc,measure,label,a\n";
  const Field a0 = cfg.data.a_on(g).at(0.0);
  for (std::size_t s = 0; s < g.boundary().size(); ++s) {
    const BoundaryNode& n = g.boundary()[s];
    cls << s << ',' << n.node << ',' << format_double(n.arc) << ',' << format_double(n.measure) << ','
        << to_string(ext.classification.labels[s]) << ',' << format_double(a0[s]) << '\n';
  }
  write_text(out / "classification.csv", cls.str());

  auto series_csv = [&](const BoundarySeries& s) {
    std::ostringstream os;
    os << "time,arc,value\n";
    for (std::size_t i = 0; i < s.times().size(); ++i)
      for (std::size_t k = 0; k < g.boundary().size(); ++k)
        os << format_double(s.times()[i]) << ',' << format_double(g.boundary()[k].arc) << ','
           << format_double(s.values()[i][k]) << '\n';
    return os.str();
  };
  write_text(out / "b_ext.csv", series_csv(ext.b_ext));
  write_text(out / "a_eps.csv", series_csv(ext.a_eps));
  for (const char* f : {"classification.csv", "b_ext.csv", "a_eps.csv"}) res.files.emplace_back(f);

  for (std::size_t i = 0; i < ext.omega_breve.times.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "fields/omega_breve_%05zu.csv", i);
    write_field_file(out / name, g, ext.omega_breve.times[i], ext.omega_breve.values[i]);
    res.files.emplace_back(name);
  }
  for (std::size_t i = 0; i < ext.omega_breve_eps.times.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "fields/omega_breve_eps_%05zu.csv", i);
    write_field_file(out / name, g, ext.omega_breve_eps.times[i], ext.omega_breve_eps.values[i]);
    res.files.emplace_back(name);
  }

  write_report(out / "diagnostics.csv", rep);
  write_text(out / "config.resolved.ini", canonical_text(pc));
  for (const char* f : {"diagnostics.csv", "config.resolved.ini", "manifest.json"}) res.files.emplace_back(f);
  RunManifest m = base_manifest(pc, started);
  m.metadata.merge(extension_metadata(ext, cfg));
  m.metadata["command"] = "extend";
  m.metadata["levels"] = std::to_string(ext.omega_breve.times.size());
  m.metadata["checks_passed"] = flag(rep.passed());
  m.files = res.files;
  m.finished = utc_now();
  write_manifest(out / "manifest.json", m);
  return res;
}

}  // namespace vflux
