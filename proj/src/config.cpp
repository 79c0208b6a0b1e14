#include "evohom/config.hpp"

#include "evohom/errors.hpp"
#include "evohom/unit_cell.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace evohom {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_number(const std::string& where, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError(where + ": '" + text + "' is not a number");
  }
  while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used])))
    ++used;
  if (used != text.size() || !std::isfinite(v))
    throw ConfigError(where + ": '" + text + "' is not a finite number");
  return v;
}

int parse_int(const std::string& where, const std::string& text) {
  const double v = parse_number(where, text);
  if (v != std::floor(v) || std::fabs(v) > 1e9)
    throw ConfigError(where + ": '" + text + "' is not an integer");
  return static_cast<int>(v);
}

bool parse_bool(const std::string& where, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on")
    return true;
  if (text == "false" || text == "0" || text == "no" || text == "off")
    return false;
  throw ConfigError(where + ": '" + text + "' is not a boolean");
}

// Comma-separated list; entries may be written as 1/8.
std::vector<double> parse_list(const std::string& where, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    const auto slash = item.find('/');
    if (slash == std::string::npos) {
      out.push_back(parse_number(where, item));
    } else {
      const double a = parse_number(where, item.substr(0, slash)), b = parse_number(where, item.substr(slash + 1));
      if (b == 0.0)
        throw ConfigError(where + ": division by zero in '" + item + "'");
      out.push_back(a / b);
    }
  }
  if (out.empty())
    throw ConfigError(where + ": empty list");
  return out;
}

double parse_scalar(const std::string& where, const std::string& text) {
  const auto v = parse_list(where, text);
  if (v.size() != 1)
    throw ConfigError(where + ": expected a single value");
  return v[0];
}

using Setter = std::function<void(ExperimentConfig&, const std::string& where, const std::string& value)>;

const std::map<std::string, std::map<std::string, Setter>>& schema() {
  static const std::map<std::string, std::map<std::string, Setter>> s{
      {"geometry",
       {{"r_min", [](auto& c, auto& w, auto& v) { c.geometry.r_min = parse_number(w, v); }},
        {"r_max", [](auto& c, auto& w, auto& v) { c.geometry.r_max = parse_number(w, v); }},
        {"r0", [](auto& c, auto& w, auto& v) { c.geometry.r0 = parse_number(w, v); }},
        {"delta", [](auto& c, auto& w, auto& v) { c.geometry.delta = parse_number(w, v); }},
        {"quadrature_points", [](auto& c, auto& w, auto& v) { c.geometry.quadrature_points = parse_int(w, v); }},
        {"normalize_mollifier",
         [](auto& c, auto& w, auto& v) { c.geometry.normalize_mollifier = parse_bool(w, v); }}}},
      {"kinetics",
       {{"family", [](auto& c, auto&, auto& v) { c.kinetics.family = v; }},
        {"gate_width", [](auto& c, auto& w, auto& v) { c.kinetics.gate_width = parse_number(w, v); }},
        {"slope", [](auto& c, auto& w, auto& v) { c.kinetics.slope = parse_number(w, v); }},
        {"u_eq", [](auto& c, auto& w, auto& v) { c.kinetics.u_eq = parse_number(w, v); }},
        {"f_cap", [](auto& c, auto& w, auto& v) { c.kinetics.f_cap = parse_number(w, v); }},
        {"c_s", [](auto& c, auto& w, auto& v) { c.kinetics.c_s = parse_number(w, v); }},
        {"enabled", [](auto& c, auto& w, auto& v) { c.kinetics.enabled = parse_bool(w, v); }}}},
      {"discretization",
       {{"macro_n", [](auto& c, auto& w, auto& v) { c.discretization.macro_n = parse_int(w, v); }},
        {"epsilons", [](auto& c, auto& w, auto& v) { c.discretization.epsilons = parse_list(w, v); }},
        {"n_boundary", [](auto& c, auto& w, auto& v) { c.discretization.n_boundary = parse_int(w, v); }},
        {"target_h", [](auto& c, auto& w, auto& v) { c.discretization.target_h = parse_number(w, v); }},
        {"dt", [](auto& c, auto& w, auto& v) { c.discretization.dt = parse_scalar(w, v); }},
        {"T", [](auto& c, auto& w, auto& v) { c.discretization.t_end = parse_scalar(w, v); }},
        {"diffusion", [](auto& c, auto& w, auto& v) { c.discretization.diffusion = parse_number(w, v); }},
        {"cg_tol", [](auto& c, auto& w, auto& v) { c.discretization.cg_tol = parse_number(w, v); }},
        {"source_at_mapped_point",
         [](auto& c, auto& w, auto& v) { c.discretization.source_at_mapped_point = parse_bool(w, v); }},
        {"pin_radii", [](auto& c, auto& w, auto& v) { c.discretization.pin_radii = parse_bool(w, v); }}}},
      {"table",
       {{"r_lo", [](auto& c, auto& w, auto& v) { c.table.r_lo = parse_number(w, v); }},
        {"r_hi", [](auto& c, auto& w, auto& v) { c.table.r_hi = parse_number(w, v); }},
        {"count", [](auto& c, auto& w, auto& v) { c.table.count = parse_int(w, v); }},
        {"target_h", [](auto& c, auto& w, auto& v) { c.table.target_h = parse_number(w, v); }},
        {"n_boundary", [](auto& c, auto& w, auto& v) { c.table.n_boundary = parse_int(w, v); }},
        {"file", [](auto& c, auto&, auto& v) { c.table.file = v; }}}},
      {"output",
       {{"dir", [](auto& c, auto&, auto& v) { c.output.dir = v; }},
        {"snapshot_every", [](auto& c, auto& w, auto& v) { c.output.snapshot_every = parse_int(w, v); }}}},
      {"run",
       {{"seed",
         [](auto& c, auto& w, auto& v) {
           const double s = parse_number(w, v);
           if (s < 0 || s != std::floor(s) || s > 9007199254740992.0)
             throw ConfigError(w + ": seed must be a nonnegative integer");
           c.seed = static_cast<std::uint64_t>(s);
         }}}},
  };
  return s;
}

// Field sections: `name` (or `u0`, `r0`) selects the registry entry, other keys are parameters.
void set_field_param(FieldSpec& f, const std::string& where, const std::string& key, const std::string& value) {
  f.params[key] = parse_number(where, value);
}

std::map<std::string, double> effective_params(const FieldSpec& f, bool source) {
  auto p = source ? source_defaults(f.name) : initial_field_defaults(f.name);
  for (const auto& [k, v] : f.params)
    p[k] = v;
  return p;
}

MeshSettings mesh_settings(int n_boundary, double target_h) {
  MeshSettings m = MeshSettings::for_spacing(target_h);
  m.target_h = target_h;
  if (n_boundary != 0)
    m.n_boundary = n_boundary;
  return m;
}

} // namespace

std::size_t DiscretizationConfig::steps() const { return static_cast<std::size_t>(std::llround(t_end / dt)); }

MeshSettings DiscretizationConfig::micro_mesh() const { return mesh_settings(n_boundary, target_h); }

std::vector<double> TableConfig::radii() const { return linear_grid(r_lo, r_hi, count); }

MeshSettings TableConfig::mesh() const { return mesh_settings(n_boundary, target_h); }

void ExperimentConfig::validate() const {
  geometry.validate();
  if (kinetics.r_min != geometry.r_min || kinetics.r_max != geometry.r_max)
    throw ConfigError("kinetics radius box must equal [geometry.r_min, geometry.r_max]");
  kinetics.validate();
  make_source(source);
  make_initial_field(u0);
  make_initial_field(r0);

  const auto& d = discretization;
  if (!(d.dt > 0.0))
    throw ConfigError("discretization.dt must be positive");
  if (!(d.t_end > 0.0))
    throw ConfigError("discretization.T must be positive");
  if (d.steps() < 1 || std::fabs(static_cast<double>(d.steps()) * d.dt - d.t_end) > 1e-9 * d.t_end)
    throw ConfigError("discretization.T must be an integer multiple of dt");
  if (!(d.dt * kinetics.f_cap / kinetics.c_s < 0.25 * (geometry.r_max - geometry.r_min)))
    throw ConfigError("dt C_f / c_s must stay below (r_max - r_min) / 4");
  if (d.macro_n < 2 || d.macro_n > 1024)
    throw ConfigError("discretization.macro_n must lie in [2, 1024]");
  for (double e : d.epsilons) {
    const double inv = 1.0 / e;
    if (!(e > 0.0) || std::fabs(inv - std::round(inv)) > 1e-9 || inv > 64.0)
      throw ConfigError("discretization.epsilons: 1/epsilon must be an integer in [1, 64], got " + fmt(e));
  }
  if (!std::is_sorted(d.epsilons.rbegin(), d.epsilons.rend()) ||
      std::adjacent_find(d.epsilons.begin(), d.epsilons.end()) != d.epsilons.end())
    throw ConfigError("discretization.epsilons must be distinct");
  for (const auto& [n, h, where] : {std::tuple{d.n_boundary, d.target_h, "discretization"},
                                    std::tuple{table.n_boundary, table.target_h, "table"}}) {
    if (!(h > 0.0 && h < 0.25))
      throw ConfigError(std::string(where) + ".target_h must lie in (0, 0.25)");
    if (n != 0 && (n < 16 || n % 8 != 0))
      throw ConfigError(std::string(where) + ".n_boundary must be 0 or a multiple of 8 that is at least 16");
  }
  if (!(d.diffusion > 0.0))
    throw ConfigError("discretization.diffusion must be positive");
  if (!(d.cg_tol > 0.0 && d.cg_tol <= 1e-6))
    throw ConfigError("discretization.cg_tol must lie in (0, 1e-6]");
  if (table.file.empty()) {
    if (table.count < 5)
      throw ConfigError("table.count must be at least 5 radii, got " + std::to_string(table.count));
    if (!(table.r_lo < table.r_hi) || table.r_lo < geometry.r_min || table.r_hi > geometry.r_max)
      throw ConfigError("table radius grid must satisfy r_min <= r_lo < r_hi <= r_max");
  }
  if (output.snapshot_every < 0)
    throw ConfigError("output.snapshot_every must be nonnegative");
  if (output.dir.empty())
    throw ConfigError("output.dir must not be empty");
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream os;
  os << "[geometry]\n"
     << "r_min = " << fmt(geometry.r_min) << "\nr_max = " << fmt(geometry.r_max) << "\nr0 = " << fmt(geometry.r0)
     << "\ndelta = " << fmt(geometry.delta) << "\nquadrature_points = " << geometry.quadrature_points
     << "\nnormalize_mollifier = " << (geometry.normalize_mollifier ? "true" : "false") << "\n\n";
  os << "[kinetics]\n"
     << "family = " << kinetics.family << "\ngate_width = " << fmt(kinetics.gate_width)
     << "\nslope = " << fmt(kinetics.slope) << "\nu_eq = " << fmt(kinetics.u_eq) << "\nf_cap = " << fmt(kinetics.f_cap)
     << "\nc_s = " << fmt(kinetics.c_s) << "\nenabled = " << (kinetics.enabled ? "true" : "false") << "\n\n";
  os << "[source]\nname = " << source.name << "\n";
  for (const auto& [k, v] : effective_params(source, true))
    os << k << " = " << fmt(v) << "\n";
  os << "\n[initial]\n";
  for (const auto* f : {&u0, &r0}) {
    const std::string tag = f == &u0 ? "u0" : "r0";
    os << tag << " = " << f->name << "\n";
    for (const auto& [k, v] : effective_params(*f, false))
      os << tag << "." << k << " = " << fmt(v) << "\n";
  }
  const auto& d = discretization;
  os << "\n[discretization]\nmacro_n = " << d.macro_n << "\nepsilons = ";
  for (std::size_t i = 0; i < d.epsilons.size(); ++i)
    os << (i ? ", " : "") << fmt(d.epsilons[i]);
  os << "\nn_boundary = " << d.n_boundary << "\ntarget_h = " << fmt(d.target_h) << "\ndt = " << fmt(d.dt)
     << "\nT = " << fmt(d.t_end) << "\ndiffusion = " << fmt(d.diffusion) << "\ncg_tol = " << fmt(d.cg_tol)
     << "\nsource_at_mapped_point = " << (d.source_at_mapped_point ? "true" : "false")
     << "\npin_radii = " << (d.pin_radii ? "true" : "false") << "\n\n";
  os << "[table]\nr_lo = " << fmt(table.r_lo) << "\nr_hi = " << fmt(table.r_hi) << "\ncount = " << table.count
     << "\ntarget_h = " << fmt(table.target_h) << "\nn_boundary = " << table.n_boundary << "\n";
  if (!table.file.empty())
    os << "file = " << table.file << "\n";
  os << "\n[output]\ndir = " << output.dir << "\nsnapshot_every = " << output.snapshot_every << "\n\n";
  os << "[run]\nseed = " << seed << "\n";
  return os.str();
}

ExperimentConfig parse_config(std::istream& in, const std::string& source_name) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::ini_parser::read_ini(in, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(source_name + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  ExperimentConfig c;
  const auto& sch = schema();
  for (const auto& [section, body] : pt) {
    if (body.empty() && !body.data().empty())
      throw ConfigError(source_name + ": key '" + section + "' outside a section");
    for (const auto& [key, node] : body) {
      const std::string where = source_name + ": " + section + "." + key;
      const std::string value = node.data();
      if (section == "source") {
        if (key == "name") {
          c.source.name = value;
        } else {
          set_field_param(c.source, where, key, value);
        }
        continue;
      }
      if (section == "initial") {
        const auto dot = key.find('.');
        const std::string tag = key.substr(0, dot);
        FieldSpec* f = tag == "u0" ? &c.u0 : tag == "r0" ? &c.r0 : nullptr;
        if (!f)
          throw ConfigError(where + ": unknown key (expected u0, r0, u0.<param> or r0.<param>)");
        if (dot == std::string::npos) {
          if (f->name != value)
            f->params.clear();
          f->name = value;
        } else {
          set_field_param(*f, where, key.substr(dot + 1), value);
        }
        continue;
      }
      const auto s = sch.find(section);
      if (s == sch.end())
        throw ConfigError(source_name + ": unknown section [" + section + "]");
      const auto k = s->second.find(key);
      if (k == s->second.end())
        throw ConfigError(where + ": unknown key");
      k->second(c, where, value);
    }
  }
  c.kinetics.r_min = c.geometry.r_min;
  c.kinetics.r_max = c.geometry.r_max;
  auto& eps = c.discretization.epsilons;
  std::sort(eps.begin(), eps.end(), std::greater<>());
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source_name + ": " + e.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config file " + path.string());
  return parse_config(in, path.string());
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

} // namespace evohom
