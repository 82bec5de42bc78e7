#include "cascade/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "cascade/textio.hpp"

namespace cascade::cli {

namespace {

// ---------------------------------------------------------------------
// sectioned key = value reader

struct Entry {
  int line = 0;
  std::string value;
  bool used = false;
};

using Sections = std::map<std::string, std::map<std::string, Entry>>;

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

[[noreturn]] void fail(const std::string& origin, int line,
                       const std::string& message) {
  std::ostringstream os;
  os << origin << ":" << line << ": " << message;
  throw ValidationError(os.str());
}

Sections read_sections(const std::string& text, const std::string& origin) {
  Sections sections;
  std::istringstream is(text);
  std::string raw;
  std::string current;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    const std::string s = trim(raw);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(origin, line, "unterminated section header");
      current = trim(s.substr(1, s.size() - 2));
      if (current.empty()) fail(origin, line, "empty section name");
      sections.try_emplace(current);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      fail(origin, line, "expected key = value");
    }
    if (current.empty()) {
      fail(origin, line, "key outside of any [section]");
    }
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) fail(origin, line, "empty key");
    auto [it, inserted] =
        sections[current].try_emplace(key, Entry{line, value, false});
    if (!inserted) {
      fail(origin, line, "duplicate key '" + key + "' in [" + current + "]");
    }
  }
  return sections;
}

class Reader {
 public:
  Reader(Sections sections, std::string origin)
      : sections_(std::move(sections)), origin_(std::move(origin)) {}

  bool has(const std::string& section, const std::string& key) {
    auto sec = sections_.find(section);
    if (sec == sections_.end()) return false;
    return sec->second.count(key) > 0;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) {
    Entry* e = find(section, key);
    if (!e) return fallback;
    e->used = true;
    return e->value;
  }

  std::string require_string(const std::string& section,
                             const std::string& key) {
    Entry* e = find(section, key);
    if (!e) {
      throw ValidationError(origin_ + ": missing required key '" + key +
                            "' in [" + section + "]");
    }
    e->used = true;
    return e->value;
  }

  double get_double(const std::string& section, const std::string& key,
                    double fallback) {
    Entry* e = find(section, key);
    if (!e) return fallback;
    e->used = true;
    return parse_double(*e, key);
  }

  double require_double(const std::string& section, const std::string& key) {
    Entry* e = find(section, key);
    if (!e) {
      throw ValidationError(origin_ + ": missing required key '" + key +
                            "' in [" + section + "]");
    }
    e->used = true;
    return parse_double(*e, key);
  }

  int get_int(const std::string& section, const std::string& key,
              int fallback) {
    Entry* e = find(section, key);
    if (!e) return fallback;
    e->used = true;
    const double v = parse_double(*e, key);
    if (v != static_cast<int>(v)) {
      fail(origin_, e->line, "key '" + key + "' must be an integer");
    }
    return static_cast<int>(v);
  }

  int require_int(const std::string& section, const std::string& key) {
    Entry* e = find(section, key);
    if (!e) {
      throw ValidationError(origin_ + ": missing required key '" + key +
                            "' in [" + section + "]");
    }
    e->used = true;
    const double v = parse_double(*e, key);
    if (v != static_cast<int>(v)) {
      fail(origin_, e->line, "key '" + key + "' must be an integer");
    }
    return static_cast<int>(v);
  }

  std::vector<double> get_vector(const std::string& section,
                                 const std::string& key) {
    Entry* e = find(section, key);
    if (!e) return {};
    e->used = true;
    return parse_vector(*e, key);
  }

  std::vector<double> require_vector(const std::string& section,
                                     const std::string& key) {
    Entry* e = find(section, key);
    if (!e) {
      throw ValidationError(origin_ + ": missing required key '" + key +
                            "' in [" + section + "]");
    }
    e->used = true;
    return parse_vector(*e, key);
  }

  int line_of(const std::string& section, const std::string& key) {
    Entry* e = find(section, key);
    return e ? e->line : 0;
  }

  /// Strict mode: every unconsumed key is an error. Lenient: a warning.
  void finish(bool lenient, std::vector<std::string>* warnings) {
    for (auto& [section, entries] : sections_) {
      if (!known_section(section)) {
        const std::string msg = origin_ + ":" +
                                std::to_string(first_line(entries)) +
                                ": unknown section [" + section + "]";
        if (!lenient) throw ValidationError(msg);
        warnings->push_back(msg);
        continue;
      }
      for (auto& [key, entry] : entries) {
        if (entry.used) continue;
        const std::string msg = origin_ + ":" + std::to_string(entry.line) +
                                ": unknown key '" + key + "' in [" + section +
                                "]";
        if (!lenient) throw ValidationError(msg);
        warnings->push_back(msg);
      }
    }
  }

  const std::string& origin() const { return origin_; }

 private:
  static bool known_section(const std::string& s) {
    return s == "plant" || s == "nonlinearity" || s == "grid" ||
           s == "inner_product" || s == "sim" || s == "init" ||
           s == "sylvester";
  }

  static int first_line(const std::map<std::string, Entry>& entries) {
    int line = 0;
    for (const auto& [key, e] : entries) {
      if (line == 0 || e.line < line) line = e.line;
    }
    return line;
  }

  Entry* find(const std::string& section, const std::string& key) {
    auto sec = sections_.find(section);
    if (sec == sections_.end()) return nullptr;
    auto it = sec->second.find(key);
    return it == sec->second.end() ? nullptr : &it->second;
  }

  double parse_double(const Entry& e, const std::string& key) {
    try {
      size_t consumed = 0;
      const double v = std::stod(e.value, &consumed);
      if (consumed != e.value.size() || !std::isfinite(v)) throw 0;
      return v;
    } catch (...) {
      fail(origin_, e.line, "key '" + key + "' is not a finite number: '" +
                                e.value + "'");
    }
  }

  std::vector<double> parse_vector(const Entry& e, const std::string& key) {
    std::istringstream is(e.value);
    std::vector<double> out;
    std::string token;
    while (is >> token) {
      try {
        size_t consumed = 0;
        const double v = std::stod(token, &consumed);
        if (consumed != token.size() || !std::isfinite(v)) throw 0;
        out.push_back(v);
      } catch (...) {
        fail(origin_, e.line,
             "key '" + key + "' has a non-numeric entry: '" + token + "'");
      }
    }
    if (out.empty()) {
      fail(origin_, e.line, "key '" + key + "' is empty");
    }
    return out;
  }

  Sections sections_;
  std::string origin_;
};

// ---------------------------------------------------------------------
// scenario interpretation

Eigen::MatrixXd reshape(const std::vector<double>& row_major, int rows,
                        int cols, const std::string& origin, int line,
                        const std::string& key) {
  if (static_cast<int>(row_major.size()) != rows * cols) {
    fail(origin, line,
         "key '" + key + "' needs " + std::to_string(rows * cols) +
             " entries (" + std::to_string(rows) + "x" + std::to_string(cols) +
             " row-major), got " + std::to_string(row_major.size()));
  }
  return numlin::make_matrix(rows, cols, row_major);
}

PlantSpec parse_plant(Reader& reader) {
  const std::string kind =
      reader.get_string("plant", "kind", "transport_scalar");
  if (kind == "transport_scalar") {
    const double a = reader.require_double("plant", "a");
    const double lambda = reader.require_double("plant", "lambda");
    const double c = reader.require_double("plant", "c");
    const double recirc = reader.get_double("plant", "recirculation", 1.0);
    return make_scalar_transport(a, lambda, c, recirc);
  }
  if (kind != "transport_system") {
    throw ValidationError(reader.origin() +
                          ": plant kind must be transport_scalar or "
                          "transport_system, got '" +
                          kind + "'");
  }
  PlantSpec spec;
  spec.n = reader.require_int("plant", "n");
  spec.m = reader.require_int("plant", "m");
  spec.p = reader.require_int("plant", "p");
  const auto speeds = reader.require_vector("plant", "speeds");
  spec.N = static_cast<int>(speeds.size());
  spec.speeds = Eigen::Map<const Eigen::VectorXd>(speeds.data(), spec.N);
  spec.k = 0;
  while (spec.k < spec.N && spec.speeds(spec.k) > 0.0) ++spec.k;

  auto matrix = [&](const std::string& key, int rows, int cols,
                    bool required) {
    if (!required && !reader.has("plant", key)) {
      return Eigen::MatrixXd(Eigen::MatrixXd::Zero(rows, cols));
    }
    const int line = reader.line_of("plant", key);
    return reshape(reader.require_vector("plant", key), rows, cols,
                   reader.origin(), line, key);
  };
  spec.A = matrix("A", spec.n, spec.n, true);
  spec.B = matrix("B", spec.n, spec.m, true);
  spec.C = matrix("C", spec.p, spec.n, true);
  const int neg = spec.N - spec.k;
  spec.D0 = matrix("D0", spec.k, neg, false);
  spec.D1 = matrix("D1", neg, spec.k, false);
  spec.R0 = matrix("R0", spec.k, spec.k, false);
  spec.R1 = matrix("R1", neg, neg, false);
  spec.E0 = matrix("E0", spec.k, spec.n, false);
  spec.E1 = matrix("E1", neg, spec.n, false);
  return build_plant(spec);
}

Nonlinearity parse_map(Reader& reader, const std::string& kind_key,
                       const std::string& gain_key,
                       const std::string& level_key,
                       const std::string& levels_key, const std::string& kind,
                       int dim) {
  if (kind == "linear") {
    return Nonlinearity::linear(
        reader.get_double("nonlinearity", gain_key, 1.0), dim);
  }
  if (kind == "saturation") {
    if (reader.has("nonlinearity", levels_key)) {
      const auto levels = reader.require_vector("nonlinearity", levels_key);
      if (static_cast<int>(levels.size()) != dim) {
        throw ValidationError(reader.origin() + ": '" + levels_key +
                              "' must list one level per input channel");
      }
      return Nonlinearity::saturation(Eigen::Map<const Eigen::VectorXd>(
          levels.data(), static_cast<Eigen::Index>(levels.size())));
    }
    return Nonlinearity::saturation(
        reader.get_double("nonlinearity", level_key, 1.0), dim);
  }
  if (kind == "sat_phi") {
    if (dim != 1) {
      throw ValidationError(reader.origin() +
                            ": sat_phi is scalar-input only");
    }
    return Nonlinearity::sat_phi(
        reader.get_double("nonlinearity", level_key, 2.0));
  }
  throw ValidationError(reader.origin() + ": unknown '" + kind_key +
                        "' value '" + kind + "'");
}

InitialProfile parse_w0(Reader& reader, const std::string& origin,
                        const std::filesystem::path& base_dir, int cells,
                        int channels) {
  InitialProfile w0;
  const std::string text = reader.get_string("init", "w0", "constant 0");
  std::istringstream is(text);
  std::string kind;
  is >> kind;
  if (kind == "constant") {
    double v = 0.0;
    if (!(is >> v) || !std::isfinite(v)) {
      throw ValidationError(origin + ": w0 constant needs a finite value");
    }
    w0.kind = InitialProfile::Kind::constant;
    w0.constant_value = v;
  } else if (kind == "sine") {
    int mode = 0;
    if (!(is >> mode) || mode == 0) {
      throw ValidationError(origin + ": w0 sine needs a nonzero mode index");
    }
    w0.kind = InitialProfile::Kind::sine;
    w0.sine_mode = mode;
  } else if (kind == "samples") {
    std::string path;
    if (!(is >> path)) {
      throw ValidationError(origin + ": w0 samples needs a file path");
    }
    std::filesystem::path resolved(path);
    if (!resolved.is_absolute()) resolved = base_dir / resolved;
    std::ifstream file(resolved);
    if (!file) {
      throw ValidationError(origin + ": cannot read w0 samples file '" +
                            resolved.string() + "'");
    }
    std::vector<double> values;
    double v = 0.0;
    while (file >> v) values.push_back(v);
    if (static_cast<int>(values.size()) != cells * channels) {
      throw ValidationError(
          origin + ": w0 samples file must hold cells*channels = " +
          std::to_string(cells * channels) + " values, got " +
          std::to_string(values.size()));
    }
    Profile samples(cells, channels);
    for (int j = 0; j < cells; ++j) {
      for (int ch = 0; ch < channels; ++ch) {
        samples(j, ch) = values[static_cast<size_t>(j * channels + ch)];
      }
    }
    if (!samples.allFinite()) {
      throw ValidationError(origin + ": w0 samples are not finite");
    }
    w0.kind = InitialProfile::Kind::samples;
    w0.samples = samples;
    w0.samples_path = path;
  } else {
    throw ValidationError(origin + ": w0 must be constant/sine/samples");
  }
  std::string excess;
  if (is >> excess) {
    throw ValidationError(origin + ": trailing tokens after w0 spec");
  }
  return w0;
}

ParsedScenario interpret(Reader reader, bool lenient,
                         const std::filesystem::path& base_dir) {
  ParsedScenario out;
  ScenarioSpec& spec = out.spec;
  const std::string& origin = reader.origin();

  spec.plant = parse_plant(reader);

  const std::string sigma_kind =
      reader.get_string("nonlinearity", "kind", "linear");
  spec.sigma = parse_map(reader, "kind", "gain", "level", "levels",
                         sigma_kind, spec.plant.m);
  const std::string shaping_kind =
      reader.get_string("nonlinearity", "shaping", "none");
  if (shaping_kind != "none") {
    spec.shaping =
        parse_map(reader, "shaping", "shaping_gain", "shaping_level",
                  "shaping_levels", shaping_kind, spec.plant.m);
  }

  spec.grid_cells = reader.get_int("grid", "cells", 200);
  make_grid(spec.grid_cells);  // fail fast on bad resolutions
  spec.cfl_safety = reader.get_double("grid", "cfl_safety", 0.5);
  if (!(spec.cfl_safety > 0.0) || spec.cfl_safety > 1.0) {
    throw ValidationError(origin + ": cfl_safety must lie in (0, 1]");
  }

  const bool scalar_kind = spec.plant.N == 1;
  const std::string mode = reader.get_string(
      "inner_product", "mode", scalar_kind ? "plain" : "speed_weighted");
  if (mode == "plain") {
    spec.weight_mode = InnerProductWeight::Mode::plain;
  } else if (mode == "speed_weighted") {
    spec.weight_mode = InnerProductWeight::Mode::speed_weighted;
  } else {
    throw ValidationError(origin +
                          ": inner_product mode must be plain or "
                          "speed_weighted");
  }

  const std::string method =
      reader.get_string("sylvester", "method", "discrete");
  if (method == "closed") {
    spec.method = SylvesterSolution::Method::closed;
  } else if (method == "bvp") {
    spec.method = SylvesterSolution::Method::bvp;
  } else if (method == "discrete") {
    spec.method = SylvesterSolution::Method::discrete;
  } else {
    throw ValidationError(origin +
                          ": sylvester method must be closed, bvp or "
                          "discrete");
  }

  if (!reader.has("sim", "t_final")) {
    out.warnings.push_back(origin +
                           ": [sim] t_final missing, defaulting to 60");
  }
  spec.t_final = reader.get_double("sim", "t_final", 60.0);
  if (!(spec.t_final >= 0.0)) {
    throw ValidationError(origin + ": t_final must be >= 0");
  }
  spec.record_stride = reader.get_int("sim", "record_stride", 10);
  if (spec.record_stride < 1) {
    throw ValidationError(origin + ": record_stride must be >= 1");
  }
  const std::string integrator =
      reader.get_string("sim", "integrator", "euler");
  if (integrator == "euler") {
    spec.integrator = ScenarioSpec::Integrator::euler;
  } else if (integrator == "rk4") {
    spec.integrator = ScenarioSpec::Integrator::rk4;
  } else {
    throw ValidationError(origin + ": integrator must be euler or rk4");
  }

  const auto z0 = reader.get_vector("init", "z0");
  if (!z0.empty()) {
    if (static_cast<int>(z0.size()) != spec.plant.n) {
      throw ValidationError(origin + ": z0 must list " +
                            std::to_string(spec.plant.n) + " values");
    }
    spec.z0 = Eigen::Map<const Eigen::VectorXd>(
        z0.data(), static_cast<Eigen::Index>(z0.size()));
  }
  spec.w0 = parse_w0(reader, origin, base_dir, spec.grid_cells, spec.plant.N);

  reader.finish(lenient, &out.warnings);
  return out;
}

// ---------------------------------------------------------------------
// serialization

void serialize_map(std::ostream& os, const Nonlinearity& map,
                   const std::string& kind_key, const std::string& gain_key,
                   const std::string& level_key) {
  switch (map.kind()) {
    case Nonlinearity::Kind::linear:
      os << kind_key << " = linear\n";
      os << gain_key << " = " << fmt17(map.gain()) << "\n";
      return;
    case Nonlinearity::Kind::saturation: {
      os << kind_key << " = saturation\n";
      const bool uniform =
          (map.levels().array() == map.levels()(0)).all();
      if (uniform) {
        os << level_key << " = " << fmt17(map.levels()(0)) << "\n";
      } else {
        os << level_key << "s =";
        for (Eigen::Index i = 0; i < map.levels().size(); ++i) {
          os << " " << fmt17(map.levels()(i));
        }
        os << "\n";
      }
      return;
    }
    case Nonlinearity::Kind::sat_phi:
      os << kind_key << " = sat_phi\n";
      os << level_key << " = " << fmt17(map.levels()(0)) << "\n";
      return;
    case Nonlinearity::Kind::composed:
      throw ValidationError(
          "serialize_scenario: composed nonlinearities have no file form; "
          "configure the shaping separately");
  }
}

void serialize_matrix(std::ostream& os, const std::string& key,
                      const Eigen::MatrixXd& m) {
  if (m.size() == 0 || m.isZero(0.0)) return;
  os << key << " =";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) os << " " << fmt17(m(i, j));
  }
  os << "\n";
}

bool is_scalar_loop(const PlantSpec& p) {
  return p.N == 1 && p.n == 1 && p.m == 1 && p.p == 1 && p.B(0, 0) == 1.0 &&
         p.C(0, 0) == p.E0(0, 0) && p.R0(0, 0) != 0.0;
}

}  // namespace

ParsedScenario parse_scenario_text(const std::string& text, bool lenient,
                                   const std::string& origin) {
  Reader reader(read_sections(text, origin), origin);
  return interpret(std::move(reader), lenient,
                   std::filesystem::current_path());
}

ParsedScenario parse_scenario(const std::filesystem::path& path,
                              bool lenient) {
  std::ifstream file(path);
  if (!file) {
    throw ValidationError("cannot read scenario file '" + path.string() +
                          "'");
  }
  std::ostringstream buffer;
  buffer << file.rdbuf();
  Reader reader(read_sections(buffer.str(), path.string()), path.string());
  std::filesystem::path base = std::filesystem::current_path();
  if (path.has_parent_path()) base = path.parent_path();
  return interpret(std::move(reader), lenient, base);
}

std::string serialize_scenario(const ScenarioSpec& spec) {
  std::ostringstream os;
  os << "[plant]\n";
  if (is_scalar_loop(spec.plant)) {
    os << "kind = transport_scalar\n";
    os << "a = " << fmt17(-spec.plant.A(0, 0)) << "\n";
    os << "lambda = " << fmt17(spec.plant.speeds(0)) << "\n";
    os << "c = " << fmt17(spec.plant.C(0, 0)) << "\n";
    if (spec.plant.R0(0, 0) != 1.0) {
      os << "recirculation = " << fmt17(spec.plant.R0(0, 0)) << "\n";
    }
  } else {
    os << "kind = transport_system\n";
    os << "n = " << spec.plant.n << "\n";
    os << "m = " << spec.plant.m << "\n";
    os << "p = " << spec.plant.p << "\n";
    os << "speeds =";
    for (int i = 0; i < spec.plant.N; ++i) {
      os << " " << fmt17(spec.plant.speeds(i));
    }
    os << "\n";
    serialize_matrix(os, "A", spec.plant.A);
    serialize_matrix(os, "B", spec.plant.B);
    serialize_matrix(os, "C", spec.plant.C);
    serialize_matrix(os, "D0", spec.plant.D0);
    serialize_matrix(os, "D1", spec.plant.D1);
    serialize_matrix(os, "R0", spec.plant.R0);
    serialize_matrix(os, "R1", spec.plant.R1);
    serialize_matrix(os, "E0", spec.plant.E0);
    serialize_matrix(os, "E1", spec.plant.E1);
  }

  os << "\n[nonlinearity]\n";
  serialize_map(os, spec.sigma, "kind", "gain", "level");
  if (spec.shaping) {
    serialize_map(os, *spec.shaping, "shaping", "shaping_gain",
                  "shaping_level");
  }

  os << "\n[grid]\n";
  os << "cells = " << spec.grid_cells << "\n";
  os << "cfl_safety = " << fmt17(spec.cfl_safety) << "\n";

  os << "\n[inner_product]\n";
  os << "mode = "
     << (spec.weight_mode == InnerProductWeight::Mode::plain
             ? "plain"
             : "speed_weighted")
     << "\n";

  os << "\n[sylvester]\n";
  os << "method = ";
  switch (spec.method) {
    case SylvesterSolution::Method::closed:
      os << "closed";
      break;
    case SylvesterSolution::Method::bvp:
      os << "bvp";
      break;
    case SylvesterSolution::Method::discrete:
      os << "discrete";
      break;
  }
  os << "\n";

  os << "\n[sim]\n";
  os << "t_final = " << fmt17(spec.t_final) << "\n";
  os << "record_stride = " << spec.record_stride << "\n";
  os << "integrator = "
     << (spec.integrator == ScenarioSpec::Integrator::euler ? "euler" : "rk4")
     << "\n";

  os << "\n[init]\n";
  if (spec.z0.size() > 0) {
    os << "z0 =";
    for (Eigen::Index i = 0; i < spec.z0.size(); ++i) {
      os << " " << fmt17(spec.z0(i));
    }
    os << "\n";
  }
  os << "w0 = ";
  switch (spec.w0.kind) {
    case InitialProfile::Kind::constant:
      os << "constant " << fmt17(spec.w0.constant_value);
      break;
    case InitialProfile::Kind::sine:
      os << "sine " << spec.w0.sine_mode;
      break;
    case InitialProfile::Kind::samples:
      if (spec.w0.samples_path.empty()) {
        throw ValidationError(
            "serialize_scenario: sampled w0 without a source path");
      }
      os << "samples " << spec.w0.samples_path;
      break;
  }
  os << "\n";
  return os.str();
}

// ---------------------------------------------------------------------
// outputs

void write_trace_csv(std::ostream& os, const SimulationTrace& trace) {
  if (trace.snapshots.empty()) {
    throw ValidationError("write_trace_csv: empty trace");
  }
  const int n = static_cast<int>(trace.front().z.size());
  const int m = static_cast<int>(trace.front().u.size());
  os << "t";
  for (int i = 1; i <= n; ++i) os << ",z_" << i;
  for (int i = 1; i <= m; ++i) os << ",u_" << i;
  for (int i = 1; i <= m; ++i) os << ",sigma_u_" << i;
  os << ",norm_z,norm_w_H,V\n";
  for (const auto& snap : trace.snapshots) {
    os << fmt17(snap.t);
    for (int i = 0; i < n; ++i) os << "," << fmt17(snap.z(i));
    for (int i = 0; i < m; ++i) os << "," << fmt17(snap.u(i));
    for (int i = 0; i < m; ++i) os << "," << fmt17(snap.sigma_u(i));
    os << "," << fmt17(snap.norm_z) << "," << fmt17(snap.norm_w) << ","
       << fmt17(snap.V) << "\n";
  }
}

std::filesystem::path resolve_out_dir(const RunOptions& options) {
  if (!options.out_dir.empty()) return options.out_dir;
  if (const char* env = std::getenv("CASCADE_FORWARD_OUT")) {
    if (*env != '\0') return std::filesystem::path(env);
  }
  return std::filesystem::path("out");
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw NumericalError("cannot write output file '" + path.string() + "'");
  }
  os << text;
}

std::string audit_block(const AuditReport& report) {
  std::ostringstream os;
  os << "[" << report.name << "]\n";
  os << "pass = " << (report.pass ? "true" : "false") << "\n";
  os << "worst_violation = " << fmt17(report.worst_violation) << "\n";
  if (!report.context.empty()) os << "context = " << report.context << "\n";
  return os.str();
}

std::string cone_block(const std::string& name, const Nonlinearity& map,
                       const ConeBoundReport& report) {
  std::ostringstream os;
  os << "[" << name << "]\n";
  os << "map = " << map.describe() << "\n";
  os << "pass = " << (report.pass() ? "true" : "false") << "\n";
  os << "worst_monotonicity = " << fmt17(report.worst_monotonicity) << "\n";
  os << "worst_ratio = " << fmt17(report.worst_ratio) << " (bound "
     << fmt17(map.bound()) << ")\n";
  os << "zero_at_zero = " << (report.zero_at_zero ? "true" : "false") << "\n";
  return os.str();
}

}  // namespace

int cmd_run(const std::filesystem::path& scenario_path,
            const RunOptions& options) {
  const std::filesystem::path out = resolve_out_dir(options);
  ParsedScenario parsed;
  try {
    parsed = parse_scenario(scenario_path, options.lenient);
  } catch (const ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  for (const auto& warning : parsed.warnings) {
    std::cerr << "warning: " << warning << "\n";
  }

  std::error_code ec;
  std::filesystem::create_directories(out, ec);

  std::ostringstream audits;
  audits << "cascade_forward audit report\n";
  audits << "scenario = " << scenario_path.string() << "\n\n";

  try {
    const PlantSpec plant = build_plant(parsed.spec.plant);
    const Grid grid = make_grid(parsed.spec.grid_cells);
    const auto weight = make_weight(parsed.spec.weight_mode, plant.speeds);

    const AssumptionReport assumptions =
        check_standing_assumptions(plant, grid, weight);
    audits << "[assumptions]\n";
    audits << "pass = " << (assumptions.all_pass() ? "true" : "false")
           << "\n";
    audits << assumptions.summary() << "\n\n";
    if (!assumptions.all_pass() && !options.force) {
      audits << "run aborted: standing assumptions failed (use --force to "
                "override)\n";
      write_file(out / "audits.txt", audits.str());
      std::cerr << "assumption check failed:\n"
                << assumptions.summary() << "\n";
      return kExitAssumption;
    }

    const auto sigma_report = validate_cone_bounded(
        parsed.spec.sigma, 4096, 10.0, kConeBoundSeed + options.seed);
    audits << cone_block("cone_bound_sigma", parsed.spec.sigma, sigma_report)
           << "\n";
    if (parsed.spec.shaping) {
      const auto composed = Nonlinearity::compose_shaping(
          *parsed.spec.shaping, parsed.spec.sigma);
      const auto shaped_report = validate_cone_bounded(
          composed, 4096, 10.0, kConeBoundSeed + options.seed);
      audits << cone_block("cone_bound_composed", composed, shaped_report)
             << "\n";
    }

    Scenario scenario = instantiate(parsed.spec);
    scenario.sabotage_sign_flip = options.sabotage;
    if (options.sabotage) {
      audits << "[sabotage]\nfeedback sign flipped (test hook)\n\n";
    }

    const double fp_mismatch =
        fixed_point_check(scenario.controller.M, plant, grid, 1.0);
    audits << "[fixed_point]\n";
    audits << "mismatch = " << fmt17(fp_mismatch) << "\n";
    const bool fp_ok =
        scenario.controller.M.method != SylvesterSolution::Method::discrete ||
        fp_mismatch <= 1e-8;
    audits << "pass = " << (fp_ok ? "true" : "false") << "\n\n";

    const SimulationTrace trace = run(scenario);

    AuditReport decay;
    if (trace.snapshots.size() >= 2) {
      decay = decay_audit(trace, scenario.controller);
      audits << audit_block(decay) << "\n";
      const AuditReport vnorm =
          vnorm_monotone_audit(trace, scenario.controller);
      audits << audit_block(vnorm) << "\n";
    } else {
      decay.name = "decay";
      decay.pass = true;
      audits << "[decay]\nskipped = single snapshot (t_final = 0)\n\n";
    }

    const ProbeReport probe =
        observability_probe(plant, scenario.controller, 16);
    audits << "[observability]\n";
    audits << "modes = " << probe.modes.size() << "\n";
    audits << "analytic = " << (probe.analytic_modes ? "true" : "false")
           << "\n";
    audits << "caveat = " << (probe.caveat ? "true" : "false") << "\n";
    audits << "flagged = " << probe.flagged_count() << "\n";
    audits << "note = finite probe: a zero pairing falsifies observability, "
              "the absence of flags proves nothing\n\n";

    audits << "[nonresonance]\n";
    int failing = 0;
    for (const auto& mode : probe.modes) {
      if (!nonresonance_rank(plant.A, plant.B, plant.C, mode.eigenvalue)) {
        ++failing;
      }
    }
    audits << "modes_checked = " << probe.modes.size() << "\n";
    audits << "failing = " << failing << "\n";
    audits << "pass = " << (failing == 0 ? "true" : "false") << "\n";

    std::ostringstream trace_csv;
    write_trace_csv(trace_csv, trace);
    write_file(out / "trace.csv", trace_csv.str());

    std::ostringstream controller_txt;
    write_controller(controller_txt, scenario.controller);
    write_file(out / "controller.txt", controller_txt.str());

    if (options.profiles > 0) {
      // gnuplot-ready blocks: x then one column per channel, per time
      std::ostringstream profiles;
      const size_t count = trace.snapshots.size();
      const size_t wanted =
          std::min<size_t>(static_cast<size_t>(options.profiles), count);
      for (size_t i = 0; i < wanted; ++i) {
        const size_t pick =
            wanted == 1 ? count - 1 : i * (count - 1) / (wanted - 1);
        const Snapshot& snap = trace.snapshots[pick];
        profiles << "# t = " << fmt17(snap.t) << "\n";
        for (int j = 0; j < scenario.grid.cells; ++j) {
          profiles << fmt17(scenario.grid.node(j));
          for (int ch = 0; ch < plant.N; ++ch) {
            profiles << " " << fmt17(snap.w(j, ch));
          }
          profiles << "\n";
        }
        profiles << "\n";
      }
      write_file(out / "profiles.txt", profiles.str());
    }

    write_file(out / "audits.txt", audits.str());

    const CascadeState initial{trace.front().z, trace.front().w, 0.0};
    const CascadeState final_state{trace.back().z, trace.back().w,
                                   trace.back().t};
    std::cout << "wrote " << (out / "trace.csv").string() << " ("
              << trace.snapshots.size() << " snapshots)\n";
    std::cout << "V(0) = " << fmt17(trace.front().V)
              << ", V(T) = " << fmt17(trace.back().V) << "\n";
    std::cout << "||state||_X ratio = "
              << fmt17(x_norm(scenario.controller, final_state) /
                       std::max(1e-300,
                                x_norm(scenario.controller, initial)))
              << "\n";
    std::cout << "decay audit: " << (decay.pass ? "pass" : "FAIL") << "\n";
    return kExitOk;
  } catch (const ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    audits << "[failure]\n" << e.what() << "\n";
    write_file(out / "audits.txt", audits.str());
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

int cmd_converge(const std::filesystem::path& scenario_path,
                 const std::vector<int>& grids, const RunOptions& options) {
  const std::filesystem::path out = resolve_out_dir(options);
  try {
    ParsedScenario parsed = parse_scenario(scenario_path, options.lenient);
    for (const auto& warning : parsed.warnings) {
      std::cerr << "warning: " << warning << "\n";
    }
    if (parsed.spec.method == SylvesterSolution::Method::closed &&
        (parsed.spec.plant.N != 1 || parsed.spec.plant.n != 1)) {
      throw ValidationError(
          "closed-form gain is scalar-only; pick bvp or discrete");
    }
    const ConvergenceReport report =
        convergence_study(parsed.spec, grids);

    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    std::ostringstream csv;
    csv << "cells,gain_error,state_error\n";
    for (const auto& row : report.rows) {
      csv << row.cells << "," << fmt17(row.gain_error) << ","
          << fmt17(row.state_error) << "\n";
    }
    write_file(out / "convergence.csv", csv.str());

    std::ostringstream txt;
    txt << "gain_exact = " << (report.gain_exact ? "true" : "false") << "\n";
    txt << "gain_orders =";
    for (double order : report.gain_orders) txt << " " << fmt17(order);
    txt << "\nstate_orders =";
    for (double order : report.state_orders) txt << " " << fmt17(order);
    txt << "\n";
    write_file(out / "convergence.txt", txt.str());
    std::cout << txt.str();
    return kExitOk;
  } catch (const ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

namespace {

struct TraceColumns {
  std::vector<double> t, v, norm_z;
  std::vector<Eigen::VectorXd> u, sigma_u;
};

TraceColumns read_trace_columns(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) {
    throw ValidationError("cannot read trace file '" + path.string() + "'");
  }
  std::string header;
  if (!std::getline(file, header)) {
    throw ValidationError("trace file is empty");
  }
  std::vector<std::string> names;
  {
    std::istringstream is(header);
    std::string token;
    while (std::getline(is, token, ',')) names.push_back(token);
  }
  int n = 0, m = 0;
  for (const auto& name : names) {
    if (name.rfind("z_", 0) == 0) ++n;
    if (name.rfind("u_", 0) == 0) ++m;
  }
  const size_t expected = 1 + n + 2 * m + 3;
  if (names.size() != expected || names.front() != "t" ||
      names.back() != "V") {
    throw ValidationError("trace file has an unexpected header");
  }

  TraceColumns cols;
  std::string line;
  int line_no = 1;
  while (std::getline(file, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream is(line);
    std::vector<double> row;
    std::string token;
    while (std::getline(is, token, ',')) {
      try {
        row.push_back(std::stod(token));
      } catch (...) {
        throw ValidationError("trace file: bad number at line " +
                              std::to_string(line_no));
      }
    }
    if (row.size() != expected) {
      throw ValidationError("trace file: wrong column count at line " +
                            std::to_string(line_no));
    }
    cols.t.push_back(row[0]);
    Eigen::VectorXd u(m), su(m);
    for (int i = 0; i < m; ++i) u(i) = row[1 + n + i];
    for (int i = 0; i < m; ++i) su(i) = row[1 + n + m + i];
    cols.u.push_back(u);
    cols.sigma_u.push_back(su);
    cols.norm_z.push_back(row[expected - 3]);
    cols.v.push_back(row[expected - 1]);
  }
  if (cols.t.size() < 2) {
    throw ValidationError("trace file needs at least two rows");
  }
  return cols;
}

double read_controller_cells(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) {
    throw ValidationError("cannot read controller file '" + path.string() +
                          "'");
  }
  std::string line;
  while (std::getline(file, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    if (trim(line.substr(0, eq)) == "grid_cells") {
      return std::stod(trim(line.substr(eq + 1)));
    }
  }
  throw ValidationError("controller file lacks grid_cells");
}

}  // namespace

int cmd_audit(const std::filesystem::path& trace_csv,
              const std::filesystem::path& controller_txt,
              const RunOptions& options) {
  const std::filesystem::path out = resolve_out_dir(options);
  try {
    const TraceColumns cols = read_trace_columns(trace_csv);
    const std::filesystem::path ctl_path =
        controller_txt.empty() ? trace_csv.parent_path() / "controller.txt"
                               : controller_txt;
    const double cells = read_controller_cells(ctl_path);
    const double h = 1.0 / cells;

    const double v0 = cols.v.front();
    const double step_slack = 1e-9 * std::max(1.0, v0);
    double worst_step = -std::numeric_limits<double>::infinity();
    double worst_slope = -std::numeric_limits<double>::infinity();
    double kappa_observed = -std::numeric_limits<double>::infinity();
    for (size_t k = 0; k + 1 < cols.t.size(); ++k) {
      const double dt = cols.t[k + 1] - cols.t[k];
      worst_step =
          std::max(worst_step, cols.v[k + 1] - cols.v[k] - step_slack);
      const double slope = (cols.v[k + 1] - cols.v[k]) / dt;
      const double bound = -cols.norm_z[k] * cols.norm_z[k] -
                           2.0 * cols.u[k].dot(cols.sigma_u[k]);
      const double scale = (h + dt) * (1.0 + v0);
      kappa_observed = std::max(kappa_observed, (slope - bound) / scale);
      worst_slope =
          std::max(worst_slope, slope - bound - kDecayKappa * scale);
    }
    const bool pass = worst_step <= 0.0 && worst_slope <= 0.0;

    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    std::ostringstream txt;
    txt << "[decay_from_csv]\n";
    txt << "pass = " << (pass ? "true" : "false") << "\n";
    txt << "worst_violation = "
        << fmt17(std::max({0.0, worst_step, worst_slope})) << "\n";
    txt << "context = kappa_observed = " << kappa_observed << " (allowed "
        << kDecayKappa << "), V0 = " << v0 << "\n";
    write_file(out / "reaudit.txt", txt.str());
    std::cout << txt.str();
    return kExitOk;
  } catch (const ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

int cmd_probe(const std::filesystem::path& scenario_path, int modes,
              const std::string& method_override, const RunOptions& options) {
  const std::filesystem::path out = resolve_out_dir(options);
  try {
    ParsedScenario parsed = parse_scenario(scenario_path, options.lenient);
    for (const auto& warning : parsed.warnings) {
      std::cerr << "warning: " << warning << "\n";
    }
    // default the probe to the high-accuracy gain representation
    if (method_override == "closed") {
      parsed.spec.method = SylvesterSolution::Method::closed;
    } else if (method_override == "bvp" || method_override.empty()) {
      parsed.spec.method = SylvesterSolution::Method::bvp;
    } else if (method_override == "discrete") {
      parsed.spec.method = SylvesterSolution::Method::discrete;
    } else {
      throw ValidationError("probe method must be closed, bvp or discrete");
    }

    const PlantSpec plant = build_plant(parsed.spec.plant);
    const Grid grid = make_grid(parsed.spec.grid_cells);
    const auto weight = make_weight(parsed.spec.weight_mode, plant.speeds);
    const Controller ctl =
        synthesize(plant, grid, parsed.spec.sigma, parsed.spec.method,
                   weight, parsed.spec.shaping);
    const ProbeReport report = observability_probe(plant, ctl, modes);

    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    std::ostringstream csv;
    csv << "mode,eig_re,eig_im,magnitude,flagged\n";
    for (const auto& mode : report.modes) {
      csv << mode.mode_index << "," << fmt17(mode.eigenvalue.real()) << ","
          << fmt17(mode.eigenvalue.imag()) << ","
          << fmt17(mode.pairing_magnitude) << ","
          << (mode.flagged ? 1 : 0) << "\n";
    }
    write_file(out / "probe.csv", csv.str());
    std::cout << "modes = " << report.modes.size()
              << ", analytic = " << (report.analytic_modes ? "true" : "false")
              << ", caveat = " << (report.caveat ? "true" : "false")
              << ", flagged = " << report.flagged_count() << "\n";
    return kExitOk;
  } catch (const ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace cascade::cli
