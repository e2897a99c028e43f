#include "qlmprot/harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace qlmprot {

using nlohmann::json;

namespace {

std::string join_lines(const std::vector<std::string>& problems) {
  std::string out = "invalid configuration:";
  for (const auto& p : problems) out += "\n  " + p;
  return out;
}

// Walks a JSON object, recording which keys were consumed so the leftovers
// can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path, std::vector<std::string>& problems)
      : obj_(obj), path_(std::move(path)), problems_(problems) {
    if (!obj_.is_object()) problem("", "expected an object");
  }

  ~ObjectReader() {
    if (!obj_.is_object()) return;
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) problem(it.key(), "unknown key");
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    if (!obj_.is_object()) return nullptr;
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  bool has(const std::string& key) const { return obj_.is_object() && obj_.contains(key); }

  template <typename T>
  void read(const std::string& key, T& target) {
    const json* v = get(key);
    if (!v) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw std::invalid_argument("expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer()) throw std::invalid_argument("expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v->is_number()) throw std::invalid_argument("expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw std::invalid_argument("expected a string");
      }
      target = v->get<T>();
    } catch (const std::exception& e) {
      problem(key, e.what());
    }
  }

  void problem(const std::string& key, const std::string& what) {
    std::string where = path_;
    if (!key.empty()) where += (where.empty() ? "" : ".") + key;
    problems_.push_back((where.empty() ? std::string("<root>") : where) + ": " + what);
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::vector<std::string>& problems() { return problems_; }

 private:
  const json& obj_;
  std::string path_;
  std::vector<std::string>& problems_;
  std::set<std::string> seen_;
};

std::vector<double> linear_grid(double lo, double hi, int points) {
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = points == 1 ? lo : lo + (hi - lo) * i / (points - 1);
  return g;
}

// A grid is either an explicit list or {min, max, points, spacing}.
std::optional<std::vector<double>> read_grid(const json& v, const std::string& path,
                                             std::vector<std::string>& problems) {
  if (v.is_array()) {
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) {
        problems.push_back(path + ": grid entries must be numbers");
        return std::nullopt;
      }
      out.push_back(x.get<double>());
    }
    if (out.empty()) {
      problems.push_back(path + ": grid is empty");
      return std::nullopt;
    }
    return out;
  }
  ObjectReader r(v, path, problems);
  double lo = 0.0, hi = 0.0;
  int points = 0;
  std::string spacing = "log";
  const std::size_t before = problems.size();
  if (!r.has("min") || !r.has("max") || !r.has("points")) r.problem("", "grid needs min, max and points");
  r.read("min", lo);
  r.read("max", hi);
  r.read("points", points);
  r.read("spacing", spacing);
  if (problems.size() != before) return std::nullopt;
  if (points < 1) r.problem("points", "must be at least 1");
  if (!(hi >= lo)) r.problem("max", "must not be below min");
  if (spacing != "log" && spacing != "linear") r.problem("spacing", "must be \"log\" or \"linear\"");
  if (spacing == "log" && !(lo > 0.0)) r.problem("min", "log spacing needs min > 0");
  if (problems.size() != before) return std::nullopt;
  return spacing == "log" ? log_time_grid(lo, hi, points) : linear_grid(lo, hi, points);
}

void read_grid_into(ObjectReader& r, const std::string& key, std::vector<double>& target) {
  if (const json* v = r.get(key))
    if (auto g = read_grid(*v, r.child(key), r.problems())) target = std::move(*g);
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"paper_compliant_L6", "paper_noncompliant_L6", "staggered_unit",
                                              "uniform_unit", "searched_compliant"};
  return names;
}

std::optional<SequenceSpec> read_sequence(const json& v, const std::string& path,
                                          std::vector<std::string>& problems) {
  SequenceSpec spec;
  const std::size_t before = problems.size();
  if (v.is_string()) {
    spec.preset = v.get<std::string>();
  } else {
    ObjectReader r(v, path, problems);
    const int forms = int(r.has("preset")) + int(r.has("numerators")) + int(r.has("superlattice"));
    if (forms != 1) r.problem("", "give exactly one of preset, numerators, superlattice");
    r.read("preset", spec.preset);
    r.read("unstaggered", spec.unstaggered);
    if (const json* n = r.get("numerators")) {
      spec.kind = SequenceSpec::Kind::explicit_values;
      if (!n->is_array() || n->empty() ||
          !std::all_of(n->begin(), n->end(), [](const json& x) { return x.is_number_integer(); }))
        r.problem("numerators", "expected a non-empty array of integers");
      else
        spec.numerators = n->get<std::vector<long long>>();
      if (!r.has("denominator")) r.problem("denominator", "required with numerators");
    }
    r.read("denominator", spec.denominator);
    if (const json* s = r.get("superlattice")) {
      spec.kind = SequenceSpec::Kind::superlattice;
      ObjectReader sr(*s, r.child("superlattice"), problems);
      sr.read("tilt", spec.tilt);
      sr.read("interaction", spec.interaction);
      sr.read("offset", spec.offset);
    }
  }
  if (spec.kind == SequenceSpec::Kind::preset &&
      std::find(preset_names().begin(), preset_names().end(), spec.preset) == preset_names().end())
    problems.push_back(path + ": unknown preset \"" + spec.preset + "\"");
  if (spec.kind == SequenceSpec::Kind::explicit_values && spec.denominator <= 0)
    problems.push_back(path + ".denominator: must be positive");
  if (spec.kind == SequenceSpec::Kind::superlattice && spec.unstaggered)
    problems.push_back(path + ".unstaggered: not defined for a superlattice sequence");
  if (problems.size() != before) return std::nullopt;
  return spec;
}

std::vector<double> subsample(const std::vector<double>& grid, std::size_t n) {
  if (grid.size() <= n) return grid;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = grid[static_cast<std::size_t>(std::llround(double(i) * double(grid.size() - 1) / double(n - 1)))];
  return out;
}

std::string format_number(double x) {
  std::ostringstream s;
  s << std::setprecision(6) << x;
  return s.str();
}

std::string sector_string(const Sector& g) {
  std::string s = "(";
  for (std::size_t i = 0; i < g.size(); ++i) s += (i ? "," : "") + std::to_string(g[i]);
  return s + ")";
}

void write_text(const std::filesystem::path& path, const std::string& text, std::vector<std::filesystem::path>& files) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path.string());
  files.push_back(path);
}

template <typename Writer>
void write_csv(const std::filesystem::path& path, Writer&& writer, std::vector<std::filesystem::path>& files) {
  std::ostringstream s;
  writer(s);
  write_text(path, s.str(), files);
}

std::vector<double> scan_values(const ExperimentConfig& config) {
  return config.v_values.empty() ? std::vector<double>{config.model.V} : config.v_values;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> problems)
    : std::runtime_error(join_lines(problems)), problems_(std::move(problems)) {}

std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::trajectory: return "trajectory";
    case Experiment::v_scan: return "v_scan";
    case Experiment::circuit: return "circuit";
    case Experiment::circuit_collapse: return "circuit_collapse";
    case Experiment::sequence_search: return "sequence_search";
    case Experiment::norm_estimate: return "norm_estimate";
    case Experiment::zeno_scan: return "zeno_scan";
  }
  return "?";
}

std::optional<Experiment> parse_experiment(std::string_view name) {
  for (auto e : {Experiment::trajectory, Experiment::v_scan, Experiment::circuit, Experiment::circuit_collapse,
                 Experiment::sequence_search, Experiment::norm_estimate, Experiment::zeno_scan})
    if (to_string(e) == name) return e;
  return std::nullopt;
}

std::string_view subcommand_of(Experiment e) {
  switch (e) {
    case Experiment::trajectory: return "trajectory";
    case Experiment::v_scan: return "vscan";
    case Experiment::circuit: return "circuit";
    case Experiment::circuit_collapse: return "collapse";
    case Experiment::sequence_search: return "sequence";
    case Experiment::norm_estimate: return "norms";
    case Experiment::zeno_scan: return "zeno";
  }
  return "?";
}

std::string SequenceSpec::describe() const {
  std::string s;
  switch (kind) {
    case Kind::preset: s = preset; break;
    case Kind::explicit_values: {
      s = "{";
      for (std::size_t i = 0; i < numerators.size(); ++i) s += (i ? "," : "") + std::to_string(numerators[i]);
      s += "}/" + std::to_string(denominator);
      break;
    }
    case Kind::superlattice:
      s = "superlattice(tilt=" + format_number(tilt) + ",U=" + format_number(interaction) +
          ",offset=" + format_number(offset) + ")";
      break;
  }
  return unstaggered ? "unstaggered " + s : s;
}

ExperimentConfig parse_config(const json& doc) {
  std::vector<std::string> problems;
  ExperimentConfig c;
  c.source = doc;
  {
    ObjectReader r(doc, "", problems);
    int version = 0;
    if (!r.has("schema_version")) r.problem("schema_version", "required");
    r.read("schema_version", version);
    if (r.has("schema_version") && version != kSchemaVersion)
      r.problem("schema_version", "unsupported version " + std::to_string(version) + " (expected " +
                                      std::to_string(kSchemaVersion) + ")");

    std::string experiment;
    if (!r.has("experiment")) r.problem("experiment", "required");
    r.read("experiment", experiment);
    if (auto e = parse_experiment(experiment))
      c.experiment = *e;
    else if (r.has("experiment"))
      r.problem("experiment", "unknown experiment \"" + experiment + "\"");

    std::string ignored;
    r.read("recipe", ignored);
    r.read("description", ignored);
    r.read("output_path", c.output_path);

    if (const json* m = r.get("model")) {
      ObjectReader mr(*m, "model", problems);
      mr.read("L", c.model.matter_sites);
      mr.read("J", c.model.J);
      mr.read("mu", c.model.mu);
      mr.read("lambda", c.model.lambda);
      mr.read("V", c.model.V);
      std::string error = std::string(to_string(c.model.error));
      mr.read("error", error);
      try {
        c.model.error = parse_error_kind(error);
      } catch (const std::exception&) {
        mr.problem("error", "must be none, local or extreme");
      }
      std::string links = "odd_links_down";
      mr.read("link_convention", links);
      if (links == "odd_links_down")
        c.links = LinkConvention::odd_links_down;
      else if (links == "even_links_down")
        c.links = LinkConvention::even_links_down;
      else
        mr.problem("link_convention", "must be odd_links_down or even_links_down");
      try {
        c.model.validate();
      } catch (const std::exception& e) {
        mr.problem("", e.what());
      }
      if (c.model.matter_sites > 6) mr.problem("L", "at most 6 matter sites are supported");
    }

    std::string protection = "linear";
    r.read("protection", protection);
    if (protection == "linear")
      c.protection = Protection::Kind::linear;
    else if (protection == "quadratic")
      c.protection = Protection::Kind::quadratic;
    else if (protection == "none")
      c.protection = Protection::Kind::none;
    else
      r.problem("protection", "must be linear, quadratic or none");

    if (const json* s = r.get("sequence"))
      if (auto spec = read_sequence(*s, "sequence", problems)) c.sequence = *spec;

    r.read("initial_state", c.initial_state);
    r.read("allow_gauge_violating_initial_state", c.allow_gauge_violating_initial_state);

    std::string average = "exact";
    r.read("average", average);
    if (average == "exact" || average == "trapezoid")
      c.average = parse_average_scheme(average);
    else
      r.problem("average", "must be exact or trapezoid");

    std::string infinite = "sample_at_1e10";
    r.read("infinite_time", infinite);
    if (infinite == "sample_at_1e10")
      c.infinite_time = InfiniteTimeMode::sample_at_1e10;
    else if (infinite == "diagonal_ensemble")
      c.infinite_time = InfiniteTimeMode::diagonal_ensemble;
    else
      r.problem("infinite_time", "must be sample_at_1e10 or diagonal_ensemble");

    if (const json* g = r.get("grids")) {
      ObjectReader gr(*g, "grids", problems);
      read_grid_into(gr, "times", c.times);
      read_grid_into(gr, "V", c.v_values);
      read_grid_into(gr, "dt", c.dt_values);
      read_grid_into(gr, "V_dt", c.v_dt_values);
      read_grid_into(gr, "kappa", c.kappa_grid);
    }

    if (const json* v = r.get("vscan")) {
      ObjectReader vr(*v, "vscan", problems);
      if (const json* s = vr.get("compliant"))
        if (auto spec = read_sequence(*s, "vscan.compliant", problems)) c.compliant = *spec;
      if (const json* s = vr.get("noncompliant"))
        if (auto spec = read_sequence(*s, "vscan.noncompliant", problems)) c.noncompliant = *spec;
    }

    if (const json* cc = r.get("circuit")) {
      ObjectReader cr(*cc, "circuit", problems);
      cr.read("dt", c.dt);
      cr.read("t_final", c.t_final);
      cr.read("xi", c.xi);
      cr.read("locate_v_ideal", c.locate_v_ideal);
      if (const json* vs = cr.get("v_search")) {
        ObjectReader sr(*vs, "circuit.v_search", problems);
        sr.read("min", c.v_search_min);
        sr.read("max", c.v_search_max);
        sr.read("points", c.v_search_points);
        sr.read("rel_tol", c.v_search_rel_tol);
      }
    }

    if (const json* s = r.get("sequence_search")) {
      ObjectReader sr(*s, "sequence_search", problems);
      sr.read("max_denominator", c.max_denominator);
    }

    if (const json* n = r.get("norms")) {
      ObjectReader nr(*n, "norms", problems);
      std::string rule = "minimal";
      nr.read("support_rule", rule);
      if (rule == "minimal")
        c.support_rule = SupportRule::minimal;
      else if (rule == "enlarged")
        c.support_rule = SupportRule::enlarged;
      else
        nr.problem("support_rule", "must be minimal or enlarged");
    }

    if (const json* z = r.get("zeno")) {
      ObjectReader zr(*z, "zeno", problems);
      zr.read("t", c.zeno_t);
    }
  }

  // Field-level ranges.
  auto positive_all = [&](const std::vector<double>& g, const std::string& name) {
    for (double x : g)
      if (!(std::isfinite(x) && x > 0.0)) {
        problems.push_back("grids." + name + ": entries must be finite and positive");
        return;
      }
  };
  auto ascending = [&](const std::vector<double>& g, const std::string& name) {
    if (!std::is_sorted(g.begin(), g.end())) problems.push_back("grids." + name + ": must be ascending");
  };
  positive_all(c.times, "times");
  ascending(c.times, "times");
  positive_all(c.dt_values, "dt");
  positive_all(c.v_dt_values, "V_dt");
  positive_all(c.kappa_grid, "kappa");
  for (double v : c.v_values)
    if (!std::isfinite(v) || v < 0.0) {
      problems.push_back("grids.V: entries must be finite and non-negative");
      break;
    }
  ascending(c.v_values, "V");
  if (!(c.dt > 0.0)) problems.push_back("circuit.dt: must be positive");
  if (!(c.t_final > 0.0)) problems.push_back("circuit.t_final: must be positive");
  if (!(c.v_search_max > c.v_search_min)) problems.push_back("circuit.v_search: max must exceed min");
  if (c.v_search_points < 3) problems.push_back("circuit.v_search.points: must be at least 3");
  if (!(c.v_search_rel_tol > 0.0)) problems.push_back("circuit.v_search.rel_tol: must be positive");
  if (c.max_denominator < 1) problems.push_back("sequence_search.max_denominator: must be at least 1");
  if (!(c.zeno_t > 0.0)) problems.push_back("zeno.t: must be positive");
  if (c.output_path.empty()) problems.push_back("output_path: must not be empty");

  if (!problems.empty()) throw ValidationError(std::move(problems));
  if (c.experiment == Experiment::v_scan && c.v_values.empty()) c.v_values = log_time_grid(1e-2, 1e4, 40);
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError({path.string() + ": cannot open config"});
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ValidationError({path.string() + ": " + e.what()});
  }
  return parse_config(doc);
}

void validate(const ExperimentConfig& c) {
  std::vector<std::string> problems;
  const int L = c.model.matter_sites;
  const bool superlattice_allowed = c.experiment == Experiment::sequence_search;

  auto check_spec = [&](const SequenceSpec& spec, const std::string& where) {
    if (spec.kind == SequenceSpec::Kind::superlattice && !superlattice_allowed)
      problems.push_back(where + ": a superlattice sequence has real coefficients and is only accepted by "
                                 "the sequence_search experiment");
    if (spec.kind == SequenceSpec::Kind::explicit_values && static_cast<int>(spec.numerators.size()) != L)
      problems.push_back(where + ": " + std::to_string(spec.numerators.size()) + " numerators for L = " +
                         std::to_string(L));
    if (spec.kind == SequenceSpec::Kind::preset && spec.preset.starts_with("paper_") && L != 6)
      problems.push_back(where + ": preset " + spec.preset + " has 6 entries, L = " + std::to_string(L));
    if (spec.kind == SequenceSpec::Kind::explicit_values && !spec.numerators.empty()) {
      long long top = 0;
      for (long long n : spec.numerators) top = std::max(top, n < 0 ? -n : n);
      if (top != spec.denominator)
        problems.push_back(where + ": denominator must equal max |numerator| (" + std::to_string(top) + ")");
    }
  };

  const bool uses_sequence =
      (c.protection == Protection::Kind::linear &&
       (c.experiment == Experiment::trajectory || c.experiment == Experiment::zeno_scan)) ||
      c.experiment == Experiment::circuit || c.experiment == Experiment::circuit_collapse ||
      c.experiment == Experiment::sequence_search || c.experiment == Experiment::norm_estimate;
  if (uses_sequence) check_spec(c.sequence, "sequence");
  if (c.experiment == Experiment::v_scan) {
    check_spec(c.compliant, "vscan.compliant");
    check_spec(c.noncompliant, "vscan.noncompliant");
  }

  if ((c.experiment == Experiment::circuit || c.experiment == Experiment::circuit_collapse) &&
      c.model.error == ErrorKind::extreme)
    problems.push_back("model.error: the circuit has no gate decomposition for the extreme error");
  if (c.experiment == Experiment::circuit_collapse && c.v_dt_values.empty())
    problems.push_back("grids.V_dt: required for circuit_collapse");
  if (c.experiment == Experiment::zeno_scan) {
    if (c.v_values.empty()) problems.push_back("grids.V: required for zeno_scan");
    for (double v : c.v_values)
      if (!(v > 0.0)) {
        problems.push_back("grids.V: zeno_scan needs V > 0");
        break;
      }
  }

  // The initial state must be a g = 0 basis state unless overridden.
  if (c.model.matter_sites >= 2 && c.model.matter_sites % 2 == 0 && c.model.matter_sites <= 6) {
    const SpinBasis basis(L);
    std::optional<Index> state;
    try {
      state = resolve_initial_state(c);
    } catch (const std::exception& e) {
      problems.push_back(std::string("initial_state: ") + e.what());
    }
    if (state && !c.allow_gauge_violating_initial_state) {
      const Sector g = sector_of_state(basis, *state);
      if (std::any_of(g.begin(), g.end(), [](int x) { return x != 0; })) {
        std::string values;
        for (int j = 1; j <= L; ++j)
          values += (j > 1 ? ", " : "") + std::string("<G_") + std::to_string(j) + "> = " +
                    std::to_string(g[static_cast<std::size_t>(j - 1)]);
        problems.push_back("initial_state: not in the g = 0 sector (" + values +
                           "); set allow_gauge_violating_initial_state to override");
      }
    }
  }

  if (!problems.empty()) throw ValidationError(std::move(problems));
}

std::vector<std::string> apply_ci_scale(ExperimentConfig& c) {
  std::vector<std::string> notes;
  if (c.model.matter_sites != 4) {
    notes.push_back("L " + std::to_string(c.model.matter_sites) + " -> 4");
    c.model.matter_sites = 4;
  }
  auto swap_preset = [&](SequenceSpec& spec, const std::string& where) {
    if (spec.kind == SequenceSpec::Kind::explicit_values && spec.numerators.size() != 4) {
      notes.push_back(where + ": " + spec.describe() + " -> searched_compliant");
      spec = SequenceSpec::named("searched_compliant");
    }
    if (spec.kind != SequenceSpec::Kind::preset) return;
    const std::string before = spec.preset;
    if (spec.preset == "paper_compliant_L6") spec.preset = "searched_compliant";
    if (spec.preset == "paper_noncompliant_L6") spec.preset = "staggered_unit";
    if (spec.preset != before) notes.push_back(where + ": " + before + " -> " + spec.preset);
  };
  swap_preset(c.sequence, "sequence");
  swap_preset(c.compliant, "vscan.compliant");
  swap_preset(c.noncompliant, "vscan.noncompliant");

  if (c.initial_state != "staggered_vacuum" && c.initial_state != "two_particle_14") {
    notes.push_back("initial_state " + c.initial_state + " -> staggered_vacuum");
    c.initial_state = "staggered_vacuum";
  }
  auto shrink = [&](std::vector<double>& grid, std::size_t n, const std::string& name) {
    if (grid.size() > n) {
      notes.push_back(name + ": " + std::to_string(grid.size()) + " -> " + std::to_string(n) + " points");
      grid = subsample(grid, n);
    }
  };
  shrink(c.times, 40, "times");
  shrink(c.v_values, 8, "V");
  shrink(c.v_dt_values, 8, "V_dt");
  if (c.max_denominator > 20) {
    notes.push_back("max_denominator " + std::to_string(c.max_denominator) + " -> 20");
    c.max_denominator = 20;
  }
  validate(c);
  return notes;
}

ProtectionSequence resolve_sequence(const SequenceSpec& spec, int L, long long max_denominator) {
  std::optional<ProtectionSequence> seq;
  switch (spec.kind) {
    case SequenceSpec::Kind::superlattice:
      throw std::invalid_argument("a superlattice sequence has no integer form");
    case SequenceSpec::Kind::explicit_values:
      seq = ProtectionSequence(spec.numerators, spec.denominator);
      break;
    case SequenceSpec::Kind::preset:
      if (spec.preset == "paper_compliant_L6")
        seq = ProtectionSequence::paper_compliant_L6();
      else if (spec.preset == "paper_noncompliant_L6")
        seq = ProtectionSequence::paper_noncompliant_L6();
      else if (spec.preset == "staggered_unit")
        seq = ProtectionSequence::staggered_unit(L);
      else if (spec.preset == "uniform_unit")
        seq = ProtectionSequence::uniform_unit(L);
      else if (spec.preset == "searched_compliant") {
        seq = find_compliant_sequence(L, max_denominator);
        if (!seq)
          throw std::runtime_error("no compliant sequence with denominator <= " + std::to_string(max_denominator));
      } else {
        throw std::invalid_argument("unknown preset " + spec.preset);
      }
      break;
  }
  if (seq->size() != L)
    throw std::invalid_argument("sequence " + spec.describe() + " has " + std::to_string(seq->size()) +
                                " entries, L = " + std::to_string(L));
  if (spec.unstaggered) {
    std::vector<long long> n = seq->numerators();
    for (auto& x : n) x = x < 0 ? -x : x;
    seq = ProtectionSequence(std::move(n), seq->denominator());
  }
  return *seq;
}

Protection resolve_protection(const ExperimentConfig& c) {
  switch (c.protection) {
    case Protection::Kind::none: return Protection::none();
    case Protection::Kind::quadratic: return Protection::quadratic();
    case Protection::Kind::linear:
      return Protection::linear(resolve_sequence(c.sequence, c.model.matter_sites, c.max_denominator));
  }
  return Protection::none();
}

Index resolve_initial_state(const ExperimentConfig& c) {
  const SpinBasis basis(c.model.matter_sites);
  if (c.initial_state == "staggered_vacuum") return staggered_vacuum(basis, c.links);
  if (c.initial_state == "two_particle_14") {
    if (c.model.matter_sites < 4) throw std::invalid_argument("two_particle_14 needs L >= 4");
    return two_particle_14(basis);
  }
  return parse_bitstring(basis, c.initial_state);
}

std::vector<VScanRow> preset_scan_vscan(const ModelParams& params, const ProtectionSequence& compliant,
                                        const ProtectionSequence& noncompliant, const StateVector& psi0,
                                        std::span<const double> v_values, InfiniteTimeMode mode, int threads) {
  params.validate();
  const std::array<Protection, 3> kinds{Protection::quadratic(), Protection::linear(compliant),
                                        Protection::linear(noncompliant)};
  std::vector<ProtectedHamiltonian> hams;
  for (const auto& p : kinds) hams.push_back(prepare_hamiltonian(params, p));
  const RealVector obs = violation_diagonal(params.basis());

  std::vector<double> values(v_values.size() * 3);
  parallel_for(values.size(), threads, [&](std::size_t k) {
    const std::size_t i = k / 3, which = k % 3;
    auto spectrum = eigh(hams[which].matrix_at(v_values[i]));
    values[k] = infinite_time_violation(spectrum, obs, psi0, mode).value;
  });

  std::vector<VScanRow> rows(v_values.size());
  for (std::size_t i = 0; i < v_values.size(); ++i)
    rows[i] = VScanRow{v_values[i], values[3 * i], values[3 * i + 1], values[3 * i + 2]};
  std::sort(rows.begin(), rows.end(), [](const VScanRow& a, const VScanRow& b) { return a.V > b.V; });
  return rows;
}

void write_vscan_csv(std::ostream& out, std::span<const VScanRow> rows) {
  out << "J_over_V,eps_inf_quadratic,eps_inf_compliant,eps_inf_noncompliant\n" << std::setprecision(17);
  for (const auto& r : rows) {
    const double ratio = r.V > 0.0 ? 1.0 / r.V : std::numeric_limits<double>::infinity();
    out << ratio << ',' << r.eps_quadratic << ',' << r.eps_compliant << ',' << r.eps_noncompliant << '\n';
  }
}

json to_json(const ProtectionSequence& c) {
  return json{{"numerators", c.numerators()},
              {"denominator", c.denominator()},
              {"coefficients", c.coefficients()},
              {"mean_abs", c.mean_abs()},
              {"text", c.to_string()}};
}

json to_json(const ComplianceReport& r, long long denominator) {
  json j{{"compliant", r.compliant},
         {"gap_D", r.gap_D},
         {"gap_numerator", r.gap_numerator},
         {"gap_denominator", denominator},
         {"fully_nondegenerate", r.fully_nondegenerate}};
  j["witness"] = r.witness ? json(*r.witness) : json(nullptr);
  return j;
}

json to_json(const NormEstimate& e) {
  return json{{"kappa0", e.kappa0},
              {"norm_diag", e.norm_diag},
              {"norm_ndiag", e.norm_ndiag},
              {"V0", e.V0},
              {"v_bound", e.v_bound},
              {"v_min", e.v_min},
              {"v_min_asymptotic", e.v_min_asymptotic},
              {"n_star_at_v_min", e.n_star_at_v_min},
              {"kappa_n_star", e.kappa_n_star}};
}

namespace {

std::string v_tag(std::size_t i, double V) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%02zu_V%.6g", i, V);
  return buf;
}

RunResult run_trajectory_experiment(const ExperimentConfig& c, const std::filesystem::path& dir, int threads) {
  RunResult out;
  const Protection protection = resolve_protection(c);
  const SpinBasis basis = c.model.basis();
  const StateVector psi0 = basis_state(basis, resolve_initial_state(c));
  const ProtectedHamiltonian ham = prepare_hamiltonian(c.model, protection);
  const RealVector obs = violation_diagonal(basis);
  const auto vs = scan_values(c);

  std::vector<Trajectory> results(vs.size());
  parallel_for(vs.size(), threads, [&](std::size_t i) {
    auto spectrum = eigh(ham.matrix_at(vs[i]));
    results[i] = run_trajectory(spectrum, obs, psi0, c.times, c.average);
    results[i].params = c.model;
    results[i].params.V = vs[i];
    results[i].protection = protection.describe();
  });

  json runs = json::array();
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const auto name = "trajectory_" + v_tag(i, vs[i]) + ".csv";
    write_csv(dir / name, [&](std::ostream& s) { write_trajectory_csv(s, results[i]); }, out.files);
    runs.push_back({{"V", vs[i]},
                    {"file", name},
                    {"epsilon_avg_final", results[i].epsilon_avg.back()},
                    {"max_norm_error", results[i].max_norm_error}});
  }
  out.summary = {{"protection", protection.describe()}, {"runs", runs}};
  return out;
}

RunResult run_vscan_experiment(const ExperimentConfig& c, const std::filesystem::path& dir, int threads) {
  RunResult out;
  const auto compliant = resolve_sequence(c.compliant, c.model.matter_sites, c.max_denominator);
  const auto noncompliant = resolve_sequence(c.noncompliant, c.model.matter_sites, c.max_denominator);
  const SpinBasis basis = c.model.basis();
  const StateVector psi0 = basis_state(basis, resolve_initial_state(c));
  const auto rows = preset_scan_vscan(c.model, compliant, noncompliant, psi0, scan_values(c), c.infinite_time, threads);
  write_csv(dir / "vscan.csv", [&](std::ostream& s) { write_vscan_csv(s, rows); }, out.files);
  out.summary = {{"compliant", compliant.to_string()},
                 {"noncompliant", noncompliant.to_string()},
                 {"infinite_time", std::string(to_string(c.infinite_time))},
                 {"points", rows.size()}};
  return out;
}

TrotterConfig trotter_base(const ExperimentConfig& c) {
  TrotterConfig t;
  t.dt = c.dt;
  t.n_steps = static_cast<int>(std::llround(c.t_final / c.dt));
  t.params = c.model;
  t.sequence = resolve_sequence(c.sequence, c.model.matter_sites, c.max_denominator);
  return t;
}

RunResult run_circuit_experiment(const ExperimentConfig& c, const std::filesystem::path& dir, int threads) {
  RunResult out;
  const TrotterConfig base = trotter_base(c);
  base.validate();
  const SpinBasis basis = c.model.basis();
  const StateVector psi0 = basis_state(basis, resolve_initial_state(c));
  const HoppingSpectrum hop = hopping_spectrum(basis, c.model.J);
  const auto vs = scan_values(c);

  std::vector<Trajectory> results(vs.size());
  parallel_for(vs.size(), threads, [&](std::size_t i) {
    TrotterConfig t = base;
    t.params.V = vs[i];
    results[i] = run_circuit(t, psi0, hop);
  });
  json runs = json::array();
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const auto name = "circuit_" + v_tag(i, vs[i]) + ".csv";
    write_csv(dir / name, [&](std::ostream& s) { write_circuit_csv(s, results[i]); }, out.files);
    runs.push_back({{"V", vs[i]},
                    {"file", name},
                    {"epsilon_mean", results[i].epsilon_avg.back()},
                    {"epsilon_final", results[i].epsilon.back()}});
  }
  const double predicted = v_ideal(c.dt, base.sequence.mean_abs(), c.xi);
  out.summary = {{"sequence", base.sequence.to_string()},
                 {"dt", c.dt},
                 {"n_steps", base.n_steps},
                 {"v_ideal_predicted", predicted},
                 {"runs", runs}};

  if (c.locate_v_ideal) {
    const auto search = locate_v_ideal(base, psi0, c.v_search_min, c.v_search_max, c.v_search_points,
                                       c.v_search_rel_tol, hop, threads);
    write_csv(dir / "v_search.csv",
              [&](std::ostream& s) {
                s << "V,eps_avg\n" << std::setprecision(17);
                auto evals = search.evaluations;
                std::sort(evals.begin(), evals.end());
                for (const auto& [v, e] : evals) s << v << ',' << e << '\n';
              },
              out.files);
    out.summary["v_argmin"] = search.v_argmin;
    out.summary["eps_min"] = search.eps_min;
    out.summary["relative_deviation"] = std::abs(search.v_argmin - predicted) / predicted;
  }
  return out;
}

RunResult run_collapse_experiment(const ExperimentConfig& c, const std::filesystem::path& dir, int threads) {
  RunResult out;
  const TrotterConfig base = trotter_base(c);
  base.validate();
  const SpinBasis basis = c.model.basis();
  const StateVector psi0 = basis_state(basis, resolve_initial_state(c));
  const auto rows =
      collapse_scan(base, psi0, c.dt_values, c.v_dt_values, c.t_final, hopping_spectrum(basis, c.model.J), threads);
  write_csv(dir / "collapse.csv", [&](std::ostream& s) { write_collapse_csv(s, rows); }, out.files);

  json minima = json::array();
  for (double dt : c.dt_values) {
    const CollapseRow* best = nullptr;
    for (const auto& r : rows)
      if (r.dt == dt && (!best || r.eps_avg_rescaled < best->eps_avg_rescaled)) best = &r;
    if (best) minima.push_back({{"dt", dt}, {"V_dt_argmin", best->V_dt}, {"eps_avg_rescaled", best->eps_avg_rescaled}});
  }
  out.summary = {{"sequence", base.sequence.to_string()}, {"t_final", c.t_final}, {"minima", minima}};
  return out;
}

RunResult run_sequence_experiment(const ExperimentConfig& c, const std::filesystem::path& dir) {
  RunResult out;
  const int L = c.model.matter_sites;
  const SpinBasis basis(L);
  const GaugeSectorTable table = sector_map(basis);
  json report{{"L", L}, {"allowed_sectors", table.sectors.size()}};

  if (c.sequence.kind == SequenceSpec::Kind::superlattice) {
    const auto s = build_superlattice_sequence(L, c.sequence.tilt, c.sequence.interaction, c.sequence.offset);
    const auto degenerate = degenerate_sectors(s, table);
    json list = json::array();
    for (const auto& g : degenerate) list.push_back(sector_string(g));
    report["superlattice"] = {{"coefficients", s.coefficients},
                              {"scale", s.scale},
                              {"degenerate_sectors", list},
                              {"minimal_degenerate_sector",
                               degenerate.empty() ? json(nullptr) : json(sector_string(degenerate.front()))}};
  } else {
    const auto seq = resolve_sequence(c.sequence, L, c.max_denominator);
    const auto compliance = check_compliance(seq, table);
    report["sequence"] = to_json(seq);
    report["compliance"] = to_json(compliance, seq.denominator());
    if (c.model.error != ErrorKind::none && basis.dim() <= 4096) {
      const RealOperator h1 = build_h1(c.model.error, basis);
      report["degeneracy_split"] = degeneracy_split_check(seq, h1, table);
    }
  }
  if (auto found = find_compliant_sequence(table, c.max_denominator)) {
    report["searched_compliant"] = to_json(*found);
    report["searched_compliant"]["compliance"] = to_json(check_compliance(*found, table), found->denominator());
  } else {
    report["searched_compliant"] = nullptr;
  }
  report["max_denominator"] = c.max_denominator;
  write_text(dir / "sequence.json", report.dump(2) + "\n", out.files);
  out.summary = report;
  return out;
}

RunResult run_norms_experiment(const ExperimentConfig& c, const std::filesystem::path& dir) {
  RunResult out;
  const auto seq = resolve_sequence(c.sequence, c.model.matter_sites, c.max_denominator);
  const auto pot = decompose(c.model, seq, c.support_rule);
  const auto est = estimate_vmin(pot, c.kappa_grid);
  write_csv(dir / "kappa_scan.csv",
            [&](std::ostream& s) {
              s << "kappa,V0\n" << std::setprecision(17);
              auto scan = est.scan;
              std::sort(scan.begin(), scan.end());
              for (const auto& [k, v] : scan) s << k << ',' << v << '\n';
            },
            out.files);
  json report = to_json(est);
  report["L"] = c.model.matter_sites;
  report["error"] = std::string(to_string(c.model.error));
  report["lambda"] = c.model.lambda;
  report["sequence"] = seq.to_string();
  report["support_rule"] = c.support_rule == SupportRule::minimal ? "minimal" : "enlarged";
  report["terms_diag"] = pot.count(PotentialPart::diag);
  report["terms_ndiag"] = pot.count(PotentialPart::ndiag);
  write_text(dir / "norms.json", report.dump(2) + "\n", out.files);
  out.summary = report;
  return out;
}

RunResult run_zeno_experiment(const ExperimentConfig& c, const std::filesystem::path& dir) {
  RunResult out;
  const Protection protection = resolve_protection(c);
  const SpinBasis basis = c.model.basis();
  const StateVector psi0 = basis_state(basis, resolve_initial_state(c));
  const auto residual = zeno_residual(c.model, protection, psi0, c.zeno_t, c.v_values);
  write_csv(dir / "zeno.csv",
            [&](std::ostream& s) {
              s << "V,residual\n" << std::setprecision(17);
              for (std::size_t i = 0; i < residual.size(); ++i) s << c.v_values[i] << ',' << residual[i] << '\n';
            },
            out.files);
  out.summary = {{"protection", protection.describe()}, {"t", c.zeno_t}, {"points", residual.size()}};
  return out;
}

}  // namespace

RunResult run_experiment(ExperimentConfig config, const RunOptions& options) {
  std::vector<std::string> ci_notes;
  if (options.ci_scale) ci_notes = apply_ci_scale(config);
  else validate(config);

  const std::filesystem::path dir = options.out_dir.empty() ? std::filesystem::path(config.output_path) : options.out_dir;
  std::filesystem::create_directories(dir);
  const int threads = std::max(1, options.threads);

  RunResult result;
  switch (config.experiment) {
    case Experiment::trajectory: result = run_trajectory_experiment(config, dir, threads); break;
    case Experiment::v_scan: result = run_vscan_experiment(config, dir, threads); break;
    case Experiment::circuit: result = run_circuit_experiment(config, dir, threads); break;
    case Experiment::circuit_collapse: result = run_collapse_experiment(config, dir, threads); break;
    case Experiment::sequence_search: result = run_sequence_experiment(config, dir); break;
    case Experiment::norm_estimate: result = run_norms_experiment(config, dir); break;
    case Experiment::zeno_scan: result = run_zeno_experiment(config, dir); break;
  }

  // Thread count is deliberately left out: outputs do not depend on it.
  json files = json::array();
  for (const auto& f : result.files) files.push_back(f.filename().string());
  json manifest{{"code_version", kCodeVersion},
                {"schema_version", kSchemaVersion},
                {"experiment", std::string(to_string(config.experiment))},
                {"command", options.command},
                {"ci_scale", options.ci_scale},
                {"ci_substitutions", ci_notes},
                {"config", config.source},
                {"resolved",
                 {{"L", config.model.matter_sites},
                  {"J", config.model.J},
                  {"mu", config.model.mu},
                  {"lambda", config.model.lambda},
                  {"error", std::string(to_string(config.model.error))},
                  {"initial_state", config.initial_state},
                  {"sequence", config.sequence.describe()},
                  {"time_points", config.times.size()},
                  {"V_points", config.v_values.size()}}},
                {"files", files},
                {"summary", result.summary}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n", result.files);
  return result;
}

}  // namespace qlmprot
