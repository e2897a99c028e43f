// harness.hpp - experiment configuration, figure recipes and orchestration.
//
// A config is a JSON object with "schema_version": 1. Unknown keys anywhere
// are rejected so that a typo in a physics parameter can never silently fall
// back to a default.

#ifndef QLMPROT_HARNESS_HPP
#define QLMPROT_HARNESS_HPP

#include "qlmprot/circuit.hpp"
#include "qlmprot/evolve.hpp"
#include "qlmprot/gauge.hpp"
#include "qlmprot/model.hpp"
#include "qlmprot/norms.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qlmprot {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kCodeVersion = "1.0.0";

/// Every problem found in a config, reported at once.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

enum class Experiment { trajectory, v_scan, circuit, circuit_collapse, sequence_search, norm_estimate, zeno_scan };

std::string_view to_string(Experiment e);
std::optional<Experiment> parse_experiment(std::string_view name);
/// CLI subcommand name for an experiment (trajectory, vscan, circuit, collapse, sequence, norms, zeno).
std::string_view subcommand_of(Experiment e);

/// A coefficient sequence by preset name, explicit numerators, or the
/// superlattice formula (real coefficients, sequence experiment only).
struct SequenceSpec {
  enum class Kind { preset, explicit_values, superlattice };
  Kind kind = Kind::preset;
  std::string preset = "paper_compliant_L6";
  std::vector<long long> numerators;
  long long denominator = 1;
  double tilt = 0.0, interaction = 0.0, offset = 0.0;
  bool unstaggered = false;  // replace every coefficient by its magnitude

  static SequenceSpec named(std::string preset_name) {
    SequenceSpec s;
    s.preset = std::move(preset_name);
    return s;
  }
  std::string describe() const;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::trajectory;
  ModelParams model;
  LinkConvention links = LinkConvention::odd_links_down;

  Protection::Kind protection = Protection::Kind::linear;
  SequenceSpec sequence;

  std::string initial_state = "staggered_vacuum";  // or two_particle_14 or a bitstring
  bool allow_gauge_violating_initial_state = false;

  std::vector<double> times = default_time_grid();
  AverageScheme average = AverageScheme::exact;
  std::vector<double> v_values;  // scans; empty means {model.V}
  InfiniteTimeMode infinite_time = InfiniteTimeMode::sample_at_1e10;

  // v_scan
  SequenceSpec compliant = SequenceSpec::named("paper_compliant_L6");
  SequenceSpec noncompliant = SequenceSpec::named("paper_noncompliant_L6");

  // circuit and collapse
  double dt = 0.2;
  double t_final = 20.0;
  double xi = 0.58;
  bool locate_v_ideal = false;
  double v_search_min = 2.0;
  double v_search_max = 16.0;
  int v_search_points = 15;
  double v_search_rel_tol = 0.01;
  std::vector<double> dt_values{0.1, 0.2, 0.4};
  std::vector<double> v_dt_values;

  // sequence search
  long long max_denominator = 146;

  // norms
  SupportRule support_rule = SupportRule::minimal;
  std::vector<double> kappa_grid = default_kappa_grid();

  // zeno
  double zeno_t = 1.0;

  std::string output_path = "out";
  nlohmann::json source;  // the parsed document, echoed into the manifest
};

/// Throws ValidationError listing every problem.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Cross-field checks that need the model (sequence lengths, initial sector).
void validate(const ExperimentConfig& config);

/// Reduced grids: L = 4, 40 time points, 8 V points. The L = 6 sequence
/// presets are swapped for their L = 4 counterparts (searched compliant,
/// staggered unit); the swaps are returned for the manifest.
std::vector<std::string> apply_ci_scale(ExperimentConfig& config);

ProtectionSequence resolve_sequence(const SequenceSpec& spec, int matter_sites, long long max_denominator = 146);
Protection resolve_protection(const ExperimentConfig& config);
Index resolve_initial_state(const ExperimentConfig& config);

struct VScanRow {
  double V;
  double eps_quadratic;
  double eps_compliant;
  double eps_noncompliant;
};

/// Infinite-time violation per V for quadratic protection and both sequences.
std::vector<VScanRow> preset_scan_vscan(const ModelParams& params, const ProtectionSequence& compliant,
                                        const ProtectionSequence& noncompliant, const StateVector& psi0,
                                        std::span<const double> v_values, InfiniteTimeMode mode, int threads = 1);

/// Header `J_over_V,eps_inf_quadratic,eps_inf_compliant,eps_inf_noncompliant`, rows by descending J/V.
void write_vscan_csv(std::ostream& out, std::span<const VScanRow> rows);

nlohmann::json to_json(const ProtectionSequence& c);
nlohmann::json to_json(const ComplianceReport& report, long long denominator);
nlohmann::json to_json(const NormEstimate& estimate);

struct RunOptions {
  std::filesystem::path out_dir;  // empty: config.output_path
  int threads = 1;
  bool ci_scale = false;
  std::string command;  // echoed into the manifest
};

struct RunResult {
  std::vector<std::filesystem::path> files;
  nlohmann::json summary;
};

/// Runs the experiment, writes its CSV/JSON files and manifest.json.
RunResult run_experiment(ExperimentConfig config, const RunOptions& options);

}  // namespace qlmprot

#endif  // QLMPROT_HARNESS_HPP
