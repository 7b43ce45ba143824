#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "novsemi/semigroup.hpp"

namespace novsemi {

/// Exit statuses of the command-line driver.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitMonitor = 3, kExitValidation = 4 };

/**
 * Flat key=value scenario description. Lines starting with '#' are comments.
 * Keys left unset take the defaults of the chosen scenario.
 */
struct ScenarioConfig {
    std::string scenario = "gauss-smooth";
    std::filesystem::path data_file;  // scenario "file": a pair in load_pair format
    std::optional<double> x_min, x_max;
    std::size_t n_cells = 1024;
    std::size_t n_labels = 0;  // 0: one label per x-node
    std::optional<double> amplitude;
    std::vector<Atom> atoms;  // added to the ac energy measure
    bool atoms_set = false;
    FlowConfig flow;
    std::filesystem::path output_dir = "out";
    std::size_t threads = 1;
    double semigroup_t = 0.5, semigroup_tau = 0.5;
    std::vector<int> continuity_n = {2, 4, 8, 16};
    double bump_amplitude = 0.3, bump_center = 1.0, bump_width = 1.0;
    std::size_t residual_cells = 256;
    double residual_t_end = 0.5;
    double oracle_tol = 5e-3;

    /// Throws ConfigError naming the offending key.
    void validate() const;
};

/// Names of the built-in scenarios.
const std::vector<std::string>& scenario_names();

/// Throws ConfigError naming the key on unknown keys or malformed values.
void apply_setting(ScenarioConfig& cfg, const std::string& key, const std::string& value);
/// Applies one "key=value" string.
void apply_override(ScenarioConfig& cfg, const std::string& assignment);
ScenarioConfig parse_config(std::istream& in, const std::string& source = "<config>");
ScenarioConfig load_config(const std::filesystem::path& path);

/// Spatial grid of the scenario with `n_cells` cells.
SpatialGrid scenario_grid(const ScenarioConfig& cfg, std::size_t n_cells);
/// Initial triple (pair plus ac energy measure plus configured atoms) on that grid.
FlowTriple make_scenario(const ScenarioConfig& cfg, std::size_t n_cells);
/// The configured pair with u replaced by u + bump / n.
SigmaPair bumped_pair(const ScenarioConfig& cfg, const SigmaPair& p, int n);
PipelineOptions pipeline_options(const ScenarioConfig& cfg);

/// One row of a pass/fail table.
struct CheckRow {
    std::string name;
    double value = 0;
    double tolerance = 0;
    bool pass = false;
};
void print_checks(const std::vector<CheckRow>& rows, std::ostream& os);
void write_checks_csv(const std::vector<CheckRow>& rows, const std::filesystem::path& path);

/**
 * Runs the flow and writes diagnostics.csv, snapshots/snapshot_KKKK.csv,
 * measures/measures_KKKK.csv, final_pair.txt and trajectory.nsm.
 */
int run_simulate(const ScenarioConfig& cfg, std::ostream& log);
/// Oracle, scan, conservation, kernel-bound and residual-refinement checks.
int run_validate(const ScenarioConfig& cfg, std::ostream& log);
/// Identity and composition discrepancies at n_cells and 2 n_cells cells.
int run_semigroup(const ScenarioConfig& cfg, std::ostream& log);
/// Gap table for u + bump / n over continuity_n at n_cells and 2 n_cells cells.
int run_continuity(const ScenarioConfig& cfg, std::ostream& log);

}  // namespace novsemi
