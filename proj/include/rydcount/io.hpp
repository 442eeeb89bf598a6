#pragma once

// Run configuration, dispatch and byte-stable serialization of results.

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rydcount/harness.hpp"

namespace rydcount::io {

enum class Command { simulate, ensemble, sweep_na, surface, isolines, fit_isoline };
enum class Format { csv, json };

const char* to_string(Command command) noexcept;
Command parse_command(std::string_view name);

struct NaRange {
  AtomCount lo = 220;
  AtomCount hi = 280;
  AtomCount step = 10;

  std::vector<AtomCount> values() const;
  std::string to_string() const;  // "lo:hi:step"
  static NaRange parse(std::string_view text);

  bool operator==(const NaRange&) const = default;
};

struct RunConfig {
  Command command = Command::ensemble;
  trajectory::TrajectoryConfig trajectory;
  int trajectories = 1000;
  std::uint64_t seed = 1;
  std::vector<int> steps_list;    // sweep-na; defaults to {steps}
  std::vector<double> eta_grid;   // sweep-na and surface
  NaRange na_range;
  std::vector<double> levels;     // isolines and fit-isoline
  harness::NaSampling na_sampling = harness::NaSampling::poisson_sample;
  Format format = Format::csv;
  std::string out;
  std::string input;  // surface CSV for isolines, isoline CSV for fit-isoline
  bool dump_posterior = false;
  unsigned workers = 1;

  // Fills command-dependent defaults and checks every field.
  void resolve();

  bool operator==(const RunConfig&) const = default;
};

/// Strict parse: unknown keys and ill-typed values are invalid-argument.
/// Missing keys keep their defaults. The result is resolved.
RunConfig parse_config(std::string_view json_text);

/// Every field written explicitly; parse_config(to_json(c)) == c.
std::string to_json(const RunConfig& config);

struct RunResult {
  Command command = Command::ensemble;
  std::variant<trajectory::TrajectoryRecord, harness::EnsembleStats,
               std::vector<harness::SweepRow>, std::vector<harness::SurfaceCell>,
               std::vector<harness::Isoline>, std::vector<harness::HyperbolaFit>>
      payload;
  int trajectories = 0;
  int failures = 0;
  std::vector<std::string> warnings;

  bool all_failed() const { return trajectories > 0 && failures == trajectories; }
};

RunResult execute(const RunConfig& config);

std::string render(const RunResult& result, Format format);

/// {"n_min": ..., "weights": [...]}
std::string render_posterior(const bayes::AtomNumberDistribution& dist);

// Shortest decimal string that round-trips to the same double.
std::string format_double(double value);

std::string trajectory_csv(const trajectory::TrajectoryRecord& record);
std::string ensemble_csv(const harness::EnsembleStats& stats);
std::string sweep_csv(std::span<const harness::SweepRow> rows);
std::string surface_csv(std::span<const harness::SurfaceCell> cells);
std::string isoline_csv(std::span<const harness::Isoline> lines);
std::string fit_json(std::span<const harness::HyperbolaFit> fits);

std::vector<harness::SurfaceCell> parse_surface_csv(std::string_view text);
std::vector<harness::Isoline> parse_isoline_csv(std::string_view text);

std::string read_file(const std::string& path);

/// "sha256:<hex>" of the bytes.
std::string digest(std::string_view content);

/// Writes the bytes to `path` and returns their digest. Throws io-error.
std::string emit(std::string_view content, const std::string& path);

}  // namespace rydcount::io
