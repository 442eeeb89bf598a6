#include "rydcount/io.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <json.hpp>

namespace rydcount::io {

using nlohmann::json;

namespace {

constexpr const char* kTrajectoryHeader =
    "step,n_perceived,theta_nominal,theta_applied,sigma_actual,excited,"
    "detected,n_actual_after,fidelity,infidelity,posterior_mean,posterior_std";
constexpr const char* kEnsembleHeader =
    "step,mean_diff,std_diff,mean_fidelity,mean_infidelity,std_fidelity,"
    "mean_detections_cum,failures";
constexpr const char* kSweepHeader =
    "na_initial,eta,steps,mean_diff,std_diff,mean_infidelity,std_fidelity,"
    "reference_infidelity";
constexpr const char* kSurfaceHeader = "eta,steps,avg_infidelity,standard_error";
constexpr const char* kIsolineHeader = "level,eta,steps_interpolated";

const std::vector<double> kDefaultEtaGrid = {0.3, 0.4, 0.5, 0.6,
                                             0.7, 0.8, 0.9, 1.0};
const std::vector<double> kDefaultLevels = {1.5e-4, 3e-4, 6e-4};

class CsvWriter {
 public:
  explicit CsvWriter(const char* header) { out_ << header << '\n'; }

  template <typename... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(fields), first = false), ...);
    out_ << '\n';
  }

  std::string str() const { return out_.str(); }

 private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  template <typename Int>
    requires std::is_integral_v<Int>
  static std::string cell(Int v) { return std::to_string(v); }

  std::ostringstream out_;
};

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

template <typename T>
T parse_number(std::string_view text, const char* what) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  require(ec == std::errc{} && ptr == end,
          std::string("malformed ") + what + ": '" + std::string(text) + "'");
  return value;
}

std::vector<std::vector<std::string_view>> csv_rows(std::string_view text,
                                                    const char* header) {
  auto lines = split(text, '\n');
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  require(!lines.empty() && lines.front() == header,
          std::string("expected CSV header '") + header + "'");
  std::vector<std::vector<std::string_view>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) rows.push_back(split(lines[i], ','));
  return rows;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json fit_to_json(const harness::HyperbolaFit& fit) {
  return json{{"level", fit.level},
              {"a", fit.a},
              {"b", fit.b},
              {"rms_residual", fit.rms_residual},
              {"n_points", fit.n_points}};
}

// Strict field readers.
template <typename T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::invalid_argument,
         std::string("config key '") + key + "' has the wrong type");
  }
}

std::vector<harness::HyperbolaFit> fit_levels(
    std::span<const harness::Isoline> lines, std::vector<std::string>& warnings) {
  std::vector<harness::HyperbolaFit> fits;
  for (const auto& line : lines) {
    try {
      auto fit = harness::fit_hyperbola(line.points);
      fit.level = line.level;
      fits.push_back(fit);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::fit_failed) throw;
      warnings.push_back("level " + format_double(line.level) + ": " + e.what());
    }
  }
  if (fits.empty()) fail(ErrorKind::fit_failed, "no isoline level could be fitted");
  return fits;
}

}  // namespace

const char* to_string(Command command) noexcept {
  switch (command) {
    case Command::simulate: return "simulate";
    case Command::ensemble: return "ensemble";
    case Command::sweep_na: return "sweep-na";
    case Command::surface: return "surface";
    case Command::isolines: return "isolines";
    case Command::fit_isoline: return "fit-isoline";
  }
  return "unknown";
}

Command parse_command(std::string_view name) {
  for (auto c : {Command::simulate, Command::ensemble, Command::sweep_na,
                 Command::surface, Command::isolines, Command::fit_isoline}) {
    if (name == to_string(c)) return c;
  }
  fail(ErrorKind::invalid_argument, "unknown command '" + std::string(name) + "'");
}

std::vector<AtomCount> NaRange::values() const {
  std::vector<AtomCount> out;
  for (AtomCount n = lo; n <= hi; n += step) out.push_back(n);
  return out;
}

std::string NaRange::to_string() const {
  return std::to_string(lo) + ":" + std::to_string(hi) + ":" + std::to_string(step);
}

NaRange NaRange::parse(std::string_view text) {
  const auto parts = split(text, ':');
  require(parts.size() == 2 || parts.size() == 3,
          "na-range must be lo:hi[:step]");
  NaRange r;
  r.lo = parse_number<AtomCount>(parts[0], "na-range");
  r.hi = parse_number<AtomCount>(parts[1], "na-range");
  r.step = parts.size() == 3 ? parse_number<AtomCount>(parts[2], "na-range") : 1;
  require(r.lo >= 1 && r.hi >= r.lo && r.step >= 1,
          "na-range needs 1 <= lo <= hi and step >= 1");
  return r;
}

void RunConfig::resolve() {
  trajectory.validate();
  require(trajectories >= 1, "trajectories must be >= 1");
  require(workers >= 1, "workers must be >= 1");
  require(na_range.lo >= 1 && na_range.hi >= na_range.lo && na_range.step >= 1,
          "na-range needs 1 <= lo <= hi and step >= 1");
  if (steps_list.empty()) steps_list = {trajectory.steps};
  for (int s : steps_list) require(s >= 1, "steps-list entries must be >= 1");
  if (eta_grid.empty()) {
    eta_grid = command == Command::sweep_na
                   ? std::vector<double>{trajectory.detector.eta}
                   : kDefaultEtaGrid;
  }
  for (double e : eta_grid) require(e >= 0.0 && e <= 1.0, "eta-grid entries must be in [0, 1]");
  if (levels.empty()) levels = kDefaultLevels;
  for (double l : levels) require(l > 0.0 && l < 1.0, "levels must be in (0, 1)");
}

RunConfig parse_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::invalid_argument, std::string("config is not valid JSON: ") + e.what());
  }
  require(j.is_object(), "config must be a JSON object");
  static const std::vector<std::string> kKeys = {
      "command", "mean_n", "actual_n", "steps", "eta", "mode", "m",
      "pulse_noise", "tail_bound", "trajectories", "seed", "steps_list",
      "eta_grid", "na_range", "levels", "na_sampling", "format", "out",
      "input", "dump_posterior", "workers"};
  for (const auto& [key, value] : j.items()) {
    require(std::find(kKeys.begin(), kKeys.end(), key) != kKeys.end(),
            "unknown config key '" + key + "'");
  }

  RunConfig c;
  auto& t = c.trajectory;
  if (j.contains("command")) c.command = parse_command(get<std::string>(j, "command"));
  if (j.contains("mean_n")) t.mean_n = get<double>(j, "mean_n");
  if (j.contains("actual_n")) {
    const auto& v = j["actual_n"];
    if (v.is_string()) {
      require(v.get<std::string>() == "sample", "actual-n must be an integer or 'sample'");
      t.actual_n_initial.reset();
    } else {
      require(v.is_number_integer(), "actual-n must be an integer or 'sample'");
      t.actual_n_initial = v.get<AtomCount>();
    }
  }
  if (j.contains("steps")) t.steps = get<int>(j, "steps");
  if (j.contains("eta")) t.detector.eta = get<double>(j, "eta");
  if (j.contains("mode")) {
    const auto mode = get<std::string>(j, "mode");
    require(mode == "remove" || mode == "recycle", "mode must be 'remove' or 'recycle'");
    t.mode = mode == "remove" ? trajectory::DetectionMode::removal
                              : trajectory::DetectionMode::recycle;
  }
  if (j.contains("m")) {
    const auto& v = j["m"];
    if (v.is_string()) {
      require(v.get<std::string>() == "auto", "m must be 'auto' or an integer");
      t.m_override.reset();
    } else {
      require(v.is_number_integer(), "m must be 'auto' or an integer");
      t.m_override = v.get<int>();
    }
  }
  if (j.contains("pulse_noise")) t.pulse_noise_sigma = get<double>(j, "pulse_noise");
  if (j.contains("tail_bound")) t.tail_bound = get<double>(j, "tail_bound");
  if (j.contains("trajectories")) c.trajectories = get<int>(j, "trajectories");
  if (j.contains("seed")) {
    require(j["seed"].is_number_unsigned() || j["seed"].is_number_integer(),
            "seed must be an unsigned 64-bit integer");
    require(!j["seed"].is_number_integer() || j["seed"].is_number_unsigned() ||
                j["seed"].get<std::int64_t>() >= 0,
            "seed must be an unsigned 64-bit integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("steps_list")) c.steps_list = get<std::vector<int>>(j, "steps_list");
  if (j.contains("eta_grid")) c.eta_grid = get<std::vector<double>>(j, "eta_grid");
  if (j.contains("na_range")) c.na_range = NaRange::parse(get<std::string>(j, "na_range"));
  if (j.contains("levels")) c.levels = get<std::vector<double>>(j, "levels");
  if (j.contains("na_sampling")) {
    const auto s = get<std::string>(j, "na_sampling");
    require(s == "poisson" || s == "grid", "na-sampling must be 'poisson' or 'grid'");
    c.na_sampling = s == "poisson" ? harness::NaSampling::poisson_sample
                                   : harness::NaSampling::weighted_grid;
  }
  if (j.contains("format")) {
    const auto f = get<std::string>(j, "format");
    require(f == "csv" || f == "json", "format must be 'csv' or 'json'");
    c.format = f == "csv" ? Format::csv : Format::json;
  }
  if (j.contains("out")) c.out = get<std::string>(j, "out");
  if (j.contains("input")) c.input = get<std::string>(j, "input");
  if (j.contains("dump_posterior")) c.dump_posterior = get<bool>(j, "dump_posterior");
  if (j.contains("workers")) c.workers = get<unsigned>(j, "workers");
  c.resolve();
  return c;
}

std::string to_json(const RunConfig& c) {
  const auto& t = c.trajectory;
  json j;
  j["command"] = to_string(c.command);
  j["mean_n"] = t.mean_n;
  j["actual_n"] = t.actual_n_initial ? json(*t.actual_n_initial) : json("sample");
  j["steps"] = t.steps;
  j["eta"] = t.detector.eta;
  j["mode"] = t.mode == trajectory::DetectionMode::removal ? "remove" : "recycle";
  j["m"] = t.m_override ? json(*t.m_override) : json("auto");
  j["pulse_noise"] = t.pulse_noise_sigma;
  j["tail_bound"] = t.tail_bound;
  j["trajectories"] = c.trajectories;
  j["seed"] = c.seed;
  j["steps_list"] = c.steps_list;
  j["eta_grid"] = c.eta_grid;
  j["na_range"] = c.na_range.to_string();
  j["levels"] = c.levels;
  j["na_sampling"] =
      c.na_sampling == harness::NaSampling::poisson_sample ? "poisson" : "grid";
  j["format"] = c.format == Format::csv ? "csv" : "json";
  j["out"] = c.out;
  j["input"] = c.input;
  j["dump_posterior"] = c.dump_posterior;
  j["workers"] = c.workers;
  return j.dump(2);
}

RunResult execute(const RunConfig& config) {
  RunResult result;
  result.command = config.command;
  const harness::ExecOptions exec{config.workers};
  const auto& t = config.trajectory;

  auto surface = [&] {
    return harness::infidelity_surface(t, config.eta_grid, t.steps,
                                       config.trajectories, config.seed,
                                       config.na_sampling, exec);
  };
  auto isolines = [&] {
    if (!config.input.empty()) {
      const auto cells = parse_surface_csv(read_file(config.input));
      return harness::extract_isolines(cells, config.levels);
    }
    const auto cells = surface();
    return harness::extract_isolines(cells, config.levels);
  };

  switch (config.command) {
    case Command::simulate: {
      auto record = trajectory::run_trajectory(t, config.seed, 0);
      result.trajectories = 1;
      result.failures = record.failure ? 1 : 0;
      if (record.failure) result.warnings.push_back(record.failure->message);
      result.payload = std::move(record);
      break;
    }
    case Command::ensemble: {
      auto stats = harness::run_ensemble(t, config.trajectories, config.seed, exec);
      result.trajectories = stats.trajectories;
      result.failures = stats.failures;
      result.payload = std::move(stats);
      break;
    }
    case Command::sweep_na: {
      const auto na = config.na_range.values();
      auto rows = harness::sweep_actual_n(t, na, config.steps_list,
                                          config.eta_grid, config.trajectories,
                                          config.seed, exec);
      for (const auto& r : rows) {
        result.trajectories += r.trajectories;
        result.failures += r.failures;
      }
      result.payload = std::move(rows);
      break;
    }
    case Command::surface:
      result.payload = surface();
      break;
    case Command::isolines: {
      auto lines = isolines();
      for (const auto& line : lines) {
        if (line.points.empty()) {
          result.warnings.push_back("level " + format_double(line.level) +
                                    " is never reached");
        }
      }
      result.payload = std::move(lines);
      break;
    }
    case Command::fit_isoline: {
      // An input isoline file is fitted level by level as written.
      const auto lines = config.input.empty()
                             ? isolines()
                             : parse_isoline_csv(read_file(config.input));
      result.payload = fit_levels(lines, result.warnings);
      break;
    }
  }
  return result;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::string trajectory_csv(const trajectory::TrajectoryRecord& record) {
  CsvWriter csv(kTrajectoryHeader);
  for (const auto& s : record.steps) {
    csv.row(s.index, s.n_perceived, s.theta_nominal, s.theta_applied,
            s.sigma_actual, s.excited, s.detected, s.n_actual_after,
            s.fidelity.fidelity, s.fidelity.infidelity, s.posterior_stats.mean,
            s.posterior_stats.std);
  }
  return csv.str();
}

std::string ensemble_csv(const harness::EnsembleStats& stats) {
  CsvWriter csv(kEnsembleHeader);
  for (std::size_t s = 0; s < stats.mean_diff.size(); ++s) {
    csv.row(s, stats.mean_diff[s], stats.std_diff[s], stats.mean_fidelity[s],
            stats.mean_infidelity[s], stats.std_fidelity[s],
            stats.mean_detections_cum[s], stats.failures_cum[s]);
  }
  return csv.str();
}

std::string sweep_csv(std::span<const harness::SweepRow> rows) {
  CsvWriter csv(kSweepHeader);
  for (const auto& r : rows) {
    csv.row(r.na_initial, r.eta, r.steps, r.mean_diff, r.std_diff,
            r.mean_infidelity, r.std_fidelity, r.reference_infidelity);
  }
  return csv.str();
}

std::string surface_csv(std::span<const harness::SurfaceCell> cells) {
  CsvWriter csv(kSurfaceHeader);
  for (const auto& c : cells) {
    csv.row(c.eta, c.steps, c.avg_infidelity, c.standard_error);
  }
  return csv.str();
}

std::string isoline_csv(std::span<const harness::Isoline> lines) {
  CsvWriter csv(kIsolineHeader);
  for (const auto& line : lines) {
    for (const auto& p : line.points) csv.row(line.level, p.eta, p.steps);
  }
  return csv.str();
}

std::string fit_json(std::span<const harness::HyperbolaFit> fits) {
  json arr = json::array();
  for (const auto& f : fits) arr.push_back(fit_to_json(f));
  return arr.dump(2) + "\n";
}

namespace {

json trajectory_json(const trajectory::TrajectoryRecord& r) {
  json steps = json::array();
  for (const auto& s : r.steps) {
    steps.push_back({{"step", s.index},
                     {"n_perceived", s.n_perceived},
                     {"theta_nominal", s.theta_nominal},
                     {"theta_applied", s.theta_applied},
                     {"sigma_actual", s.sigma_actual},
                     {"excited", s.excited},
                     {"detected", s.detected},
                     {"n_actual_after", s.n_actual_after},
                     {"fidelity", s.fidelity.fidelity},
                     {"infidelity", s.fidelity.infidelity},
                     {"posterior_mean", s.posterior_stats.mean},
                     {"posterior_std", s.posterior_stats.std}});
  }
  json j{{"master_seed", r.master_seed},
         {"index", r.index},
         {"m", r.m},
         {"n_actual_initial", r.n_actual_initial},
         {"n_perceived_initial", r.n_perceived_initial},
         {"initial_fidelity", r.initial_fidelity.fidelity},
         {"initial_infidelity", r.initial_fidelity.infidelity},
         {"excitations", r.excitations},
         {"detections", r.detections},
         {"failure", r.failure ? json(r.failure->message) : json(nullptr)},
         {"steps", steps}};
  return j;
}

}  // namespace

std::string render(const RunResult& result, Format format) {
  return std::visit(
      [format](const auto& payload) -> std::string {
        using T = std::decay_t<decltype(payload)>;
        if constexpr (std::is_same_v<T, trajectory::TrajectoryRecord>) {
          return format == Format::csv ? trajectory_csv(payload)
                                       : trajectory_json(payload).dump(2) + "\n";
        } else if constexpr (std::is_same_v<T, harness::EnsembleStats>) {
          if (format == Format::csv) return ensemble_csv(payload);
          json rows = json::array();
          for (std::size_t s = 0; s < payload.mean_diff.size(); ++s) {
            rows.push_back({{"step", s},
                            {"mean_diff", number_or_null(payload.mean_diff[s])},
                            {"std_diff", number_or_null(payload.std_diff[s])},
                            {"mean_fidelity", number_or_null(payload.mean_fidelity[s])},
                            {"mean_infidelity", number_or_null(payload.mean_infidelity[s])},
                            {"std_fidelity", number_or_null(payload.std_fidelity[s])},
                            {"mean_detections_cum", number_or_null(payload.mean_detections_cum[s])},
                            {"failures", payload.failures_cum[s]}});
          }
          return rows.dump(2) + "\n";
        } else if constexpr (std::is_same_v<T, std::vector<harness::SweepRow>>) {
          if (format == Format::csv) return sweep_csv(payload);
          json rows = json::array();
          for (const auto& r : payload) {
            rows.push_back({{"na_initial", r.na_initial},
                            {"eta", r.eta},
                            {"steps", r.steps},
                            {"mean_diff", number_or_null(r.mean_diff)},
                            {"std_diff", number_or_null(r.std_diff)},
                            {"mean_infidelity", number_or_null(r.mean_infidelity)},
                            {"std_fidelity", number_or_null(r.std_fidelity)},
                            {"reference_infidelity", r.reference_infidelity}});
          }
          return rows.dump(2) + "\n";
        } else if constexpr (std::is_same_v<T, std::vector<harness::SurfaceCell>>) {
          if (format == Format::csv) return surface_csv(payload);
          json rows = json::array();
          for (const auto& c : payload) {
            rows.push_back({{"eta", c.eta},
                            {"steps", c.steps},
                            {"avg_infidelity", number_or_null(c.avg_infidelity)},
                            {"standard_error", number_or_null(c.standard_error)}});
          }
          return rows.dump(2) + "\n";
        } else if constexpr (std::is_same_v<T, std::vector<harness::Isoline>>) {
          if (format == Format::csv) return isoline_csv(payload);
          json rows = json::array();
          for (const auto& line : payload) {
            for (const auto& p : line.points) {
              rows.push_back({{"level", line.level},
                              {"eta", p.eta},
                              {"steps_interpolated", p.steps}});
            }
          }
          return rows.dump(2) + "\n";
        } else {
          // Fits are JSON regardless of the requested format.
          return fit_json(payload);
        }
      },
      result.payload);
}

std::string render_posterior(const bayes::AtomNumberDistribution& dist) {
  json j{{"n_min", dist.n_min()},
         {"weights", std::vector<double>(dist.weights().begin(), dist.weights().end())}};
  return j.dump() + "\n";
}

std::vector<harness::SurfaceCell> parse_surface_csv(std::string_view text) {
  std::vector<harness::SurfaceCell> cells;
  for (const auto& f : csv_rows(text, kSurfaceHeader)) {
    require(f.size() == 4, "surface CSV rows need 4 fields");
    cells.push_back({parse_number<double>(f[0], "eta"),
                     parse_number<int>(f[1], "steps"),
                     parse_number<double>(f[2], "avg_infidelity"),
                     parse_number<double>(f[3], "standard_error")});
  }
  return cells;
}

std::vector<harness::Isoline> parse_isoline_csv(std::string_view text) {
  std::vector<harness::Isoline> lines;
  for (const auto& f : csv_rows(text, kIsolineHeader)) {
    require(f.size() == 3, "isoline CSV rows need 3 fields");
    const double level = parse_number<double>(f[0], "level");
    if (lines.empty() || lines.back().level != level) lines.push_back({level, {}});
    lines.back().points.push_back({parse_number<double>(f[1], "eta"),
                                   parse_number<double>(f[2], "steps_interpolated")});
  }
  return lines;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io_error, "cannot open '" + path + "' for reading");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string digest(std::string_view content) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(content.data(), content.size(), md, &len, EVP_sha256(),
                 nullptr) != 1) {
    fail(ErrorKind::io_error, "sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out = "sha256:";
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 0xF];
  }
  return out;
}

std::string emit(std::string_view content, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io_error, "cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.close();
  if (!out) fail(ErrorKind::io_error, "failed writing '" + path + "'");
  return digest(content);
}

}  // namespace rydcount::io
