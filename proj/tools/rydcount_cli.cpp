// rydcount command-line front end. Talks to the library only through the C
// API in rydcount/rydcount.h.
//
// Exit codes: 0 success, 2 invalid configuration, 3 runtime failure,
// 4 I/O error.

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rydcount/rydcount.h"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitIo = 4;

// Thrown inside the CLI to unwind with a status and message.
struct CliError {
  int exit_code;
  std::string code;
  std::string message;
};

void report(const CliError& e) {
  json line{{"error", e.code}, {"message", e.message}, {"exit", e.exit_code}};
  std::cerr << line.dump() << '\n';
}

int exit_code_for(rc_status status) {
  switch (status) {
    case RC_OK: return kExitOk;
    case RC_INVALID_ARGUMENT: return kExitConfig;
    case RC_IO_ERROR: return kExitIo;
    default: return kExitRuntime;
  }
}

void check(rc_status status) {
  if (status != RC_OK) {
    throw CliError{exit_code_for(status), rc_status_name(status), rc_last_error()};
  }
}

struct CString {
  char* ptr = nullptr;
  ~CString() { rc_string_free(ptr); }
  std::string str() const { return ptr ? std::string(ptr) : std::string(); }
};

using ConfigHandle = std::unique_ptr<rc_config, decltype(&rc_config_free)>;
using ResultHandle = std::unique_ptr<rc_result, decltype(&rc_result_free)>;

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError{kExitIo, "io-error", "cannot open '" + path + "'"};
  return std::string(std::istreambuf_iterator<char>(in), {});
}

template <typename T>
T parse_scalar(const std::string& text, const std::string& flag) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw CliError{kExitConfig, "invalid-argument",
                   flag + " expects a number, got '" + text + "'"};
  }
  return value;
}

template <typename T>
json parse_list(const std::string& text, const std::string& flag) {
  json arr = json::array();
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto pos = text.find(',', start);
    arr.push_back(parse_scalar<T>(text.substr(start, pos - start), flag));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return arr;
}

// Flag values as typed on the command line; converted into config JSON keys.
struct RunFlags {
  std::map<std::string, std::string> values;
  bool dump_posterior = false;
  std::string config_path;
};

void add_run_flags(CLI::App* cmd, RunFlags& flags) {
  struct Spec {
    const char* flag;
    const char* key;
    const char* help;
  };
  static const Spec kSpecs[] = {
      {"--mean-n", "mean_n", "Seed mean atom number <N>"},
      {"--actual-n", "actual_n", "Initial actual atom number, or 'sample'"},
      {"--steps", "steps", "Interrogation steps (maximum steps for surface)"},
      {"--steps-list", "steps_list", "Comma-separated step counts (sweep-na)"},
      {"--eta", "eta", "Detection efficiency"},
      {"--trajectories", "trajectories", "Trajectories per ensemble / cell"},
      {"--mode", "mode", "Detected atoms: remove or recycle"},
      {"--m", "m", "Pulse multiplier: auto or a positive integer"},
      {"--seed", "seed", "Master seed (u64)"},
      {"--pulse-noise", "pulse_noise", "Fractional Gaussian noise on the applied pulse area"},
      {"--tail-bound", "tail_bound", "Seed truncation mass"},
      {"--levels", "levels", "Comma-separated isoline levels"},
      {"--na-range", "na_range", "Initial actual numbers lo:hi[:step] (sweep-na)"},
      {"--eta-grid", "eta_grid", "Comma-separated detection efficiencies"},
      {"--na-sampling", "na_sampling", "Surface averaging: poisson or grid"},
      {"--input", "input", "Surface CSV (isolines) or isoline CSV (fit-isoline)"},
      {"--out", "out", "Output path (stdout when omitted)"},
      {"--format", "format", "csv or json"},
      {"--workers", "workers", "Worker threads"},
  };
  for (const auto& spec : kSpecs) {
    cmd->add_option_function<std::string>(
        spec.flag, [&flags, key = std::string(spec.key)](const std::string& v) { flags.values[key] = v; },
        spec.help);
  }
  cmd->add_flag("--dump-posterior", flags.dump_posterior,
                "Write the terminal posterior next to the output (simulate)");
  cmd->add_option("--config", flags.config_path,
                  "JSON config file; command-line flags override its values");
}

json flag_value(const std::string& key, const std::string& v) {
  const std::string flag = "--" + key;
  if (key == "mean_n" || key == "eta" || key == "pulse_noise" || key == "tail_bound") {
    return parse_scalar<double>(v, flag);
  }
  if (key == "steps" || key == "trajectories") return parse_scalar<int>(v, flag);
  if (key == "workers") return parse_scalar<unsigned>(v, flag);
  if (key == "seed") return parse_scalar<std::uint64_t>(v, flag);
  if (key == "actual_n") {
    if (v == "sample") return v;
    return parse_scalar<std::int64_t>(v, flag);
  }
  if (key == "m") {
    if (v == "auto") return v;
    return parse_scalar<int>(v, flag);
  }
  if (key == "levels" || key == "eta_grid") return parse_list<double>(v, flag);
  if (key == "steps_list") return parse_list<int>(v, flag);
  return v;
}

json build_config(const std::string& command, const RunFlags& flags) {
  json config = json::object();
  if (!flags.config_path.empty()) {
    try {
      config = json::parse(slurp(flags.config_path));
    } catch (const json::parse_error& e) {
      throw CliError{kExitConfig, "invalid-argument",
                     "config file is not valid JSON: " + std::string(e.what())};
    }
    if (!config.is_object()) {
      throw CliError{kExitConfig, "invalid-argument", "config file must hold a JSON object"};
    }
  }
  for (const auto& [key, value] : flags.values) config[key] = flag_value(key, value);
  if (flags.dump_posterior) config["dump_posterior"] = true;
  config["command"] = command;
  return config;
}

struct Output {
  std::string path;
  std::string digest;
};

// Runs a resolved config and writes its outputs. Returns the written files.
std::vector<Output> run_config(const json& resolved, const rc_config* config) {
  rc_result* raw = nullptr;
  check(rc_run(config, &raw));
  ResultHandle result(raw, rc_result_free);

  for (std::size_t i = 0; i < rc_result_warning_count(result.get()); ++i) {
    std::cerr << json{{"warning", rc_result_warning(result.get(), i)}}.dump() << '\n';
  }
  int trajectories = 0;
  int failures = 0;
  rc_result_counts(result.get(), &trajectories, &failures);
  if (trajectories > 0 && failures == trajectories) {
    throw CliError{kExitRuntime, "all-trajectories-failed",
                   std::to_string(failures) + " of " + std::to_string(trajectories) +
                       " trajectories failed"};
  }

  const auto format = resolved.at("format") == "json" ? RC_FORMAT_JSON : RC_FORMAT_CSV;
  CString body;
  check(rc_result_render(result.get(), format, &body.ptr));

  std::vector<Output> outputs;
  const std::string out = resolved.at("out");
  auto write = [&](const std::string& content, const std::string& path) {
    CString digest;
    check(rc_emit(content.data(), content.size(), path.c_str(), &digest.ptr));
    outputs.push_back({path, digest.str()});
  };
  if (out.empty()) {
    std::cout << body.str();
  } else {
    write(body.str(), out);
  }
  if (resolved.at("dump_posterior").get<bool>()) {
    CString posterior;
    check(rc_result_posterior_json(result.get(), &posterior.ptr));
    write(posterior.str(), out.empty() ? "posterior.json" : out + ".posterior.json");
  }
  return outputs;
}

ConfigHandle make_config(const json& config) {
  rc_config* raw = nullptr;
  check(rc_config_from_json(config.dump().c_str(), &raw));
  return ConfigHandle(raw, rc_config_free);
}

json resolved_json(const rc_config* config) {
  CString text;
  check(rc_config_to_json(config, &text.ptr));
  return json::parse(text.str());
}

int run_command(const std::string& command, const RunFlags& flags) {
  const json requested = build_config(command, flags);
  const auto config = make_config(requested);
  const json resolved = resolved_json(config.get());

  const std::string started = utc_now();
  const auto outputs = run_config(resolved, config.get());
  const std::string out = resolved.at("out");
  if (!out.empty()) {
    json manifest{{"version", rc_version()},
                  {"config", resolved},
                  {"seed", resolved.at("seed")},
                  {"started_at", started},
                  {"finished_at", utc_now()},
                  {"outputs", json::array()}};
    for (const auto& o : outputs) {
      manifest["outputs"].push_back({{"path", o.path}, {"digest", o.digest}});
    }
    const std::string text = manifest.dump(2) + "\n";
    check(rc_emit(text.data(), text.size(), (out + ".manifest.json").c_str(), nullptr));
  }
  return kExitOk;
}

// Re-runs a manifest's configuration and compares output digests.
int replay(const std::string& manifest_path) {
  json manifest;
  try {
    manifest = json::parse(slurp(manifest_path));
  } catch (const json::parse_error& e) {
    throw CliError{kExitConfig, "invalid-argument",
                   "manifest is not valid JSON: " + std::string(e.what())};
  }
  if (!manifest.contains("config") || !manifest.contains("outputs")) {
    throw CliError{kExitConfig, "invalid-argument", "manifest lacks config or outputs"};
  }
  const auto config = make_config(manifest["config"]);
  const json resolved = resolved_json(config.get());
  const auto outputs = run_config(resolved, config.get());

  std::map<std::string, std::string> expected;
  for (const auto& o : manifest["outputs"]) {
    expected[o.at("path").get<std::string>()] = o.at("digest").get<std::string>();
  }
  bool all_match = outputs.size() == expected.size();
  for (const auto& o : outputs) {
    const auto it = expected.find(o.path);
    const bool match = it != expected.end() && it->second == o.digest;
    all_match = all_match && match;
    std::cout << o.path << ' ' << (match ? "match" : "MISMATCH") << ' ' << o.digest << '\n';
  }
  if (!all_match) {
    throw CliError{kExitRuntime, "digest-mismatch", "replayed outputs differ from the manifest"};
  }
  return kExitOk;
}

void print_value(const char* key, double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  std::cout << key << ' ' << std::string(buf, ptr) << '\n';
}

struct AnalyticArgs {
  std::int64_t n = 0;
  double theta = 0.0;
  std::int64_t actual_n = 0;
  std::int64_t perceived_n = 0;
  int m = 1;
  double delta_n = 0.0;
  double mean_n = 0.0;
  double u_gg = 0.0;
  double u_gs = 0.0;
  double tau = 0.0;
  double delta_u = 0.0;
  double delta_phi = 0.0;
};

void add_analytic(CLI::App& app, AnalyticArgs& args, std::string& which) {
  auto* analytic = app.add_subcommand("analytic", "Closed-form calculators");
  analytic->require_subcommand(1);
  auto sub = [&](const char* name, const char* help) {
    auto* cmd = analytic->add_subcommand(name, help);
    cmd->callback([&which, name] { which = name; });
    return cmd;
  };
  auto* c = sub("excitation", "sin^2(sqrt(n) theta / 2)");
  c->add_option("--n", args.n)->required();
  c->add_option("--theta", args.theta)->required();
  c = sub("no-excitation", "cos^2(sqrt(n) theta / 2)");
  c->add_option("--n", args.n)->required();
  c->add_option("--theta", args.theta)->required();
  c = sub("swap-fidelity", "Collective pi-pulse fidelity");
  c->add_option("--actual-n", args.actual_n)->required();
  c->add_option("--perceived-n", args.perceived_n)->required();
  c = sub("actual-excitation", "Excitation probability of the interrogation pulse");
  c->add_option("--actual-n", args.actual_n)->required();
  c->add_option("--perceived-n", args.perceived_n)->required();
  c->add_option("--m", args.m)->required();
  c = sub("pulse-area", "2 m pi / sqrt(perceived-n)");
  c->add_option("--perceived-n", args.perceived_n)->required();
  c->add_option("--m", args.m)->required();
  c = sub("gate-infidelity", "(pi^2/32)(delta-n/mean-n)^2");
  c->add_option("--delta-n", args.delta_n)->required();
  c->add_option("--mean-n", args.mean_n)->required();
  c = sub("storage", "Interaction energies and dephasing phase");
  c->add_option("--u-gg", args.u_gg)->required();
  c->add_option("--u-gs", args.u_gs)->required();
  c->add_option("--tau", args.tau)->required();
  c->add_option("--n", args.n)->required();
  c->add_option("--delta-n", args.delta_n);
  c = sub("storage-fidelity", "sqrt((1 + cos(delta-phi)) / 2)");
  c->add_option("--delta-phi", args.delta_phi)->required();
  c = sub("storage-poisson", "<N>(delta-u tau)^2 / 8");
  c->add_option("--mean-n", args.mean_n)->required();
  c->add_option("--delta-u", args.delta_u)->required();
  c->add_option("--tau", args.tau)->required();
  c = sub("fwhm", "Poisson seed full width at half maximum");
  c->add_option("--mean-n", args.mean_n)->required();
  c = sub("choose-m", "Pulse multiplier for a seed mean");
  c->add_option("--mean-n", args.mean_n)->required();
}

int run_analytic(const std::string& which, const AnalyticArgs& a) {
  double v = 0.0;
  rc_fidelity f{};
  if (which == "excitation") {
    check(rc_excitation_probability(a.n, a.theta, &v));
    print_value("probability", v);
  } else if (which == "no-excitation") {
    check(rc_no_excitation_probability(a.n, a.theta, &v));
    print_value("probability", v);
  } else if (which == "swap-fidelity") {
    check(rc_swap_fidelity(a.actual_n, a.perceived_n, &f));
    print_value("fidelity", f.fidelity);
    print_value("infidelity", f.infidelity);
  } else if (which == "actual-excitation") {
    check(rc_actual_excitation_probability(a.actual_n, a.perceived_n, a.m, &v));
    print_value("probability", v);
  } else if (which == "pulse-area") {
    check(rc_pulse_area(a.perceived_n, a.m, &v));
    print_value("theta", v);
  } else if (which == "gate-infidelity") {
    check(rc_gate_infidelity_approx(a.delta_n, a.mean_n, &v));
    print_value("infidelity", v);
  } else if (which == "storage") {
    const rc_storage_model model{a.u_gg, a.u_gs, a.tau};
    rc_dephasing d{};
    check(rc_storage_dephasing(&model, a.n, a.delta_n, &d));
    print_value("delta_u", d.delta_u);
    print_value("e_g", d.e_g);
    print_value("e_s", d.e_s);
    print_value("energy_gap", d.energy_gap);
    print_value("delta_phi", d.delta_phi);
  } else if (which == "storage-fidelity") {
    check(rc_storage_fidelity(a.delta_phi, &f));
    print_value("fidelity", f.fidelity);
    print_value("infidelity", f.infidelity);
  } else if (which == "storage-poisson") {
    check(rc_storage_infidelity_poisson(a.mean_n, a.delta_u, a.tau, &v));
    print_value("infidelity", v);
  } else if (which == "fwhm") {
    check(rc_fwhm(a.mean_n, &v));
    print_value("fwhm", v);
  } else if (which == "choose-m") {
    int m = 0;
    check(rc_choose_m(a.mean_n, &m));
    std::cout << "m " << m << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive Rydberg-ensemble atom counting: simulation and estimation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rc_version()));

  static const std::pair<const char*, const char*> kRunCommands[] = {
      {"simulate", "One trajectory, per-step CSV"},
      {"ensemble", "Per-step statistics over many trajectories"},
      {"sweep-na", "Ensembles over initial actual atom numbers"},
      {"surface", "Poisson-averaged infidelity over (eta, steps)"},
      {"isolines", "Isolines of an infidelity surface"},
      {"fit-isoline", "Fit steps = a / (eta + b) to isolines"},
  };
  RunFlags flags;
  std::string selected;
  for (const auto& [name, help] : kRunCommands) {
    auto* cmd = app.add_subcommand(name, help);
    add_run_flags(cmd, flags);
    cmd->callback([&selected, name = std::string(name)] { selected = name; });
  }

  AnalyticArgs analytic_args;
  std::string analytic_which;
  add_analytic(app, analytic_args, analytic_which);

  std::string manifest_path;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a manifest and verify digests");
  replay_cmd->add_option("manifest", manifest_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    report({kExitConfig, "invalid-argument", e.what()});
    return kExitConfig;
  }

  try {
    if (!analytic_which.empty()) return run_analytic(analytic_which, analytic_args);
    if (replay_cmd->parsed()) return replay(manifest_path);
    return run_command(selected, flags);
  } catch (const CliError& e) {
    report(e);
    return e.exit_code;
  } catch (const std::exception& e) {
    report({kExitRuntime, "internal-error", e.what()});
    return kExitRuntime;
  }
}
