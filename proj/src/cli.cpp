#include "msense/cli.hpp"

#include "msense/experiments.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdlib>
#include <iostream>

namespace msense {

namespace {

// SENSE_THREADS beats --threads; an unparsable value is a config error.
std::optional<std::size_t> env_threads() {
  const char* raw = std::getenv("SENSE_THREADS");
  if (!raw || !*raw) return std::nullopt;
  const std::string text(raw);
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || value == 0)
    throw ConfigError("SENSE_THREADS must be a positive integer, got '" + text + "'");
  return value;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Low-rank matrix sensing experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;

  for (const char* name : {"recover", "phase", "noise-floor", "diagnostics", "lower-bound", "rip"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "flat key = value config file")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "base seed");
    sub->add_option("--threads", threads, "worker threads");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kConfigError);
  }

  const ExperimentKind kind = experiment_kind_from_string(app.get_subcommands().front()->get_name());
  try {
    ExperimentConfig config = load_config(config_path);
    if (config.kind && *config.kind != kind)
      throw ConfigError("config kind '" + to_string(*config.kind) + "' does not match command '" +
                        to_string(kind) + "'");
    if (out_dir) config.out = *out_dir;
    if (seed) config.seed = *seed;
    if (threads) config.threads = *threads;
    if (auto env = env_threads()) config.threads = *env;
    if (config.threads == 0) throw ConfigError("threads must be positive");

    const int rc = run_experiment(kind, config);
    if (rc != 0) std::cerr << "sense " << to_string(kind) << ": finished with exit code " << rc << "\n";
    return rc;
  } catch (const Error& e) {
    std::cerr << "sense " << to_string(kind) << ": " << e.reason() << ": " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "sense " << to_string(kind) << ": config_error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kConfigError);
  }
}

}  // namespace msense
