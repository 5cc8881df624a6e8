// Step-constant pilot: runs the d=60 convergence-regime instance for a handful of
// step constants and reports success counts and iteration statistics.
#include "msense/counter_rng.hpp"
#include "msense/experiments.hpp"
#include "msense/parallel.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"step-constant pilot"};
  std::vector<double> constants{0.2, 0.1, 0.05, 0.02};
  std::size_t seeds = 50, d = 60, r = 3, max_iters = 5000, threads = 1;
  double kappa = 2.0;
  app.add_option("--constants", constants);
  app.add_option("--seeds", seeds);
  app.add_option("--d", d);
  app.add_option("--r", r);
  app.add_option("--kappa", kappa);
  app.add_option("--max-iters", max_iters);
  app.add_option("--threads", threads);
  CLI11_PARSE(app, argc, argv);

  msense::ExperimentConfig config;
  config.d = d;
  config.r = r;
  config.kappa = kappa;
  config.max_iters = max_iters;
  config.log_every = max_iters;

  std::cout << "c_step,successes,seeds,median_iters,max_iters_used,seconds\n";
  for (double c : constants) {
    config.step_constant = c;
    std::vector<std::size_t> iters(seeds, 0);
    std::vector<char> ok(seeds, 0);
    const auto start = std::chrono::steady_clock::now();
    msense::parallel_for(seeds, threads, [&](std::size_t k) {

      msense::ExperimentConfig local = config;
      local.seed = msense::derive_seed(1, k);
      const auto outcome = msense::cmd_recover(local);
      ok[k] = outcome.exit_code == msense::ExitCode::kSuccess;
      iters[k] = outcome.result ? outcome.result->iterations : max_iters;
    });
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::vector<std::size_t> sorted = iters;
    std::sort(sorted.begin(), sorted.end());
    std::cout << c << "," << std::count(ok.begin(), ok.end(), 1) << "," << seeds << ","
              << sorted[seeds / 2] << "," << sorted.back() << "," << secs << std::endl;
  }
}
