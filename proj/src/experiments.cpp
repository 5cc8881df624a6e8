#include "msense/experiments.hpp"

#include "msense/counter_rng.hpp"
#include "msense/metrics.hpp"
#include "msense/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace msense {

namespace {

using nlohmann::json;

double relative_error(const PlantedInstance& inst, const FactorMatrix& u) {
  return factor_error_norms(inst.ustar, u).frobenius / inst.xstar.frobenius_norm();
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// Seeds for rank r: rank-specific so sweeps over r draw unrelated instances.
std::uint64_t rank_seed(std::uint64_t base, std::size_t r) { return derive_seed(base, 1000 + r); }

json descriptor_json(const EnsembleDescriptor& desc) {
  return {{"m", desc.m}, {"d", desc.d}, {"seed", desc.seed}, {"mode", to_string(desc.mode)}};
}

json seeds_json(const TrialSeeds& s) {
  return {{"instance", s.instance}, {"ensemble", s.ensemble}, {"noise", s.noise}};
}

json base_metadata(ExperimentKind kind, const ExperimentConfig& config) {
  json meta;
  meta["schema_version"] = kSchemaVersion;
  meta["command"] = to_string(kind);
  json cfg = json::object();
  for (const auto& [key, value] : config_entries(config)) cfg[key] = value;
  meta["config"] = cfg;
  return meta;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

void write_json(const std::filesystem::path& path, const json& value) {
  write_text(path, value.dump(2) + "\n");
}

std::string number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

json audit_summary(const AuditReport& report) {
  return {{"pass", report.pass},
          {"violation_fraction", report.violation_fraction},
          {"max_residual", report.max_residual},
          {"evaluations", report.evaluations},
          {"violations", report.violations},
          {"flagged", report.flagged}};
}

}  // namespace

PlantedInstance plant_instance(std::size_t d, std::size_t r, double kappa, SpectrumPolicy policy,
                               std::uint64_t seed, double sigma0) {
  if (r < 1 || r > d) throw ConfigError("plant_instance: need 1 <= r <= d");
  if (!(kappa >= 1.0)) throw ConfigError("plant_instance: kappa must be >= 1");
  CounterRng rng(seed, 0);
  Matrix g(d, r);
  for (Eigen::Index j = 0; j < g.cols(); ++j)
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  const Matrix frame = qr.householderQ() * Matrix::Identity(d, r);

  PlantedInstance inst;
  inst.spectrum.resize(r);
  for (std::size_t k = 0; k < r; ++k) {
    const double frac = r == 1 ? 1.0 : static_cast<double>(r - 1 - k) / static_cast<double>(r - 1);
    inst.spectrum(k) = policy == SpectrumPolicy::kLogSpaced
                           ? sigma0 * std::pow(kappa, frac)
                           : sigma0 * (1.0 + (kappa - 1.0) * frac);
  }
  if (r == 1) inst.spectrum(0) = sigma0;
  inst.kappa = inst.spectrum(0) / inst.spectrum(r - 1);
  inst.ustar = frame * inst.spectrum.cwiseSqrt().asDiagonal();
  inst.xstar = SymMatrix::from_upper(frame * inst.spectrum.asDiagonal() * frame.transpose());
  return inst;
}

TrialSeeds trial_seeds(std::uint64_t base_seed, std::size_t trial) {
  const std::uint64_t t = 3 * static_cast<std::uint64_t>(trial);
  return {derive_seed(base_seed, t), derive_seed(base_seed, t + 1), derive_seed(base_seed, t + 2)};
}

RecoveryConfig recovery_config(const ExperimentConfig& config) {
  RecoveryConfig rc;
  rc.step_size = config.step_size;
  rc.step_constant = config.step_constant;
  rc.max_iters = config.max_iters;
  rc.tol = config.tol;
  rc.log_every = config.log_every;
  rc.record_wall_time = config.timing;
  rc.stall_window = config.stall_window;
  return rc;
}

// ---- recover ---------------------------------------------------------------

RecoverOutcome cmd_recover(const ExperimentConfig& config) {
  RecoverOutcome out;
  out.m = config.samples_for(config.r);
  out.seeds = trial_seeds(config.seed, 0);
  out.ensemble = {out.m, config.d, out.seeds.ensemble, config.storage};
  try {
    const PlantedInstance inst = plant_instance(config.d, config.r, config.kappa, config.spectrum,
                                                out.seeds.instance, config.sigma0);
    const GoeEnsemble ens = GoeEnsemble::from_descriptor(out.ensemble);
    const ObservationVector y = observe(ens, inst.xstar, config.sigma, out.seeds.noise);
    const GroundTruth truth = inst.truth();
    RecoveryResult result = run_recovery(ens, y, config.r, recovery_config(config),
                                         config.blind ? nullptr : &truth);
    out.final_relative_error = relative_error(inst, result.factor);
    if (result.status != RecoveryStatus::kConverged) {
      out.exit_code = ExitCode::kConvergenceFailure;
      out.failure_reason = to_string(result.status);
    }
    out.result = std::move(result);
  } catch (const Error& e) {
    out.exit_code = e.code();
    out.failure_reason = e.reason() + ": " + e.what();
  }
  return out;
}

// ---- phase -----------------------------------------------------------------

std::vector<std::size_t> geometric_grid(double low, double high, std::size_t points) {
  std::vector<std::size_t> grid;
  for (std::size_t j = 0; j < points; ++j) {
    const double frac = points == 1 ? 0.0 : static_cast<double>(j) / static_cast<double>(points - 1);
    const auto m = static_cast<std::size_t>(std::llround(low * std::pow(high / low, frac)));
    if (grid.empty() || m > grid.back()) grid.push_back(std::max<std::size_t>(m, 1));
  }
  return grid;
}

std::vector<double> isotonic_nondecreasing(const std::vector<double>& values,
                                           const std::vector<double>& weights) {
  struct Block {
    double mean;
    double weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < values.size(); ++i) {
    blocks.push_back({values[i], weights.empty() ? 1.0 : weights[i], 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
      const Block last = blocks.back();
      blocks.pop_back();
      Block& prev = blocks.back();
      const double w = prev.weight + last.weight;
      prev.mean = (prev.mean * prev.weight + last.mean * last.weight) / w;
      prev.weight = w;
      prev.count += last.count;
    }
  }
  std::vector<double> out;
  for (const auto& b : blocks) out.insert(out.end(), b.count, b.mean);
  return out;
}

bool phase_trial(const ExperimentConfig& config, std::size_t r, std::size_t m, std::size_t trial) {
  const TrialSeeds seeds = trial_seeds(rank_seed(config.seed, r), trial);
  try {
    const PlantedInstance inst =
        plant_instance(config.d, r, config.kappa, config.spectrum, seeds.instance, config.sigma0);
    const GoeEnsemble ens = GoeEnsemble::sample(m, config.d, seeds.ensemble, config.storage);
    const ObservationVector y = observe(ens, inst.xstar, config.sigma, seeds.noise);
    RecoveryConfig rc = recovery_config(config);
    rc.tol = config.success_tol;
    rc.log_every = config.max_iters;
    const GroundTruth truth = inst.truth();
    const RecoveryResult result = run_recovery(ens, y, r, rc, &truth);
    return result.status == RecoveryStatus::kConverged;
  } catch (const DivergenceError&) {
    return false;
  } catch (const DegenerateSpectrumError&) {
    return false;
  }
}

PhaseResult cmd_phase(const ExperimentConfig& config) {
  PhaseResult out;
  auto evaluate_cell = [&](std::size_t r, std::size_t m, bool bisection) {
    std::vector<char> success(config.trials, 0);
    parallel_for(config.trials, config.threads,
                 [&](std::size_t k) { success[k] = phase_trial(config, r, m, k) ? 1 : 0; });
    PhaseCell cell{r, m, 0, config.trials, bisection};
    cell.successes = static_cast<std::size_t>(std::count(success.begin(), success.end(), 1));
    out.cells.push_back(cell);
    return cell.success_fraction();
  };

  for (std::size_t r : config.ranks()) {
    const double rd = static_cast<double>(r * config.d);
    const auto grid = geometric_grid(config.m_grid_low * rd,
                                     config.m_grid_high * rd * config.kappa * config.kappa,
                                     config.m_grid_points);
    std::vector<double> fractions;
    for (std::size_t m : grid) fractions.push_back(evaluate_cell(r, m, false));
    const auto smoothed = isotonic_nondecreasing(
        fractions, std::vector<double>(fractions.size(), static_cast<double>(config.trials)));

    std::optional<std::size_t> first;
    for (std::size_t j = 0; j < grid.size(); ++j)
      if (smoothed[j] >= config.success_rate) {
        first = j;
        break;
      }
    if (!first) {
      out.m_star[r] = std::nullopt;
      continue;
    }
    std::size_t hi = grid[*first];
    if (*first > 0) {
      std::size_t lo = grid[*first - 1];
      for (std::size_t step = 0; step < config.bisection_steps && hi - lo > 1; ++step) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (evaluate_cell(r, mid, true) >= config.success_rate) hi = mid;
        else lo = mid;
      }
    }
    out.m_star[r] = hi;
  }

  double lo_ratio = std::numeric_limits<double>::infinity();
  double hi_ratio = 0.0;
  for (const auto& [r, m_star] : out.m_star) {
    if (!m_star) continue;
    const double ratio = static_cast<double>(*m_star) / static_cast<double>(r);
    lo_ratio = std::min(lo_ratio, ratio);
    hi_ratio = std::max(hi_ratio, ratio);
  }
  out.ratio_spread = hi_ratio > 0.0 ? hi_ratio / lo_ratio : 0.0;
  return out;
}

// ---- noise-floor -----------------------------------------------------------

double plateau_error(const TrajectoryRecord& trajectory) {
  std::vector<double> errors;
  for (const auto& p : trajectory.points)
    if (p.err_fro) errors.push_back(*p.err_fro);
  if (errors.empty()) return 0.0;
  const std::size_t tail = std::max<std::size_t>(1, errors.size() / 10);
  return median(std::vector<double>(errors.end() - static_cast<std::ptrdiff_t>(tail), errors.end()));
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("log_log_slope needs >= 2 points");
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

NoiseFloorResult cmd_noise_floor(const ExperimentConfig& config) {
  if (config.sigma_list.empty()) throw ConfigError("noise-floor requires sigma_list");
  NoiseFloorResult out;
  out.m = config.samples_for(config.r);
  const double rd_root = std::sqrt(static_cast<double>(config.r * config.d));

  for (double multiplier : config.sigma_list) {
    NoiseFloorRow row;
    row.sigma_multiplier = multiplier;
    row.trial_plateaus.assign(config.trials, 0.0);
    std::vector<char> flattened(config.trials, 1);
    std::vector<double> sigmas(config.trials, 0.0);
    parallel_for(config.trials, config.threads, [&](std::size_t k) {
      const TrialSeeds seeds = trial_seeds(config.seed, k);
      const PlantedInstance inst = plant_instance(config.d, config.r, config.kappa,
                                                  config.spectrum, seeds.instance, config.sigma0);
      const double sigma = multiplier * inst.sigma_min() / std::sqrt(static_cast<double>(config.d));
      sigmas[k] = sigma;
      const GoeEnsemble ens = GoeEnsemble::sample(out.m, config.d, seeds.ensemble, config.storage);
      const ObservationVector y = observe(ens, inst.xstar, sigma, seeds.noise);
      RecoveryConfig rc = recovery_config(config);
      if (sigma > 0.0) {
        rc.tol = 1e-300;
        rc.plateau = PlateauRule{config.plateau_low, config.plateau_high, config.plateau_window};
      }
      const GroundTruth truth = inst.truth();
      const RecoveryResult result = run_recovery(ens, y, config.r, rc, &truth);
      row.trial_plateaus[k] = sigma > 0.0 ? plateau_error(result.trajectory)
                                          : factor_error_norms(inst.ustar, result.factor).frobenius;
      flattened[k] = sigma == 0.0 || result.status == RecoveryStatus::kPlateau;
    });
    row.sigma = sigmas.front();
    row.plateau = median(row.trial_plateaus);
    row.normalized = row.sigma > 0.0 ? row.plateau / (row.sigma * rd_root) : 0.0;
    row.all_flattened = std::all_of(flattened.begin(), flattened.end(), [](char c) { return c; });
    out.rows.push_back(std::move(row));
  }

  std::vector<double> xs, ys, norm;
  for (const auto& row : out.rows) {
    if (row.sigma <= 0.0) continue;
    xs.push_back(row.sigma);
    ys.push_back(row.plateau);
    norm.push_back(row.normalized);
  }
  if (xs.size() >= 2) out.slope = log_log_slope(xs, ys);
  if (!norm.empty())
    out.normalized_spread = *std::max_element(norm.begin(), norm.end()) /
                            *std::min_element(norm.begin(), norm.end());
  return out;
}

// ---- diagnostics -----------------------------------------------------------

DiagnosticsResult cmd_diagnostics(const ExperimentConfig& config) {
  if (config.d < kMinNetDim || config.d > kMaxNetDim)
    throw RegimeError("diagnostics support 2 <= d <= 8 (requested d=" + std::to_string(config.d) +
                      ")");
  DiagnosticsResult out;
  out.m = config.samples_for(config.r);
  out.net = build_eps_net(config.d, config.net_seed);
  out.net_audit = audit_eps_net(out.net, 10000, derive_seed(config.net_seed, 1));

  const std::optional<NoiseSpec> no_noise;
  for (std::size_t trial = 0; trial < config.trials; ++trial) {
    const TrialSeeds seeds = trial_seeds(config.seed, trial);
    const PlantedInstance inst = plant_instance(config.d, config.r, config.kappa, config.spectrum,
                                                seeds.instance, config.sigma0);
    const GoeEnsemble ens = GoeEnsemble::sample(out.m, config.d, seeds.ensemble, config.storage);

    DiagnosticsTrial t;
    t.sigma_min = inst.sigma_min();
    CounterRng rng(derive_seed(seeds.instance, 17), 0);
    for (std::size_t j = 0; j < config.identity_checks; ++j) {
      Vector w(config.d);
      for (auto& x : w) x = rng.normal();
      w /= w.norm();
      Matrix zf(config.d, config.d);
      for (auto& x : zf.reshaped()) x = rng.normal();
      const IdentityReport report =
          check_operator_identities(VirtualOperator(ens, w), SymMatrix::symmetrized(zf));
      t.identity_max_residual = std::max(t.identity_max_residual, report.max_residual);
      t.identities_pass = t.identities_pass && report.pass;
    }

    VirtualRunConfig vc;
    vc.step_size = config.step_size;
    vc.step_constant = config.step_constant;
    vc.iterations = config.iterations;
    vc.threads = config.threads;
    const auto noise =
        config.sigma > 0.0 ? std::optional<NoiseSpec>(NoiseSpec{config.sigma, seeds.noise}) : no_noise;
    const VirtualRun run = run_virtual_sequences(ens, inst.truth(), config.r, vc, out.net, noise);

    const std::size_t order = std::min(2 * config.r + 2, config.d);
    t.delta_estimate = estimate_rip(ens, order, config.rip_probes, config.rip_refine,
                                    derive_seed(seeds.ensemble, 99))
                           .lower_estimate;
    t.independence = independence_bound_audit(run);
    t.decomposition = deviation_decomposition_audit(run, t.delta_estimate);
    t.max_closeness = *std::max_element(run.sup_closeness.begin(), run.sup_closeness.end());
    if (run.sup_closeness.size() > 1)
      t.max_closeness_after_init =
          *std::max_element(run.sup_closeness.begin() + 1, run.sup_closeness.end());

    out.identities_pass = out.identities_pass && t.identities_pass;
    out.identity_max_residual = std::max(out.identity_max_residual, t.identity_max_residual);
    out.independence_evaluations += t.independence.evaluations;
    out.independence_violations += t.independence.violations;
    out.decomposition_evaluations += t.decomposition.evaluations;
    out.decomposition_violations += t.decomposition.violations;
    out.decomposition_flagged += t.decomposition.flagged;
    out.max_closeness_ratio = std::max(out.max_closeness_ratio, t.max_closeness / t.sigma_min);
    out.max_closeness_after_init_ratio =
        std::max(out.max_closeness_after_init_ratio, t.max_closeness_after_init / t.sigma_min);
    out.trials.push_back(std::move(t));
  }
  out.independence_violation_fraction =
      out.independence_evaluations
          ? static_cast<double>(out.independence_violations) / out.independence_evaluations
          : 0.0;
  out.independence_pass = out.independence_violation_fraction <= kViolationThreshold;
  out.decomposition_pass = out.decomposition_violations == 0;
  out.closeness_pass = out.max_closeness_ratio < kClosenessFraction;
  out.pass = out.identities_pass && out.independence_pass && out.decomposition_pass &&
             out.closeness_pass && out.net_audit.covered && out.net_audit.separated;
  return out;
}

// ---- lower-bound -----------------------------------------------------------

LowerBoundSummary cmd_lower_bound(const ExperimentConfig& config) {
  LowerBoundSummary out;
  out.m = config.samples_for(config.r);
  const auto ranks = config.ranks();
  for (std::size_t r : ranks)
    if (config.d < 6 || 16 * r > config.d || out.m < kLowerBoundMinSamples)
      throw RegimeError("lower-bound requires d >= 6, r <= d/16 and m >= " +
                        std::to_string(kLowerBoundMinSamples));

  out.rows.resize(config.trials * ranks.size());
  parallel_for(config.trials, config.threads, [&](std::size_t k) {
    const std::uint64_t seed = derive_seed(config.seed, k);
    const GoeEnsemble ens = GoeEnsemble::sample(out.m, config.d, seed, config.storage);
    for (std::size_t j = 0; j < ranks.size(); ++j)
      out.rows[k * ranks.size() + j] = {k, seed, ranks[j], lower_bound_construct(ens, ranks[j])};
  });

  for (std::size_t r : ranks) {
    double certified = 0.0, achieved = 0.0;
    for (const auto& row : out.rows)
      if (row.r == r) {
        certified += row.result.certified ? 1.0 : 0.0;
        achieved += row.result.achieved;
      }
    out.certified_fraction[r] = certified / static_cast<double>(config.trials);
    out.mean_achieved[r] = achieved / static_cast<double>(config.trials);
  }
  for (const auto& [r, mean] : out.mean_achieved)
    if (auto it = out.mean_achieved.find(2 * r); it != out.mean_achieved.end())
      out.doubling_ratio[r] = it->second / mean;
  return out;
}

// ---- rip -------------------------------------------------------------------

RipSummary cmd_rip(const ExperimentConfig& config) {
  RipSummary out;
  const std::vector<std::size_t> m_list =
      config.m_list.empty() ? std::vector<std::size_t>{config.samples_for(config.r)} : config.m_list;
  out.rows.resize(m_list.size() * config.trials);
  for (std::size_t i = 0; i < m_list.size(); ++i) {
    parallel_for(config.trials, config.threads, [&](std::size_t k) {
      const std::uint64_t seed = derive_seed(config.seed, k);
      const GoeEnsemble ens = GoeEnsemble::sample(m_list[i], config.d, seed, config.storage);
      const RipEstimate est = estimate_rip(ens, config.r, config.rip_probes, config.rip_refine,
                                           derive_seed(seed, 7));
      out.rows[i * config.trials + k] = {m_list[i], k, est.lower_estimate};
    });
  }
  std::vector<std::pair<std::size_t, double>> points;
  for (const auto& row : out.rows) {
    out.mean_estimate[row.m] += row.estimate / static_cast<double>(config.trials);
    points.emplace_back(row.m, row.estimate);
  }
  out.constant = fit_rip_constant(config.r, config.d, points);
  if (m_list.size() >= 2) {
    std::vector<double> xs, ys;
    for (const auto& [m, mean] : out.mean_estimate) {
      xs.push_back(static_cast<double>(m));
      ys.push_back(mean);
    }
    out.exponent = log_log_slope(xs, ys);
  }
  if (config.consequence_trials > 0) {
    for (std::size_t m : m_list) {
      const GoeEnsemble ens = GoeEnsemble::sample(m, config.d, derive_seed(config.seed, 0),
                                                  config.storage);
      out.consequences[m] = rip_consequence_check(ens, config.r, config.consequence_trials,
                                                  derive_seed(config.seed, 5), out.constant);
    }
  }
  return out;
}

// ---- persistence -----------------------------------------------------------

int run_experiment(ExperimentKind kind, const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  const fs::path dir(config.out);
  fs::create_directories(dir);
  write_text(dir / "config.cfg", render_config(config));
  json meta = base_metadata(kind, config);
  int exit_code = 0;

  switch (kind) {
    case ExperimentKind::kRecover: {
      const RecoverOutcome outcome = cmd_recover(config);
      meta["ensembles"] = json::array({descriptor_json(outcome.ensemble)});
      meta["seeds"] = seeds_json(outcome.seeds);
      meta["exit_code"] = static_cast<int>(outcome.exit_code);
      meta["failure_reason"] = outcome.failure_reason;
      if (outcome.result) {
        const RecoveryResult& res = *outcome.result;
        write_text(dir / "trajectory.csv", res.trajectory.to_csv());
        meta["status"] = to_string(res.status);
        meta["iterations"] = res.iterations;
        meta["step_size"] = res.step_size;
        meta["final_relative_error"] = outcome.final_relative_error;
        meta["degeneracy_flags"] = {{"tie_at_rank", res.trajectory.degenerate_tie}};
        std::vector<double> eigenvalues(res.init.eigenvalues.begin(), res.init.eigenvalues.end());
        meta["init_eigenvalues"] = eigenvalues;
      }
      exit_code = static_cast<int>(outcome.exit_code);
      break;
    }
    case ExperimentKind::kPhase: {
      const PhaseResult res = cmd_phase(config);
      std::string table = "r,m,success_frac\n";
      json ensembles = json::array();
      for (const auto& cell : res.cells) {
        table += std::to_string(cell.r) + "," + std::to_string(cell.m) + "," +
                 number(cell.success_fraction()) + "\n";
        for (std::size_t k = 0; k < cell.trials; ++k)
          ensembles.push_back(descriptor_json(
              {cell.m, config.d, trial_seeds(rank_seed(config.seed, cell.r), k).ensemble,
               config.storage}));
      }
      write_text(dir / "phase.csv", table);
      std::string stars = "r,m_star\n";
      json mstar = json::object();
      for (const auto& [r, m] : res.m_star) {
        stars += std::to_string(r) + "," + (m ? std::to_string(*m) : std::string()) + "\n";
        mstar[std::to_string(r)] = m ? json(*m) : json(nullptr);
      }
      write_text(dir / "m_star.csv", stars);
      meta["m_star"] = mstar;
      meta["ratio_spread"] = res.ratio_spread;
      meta["ensembles"] = ensembles;
      break;
    }
    case ExperimentKind::kNoiseFloor: {
      const NoiseFloorResult res = cmd_noise_floor(config);
      std::string table = "sigma_multiplier,sigma,plateau,plateau_over_sigma_sqrt_rd,flattened\n";
      for (const auto& row : res.rows)
        table += number(row.sigma_multiplier) + "," + number(row.sigma) + "," +
                 number(row.plateau) + "," + number(row.normalized) + "," +
                 (row.all_flattened ? "1" : "0") + "\n";
      write_text(dir / "noise_floor.csv", table);
      json ensembles = json::array();
      for (std::size_t k = 0; k < config.trials; ++k)
        ensembles.push_back(descriptor_json(
            {res.m, config.d, trial_seeds(config.seed, k).ensemble, config.storage}));
      meta["ensembles"] = ensembles;
      meta["slope"] = res.slope;
      meta["normalized_spread"] = res.normalized_spread;
      break;
    }
    case ExperimentKind::kDiagnostics: {
      const DiagnosticsResult res = cmd_diagnostics(config);
      std::string independence, decomposition;
      std::string identities = "w_index,t,lhs,rhs,margin\n";
      for (std::size_t k = 0; k < res.trials.size(); ++k) {
        const auto& t = res.trials[k];
        const bool rows = config.audit_rows == "all" || (config.audit_rows == "first" && k == 0);
        if (rows) {
          std::string ind = t.independence.to_csv();
          std::string dec = t.decomposition.to_csv();
          if (!independence.empty()) ind.erase(0, ind.find('\n') + 1);
          if (!decomposition.empty()) dec.erase(0, dec.find('\n') + 1);
          independence += ind;
          decomposition += dec;
        }
        identities += "," + std::to_string(k) + "," + number(t.identity_max_residual) + "," +
                      number(1e-10) + "," + number(1e-10 - t.identity_max_residual) + "\n";
      }
      if (!independence.empty()) write_text(dir / "independence.csv", independence);
      if (!decomposition.empty()) write_text(dir / "decomposition.csv", decomposition);
      write_text(dir / "identities.csv", identities);

      json trials = json::array();
      json ensembles = json::array();
      for (std::size_t k = 0; k < res.trials.size(); ++k) {
        const auto& t = res.trials[k];
        trials.push_back({{"independence", audit_summary(t.independence)},
                          {"decomposition", audit_summary(t.decomposition)},
                          {"identities_pass", t.identities_pass},
                          {"identity_max_residual", t.identity_max_residual},
                          {"delta_estimate", t.delta_estimate},
                          {"max_closeness", t.max_closeness},
                          {"max_closeness_after_init", t.max_closeness_after_init}});
        ensembles.push_back(
            descriptor_json({res.m, config.d, trial_seeds(config.seed, k).ensemble, config.storage}));
      }
      const json summary = {
          {"pass", res.pass},
          {"net", {{"size", res.net.size()},
                   {"max_gap", res.net_audit.max_gap},
                   {"min_separation", res.net_audit.min_separation},
                   {"covered", res.net_audit.covered},
                   {"separated", res.net_audit.separated}}},
          {"identities", {{"pass", res.identities_pass}, {"max_residual", res.identity_max_residual}}},
          {"independence",
           {{"pass", res.independence_pass},
            {"violation_fraction", res.independence_violation_fraction},
            {"evaluations", res.independence_evaluations}}},
          {"decomposition",
           {{"pass", res.decomposition_pass},
            {"violations", res.decomposition_violations},
            {"flagged", res.decomposition_flagged},
            {"evaluations", res.decomposition_evaluations}}},
          {"closeness",
           {{"pass", res.closeness_pass},
            {"max_ratio", res.max_closeness_ratio},
            {"max_ratio_after_init", res.max_closeness_after_init_ratio}}},
          {"trials", trials}};
      write_json(dir / "diagnostics.json", summary);
      meta["ensembles"] = ensembles;
      meta["pass"] = res.pass;
      break;
    }
    case ExperimentKind::kLowerBound: {
      const LowerBoundSummary res = cmd_lower_bound(config);
      std::string table = "seed_index,seed,r,achieved,bound,block_value,certified\n";
      json ensembles = json::array();
      for (const auto& row : res.rows) {
        table += std::to_string(row.seed_index) + "," + std::to_string(row.seed) + "," +
                 std::to_string(row.r) + "," + number(row.result.achieved) + "," +
                 number(row.result.bound) + "," + number(row.result.block_value) + "," +
                 (row.result.certified ? "1" : "0") + "\n";
      }
      for (std::size_t k = 0; k < config.trials; ++k)
        ensembles.push_back(
            descriptor_json({res.m, config.d, derive_seed(config.seed, k), config.storage}));
      write_text(dir / "lower_bound.csv", table);
      json per_rank = json::object();
      for (const auto& [r, frac] : res.certified_fraction) {
        json entry = {{"certified_fraction", frac}, {"mean_achieved", res.mean_achieved.at(r)}};
        if (auto it = res.doubling_ratio.find(r); it != res.doubling_ratio.end())
          entry["doubling_ratio"] = it->second;
        per_rank[std::to_string(r)] = entry;
      }
      meta["ranks"] = per_rank;
      meta["ensembles"] = ensembles;
      break;
    }
    case ExperimentKind::kRip: {
      const RipSummary res = cmd_rip(config);
      std::string table = "m,seed_index,estimate\n";
      for (const auto& row : res.rows)
        table += std::to_string(row.m) + "," + std::to_string(row.seed_index) + "," +
                 number(row.estimate) + "\n";
      write_text(dir / "rip.csv", table);
      json means = json::object();
      for (const auto& [m, mean] : res.mean_estimate) means[std::to_string(m)] = mean;
      json consequences = json::object();
      for (const auto& [m, rep] : res.consequences)
        consequences[std::to_string(m)] = {{"fraction_frobenius", rep.fraction_frobenius},
                                           {"fraction_spectral", rep.fraction_spectral},
                                           {"fraction_cross", rep.fraction_cross},
                                           {"in_regime", rep.in_regime},
                                           {"pass", rep.pass}};
      json ensembles = json::array();
      for (const auto& row : res.rows)
        ensembles.push_back(descriptor_json(
            {row.m, config.d, derive_seed(config.seed, row.seed_index), config.storage}));
      meta["mean_estimate"] = means;
      meta["exponent"] = res.exponent;
      meta["constant"] = res.constant;
      meta["consequences"] = consequences;
      meta["ensembles"] = ensembles;
      break;
    }
  }
  write_json(dir / "metadata.json", meta);
  return exit_code;
}

}  // namespace msense
