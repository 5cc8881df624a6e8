// End-to-end acceptance run: one PASS/FAIL line per criterion.

#include "msense/counter_rng.hpp"
#include "msense/experiments.hpp"
#include "msense/metrics.hpp"
#include "msense/parallel.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>

namespace msense {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

Matrix gaussian(CounterRng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.normal();
  return m;
}

SymMatrix gaussian_sym(CounterRng& rng, std::size_t d) {
  const Matrix g = gaussian(rng, d, d);
  return SymMatrix::symmetrized(0.5 * (g + g.transpose()));
}

Vector unit(CounterRng& rng, std::size_t d) {
  const Matrix g = gaussian(rng, d, 1);
  return g.col(0) / g.norm();
}

Matrix haar_rotation(CounterRng& rng, std::size_t k) {
  Eigen::HouseholderQR<Matrix> qr(gaussian(rng, k, k));
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

ExperimentConfig config_from(const std::string& text) { return parse_config(text); }

// ---- 1. exact identities ----------------------------------------------------

Outcome exact_identities() {
  CounterRng rng(101, 0);
  double worst_identity = 0.0, worst_adjoint = 0.0, worst_gradient = 0.0;
  std::size_t failures = 0;
  for (std::size_t k = 0; k < 100; ++k) {
    const std::size_t d = 4 + k % 13;  // 4..16
    const std::size_t r = 1 + k % 3;
    const std::size_t m = 20 + 3 * d;
    const GoeEnsemble ens = GoeEnsemble::sample(m, d, derive_seed(202, k));

    const VirtualOperator vop(ens, unit(rng, d));
    const SymMatrix z = gaussian_sym(rng, d);
    const IdentityReport id = check_operator_identities(vop, z);
    const double id_rel = id.max_residual / (1.0 + z.frobenius_norm());
    worst_identity = std::max(worst_identity, id_rel);
    failures += id_rel > 1e-10;

    const Vector v = gaussian(rng, m, 1).col(0);
    const double lhs = ens.apply(z).dot(v);
    const double rhs = z.dot(ens.adjoint(v));
    const double adj_rel = std::abs(lhs - rhs) / (z.frobenius_norm() * v.norm());
    worst_adjoint = std::max(worst_adjoint, adj_rel);
    failures += adj_rel > 1e-12;

    const PlantedInstance inst = plant_instance(d, r, 2.0, SpectrumPolicy::kLogSpaced, k);
    const ObservationVector y = observe(ens, inst.xstar, 0.01, derive_seed(303, k));
    const Matrix u = gaussian(rng, d, r);
    const Matrix dir = gaussian(rng, d, r);
    const double h = 1e-5;
    const double fd = (loss(ens, y, u + h * dir) - loss(ens, y, u - h * dir)) / (2 * h);
    const double analytic = (gradient(ens, y, u).array() * dir.array()).sum();
    const double grad_rel = std::abs(fd - analytic) / std::max(std::abs(analytic), 1.0);
    worst_gradient = std::max(worst_gradient, grad_rel);
    failures += grad_rel > 1e-5;
  }
  return {failures == 0, "identity " + fmt(worst_identity) + ", adjoint " + fmt(worst_adjoint) +
                             ", gradient " + fmt(worst_gradient)};
}

// ---- 2. noiseless geometric convergence ------------------------------------

double log_linear_r2(const std::vector<double>& t, const std::vector<double>& v) {
  const std::size_t n = t.size();
  double mt = 0.0, mv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mt += t[i];
    mv += std::log(v[i]);
  }
  mt /= n;
  mv /= n;
  double stt = 0.0, stv = 0.0, svv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = t[i] - mt, b = std::log(v[i]) - mv;
    stt += a * a;
    stv += a * b;
    svv += b * b;
  }
  return svv > 0.0 ? stv * stv / (stt * svv) : 1.0;
}

Outcome noiseless_convergence() {
  std::size_t good = 0;
  double min_r2 = 1.0, max_err = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    ExperimentConfig c = config_from(
        "kind = recover\nd = 60\nr = 3\nkappa = 2\nm = 8640\nmax_iters = 5000\ntol = 1e-6\n");
    c.seed = derive_seed(2, s);
    const RecoverOutcome out = cmd_recover(c);
    if (!out.result) continue;
    std::vector<double> t, v;
    for (const auto& p : out.result->trajectory.points)
      if (p.dist_sq && *p.dist_sq > 0.0) {
        t.push_back(static_cast<double>(p.iter));
        v.push_back(*p.dist_sq);
      }
    const double r2 = t.size() >= 3 ? log_linear_r2(t, v) : 0.0;
    min_r2 = std::min(min_r2, r2);
    max_err = std::max(max_err, out.final_relative_error);
    good += out.exit_code == ExitCode::kSuccess && out.final_relative_error < 1e-6 && r2 >= 0.98;
  }
  return {good >= 18, std::to_string(good) + "/20 seeds, min R^2 " + fmt(min_r2) +
                          ", max final error " + fmt(max_err)};
}

// ---- 3. linear rank scaling ------------------------------------------------

Outcome rank_scaling() {
  const ExperimentConfig c = load_config(std::string(CONFIG_DIR) + "/phase_d48.cfg");
  const PhaseResult res = cmd_phase(c);
  std::string detail = "m*/r:";
  bool all = true;
  for (const auto& [r, m_star] : res.m_star) {
    all = all && m_star.has_value();
    detail += " r=" + std::to_string(r) + ":" +
              (m_star ? fmt(static_cast<double>(*m_star) / static_cast<double>(r)) : "none");
  }
  detail += ", spread " + fmt(res.ratio_spread);
  return {all && res.ratio_spread <= 1.6, detail};
}

// ---- 4. noise floor ----------------------------------------------------------

Outcome noise_floor() {
  const ExperimentConfig c = load_config(std::string(CONFIG_DIR) + "/noise_floor_d48.cfg");
  const NoiseFloorResult res = cmd_noise_floor(c);
  const bool pass = std::abs(res.slope - 1.0) <= 0.15 && res.normalized_spread <= 2.0;
  return {pass, "slope " + fmt(res.slope) + ", normalized spread " + fmt(res.normalized_spread)};
}

// ---- 5. lower-bound tightness ----------------------------------------------

Outcome lower_bound() {
  const ExperimentConfig c = load_config(std::string(CONFIG_DIR) + "/lower_bound_d64.cfg");
  const LowerBoundSummary res = cmd_lower_bound(c);
  const double certified = res.certified_fraction.at(4);
  const double ratio = res.doubling_ratio.at(2);
  return {certified >= 0.9 && std::abs(ratio - 2.0) <= 0.5,
          "certified " + fmt(certified) + " at r=4, doubling ratio " + fmt(ratio)};
}

// ---- 6. RIP scaling -----------------------------------------------------------

Outcome rip_scaling() {
  const ExperimentConfig c = load_config(std::string(CONFIG_DIR) + "/rip_scaling.cfg");
  const RipSummary res = cmd_rip(c);
  return {res.mean_estimate.size() == 4 && std::abs(res.exponent + 0.5) <= 0.1,
          "exponent " + fmt(res.exponent) + ", fitted C " + fmt(res.constant)};
}

// ---- 7. virtual-sequence audits ---------------------------------------------

Outcome virtual_audits() {
  const ExperimentConfig c = load_config(std::string(CONFIG_DIR) + "/diagnostics_toy.cfg");
  const DiagnosticsResult res = cmd_diagnostics(c);
  const bool pass = res.independence_violation_fraction <= 0.01 &&
                    res.decomposition_violations == 0 && res.max_closeness_ratio < 0.1;
  return {pass, "independence violations " + fmt(res.independence_violation_fraction) +
                    ", decomposition violations " + std::to_string(res.decomposition_violations) +
                    "/" + std::to_string(res.decomposition_evaluations) + ", closeness " +
                    fmt(res.max_closeness_ratio) + " sigma_min (" +
                    fmt(res.max_closeness_after_init_ratio) + " after t=0)"};
}

// ---- 8. Procrustes and Davis-Kahan ------------------------------------------

Outcome procrustes_and_davis_kahan() {
  CounterRng rng(808, 0);
  std::size_t bound_fail = 0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t d = 4 + k % 9, r = 1 + k % 4;
    bound_fail += !procrustes_bound_check(gaussian(rng, d, r), gaussian(rng, d, r)).holds;
  }

  std::size_t dk_fail = 0, dk_total = 0;
  while (dk_total < 500) {
    const std::size_t d = 10, r = 2;
    const Matrix q = haar_rotation(rng, d);
    Vector lambda(d);
    for (std::size_t i = 0; i < d; ++i) lambda(i) = (i < r ? 3.0 + rng.uniform() : rng.uniform());
    for (std::size_t i = 0; i < d; ++i)
      if (rng.uniform() < 0.5) lambda(i) = -lambda(i);
    const SymMatrix z1 = SymMatrix::symmetrized(q * lambda.asDiagonal() * q.transpose());
    const MagnitudeEigen eig = eigen_by_magnitude(z1.full());
    const double gap = std::abs(eig.values(1)) - std::abs(eig.values(2));
    SymMatrix e = gaussian_sym(rng, d);
    e *= rng.uniform() * (1 - 1 / std::numbers::sqrt2) * gap / e.spectral_norm();
    const DavisKahanReport rep = davis_kahan_check(z1, z1 + e, r);
    if (!rep.applicable) continue;
    ++dk_total;
    dk_fail += !rep.holds;
  }

  std::size_t search_fail = 0;
  for (int pair = 0; pair < 3; ++pair) {
    const std::size_t k = 2 + pair;
    const Matrix u = gaussian(rng, 8, k), v = gaussian(rng, 8, k);
    const double closed = procrustes_dist(u, v);
    for (int s = 0; s < 10000; ++s)
      search_fail += (u * haar_rotation(rng, k) - v).norm() < closed - 1e-10;
  }
  return {bound_fail == 0 && dk_fail == 0 && search_fail == 0,
          "factor bound failures " + std::to_string(bound_fail) + "/1000, sin-theta failures " +
              std::to_string(dk_fail) + "/500, rotation search beat closed form " +
              std::to_string(search_fail) + "/30000"};
}

// ---- 9. determinism -----------------------------------------------------------

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "msense_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"recover", "kind = recover\nd = 20\nr = 2\nkappa = 2\nseed = 5\n"},
      {"phase", "kind = phase\nd = 12\nr_list = 1,2\nkappa = 1\nm_grid_points = 5\n"
                "m_grid_high = 6\ntrials = 4\nbisection_steps = 2\nmax_iters = 400\n"
                "stall_window = 50\n"},
      {"noise-floor", "kind = noise-floor\nd = 16\nr = 2\nkappa = 2\nsigma_list = 0,1e-3,1e-2\n"
                      "trials = 2\nmax_iters = 800\n"},
      {"diagnostics", "kind = diagnostics\nd = 4\nr = 1\nm = 120\niterations = 10\ntrials = 2\n"},
      {"lower-bound", "kind = lower-bound\nd = 32\nr_list = 1,2\nm = 128\ntrials = 5\n"},
      {"rip", "kind = rip\nd = 8\nr = 2\nm_list = 256,512\ntrials = 3\nrip_probes = 20\n"},
  };
  std::size_t identical = 0;
  std::string mismatched;
  for (const auto& [command, body] : runs) {
    const fs::path cfg = root / (command + ".cfg");
    std::ofstream(cfg) << body;
    bool same = true;
    std::size_t csv_count = 0;
    for (const char* tag : {"a", "b"}) {
      const std::string cmd = std::string(SENSE_BINARY) + " " + command + " --config " +
                              cfg.string() + " --out " + (root / command / tag).string() +
                              " >/dev/null 2>&1";
      if (std::system(cmd.c_str()) == -1) same = false;
    }
    for (const auto& entry : fs::directory_iterator(root / command / "a")) {
      if (entry.path().extension() != ".csv") continue;
      ++csv_count;
      same = same && slurp(entry.path()) == slurp(root / command / "b" / entry.path().filename());
    }
    if (same && csv_count > 0) ++identical;
    else mismatched += " " + command;
  }
  return {identical == runs.size(),
          std::to_string(identical) + "/" + std::to_string(runs.size()) +
              " commands byte-identical" + (mismatched.empty() ? "" : ", differ:" + mismatched)};
}

}  // namespace
}  // namespace msense

int main(int argc, char** argv) {
  using namespace msense;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"exact identities", exact_identities},
      {"noiseless geometric convergence", noiseless_convergence},
      {"linear rank scaling", rank_scaling},
      {"noise floor", noise_floor},
      {"lower-bound tightness", lower_bound},
      {"RIP scaling", rip_scaling},
      {"virtual-sequence audits", virtual_audits},
      {"Procrustes and Davis-Kahan", procrustes_and_davis_kahan},
      {"determinism", determinism},
  };
  // Optional criterion numbers on the command line select a subset.
  std::vector<bool> selected(criteria.size(), argc <= 1);
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k >= 1 && k <= static_cast<int>(criteria.size())) selected[k - 1] = true;
  }

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("threw: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !outcome.pass;
    std::cout << (outcome.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " ("
              << criteria[i].first << "): " << outcome.detail << " [" << fmt(seconds) << " s]"
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
