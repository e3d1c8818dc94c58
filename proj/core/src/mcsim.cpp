#include "ftstab/mcsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "ftstab/errors.hpp"

namespace ftstab {

namespace {

constexpr double kOverflowGuard = 1e150;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Per-path engine: the seed and stream are whitened separately so adjacent
// streams do not share low-bit structure.
std::mt19937_64 path_engine(std::uint64_t seed, std::uint64_t stream) {
  const std::uint64_t a = mix64(seed + 0x9e3779b97f4a7c15ULL);
  const std::uint64_t b = mix64(stream + 0xd1b54a32d192ed03ULL);
  return std::mt19937_64(mix64(a ^ (b * 0x2545f4914f6cdd1dULL)));
}

double uniform01(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// Box-Muller, fixed two-word consumption per draw (the sine partner is
// discarded so the stream position never depends on caching).
double standard_normal(std::mt19937_64& eng) {
  double u1 = uniform01(eng);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  const double u2 = uniform01(eng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

double rademacher(std::mt19937_64& eng) { return (eng() >> 63) != 0 ? 1.0 : -1.0; }

std::vector<double> mat_apply(const Mat& m, std::span<const double> v) {
  std::vector<double> out(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * v[j];
    out[i] = s;
  }
  return out;
}

bool all_finite_small(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x) || std::abs(x) > kOverflowGuard) return false;
  }
  return true;
}

void check_inputs(const PlantParams& plant, const GainPackage& gp, const UncRealization& F_real,
                  const FtSpec& spec, std::span<const double> x0) {
  const std::size_t n = plant.n();
  if (spec.n() != n) {
    throw_shape("simulation: weights are " + std::to_string(spec.n()) + "-dimensional, plant is " +
                std::to_string(n));
  }
  if (x0.size() != n) {
    throw_shape("simulation: x0 has " + std::to_string(x0.size()) + " entries, plant state is " +
                std::to_string(n));
  }
  if (F_real.steps() != spec.T) {
    throw_shape("simulation: realization covers " + std::to_string(F_real.steps()) +
                " steps, horizon is " + std::to_string(spec.T));
  }
  if (gp.K1.rows() != plant.m() || gp.K1.cols() != n) {
    throw_shape("simulation: K1 is " + std::to_string(gp.K1.rows()) + "x" +
                std::to_string(gp.K1.cols()) + ", want " + std::to_string(plant.m()) + "x" +
                std::to_string(n));
  }
  for (double x : x0) {
    if (!std::isfinite(x)) throw_validation("simulation: x0 must be finite");
  }
}

}  // namespace

std::size_t TrajectoryBatch::truncated_runs() const {
  return static_cast<std::size_t>(std::count(truncated.begin(), truncated.end(), true));
}

TrajectoryBatch simulate_paths(const PlantParams& plant, const GainPackage& gp,
                               const UncRealization& F_real, const FtSpec& spec,
                               std::span<const double> x0, std::size_t runs, const RngSpec& rng,
                               NoiseKind noise_kind) {
  check_inputs(plant, gp, F_real, spec, x0);
  if (runs == 0) throw_validation("simulation: runs must be at least 1");
  const std::size_t n = plant.n();
  const std::size_t T = spec.T;
  const double a = gp.alpha_bar;

  // Closed-loop maps for both values of the fault indicator. The alpha = 0
  // parts are step independent; the perturbation parts follow F_k.
  const Mat p0 = plant.A1 + plant.B * gp.K1;
  const Mat q0 = plant.A2 + plant.B * gp.K2;
  const Mat s0 = plant.C1 + plant.D * gp.K1;
  const Mat u0 = plant.C2 + plant.D * gp.K2;
  std::vector<Mat> p1, q1, s1, u1, mean_step;
  p1.reserve(T);
  for (std::size_t k = 0; k < T; ++k) {
    const DeltaGains d = delta_gains(gp, F_real.F[k]);
    p1.push_back(p0 + plant.B * d.dK1);
    q1.push_back(q0 + plant.B * d.dK2);
    s1.push_back(s0 + plant.D * d.dK1);
    u1.push_back(u0 + plant.D * d.dK2);
    mean_step.push_back(mean_matrix(plant, gp, F_real.F[k]));
  }

  TrajectoryBatch batch;
  batch.n = n;
  batch.T = T;
  batch.mean_track = Mat(T + 1, n);
  std::vector<double> ex(x0.begin(), x0.end());
  for (std::size_t k = 0; k <= T; ++k) {
    for (std::size_t j = 0; j < n; ++j) batch.mean_track(k, j) = ex[j];
    if (k < T) ex = mat_apply(mean_step[k], ex);
  }

  batch.states.reserve(runs);
  batch.truncated.assign(runs, false);
  std::vector<double> mean_row(n);
  for (std::size_t r = 0; r < runs; ++r) {
    std::mt19937_64 eng = path_engine(rng.seed, rng.stream + r);
    Mat traj(T + 1, n);
    std::vector<double> x(x0.begin(), x0.end());
    for (std::size_t j = 0; j < n; ++j) traj(0, j) = x[j];
    for (std::size_t k = 0; k < T; ++k) {
      // Draw order is pinned: the fault indicator first, then the noise.
      const bool fault = a > 0.0 && uniform01(eng) < a;
      const double w =
          noise_kind == NoiseKind::gaussian ? standard_normal(eng) : rademacher(eng);
      for (std::size_t j = 0; j < n; ++j) mean_row[j] = batch.mean_track(k, j);
      const std::vector<double> drift =
          fault ? mat_apply(p1[k], x) : mat_apply(p0, x);
      const std::vector<double> drift_mean =
          fault ? mat_apply(q1[k], mean_row) : mat_apply(q0, mean_row);
      const std::vector<double> diff = fault ? mat_apply(s1[k], x) : mat_apply(s0, x);
      const std::vector<double> diff_mean =
          fault ? mat_apply(u1[k], mean_row) : mat_apply(u0, mean_row);
      for (std::size_t j = 0; j < n; ++j) {
        x[j] = drift[j] + drift_mean[j] + w * (diff[j] + diff_mean[j]);
      }
      if (!all_finite_small(x)) {
        batch.truncated[r] = true;
        for (std::size_t kk = k + 1; kk <= T; ++kk) {
          for (std::size_t j = 0; j < n; ++j) traj(kk, j) = traj(k, j);
        }
        break;
      }
      for (std::size_t j = 0; j < n; ++j) traj(k + 1, j) = x[j];
    }
    batch.states.push_back(std::move(traj));
  }
  return batch;
}

MomentEstimate empirical_weighted_moment(const TrajectoryBatch& batch,
                                         std::span<const SymMat> R_seq) {
  if (batch.states.empty()) throw_validation("moment estimate: batch is empty");
  if (R_seq.size() != batch.T + 1) {
    throw_shape("moment estimate: " + std::to_string(R_seq.size()) + " weights for horizon " +
                std::to_string(batch.T));
  }
  for (const SymMat& r : R_seq) {
    if (r.dim() != batch.n) throw_shape("moment estimate: weight dimension mismatch");
  }

  MomentEstimate est;
  est.excluded_runs = batch.truncated_runs();
  est.used_runs = batch.runs() - est.excluded_runs;
  if (est.used_runs == 0) throw_validation("moment estimate: every run was truncated");
  est.value.assign(batch.T + 1, 0.0);
  est.std_error.assign(batch.T + 1, 0.0);

  std::vector<double> q(est.used_runs);
  for (std::size_t k = 0; k <= batch.T; ++k) {
    const Mat& rk = R_seq[k].mat();
    std::size_t idx = 0;
    for (std::size_t r = 0; r < batch.runs(); ++r) {
      if (batch.truncated[r]) continue;
      double s = 0.0;
      for (std::size_t i = 0; i < batch.n; ++i)
        for (std::size_t j = 0; j < batch.n; ++j)
          s += batch.states[r](k, i) * rk(i, j) * batch.states[r](k, j);
      q[idx++] = s;
    }
    double mean = 0.0;
    for (double v : q) mean += v;
    mean /= static_cast<double>(q.size());
    est.value[k] = mean;
    if (q.size() > 1) {
      double ss = 0.0;
      for (double v : q) ss += (v - mean) * (v - mean);
      const double var = ss / static_cast<double>(q.size() - 1);
      est.std_error[k] = std::sqrt(var / static_cast<double>(q.size()));
    }
  }
  return est;
}

std::vector<double> exact_second_moment(const PlantParams& plant, const GainPackage& gp,
                                        const UncRealization& F_real, const FtSpec& spec,
                                        std::span<const double> x0) {
  check_inputs(plant, gp, F_real, spec, x0);
  const std::size_t n = plant.n();
  const std::vector<StepFactors> factors = factor_sequence(plant, gp, F_real);

  // X_0 = [x0; 0][x0; 0]' in the mean/deviation coordinates.
  Mat x(2 * n, 2 * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) x(i, j) = x0[i] * x0[j];

  std::vector<double> track(spec.T + 1, 0.0);
  for (std::size_t k = 0; k <= spec.T; ++k) {
    const Mat rbar = dup_diag(spec.R[k].mat());
    double tr = 0.0;
    for (std::size_t i = 0; i < 2 * n; ++i)
      for (std::size_t j = 0; j < 2 * n; ++j) tr += rbar(i, j) * x(j, i);
    track[k] = tr;
    if (k < spec.T) {
      const StepFactors& f = factors[k];
      Mat next = f.m1 * x * f.m1.transpose();
      next += f.m2 * x * f.m2.transpose();
      next += f.m3 * x * f.m3.transpose();
      next += f.m4 * x * f.m4.transpose();
      x = 0.5 * (next + next.transpose());
    }
  }
  return track;
}

McCheckReport compare_mc_exact(const PlantParams& plant, const GainPackage& gp,
                               const UncRealization& F_real, const FtSpec& spec,
                               std::span<const double> x0, std::size_t runs, const RngSpec& rng) {
  McCheckReport report;
  const TrajectoryBatch batch =
      simulate_paths(plant, gp, F_real, spec, x0, runs, rng, NoiseKind::gaussian);
  report.empirical = empirical_weighted_moment(batch, spec.R);
  report.exact = exact_second_moment(plant, gp, F_real, spec, x0);
  report.z.resize(spec.T + 1);
  for (std::size_t k = 0; k <= spec.T; ++k) {
    const double diff = report.empirical.value[k] - report.exact[k];
    const double se = report.empirical.std_error[k];
    if (se > 0.0) {
      report.z[k] = diff / se;
    } else if (std::abs(diff) <= 1e-9 * (1.0 + std::abs(report.exact[k]))) {
      report.z[k] = 0.0;
    } else {
      report.z[k] = std::copysign(std::numeric_limits<double>::infinity(), diff);
    }
    report.max_abs_z = std::max(report.max_abs_z, std::abs(report.z[k]));
  }
  report.pass = report.max_abs_z <= 4.0;
  return report;
}

}  // namespace ftstab
