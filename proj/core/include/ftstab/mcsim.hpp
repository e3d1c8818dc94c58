#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ftstab/model.hpp"

namespace ftstab {

// Seed plus stream index. Identical (seed, stream) reproduce a path bitwise;
// a batch of R runs occupies streams stream..stream+R-1.
struct RngSpec {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

// Distribution of the scalar noise w_k. Both are zero mean, unit variance;
// every second-moment statement is distribution-free, so rademacher exists
// mainly to test that claim.
enum class NoiseKind { gaussian, rademacher };

struct TrajectoryBatch {
  std::size_t n = 0;
  std::size_t T = 0;
  // One (T+1) x n matrix per run; row k is the state at step k.
  std::vector<Mat> states;
  // Analytic mean sequence fed into the dynamics, (T+1) x n. This is the
  // deterministic expectation recursion, not the empirical batch average:
  // using the batch mean would couple paths and bias small batches.
  Mat mean_track;
  // Runs that overflowed the finiteness guard; their tails are frozen at the
  // last finite state and the aggregators skip them.
  std::vector<bool> truncated;

  std::size_t runs() const noexcept { return states.size(); }
  std::size_t truncated_runs() const;
};

// Per-step sample mean and standard error of the weighted quadratic
// x_k' R_k x_k, truncated runs excluded.
struct MomentEstimate {
  std::vector<double> value;
  std::vector<double> std_error;
  std::size_t used_runs = 0;
  std::size_t excluded_runs = 0;
};

// Cross-validation of the simulator against the exact propagation.
struct McCheckReport {
  MomentEstimate empirical;
  std::vector<double> exact;
  std::vector<double> z;  // (empirical - exact) / SE per step
  double max_abs_z = 0.0;
  bool pass = false;  // max |z| <= 4, a pre-registered threshold
};

// Simulates `runs` closed-loop paths from the deterministic start x0, each
// drawing its own alpha_k ~ Bernoulli(alpha_bar) and w_k per step (alpha
// before w). The gain perturbation follows the fixed realization F_real.
TrajectoryBatch simulate_paths(const PlantParams& plant, const GainPackage& gp,
                               const UncRealization& F_real, const FtSpec& spec,
                               std::span<const double> x0, std::size_t runs, const RngSpec& rng,
                               NoiseKind noise_kind = NoiseKind::gaussian);

MomentEstimate empirical_weighted_moment(const TrajectoryBatch& batch,
                                         std::span<const SymMat> R_seq);

// Analytic E(x_k' R_k x_k), k = 0..T, by propagating the augmented second
// moment X_{k+1} = sum_j M_j X_k M_j' from X_0 = [x0; 0][x0; 0]'.
std::vector<double> exact_second_moment(const PlantParams& plant, const GainPackage& gp,
                                        const UncRealization& F_real, const FtSpec& spec,
                                        std::span<const double> x0);

// Runs the simulation (gaussian noise) and scores it against the exact track.
// A step with zero standard error must match exactly; disagreement there is
// reported as an infinite z.
McCheckReport compare_mc_exact(const PlantParams& plant, const GainPackage& gp,
                               const UncRealization& F_real, const FtSpec& spec,
                               std::span<const double> x0, std::size_t runs, const RngSpec& rng);

}  // namespace ftstab
