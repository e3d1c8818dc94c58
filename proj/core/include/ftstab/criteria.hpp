#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ftstab/model.hpp"
#include "ftstab/stm.hpp"

namespace ftstab {

// Slack for Loewner comparisons. The target inequalities are non-strict, so a
// margin in (-kCriterionTol*(1+bound), 0) counts as a boundary pass.
inline constexpr double kCriterionTol = 1e-9;

struct StepReport {
  std::size_t k = 0;
  double value = 0.0;   // measured quantity, largest eigenvalue of the tested matrix
  double bound = 0.0;   // threshold the value is compared against
  double margin = 0.0;  // bound - value; nonnegative means satisfied
};

struct Verdict {
  bool pass = false;
  bool boundary = false;  // pass came with some margin inside the slack band
  std::string method;
  std::vector<StepReport> per_step;
  std::size_t worst_step = 0;
  std::vector<double> worst_direction;
  std::vector<std::string> notes;

  double worst_margin() const;
};

// The four Gram-based formulations of the boundedness test. They differ in
// which stacked transition matrix is built and whether weighting happens
// inside the Gram or by congruence afterwards:
//   b: interleaved stacking, raw factors, weighted Gram conjugated by the
//      inverse root of the initial weight
//   c: interleaved stacking, weight-scaled factors, plain Gram
//   d: branch-major stacking, raw factors, weighted + conjugated as in b
//   e: branch-major stacking, weight-scaled factors, plain Gram
// All four must agree; keeping them separate preserves genuinely different
// computation paths for cross-checking.
enum class GramVariant { b, c, d, e };

// Per-step eig_max of the chosen Gram formulation against eps2/eps1, for
// k = 0..T. Steps whose explicit stacked build would exceed the row cap are
// evaluated through the weight-scaled Gram instead (equal by the scaling
// identity); for the raw variants b/d this is flagged "via scaled form".
Verdict criterion_gram(GramVariant variant, const PlantParams& plant, const GainPackage& gp,
                       const FtSpec& spec, const UncRealization& real);

// The constrained difference-equation formulation. For k <= depth_cap the
// big-matrix recursion P_{k+1} = (I (x) stack) P_k (I (x) stack)' is run
// literally and tested against (eps2/eps1)(I (x) Rb_k^{-1}); beyond that the
// rank-reduced equivalent (the scaled Gram eigenvalue) is used. Never throws
// for depth; the switch is automatic.
Verdict criterion_f(const PlantParams& plant, const GainPackage& gp, const FtSpec& spec,
                    const UncRealization& real, std::size_t depth_cap = 3);

// Production-path verdict: per-k eig_max of the weight-scaled Gram computed
// by the backward adjoint recursion, O(T^2 (2n)^3) total. worst_direction is
// the worst initial augmented state, mapped through Rb_0^{-1/2} and sized so
// that x0' Rb_0 x0 = eps1.
Verdict exact_ft_verdict(const PlantParams& plant, const GainPackage& gp, const FtSpec& spec,
                         const UncRealization& real);

// Same test applied directly to a factor sequence already expressed in the
// weighted coordinates (the scaled flag is not enforced here). Covers
// augmented dynamics that no plant realizes; worst_direction is the unit top
// eigenvector of the worst-step Gram.
Verdict exact_ft_verdict(std::span<const StepFactors> weighted_factors, double bound);

// Builds a Verdict from per-step tested matrices indexed k = 0..len-1:
// value_k = eig_max(tested[k]), margins against the common bound, worst
// direction = unit top eigenvector at the worst step.
Verdict verdict_from_tested(std::string method, std::vector<SymMat> tested, double bound,
                            std::vector<std::string> notes = {});

enum class FalsifyStrategy { constant_grid, random_sequences, coordinate_ascent };

struct FalsifyParams {
  FalsifyStrategy strategy = FalsifyStrategy::constant_grid;
  std::size_t budget = 1000;   // number of full verdict evaluations allowed
  std::uint64_t seed = 0;      // used by random_sequences only
};

struct Counterexample {
  UncRealization real;
  Verdict verdict;  // the failing verdict, with violating step and direction
};

struct FalsifyReport {
  std::optional<Counterexample> counterexample;
  std::size_t evaluations = 0;
  std::string summary;
};

// Searches for an admissible uncertainty realization that breaks the exact
// verdict. A hit is a genuine counterexample; coming up empty is NOT a
// robustness proof (the summary says so explicitly). Deterministic for a
// fixed seed.
FalsifyReport falsify_uncertainty(const PlantParams& plant, const GainPackage& gp,
                                  const FtSpec& spec, const FalsifyParams& params);

}  // namespace ftstab
