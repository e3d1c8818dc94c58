#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ftstab/criteria.hpp"
#include "ftstab/model.hpp"

namespace ftstab {

// Flat indexing of the synthesis decision variables: the lower triangles of
// P_0..P_T (each 2n x 2n, k-major then row-major), then K1, then K2 (row
// major), then the uniform feasibility margin t as the last variable.
struct VarLayout {
  std::size_t n = 0, m = 0, T = 0;

  std::size_t sym_per_p() const noexcept { return n * (2 * n + 1); }  // (2n)(2n+1)/2
  std::size_t p_index(std::size_t k, std::size_t i, std::size_t j) const;
  std::size_t k1_index(std::size_t r, std::size_t c) const;
  std::size_t k2_index(std::size_t r, std::size_t c) const;
  std::size_t margin_index() const noexcept { return num_vars() - 1; }
  std::size_t num_vars() const noexcept { return (T + 1) * sym_per_p() + 2 * m * n + 1; }
  std::string var_name(std::size_t idx) const;
};

enum class BlockRequire { negative_definite, positive_semidefinite };

// One affine symmetric-matrix constraint: value(y) = constant + sum_i y_i
// coeff_i. The margin variable never appears in coeffs; its slack semantics
// (<= -t I or >= t I) live in the solver and the exporter.
struct LmiBlock {
  std::string name;
  std::size_t size = 0;
  BlockRequire require = BlockRequire::negative_definite;
  Mat constant;
  std::vector<std::pair<std::size_t, Mat>> coeffs;  // (variable index, symmetric coefficient)
};

struct LmiMeta {
  std::size_t n = 0, m = 0, T = 0;
  double gamma = 0.0, eps1 = 0.0, eps2 = 0.0;
};

struct LmiProblem {
  VarLayout layout;
  std::vector<LmiBlock> blocks;
  LmiMeta meta;
};

struct Candidate {
  std::vector<SymMat> P_seq;  // length T+1, each 2n x 2n
  Mat K1, K2;                 // m x n
  double margin = 0.0;
};

// Candidate <-> flat vector over all variables except the margin.
std::vector<double> pack_candidate(const VarLayout& layout, const Candidate& cand);
Candidate unpack_candidate(const VarLayout& layout, std::span<const double> y, double margin);

// value(y) for one block; y covers every variable except the margin.
Mat instantiate_block(const LmiBlock& block, std::span<const double> y);

// The synthesis problem: one negative-definite block per step k = 0..T-1
// (grid of seven block rows/cols, sizes 2n x5 then 4n x2), plus P_0 >= I and
// the per-k caps (eps2/eps1) I - P_k >= 0. Gains enter affinely through the
// mean closed-loop block and the noise block; the channel matrices require
// p = q = n, the only shapes the printed form is consistent for.
LmiProblem assemble_synthesis_lmi(const PlantParams& plant, const FtSpec& spec, const UncChannel& channel,
                          double gamma);

// The fixed-realization one-step block: corner -P_{k+1}, the four step
// factors along the first block row, and -(eps1/eps2) I on the remaining
// diagonal. Negative definiteness for all k, together with the P caps,
// certifies the step inequality for that realization. P_k takes no part in
// the matrix; it is accepted and shape-checked to keep the step pairing
// explicit at call sites.
SymMat assemble_fixed_gain_step(const StepFactors& f, const SymMat& P_k, const SymMat& P_next,
                                const FtSpec& spec);

enum class SolveStatus { feasible, undecided };

struct SolveParams {
  std::size_t max_iters = 20000;
  double tol = 1e-6;  // minimal uniform margin to accept
  std::uint64_t seed = 0;
  // Pin selected variables (by layout index, margin excluded) to fixed
  // values; the solver then searches only the remaining ones.
  std::vector<std::pair<std::size_t, double>> fixed_vars;
  // Called every few hundred iterations with (iteration, best margin, target).
  std::function<void(std::size_t, double, double)> progress;
};

struct SolveResult {
  SolveStatus status = SolveStatus::undecided;
  std::optional<Candidate> candidate;  // present iff status == feasible
  double best_margin = 0.0;
  std::size_t iterations = 0;
  std::string detail;
};

// Margin-maximizing feasibility search by alternating projections between
// the affine span of the blocks and the definiteness cones, with a geometric
// ramp on the target margin and warm starts. Deterministic for fixed params.
// Returns a Candidate only if its independently verified margin exceeds
// params.tol; an exhausted budget yields "undecided", never "infeasible".
SolveResult solve_feasibility(const LmiProblem& problem, const SolveParams& params = {});

// Instantiates every block at the candidate and checks definiteness by
// eigenvalue: negative_definite wants eig_max <= -tol, positive_semidefinite
// wants eig_min >= -tol. per_step is indexed by block; notes name violated
// blocks; worst_direction is the offending eigenvector of the worst block.
Verdict verify_candidate(const LmiProblem& problem, const Candidate& cand, double tol = 1e-9);

// SDPA sparse ".dat-s" text. Variables are layout-ordered with the margin
// last and objective weight 1; each block is emitted in the F(y) >= 0
// convention (negative-definite blocks are negated), with the margin
// contributing -I everywhere. Upper-triangle entries only; diagonal-only
// blocks get negative sizes.
std::string export_sdpa(const LmiProblem& problem);

struct SdpaEntry {
  std::size_t mat = 0;  // 0 is the constant matrix F_0
  std::size_t block = 0;
  std::size_t i = 0, j = 0;  // 1-based, i <= j
  double value = 0.0;
};

struct SdpaProblem {
  std::size_t num_vars = 0;
  std::vector<long long> block_sizes;  // negative means diagonal
  std::vector<double> objective;
  std::vector<SdpaEntry> entries;
};

SdpaProblem parse_sdpa(const std::string& text);

// Dense value of one parsed block at x: sum_j x_j F_j - F_0.
Mat sdpa_block_value(const SdpaProblem& problem, std::size_t block, std::span<const double> x);

// The gamma sweep used when the user does not supply an explicit grid:
// the user's single value (if any) first, then 25 log-spaced points across
// [1e-3, 1e3].
std::vector<double> default_gamma_grid(std::optional<double> user_gamma);

struct GammaAttempt {
  double gamma = 0.0;
  SolveStatus status = SolveStatus::undecided;
  double margin = 0.0;
};

struct SynthesisResult {
  bool certified = false;
  std::optional<Candidate> best;
  double best_gamma = 0.0;
  std::vector<GammaAttempt> attempts;
  // Downstream screening of the extracted gains: the exact verdict under
  // F = 0 and a constant-grid falsification sweep.
  std::optional<Verdict> exact;
  std::optional<FalsifyReport> falsification;
  std::string detail;
};

// Solves the synthesis problem over the gamma grid and keeps the candidate
// with the largest verified margin. An empty yield across the whole grid is
// reported as "no certificate", which is not an infeasibility proof.
SynthesisResult synthesize_gains(const PlantParams& plant, const FtSpec& spec,
                                 const UncChannel& channel, std::span<const double> gamma_grid,
                                 const SolveParams& params = {});

}  // namespace ftstab
