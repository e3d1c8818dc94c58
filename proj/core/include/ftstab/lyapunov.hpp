#pragma once

#include <span>
#include <vector>

#include "ftstab/criteria.hpp"
#include "ftstab/model.hpp"

namespace ftstab {

// The moment-bound matrices Pb_k driven by the block-trace recursion,
// Pb_0 = I. Equals the block trace of the explicit stacked-product Gram
// whenever that fits in memory.
struct MomentSequence {
  std::vector<SymMat> P;  // length T+1, each 2n x 2n PSD
  bool scaled = false;
};

// Production form of the recursion: Pb_{k+1} = sum_j M_j Pb_k M_j' over the
// four step factors, re-symmetrized each step.
MomentSequence pbar_sequence(std::span<const StepFactors> factors, std::size_t T);

// The same recursion written out in the eight-term block form
//   Ab1 P Ab1' + a(Ab1 P Ab2' + Ab2 P Ab1' + Ab2 P Ab2')
//   + Cb1 P Cb1' + a(Cb1 P Cb2' + Cb2 P Cb1' + Cb2 P Cb2').
// Algebraically identical to the factored form; kept as an independent
// evaluation path so the two can be cross-asserted.
MomentSequence pbar_sequence_expanded(std::span<const AugmentedStep> steps, double alpha_bar,
                                      std::size_t T);

// Sufficient test: pass iff eig_max(Pb_k) <= eps2/eps1 for all k. Runs both
// recursion forms and insists they agree to 1e-12. The bound can be strictly
// conservative (see spectral_gap_report), so the method string is
// "pbar-sufficient" and this never overrides the exact verdict.
Verdict pbar_sufficient_verdict(const PlantParams& plant, const GainPackage& gp, const FtSpec& spec,
                      const UncRealization& real);

// Checks a user-supplied certificate sequence: the step inequality
// sum_j M_j P_k M_j' <= P_{k+1}, plus P_0 >= I and P_k <= (eps2/eps1) I, all
// with relative slack kCriterionTol. per_step margins are the worst slack of
// the inequalities touching each k; notes name what was violated.
Verdict check_certificate_sequence(std::span<const SymMat> P_seq,
                              std::span<const StepFactors> factors, const FtSpec& spec);

struct GapEntry {
  std::size_t k = 0;
  double pbar_eig = 0.0;   // eig_max of the block-trace matrix
  double gram_eig = 0.0;   // eig_max of the exact scaled Gram
  double trace_rel = 0.0;  // relative trace mismatch, provably ~0
};

// Side-by-side comparison of the two eig_max quantities per step. Traces are
// asserted equal (1e-10 relative, an identity); eigenvalue gaps are reported,
// never judged.
std::vector<GapEntry> spectral_gap_report(const PlantParams& plant, const GainPackage& gp,
                                          const FtSpec& spec, const UncRealization& real);
std::vector<GapEntry> spectral_gap_report(std::span<const StepFactors> weighted_factors);

}  // namespace ftstab
