#include "ftstab/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace ftstab {

namespace {

std::size_t check_factor_prefix(std::span<const StepFactors> factors, std::size_t T) {
  if (factors.size() < T) {
    throw_shape("moment recursion: need " + std::to_string(T) + " step factors, got " +
                std::to_string(factors.size()));
  }
  if (T == 0 && factors.empty()) {
    throw_shape("moment recursion: cannot infer dimension without factors");
  }
  return factors.front().m1.rows();
}

SymMat resym(const Mat& m) { return SymMat(0.5 * (m + m.transpose())); }

}  // namespace

MomentSequence pbar_sequence(std::span<const StepFactors> factors, std::size_t T) {
  const std::size_t dim = check_factor_prefix(factors, T);
  MomentSequence seq;
  seq.scaled = factors.front().scaled;
  seq.P.reserve(T + 1);
  seq.P.push_back(SymMat::identity(dim));
  for (std::size_t k = 0; k < T; ++k) {
    const StepFactors& f = factors[k];
    const Mat& p = seq.P.back().mat();
    Mat next(dim, dim);
    for (const Mat* m : {&f.m1, &f.m2, &f.m3, &f.m4}) next += (*m) * p * m->transpose();
    seq.P.push_back(resym(next));
  }
  return seq;
}

MomentSequence pbar_sequence_expanded(std::span<const AugmentedStep> steps, double alpha_bar,
                                      std::size_t T) {
  if (steps.size() < T) {
    throw_shape("moment recursion: need " + std::to_string(T) + " augmented steps, got " +
                std::to_string(steps.size()));
  }
  if (steps.empty()) throw_shape("moment recursion: no augmented steps given");
  if (!(alpha_bar >= 0.0 && alpha_bar <= 1.0)) {
    throw_validation("moment recursion: alpha_bar outside [0, 1]");
  }
  const std::size_t dim = steps.front().A1.rows();
  const double a = alpha_bar;
  MomentSequence seq;
  seq.scaled = steps.front().scaled;
  seq.P.reserve(T + 1);
  seq.P.push_back(SymMat::identity(dim));
  for (std::size_t k = 0; k < T; ++k) {
    const AugmentedStep& s = steps[k];
    const Mat& p = seq.P.back().mat();
    Mat next = s.A1 * p * s.A1.transpose() + s.C1 * p * s.C1.transpose();
    if (a != 0.0) {
      next += a * (s.A1 * p * s.A2.transpose() + s.A2 * p * s.A1.transpose() +
                   s.A2 * p * s.A2.transpose());
      next += a * (s.C1 * p * s.C2.transpose() + s.C2 * p * s.C1.transpose() +
                   s.C2 * p * s.C2.transpose());
    }
    seq.P.push_back(resym(next));
  }
  return seq;
}

Verdict pbar_sufficient_verdict(const PlantParams& plant, const GainPackage& gp, const FtSpec& spec,
                      const UncRealization& real) {
  const std::vector<StepFactors> factors = scaled_factor_sequence(plant, gp, real, spec);
  std::vector<AugmentedStep> steps;
  steps.reserve(spec.T);
  for (std::size_t k = 0; k < spec.T; ++k) {
    steps.push_back(
        scale_step(augment_step(plant, gp, real.F[k]), spec.R[k], spec.R[k + 1]));
  }
  const MomentSequence fast = pbar_sequence(factors, spec.T);
  const MomentSequence full = pbar_sequence_expanded(steps, gp.alpha_bar, spec.T);
  for (std::size_t k = 0; k <= spec.T; ++k) {
    const double diff = (fast.P[k].mat() - full.P[k].mat()).frob_norm();
    const double scale = 1.0 + fast.P[k].mat().frob_norm();
    if (diff > 1e-12 * scale) {
      throw_internal("moment recursion forms disagree at k=" + std::to_string(k) +
                     " (residual " + std::to_string(diff) + ")");
    }
  }
  Verdict v = verdict_from_tested("pbar-sufficient", fast.P, spec.bound(),
                                  {"sufficient bound only; the exact criterion is authoritative"});
  return v;
}

Verdict check_certificate_sequence(std::span<const SymMat> P_seq,
                              std::span<const StepFactors> factors, const FtSpec& spec) {
  if (P_seq.size() != spec.T + 1) {
    throw_shape("certificate check: P sequence has " + std::to_string(P_seq.size()) +
                " entries, want T+1 = " + std::to_string(spec.T + 1));
  }
  const std::size_t dim = check_factor_prefix(factors, spec.T);
  for (std::size_t k = 0; k <= spec.T; ++k) {
    if (P_seq[k].dim() != dim) {
      throw_shape("certificate check: P_" + std::to_string(k) + " is " +
                  std::to_string(P_seq[k].dim()) + "x" + std::to_string(P_seq[k].dim()) +
                  ", factors are " + std::to_string(dim) + "x" + std::to_string(dim));
    }
  }
  const double bound = spec.bound();
  const Mat eye = Mat::identity(dim);

  Verdict v;
  v.method = "certificate-check";
  v.pass = true;
  double worst = std::numeric_limits<double>::infinity();
  Mat worst_diff(dim, dim);
  for (std::size_t k = 0; k <= spec.T; ++k) {
    double slack = std::numeric_limits<double>::infinity();
    const auto record = [&](const DomResult& dom, const Mat& diff, const std::string& what) {
      slack = std::min(slack, dom.margin);
      if (!dom.holds) {
        v.pass = false;
        v.notes.push_back(what + " violated at k=" + std::to_string(k));
      }
      if (dom.margin < worst) {
        worst = dom.margin;
        v.worst_step = k;
        worst_diff = diff;
      }
    };
    if (k == 0) {
      record(psd_dominates(P_seq[0], SymMat::identity(dim)), P_seq[0].mat() - eye, "P_0 >= I");
    }
    record(psd_dominates(SymMat::scaled_identity(dim, bound), P_seq[k]),
           bound * eye - P_seq[k].mat(), "cap (eps2/eps1) I >= P_k");
    if (k < spec.T) {
      const StepFactors& f = factors[k];
      const Mat& p = P_seq[k].mat();
      Mat step(dim, dim);
      for (const Mat* m : {&f.m1, &f.m2, &f.m3, &f.m4}) step += (*m) * p * m->transpose();
      const SymMat step_sym = resym(step);
      record(psd_dominates(P_seq[k + 1], step_sym), P_seq[k + 1].mat() - step_sym.mat(),
             "step inequality P_{k+1} >= sum_j M_j P_k M_j'");
    }
    v.per_step.push_back(StepReport{k, -slack, 0.0, slack});
  }
  v.boundary = v.pass && worst < 0.0;
  // Direction that most nearly (or actually) breaks the dominance: the
  // eigenvector of the smallest eigenvalue of the worst difference.
  const EigResult eg = sym_eig(resym(worst_diff));
  const std::size_t last = eg.vectors.cols() - 1;
  v.worst_direction.resize(eg.vectors.rows());
  for (std::size_t i = 0; i < eg.vectors.rows(); ++i) v.worst_direction[i] = eg.vectors(i, last);
  return v;
}

std::vector<GapEntry> spectral_gap_report(std::span<const StepFactors> weighted_factors) {
  const std::size_t T = weighted_factors.size();
  const MomentSequence seq = pbar_sequence(weighted_factors, T);
  std::vector<GapEntry> out;
  out.reserve(T + 1);
  for (std::size_t k = 0; k <= T; ++k) {
    const SymMat g = gram_adjoint_backward(weighted_factors, 0, k).value;
    double tr_p = 0.0, tr_g = 0.0;
    for (std::size_t i = 0; i < g.dim(); ++i) {
      tr_p += seq.P[k](i, i);
      tr_g += g(i, i);
    }
    const double rel = std::abs(tr_p - tr_g) / (1.0 + std::max(std::abs(tr_p), std::abs(tr_g)));
    if (rel > 1e-10) {
      throw_internal("trace preservation broken at k=" + std::to_string(k) + " (relative gap " +
                     std::to_string(rel) + ")");
    }
    out.push_back(GapEntry{k, eig_max(seq.P[k]), eig_max(g), rel});
  }
  return out;
}

std::vector<GapEntry> spectral_gap_report(const PlantParams& plant, const GainPackage& gp,
                                          const FtSpec& spec, const UncRealization& real) {
  const std::vector<StepFactors> factors = scaled_factor_sequence(plant, gp, real, spec);
  return spectral_gap_report(std::span<const StepFactors>(factors));
}

}  // namespace ftstab
