#include "ftstab/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <utility>

namespace ftstab {

namespace {

bool fits_row_cap(std::size_t depth, std::size_t dim) {
  std::size_t rows = dim;
  for (std::size_t d = 0; d < depth; ++d) {
    if (rows > kStmRowCap / 4) return false;
    rows *= 4;
  }
  return true;
}

// Sum over 2n-row blocks of B_i' W B_i, for a tall stacked matrix.
Mat weighted_gram(const Mat& stacked, const Mat& w) {
  const std::size_t dim = stacked.cols();
  Mat acc(dim, dim);
  for (std::size_t i = 0; i < stacked.rows() / dim; ++i) {
    const Mat bi = stacked.block(i * dim, 0, dim, dim);
    acc += bi.transpose() * w * bi;
  }
  return acc;
}

struct StepEval {
  double value = 0.0;
  // The matrix whose eig_max is the value, in 2n coordinates. The placeholder
  // keeps the struct default-constructible for vector sizing.
  SymMat tested = SymMat::identity(1);
};

Verdict assemble_verdict(std::string method, std::vector<StepEval> evals, double bound,
                         std::vector<std::string> notes) {
  Verdict v;
  v.method = std::move(method);
  v.notes = std::move(notes);
  const double slack = kCriterionTol * (1.0 + bound);
  double worst = std::numeric_limits<double>::infinity();
  v.pass = true;
  for (std::size_t k = 0; k < evals.size(); ++k) {
    const double margin = bound - evals[k].value;
    v.per_step.push_back(StepReport{k, evals[k].value, bound, margin});
    if (margin < worst) {
      worst = margin;
      v.worst_step = k;
    }
    if (margin < -slack) v.pass = false;
  }
  v.boundary = v.pass && worst < 0.0;
  if (v.boundary) v.notes.push_back("worst margin inside the slack band (boundary pass)");
  const EigResult eg = sym_eig(evals[v.worst_step].tested);
  v.worst_direction.resize(eg.vectors.rows());
  for (std::size_t i = 0; i < eg.vectors.rows(); ++i) v.worst_direction[i] = eg.vectors(i, 0);
  return v;
}

SymMat symmetrized(const Mat& m) { return SymMat(0.5 * (m + m.transpose())); }

}  // namespace

Verdict verdict_from_tested(std::string method, std::vector<SymMat> tested, double bound,
                            std::vector<std::string> notes) {
  std::vector<StepEval> evals;
  evals.reserve(tested.size());
  for (SymMat& t : tested) {
    const double v = eig_max(t);
    evals.push_back(StepEval{v, std::move(t)});
  }
  return assemble_verdict(std::move(method), std::move(evals), bound, std::move(notes));
}

double Verdict::worst_margin() const {
  double worst = std::numeric_limits<double>::infinity();
  for (const StepReport& s : per_step) worst = std::min(worst, s.margin);
  return worst;
}

Verdict criterion_gram(GramVariant variant, const PlantParams& plant, const GainPackage& gp,
                       const FtSpec& spec, const UncRealization& real) {
  const std::vector<StepFactors> scaled = scaled_factor_sequence(plant, gp, real, spec);
  const std::size_t dim = 2 * plant.n();
  const bool raw_variant = (variant == GramVariant::b || variant == GramVariant::d);
  std::vector<StepFactors> raw;
  if (raw_variant) raw = factor_sequence(plant, gp, real);
  const Mat inv_root0 = dup_diag(psd_sqrt_pair(spec.R.front()).inv_root.mat());

  std::vector<StepEval> evals(spec.T + 1);
  std::vector<std::string> notes;
  std::size_t first_reduced = spec.T + 1;
  for (std::size_t k = 0; k <= spec.T; ++k) {
    SymMat tested = SymMat::identity(dim);
    if (fits_row_cap(k, dim)) {
      switch (variant) {
        case GramVariant::b: {
          const Stm s = build_phi(raw, 0, k);
          const Mat w = weighted_gram(s.data, dup_diag(spec.R[k].mat()));
          tested = symmetrized(inv_root0 * w * inv_root0);
          break;
        }
        case GramVariant::d: {
          const Stm s = build_psi(raw, 0, k);
          const Mat w = weighted_gram(s.data, dup_diag(spec.R[k].mat()));
          tested = symmetrized(inv_root0 * w * inv_root0);
          break;
        }
        case GramVariant::c:
          tested = gram(build_phi(scaled, 0, k)).value;
          break;
        case GramVariant::e:
          tested = gram(build_psi(scaled, 0, k)).value;
          break;
      }
    } else {
      tested = gram_adjoint_backward(scaled, 0, k).value;
      first_reduced = std::min(first_reduced, k);
    }
    evals[k] = StepEval{eig_max(tested), std::move(tested)};
  }
  if (first_reduced <= spec.T) {
    if (raw_variant) {
      notes.push_back("steps k >= " + std::to_string(first_reduced) +
                      " evaluated via scaled form (explicit stack over the row cap)");
    } else {
      notes.push_back("steps k >= " + std::to_string(first_reduced) +
                      " evaluated by the adjoint recursion (explicit stack over the row cap)");
    }
  }

  const char* names[] = {"gram-b", "gram-c", "gram-d", "gram-e"};
  return assemble_verdict(names[static_cast<int>(variant)], std::move(evals), spec.bound(),
                          std::move(notes));
}

Verdict criterion_f(const PlantParams& plant, const GainPackage& gp, const FtSpec& spec,
                    const UncRealization& real, std::size_t depth_cap) {
  const std::vector<StepFactors> scaled = scaled_factor_sequence(plant, gp, real, spec);
  const std::vector<StepFactors> raw = factor_sequence(plant, gp, real);
  const std::size_t dim = 2 * plant.n();

  // P_0 = Rb_0^{-1}; kept only while the literal big-matrix form is in play.
  const SqrtPair r0 = psd_sqrt_pair(spec.R.front());
  Mat p_big = dup_diag(r0.inv_root.mat() * r0.inv_root.mat());

  std::vector<StepEval> evals(spec.T + 1);
  std::vector<std::string> notes;
  std::size_t first_reduced = spec.T + 1;
  for (std::size_t k = 0; k <= spec.T; ++k) {
    const bool literal = k <= depth_cap && fits_row_cap(k, dim);
    // The 2n-coordinate equivalent is always computed; it carries the
    // reported eigendirection and the beyond-cap value.
    const SymMat reduced = gram_adjoint_backward(scaled, 0, k).value;
    double value;
    if (literal) {
      // W = (I (x) Rb_k^{1/2}) P_k (I (x) Rb_k^{1/2}); the test P_k <=
      // (eps2/eps1)(I (x) Rb_k^{-1}) is eig_max(W) <= eps2/eps1.
      const Mat root_k = dup_diag(psd_sqrt_pair(spec.R[k]).root.mat());
      const std::size_t blocks = p_big.rows() / dim;
      Mat w(p_big.rows(), p_big.rows());
      for (std::size_t i = 0; i < blocks; ++i)
        for (std::size_t j = 0; j < blocks; ++j)
          w.set_block(i * dim, j * dim, root_k * p_big.block(i * dim, j * dim, dim, dim) * root_k);
      value = eig_max(symmetrized(w));
      // Advance the literal recursion while the next step still needs it.
      if (k < spec.T && k + 1 <= depth_cap && fits_row_cap(k + 1, dim)) {
        const StepFactors& f = raw[k];
        const Mat stack = vstack({f.m1, f.m2, f.m3, f.m4});
        Mat next(4 * p_big.rows(), 4 * p_big.rows());
        for (std::size_t i = 0; i < blocks; ++i)
          for (std::size_t j = 0; j < blocks; ++j) {
            const Mat sub = stack * p_big.block(i * dim, j * dim, dim, dim) * stack.transpose();
            next.set_block(i * 4 * dim, j * 4 * dim, sub);
          }
        p_big = std::move(next);
      }
    } else {
      value = eig_max(reduced);
      first_reduced = std::min(first_reduced, k);
    }
    evals[k] = StepEval{value, reduced};
  }
  if (first_reduced <= spec.T) {
    notes.push_back("steps k >= " + std::to_string(first_reduced) +
                    " use the rank-reduced equivalent of the difference form");
  }
  return assemble_verdict("difference-form", std::move(evals), spec.bound(), std::move(notes));
}

Verdict exact_ft_verdict(std::span<const StepFactors> weighted_factors, double bound) {
  if (!(bound > 0.0) || !std::isfinite(bound)) {
    throw_validation("exact verdict: bound must be positive and finite");
  }
  const std::size_t T = weighted_factors.size();
  std::vector<StepEval> evals(T + 1);
  for (std::size_t k = 0; k <= T; ++k) {
    SymMat g = gram_adjoint_backward(weighted_factors, 0, k).value;
    evals[k] = StepEval{eig_max(g), std::move(g)};
  }
  return assemble_verdict("exact", std::move(evals), bound, {});
}

Verdict exact_ft_verdict(const PlantParams& plant, const GainPackage& gp, const FtSpec& spec,
                         const UncRealization& real) {
  const std::vector<StepFactors> scaled = scaled_factor_sequence(plant, gp, real, spec);
  Verdict v = exact_ft_verdict(std::span<const StepFactors>(scaled), spec.bound());
  // Map the worst direction out of the weighted coordinates and size it to
  // the eps1 ellipsoid: x0 = sqrt(eps1) Rb_0^{-1/2} v keeps x0' Rb_0 x0 = eps1.
  const Mat inv_root0 = dup_diag(psd_sqrt_pair(spec.R.front()).inv_root.mat());
  const std::size_t dim = inv_root0.rows();
  Mat unit(dim, 1);
  for (std::size_t i = 0; i < dim; ++i) unit(i, 0) = v.worst_direction[i];
  const Mat mapped = inv_root0 * unit;
  const double s = std::sqrt(spec.eps1);
  for (std::size_t i = 0; i < dim; ++i) v.worst_direction[i] = s * mapped(i, 0);
  v.notes.push_back("worst_direction sized to the eps1 ellipsoid in original coordinates");
  return v;
}

namespace {

// Canonical unit-spectral-norm constant directions for the F channel:
// every single-entry matrix, then the normalized all-ones matrix.
std::vector<Mat> grid_directions(std::size_t q, std::size_t p) {
  std::vector<Mat> dirs;
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      Mat e(q, p);
      e(i, j) = 1.0;
      dirs.push_back(std::move(e));
    }
  if (q * p > 1) {
    Mat ones(q, p);
    for (std::size_t i = 0; i < q; ++i)
      for (std::size_t j = 0; j < p; ++j) ones(i, j) = 1.0 / std::sqrt(double(q * p));
    dirs.push_back(std::move(ones));
  }
  return dirs;
}

Mat clamp_norm(Mat f) {
  const double s = spectral_norm(f);
  if (s > 1.0) f *= 1.0 / s;
  return f;
}

}  // namespace

FalsifyReport falsify_uncertainty(const PlantParams& plant, const GainPackage& gp,
                                  const FtSpec& spec, const FalsifyParams& params) {
  FalsifyReport report;
  const std::size_t q = gp.q();
  const std::size_t p = gp.p();
  if (q == 0 || p == 0 || gp.M.max_abs() == 0.0 || gp.alpha_bar == 0.0) {
    report.summary = "uncertainty channel inactive; no realization can perturb the gains";
    return report;
  }

  const auto evaluate = [&](const UncRealization& real) -> std::optional<Verdict> {
    ++report.evaluations;
    Verdict v = exact_ft_verdict(plant, gp, spec, real);
    if (!v.pass) return v;
    return std::nullopt;
  };
  const auto found = [&](UncRealization real, Verdict v) {
    report.counterexample = Counterexample{std::move(real), std::move(v)};
    report.summary = "counterexample found after " + std::to_string(report.evaluations) +
                     " evaluations at step " +
                     std::to_string(report.counterexample->verdict.worst_step);
  };

  switch (params.strategy) {
    case FalsifyStrategy::constant_grid: {
      for (const Mat& dir : grid_directions(q, p)) {
        for (int g = -10; g <= 10; ++g) {
          if (report.evaluations >= params.budget) break;
          const double f = 0.1 * g;
          UncRealization real = UncRealization::constant(f * dir, spec.T);
          if (auto v = evaluate(real)) {
            found(std::move(real), std::move(*v));
            return report;
          }
        }
      }
      break;
    }
    case FalsifyStrategy::random_sequences: {
      std::mt19937_64 rng(params.seed);
      std::normal_distribution<double> gauss(0.0, 1.0);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      while (report.evaluations < params.budget) {
        std::vector<Mat> fs;
        fs.reserve(spec.T);
        // Mostly boundary-norm draws; every fifth sequence uses interior norms.
        const bool interior = (report.evaluations % 5 == 4);
        for (std::size_t k = 0; k < spec.T; ++k) {
          Mat f(q, p);
          for (std::size_t i = 0; i < q; ++i)
            for (std::size_t j = 0; j < p; ++j) f(i, j) = gauss(rng);
          const double s = spectral_norm(f);
          const double target = interior ? unif(rng) : 1.0;
          if (s > 0.0) f *= target / s;
          fs.push_back(std::move(f));
        }
        UncRealization real(std::move(fs));
        if (auto v = evaluate(real)) {
          found(std::move(real), std::move(*v));
          return report;
        }
      }
      break;
    }
    case FalsifyStrategy::coordinate_ascent: {
      std::vector<Mat> current(spec.T, Mat(q, p));
      double best = exact_ft_verdict(plant, gp, spec, UncRealization(current)).worst_margin();
      ++report.evaluations;
      const std::vector<Mat> dirs = grid_directions(q, p);
      bool improved = true;
      while (improved && report.evaluations < params.budget) {
        improved = false;
        for (std::size_t k = 0; k < spec.T && report.evaluations < params.budget; ++k) {
          for (const Mat& dir : dirs) {
            for (int g = -4; g <= 4 && report.evaluations < params.budget; ++g) {
              const double f = 0.25 * g;
              // Overwrite the touched entries along this direction, keep the rest.
              Mat cand = current[k];
              for (std::size_t i = 0; i < q; ++i)
                for (std::size_t j = 0; j < p; ++j)
                  if (dir(i, j) != 0.0) cand(i, j) = f * dir(i, j);
              std::vector<Mat> trial = current;
              trial[k] = clamp_norm(std::move(cand));
              UncRealization real(trial);
              ++report.evaluations;
              Verdict v = exact_ft_verdict(plant, gp, spec, real);
              if (!v.pass) {
                found(std::move(real), std::move(v));
                return report;
              }
              if (v.worst_margin() < best - 1e-15) {
                best = v.worst_margin();
                current = std::move(trial);
                improved = true;
              }
            }
          }
        }
      }
      break;
    }
  }
  report.summary = "no counterexample in " + std::to_string(report.evaluations) +
                   " evaluations; absence of a counterexample is not a robustness proof";
  return report;
}

}  // namespace ftstab
