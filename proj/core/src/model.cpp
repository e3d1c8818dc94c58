#include "ftstab/model.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace ftstab {

namespace {

void require_shape(const Mat& m, std::size_t rows, std::size_t cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw_validation(std::string(what) + " must be " + std::to_string(rows) + "x" +
                     std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()));
  }
}

// Admissibility ||F||_2 <= 1, with a hair of slack for rounding.
void require_admissible(const Mat& f, const char* what) {
  const double norm = spectral_norm(f);
  if (norm > 1.0 + 1e-12) {
    throw_validation(std::string(what) + " spectral norm " + std::to_string(norm) +
                     " exceeds the admissible bound 1");
  }
}

}  // namespace

PlantParams::PlantParams(Mat A1_, Mat A2_, Mat B_, Mat C1_, Mat C2_, Mat D_)
    : A1(std::move(A1_)),
      A2(std::move(A2_)),
      B(std::move(B_)),
      C1(std::move(C1_)),
      C2(std::move(C2_)),
      D(std::move(D_)) {
  const std::size_t nn = A1.rows();
  if (nn == 0 || A1.cols() != nn) {
    throw_validation("plant A1 must be square and nonempty");
  }
  require_shape(A2, nn, nn, "plant A2");
  require_shape(C1, nn, nn, "plant C1");
  require_shape(C2, nn, nn, "plant C2");
  if (B.rows() != nn || B.cols() == 0) {
    throw_validation("plant B must be " + std::to_string(nn) + "x m with m >= 1, got " +
                     std::to_string(B.rows()) + "x" + std::to_string(B.cols()));
  }
  require_shape(D, nn, B.cols(), "plant D");
}

GainPackage::GainPackage(Mat K1_, Mat K2_, Mat M_, Mat N1_, Mat N2_, double alpha_bar_)
    : K1(std::move(K1_)),
      K2(std::move(K2_)),
      M(std::move(M_)),
      N1(std::move(N1_)),
      N2(std::move(N2_)),
      alpha_bar(alpha_bar_) {
  const std::size_t mm = K1.rows();
  const std::size_t nn = K1.cols();
  if (mm == 0 || nn == 0) throw_validation("gains K1 must be nonempty (m x n)");
  require_shape(K2, mm, nn, "gain K2");
  if (M.rows() != mm || M.cols() == 0) {
    throw_validation("channel M must be " + std::to_string(mm) + "x q with q >= 1, got " +
                     std::to_string(M.rows()) + "x" + std::to_string(M.cols()));
  }
  if (N1.rows() == 0 || N1.cols() != nn) {
    throw_validation("channel N1 must be p x " + std::to_string(nn) + " with p >= 1, got " +
                     std::to_string(N1.rows()) + "x" + std::to_string(N1.cols()));
  }
  require_shape(N2, N1.rows(), nn, "channel N2");
  if (!(alpha_bar >= 0.0 && alpha_bar <= 1.0)) {
    throw_validation("alpha_bar must lie in [0,1], got " + std::to_string(alpha_bar));
  }
}

GainPackage::GainPackage(Mat K1_, Mat K2_, const UncChannel& ch)
    : GainPackage(std::move(K1_), std::move(K2_), ch.M, ch.N1, ch.N2, ch.alpha_bar) {}

FtSpec::FtSpec(double eps1_, double eps2_, std::size_t T_, std::vector<SymMat> R_)
    : eps1(eps1_), eps2(eps2_), T(T_), R(std::move(R_)) {
  if (!(std::isfinite(eps1) && std::isfinite(eps2)) || eps1 <= 0.0 || eps1 > eps2) {
    throw_validation("need 0 < eps1 <= eps2, got eps1=" + std::to_string(eps1) +
                     " eps2=" + std::to_string(eps2));
  }
  if (T == 0) throw_validation("horizon T must be >= 1");
  if (R.size() != T + 1) {
    throw_validation("R sequence has " + std::to_string(R.size()) + " entries, need T+1 = " +
                     std::to_string(T + 1));
  }
  const std::size_t nn = R.front().dim();
  if (nn == 0) throw_validation("R matrices must be nonempty");
  for (std::size_t k = 0; k < R.size(); ++k) {
    if (R[k].dim() != nn) {
      throw_validation("R[" + std::to_string(k) + "] dim " + std::to_string(R[k].dim()) +
                       " differs from R[0] dim " + std::to_string(nn));
    }
    const EigResult eig = sym_eig(R[k]);
    if (eig.values.back() <= 1e-12 * eig.values.front()) {
      throw_validation("R[" + std::to_string(k) + "] is not positive definite (eig_min " +
                       std::to_string(eig.values.back()) + ")");
    }
  }
}

std::vector<SymMat> exp_decay_weights(std::size_t n, std::size_t T, double scale, double rate) {
  if (n == 0) throw_validation("exp_decay_weights: n must be >= 1");
  if (!(std::isfinite(scale) && scale > 0.0) || !std::isfinite(rate)) {
    throw_validation("exp_decay_weights: need finite rate and scale > 0");
  }
  std::vector<SymMat> out;
  out.reserve(T + 1);
  for (std::size_t k = 0; k <= T; ++k) {
    out.push_back(SymMat::scaled_identity(n, scale * std::exp(-rate * static_cast<double>(k))));
  }
  return out;
}

UncRealization::UncRealization(std::vector<Mat> F_) : F(std::move(F_)) {
  if (F.empty()) throw_validation("uncertainty realization must cover at least one step");
  const std::size_t q = F.front().rows();
  const std::size_t p = F.front().cols();
  for (std::size_t k = 0; k < F.size(); ++k) {
    if (F[k].rows() != q || F[k].cols() != p) {
      throw_validation("F[" + std::to_string(k) + "] shape differs from F[0]");
    }
    require_admissible(F[k], ("F[" + std::to_string(k) + "]").c_str());
  }
}

UncRealization UncRealization::constant(const Mat& F, std::size_t T) {
  return UncRealization(std::vector<Mat>(T, F));
}

UncRealization UncRealization::zero(std::size_t q, std::size_t p, std::size_t T) {
  return UncRealization(std::vector<Mat>(T, Mat(q, p)));
}

DeltaGains delta_gains(const GainPackage& gp, const Mat& F) {
  if (F.rows() != gp.q() || F.cols() != gp.p()) {
    throw_shape("delta_gains: F is " + std::to_string(F.rows()) + "x" + std::to_string(F.cols()) +
                ", channel needs " + std::to_string(gp.q()) + "x" + std::to_string(gp.p()));
  }
  require_admissible(F, "delta_gains: F");
  const Mat mf = gp.M * F;
  return DeltaGains{mf * gp.N1, mf * gp.N2};
}

namespace {

void require_compatible(const PlantParams& plant, const GainPackage& gp) {
  if (gp.K1.rows() != plant.m() || gp.K1.cols() != plant.n()) {
    throw_shape("gains are " + std::to_string(gp.K1.rows()) + "x" + std::to_string(gp.K1.cols()) +
                ", plant needs " + std::to_string(plant.m()) + "x" + std::to_string(plant.n()));
  }
}

}  // namespace

AugmentedStep augment_step(const PlantParams& plant, const GainPackage& gp, const Mat& F) {
  require_compatible(plant, gp);
  const std::size_t n = plant.n();
  const auto [dk1, dk2] = delta_gains(gp, F);
  const double ab = gp.alpha_bar;

  const Mat b_ds = plant.B * (dk1 + dk2);
  const Mat top_left = plant.A1 + plant.A2 + plant.B * (gp.K1 + gp.K2) + ab * b_ds;
  const Mat lower_right = plant.A1 + plant.B * gp.K1;

  AugmentedStep aug;
  aug.A1 = Mat(2 * n, 2 * n);
  aug.A1.set_block(0, 0, top_left);
  aug.A1.set_block(n, 0, -ab * b_ds);
  aug.A1.set_block(n, n, lower_right);

  aug.A2 = Mat(2 * n, 2 * n);
  aug.A2.set_block(n, 0, b_ds);
  aug.A2.set_block(n, n, plant.B * dk1);

  aug.C1 = Mat(2 * n, 2 * n);
  aug.C1.set_block(n, 0, plant.C2 + plant.C1 + plant.D * (gp.K2 + gp.K1));
  aug.C1.set_block(n, n, plant.C1 + plant.D * gp.K1);

  aug.C2 = Mat(2 * n, 2 * n);
  aug.C2.set_block(n, 0, plant.D * (dk2 + dk1));
  aug.C2.set_block(n, n, plant.D * dk1);

  return aug;
}

Mat dup_diag(const Mat& s) {
  if (s.rows() != s.cols()) throw_shape("dup_diag: input must be square");
  const std::size_t n = s.rows();
  Mat out(2 * n, 2 * n);
  out.set_block(0, 0, s);
  out.set_block(n, n, s);
  return out;
}

AugmentedStep scale_step(const AugmentedStep& aug, const SymMat& R_from, const SymMat& R_to) {
  const std::size_t dim2n = aug.A1.rows();
  if (R_from.dim() * 2 != dim2n || R_to.dim() * 2 != dim2n) {
    throw_shape("scale_step: weights of dim " + std::to_string(R_from.dim()) + "/" +
                std::to_string(R_to.dim()) + " against augmented blocks of dim " +
                std::to_string(dim2n));
  }
  const Mat left = dup_diag(psd_sqrt_pair(R_to).root.mat());
  const Mat right = dup_diag(psd_sqrt_pair(R_from).inv_root.mat());
  AugmentedStep out;
  out.A1 = left * aug.A1 * right;
  out.A2 = left * aug.A2 * right;
  out.C1 = left * aug.C1 * right;
  out.C2 = left * aug.C2 * right;
  out.scaled = true;
  return out;
}

StepFactors step_factors(const AugmentedStep& aug, double alpha_bar) {
  if (!(alpha_bar >= 0.0 && alpha_bar <= 1.0)) {
    throw_validation("step_factors: alpha_bar must lie in [0,1]");
  }
  const double sa = std::sqrt(alpha_bar);
  const double sb = std::sqrt(1.0 - alpha_bar);
  StepFactors f;
  f.m1 = sa * (aug.A1 + aug.A2);
  f.m2 = sb * aug.A1;
  f.m3 = sa * (aug.C1 + aug.C2);
  f.m4 = sb * aug.C1;
  f.scaled = aug.scaled;
  return f;
}

StepFactors scale_factors(const StepFactors& f, const SymMat& R_from, const SymMat& R_to) {
  const std::size_t dim2n = f.m1.rows();
  if (R_from.dim() * 2 != dim2n || R_to.dim() * 2 != dim2n) {
    throw_shape("scale_factors: weight dims do not match the factors");
  }
  const Mat left = dup_diag(psd_sqrt_pair(R_to).root.mat());
  const Mat right = dup_diag(psd_sqrt_pair(R_from).inv_root.mat());
  StepFactors out;
  out.m1 = left * f.m1 * right;
  out.m2 = left * f.m2 * right;
  out.m3 = left * f.m3 * right;
  out.m4 = left * f.m4 * right;
  out.scaled = true;
  return out;
}

Mat mean_matrix(const PlantParams& plant, const GainPackage& gp, const Mat& F) {
  require_compatible(plant, gp);
  const auto [dk1, dk2] = delta_gains(gp, F);
  return plant.A1 + plant.A2 + plant.B * (gp.K1 + gp.K2) + gp.alpha_bar * (plant.B * (dk1 + dk2));
}

namespace {

void require_realization(const PlantParams& plant, const GainPackage& gp,
                         const UncRealization& real) {
  if (real.F.front().rows() != gp.q() || real.F.front().cols() != gp.p()) {
    throw_shape("realization F blocks are " + std::to_string(real.F.front().rows()) + "x" +
                std::to_string(real.F.front().cols()) + ", channel needs " +
                std::to_string(gp.q()) + "x" + std::to_string(gp.p()));
  }
  require_compatible(plant, gp);
}

}  // namespace

std::vector<StepFactors> factor_sequence(const PlantParams& plant, const GainPackage& gp,
                                         const UncRealization& real) {
  require_realization(plant, gp, real);
  std::vector<StepFactors> out;
  out.reserve(real.steps());
  for (const Mat& f : real.F) {
    out.push_back(step_factors(augment_step(plant, gp, f), gp.alpha_bar));
  }
  return out;
}

std::vector<StepFactors> scaled_factor_sequence(const PlantParams& plant, const GainPackage& gp,
                                                const UncRealization& real, const FtSpec& spec) {
  require_realization(plant, gp, real);
  if (real.steps() != spec.T) {
    throw_shape("realization covers " + std::to_string(real.steps()) + " steps, spec horizon is " +
                std::to_string(spec.T));
  }
  if (spec.n() != plant.n()) {
    throw_shape("spec weights of dim " + std::to_string(spec.n()) + " against plant of dim " +
                std::to_string(plant.n()));
  }
  std::vector<StepFactors> out;
  out.reserve(spec.T);
  for (std::size_t k = 0; k < spec.T; ++k) {
    const AugmentedStep aug = augment_step(plant, gp, real.F[k]);
    out.push_back(step_factors(scale_step(aug, spec.R[k], spec.R[k + 1]), gp.alpha_bar));
  }
  return out;
}

}  // namespace ftstab
