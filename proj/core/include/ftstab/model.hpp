#pragma once

#include <span>
#include <vector>

#include "ftstab/matkit.hpp"

namespace ftstab {

// Plant of the mean-field state recursion
//   x_{k+1} = A1 x_k + A2 Ex_k + B u_k + (C1 x_k + C2 Ex_k + D u_k) w_k
// where Ex_k is the expectation of the state and w_k is scalar white noise.
struct PlantParams {
  Mat A1, A2, B, C1, C2, D;

  PlantParams(Mat A1_, Mat A2_, Mat B_, Mat C1_, Mat C2_, Mat D_);

  std::size_t n() const noexcept { return A1.rows(); }
  std::size_t m() const noexcept { return B.cols(); }
};

// Gain-perturbation channel: [dK1 dK2] = M F [N1 N2] with ||F||_2 <= 1,
// switched on per step by an independent Bernoulli(alpha_bar) draw.
struct UncChannel {
  Mat M;       // m x q
  Mat N1, N2;  // p x n
  double alpha_bar = 0.0;
};

// Feedback u_k = (K1 + a_k dK1_k) x_k + (K2 + a_k dK2_k) Ex_k.
struct GainPackage {
  Mat K1, K2;  // m x n
  Mat M;       // m x q
  Mat N1, N2;  // p x n
  double alpha_bar = 0.0;

  GainPackage(Mat K1_, Mat K2_, Mat M_, Mat N1_, Mat N2_, double alpha_bar_);
  GainPackage(Mat K1_, Mat K2_, const UncChannel& ch);

  std::size_t q() const noexcept { return M.cols(); }
  std::size_t p() const noexcept { return N1.rows(); }
  UncChannel channel() const { return UncChannel{M, N1, N2, alpha_bar}; }
};

// Boundedness target: x0'R_0 x0 <= eps1 must imply E(x_k'R_k x_k) <= eps2
// for every k in 0..T.
struct FtSpec {
  double eps1 = 0.0;
  double eps2 = 0.0;
  std::size_t T = 0;
  std::vector<SymMat> R;  // length T+1, each n x n positive definite

  FtSpec(double eps1_, double eps2_, std::size_t T_, std::vector<SymMat> R_);

  double bound() const noexcept { return eps2 / eps1; }
  std::size_t n() const noexcept { return R.front().dim(); }
};

// The builtin weight family R_k = scale * exp(-rate * k) * I.
std::vector<SymMat> exp_decay_weights(std::size_t n, std::size_t T, double scale, double rate);

// A concrete admissible uncertainty sequence F_0..F_{T-1}.
struct UncRealization {
  std::vector<Mat> F;

  explicit UncRealization(std::vector<Mat> F_);
  static UncRealization constant(const Mat& F, std::size_t T);
  static UncRealization zero(std::size_t q, std::size_t p, std::size_t T);

  std::size_t steps() const noexcept { return F.size(); }
};

struct DeltaGains {
  Mat dK1, dK2;  // each m x n
};

DeltaGains delta_gains(const GainPackage& gp, const Mat& F);

// One step of the mean/deviation augmentation x~ = [Ex; x - Ex], four
// 2n x 2n blocks. C1_aug never depends on F; C-blocks have zero top rows.
struct AugmentedStep {
  Mat A1, A2, C1, C2;
  bool scaled = false;
};

AugmentedStep augment_step(const PlantParams& plant, const GainPackage& gp, const Mat& F);

// Conjugates all four blocks by the weighting pair: X -> Rb_to^{1/2} X Rb_from^{-1/2}
// with Rb = diag(R, R). R_from belongs to the step's source time k, R_to to k+1.
AugmentedStep scale_step(const AugmentedStep& aug, const SymMat& R_from, const SymMat& R_to);

// The four matrices whose quadratic sum advances the second moment one step:
//   M1 = sqrt(a)(A1+A2), M2 = sqrt(1-a)A1, M3 = sqrt(a)(C1+C2), M4 = sqrt(1-a)C1.
struct StepFactors {
  Mat m1, m2, m3, m4;
  bool scaled = false;
};

StepFactors step_factors(const AugmentedStep& aug, double alpha_bar);
StepFactors scale_factors(const StepFactors& f, const SymMat& R_from, const SymMat& R_to);

// The matrix driving Ex_{k+1} = [A1+A2+B(K1+K2)+aB(dK1+dK2)] Ex_k; equals the
// top-left block of the augmented A1.
Mat mean_matrix(const PlantParams& plant, const GainPackage& gp, const Mat& F);

// Per-step factor sequences for k = 0..T-1 (T = real.steps()).
std::vector<StepFactors> factor_sequence(const PlantParams& plant, const GainPackage& gp,
                                         const UncRealization& real);
std::vector<StepFactors> scaled_factor_sequence(const PlantParams& plant, const GainPackage& gp,
                                                const UncRealization& real, const FtSpec& spec);

// diag(S, S), the weight matrix of the augmented state.
Mat dup_diag(const Mat& s);

}  // namespace ftstab
