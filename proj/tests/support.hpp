#pragma once

// Shared fixtures: a seeded matrix sampler and the scalar stock-model
// parameters the bundled example config uses.

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "ftstab/matkit.hpp"
#include "ftstab/model.hpp"

namespace testkit {

using namespace ftstab;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double normal() { return gauss_(eng_); }
  double unif() { return unif_(eng_); }
  std::size_t pick(std::size_t n) { return eng_() % n; }

  Mat mat(std::size_t r, std::size_t c, double scale) {
    Mat m(r, c);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) m(i, j) = scale * normal();
    return m;
  }

  Mat admissible_f(std::size_t q, std::size_t p) {
    Mat f = mat(q, p, 0.8);
    const double nrm = spectral_norm(f);
    if (nrm > 1.0) f *= 1.0 / nrm;
    return f;
  }

  SymMat pos_def(std::size_t n) {
    const Mat g = mat(n, n, 0.6);
    Mat s = g.transpose() * g;
    for (std::size_t i = 0; i < n; ++i) s(i, i) += 0.4 + unif();
    return SymMat(s);
  }

 private:
  std::mt19937_64 eng_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

struct SysInstance {
  PlantParams plant;
  GainPackage gp;
  FtSpec spec;
  UncRealization real;
};

// Random plant + gains + admissible F sequence, sized to keep explicit
// stacked builds cheap. random_R switches between the decaying identity
// family and fully random positive definite weights.
inline SysInstance random_system(Rng& rng, std::size_t T, bool random_R) {
  const std::size_t n = 1 + rng.pick(2);
  const std::size_t m = 1 + rng.pick(2);
  const double ps = 0.7 / std::sqrt(static_cast<double>(n));
  PlantParams plant(rng.mat(n, n, ps), rng.mat(n, n, 0.4 * ps), rng.mat(n, m, ps),
                    rng.mat(n, n, 0.5 * ps), rng.mat(n, n, 0.3 * ps), rng.mat(n, m, 0.4 * ps));
  const std::size_t q = 1 + rng.pick(n);
  const std::size_t p = 1 + rng.pick(n);
  const double alphas[] = {0.0, 0.37, 1.0};
  GainPackage gp(rng.mat(m, n, 0.5), rng.mat(m, n, 0.4), rng.mat(m, q, 0.3),
                 rng.mat(p, n, 0.3), rng.mat(p, n, 0.3), alphas[rng.pick(3)]);
  std::vector<SymMat> R;
  if (random_R) {
    for (std::size_t k = 0; k <= T; ++k) R.push_back(rng.pos_def(n));
  } else {
    R = exp_decay_weights(n, T, 1.0, 0.1);
  }
  FtSpec spec(1.0, 2.0, T, std::move(R));
  std::vector<Mat> F;
  for (std::size_t k = 0; k < T; ++k) F.push_back(rng.admissible_f(q, p));
  return SysInstance{std::move(plant), std::move(gp), std::move(spec),
                     UncRealization(std::move(F))};
}

inline Mat m1x1(double v) { return Mat::from_rows({{v}}); }

// The scalar stock-model numbers from configs/example.json.
inline PlantParams example_plant() {
  return PlantParams(m1x1(1.1833), m1x1(1.2741), m1x1(-1.3517), m1x1(0.8188), m1x1(-0.1491),
                     m1x1(-0.54));
}

inline GainPackage example_gains(double alpha_bar) {
  return GainPackage(m1x1(0.9627), m1x1(0.7737), m1x1(-0.1005), m1x1(-0.6177), m1x1(0.4285),
                     alpha_bar);
}

inline GainPackage open_loop_gains() {
  return GainPackage(m1x1(0.0), m1x1(0.0), m1x1(0.0), m1x1(-0.6177), m1x1(0.4285), 0.5);
}

inline FtSpec example_spec() { return FtSpec(10.0, 20.0, 20, exp_decay_weights(1, 20, 1.0, 0.1)); }

inline UncChannel example_channel(double alpha_bar) {
  return UncChannel{m1x1(-0.1005), m1x1(-0.6177), m1x1(0.4285), alpha_bar};
}

}  // namespace testkit
