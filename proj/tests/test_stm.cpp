#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ftstab/stm.hpp"
#include "support.hpp"

using namespace ftstab;
using testkit::Rng;

namespace {

std::vector<StepFactors> raw_factors(testkit::SysInstance& sys) {
  return factor_sequence(sys.plant, sys.gp, sys.real);
}

}  // namespace

TEST_CASE("psi at zero depth is the identity") {
  Rng rng(301);
  testkit::SysInstance sys = testkit::random_system(rng, 3, false);
  const auto f = raw_factors(sys);
  const Stm s = build_psi(f, 1, 1);
  CHECK(s.data == Mat::identity(2 * sys.plant.n()));
}

TEST_CASE("psi at depth one stacks the four factors") {
  Rng rng(302);
  testkit::SysInstance sys = testkit::random_system(rng, 3, false);
  const auto f = raw_factors(sys);
  const Stm s = build_psi(f, 0, 1);
  const Mat expect = vstack({f[0].m1, f[0].m2, f[0].m3, f[0].m4});
  CHECK((s.data - expect).max_abs() == 0.0);
}

TEST_CASE("psi equals varphi elementwise on random time-varying systems") {
  Rng rng(303);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    testkit::SysInstance sys = testkit::random_system(rng, 2 + rng.pick(4), false);
    const auto f = raw_factors(sys);
    const Stm psi = build_psi(f, 0, f.size());
    const Stm varphi = build_varphi(f, 0, f.size());
    worst = std::max(worst, (psi.data - varphi.data).max_abs());
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("varphi two-step unrolling on a time-invariant system") {
  Rng rng(304);
  testkit::SysInstance sys = testkit::random_system(rng, 2, false);
  // Freeze the uncertainty so both steps share the same factors.
  std::vector<Mat> F(2, Mat(sys.gp.q(), sys.gp.p()));
  const UncRealization frozen(F);
  const auto f = factor_sequence(sys.plant, sys.gp, frozen);
  const Mat stack = vstack({f[0].m1, f[0].m2, f[0].m3, f[0].m4});
  const Mat expect = kron(Mat::identity(4), stack) * stack;
  const Stm v = build_varphi(f, 0, 2);
  CHECK((v.data - expect).max_abs() <= 1e-13);
}

TEST_CASE("phi at depth one equals psi") {
  Rng rng(305);
  testkit::SysInstance sys = testkit::random_system(rng, 2, false);
  const auto f = raw_factors(sys);
  CHECK((build_phi(f, 0, 1).data - build_psi(f, 0, 1).data).max_abs() == 0.0);
}

TEST_CASE("phi and psi differ elementwise but share the Gram") {
  Rng rng(306);
  bool differed = false;
  for (int t = 0; t < 20; ++t) {
    testkit::SysInstance sys = testkit::random_system(rng, 3, false);
    const auto f = raw_factors(sys);
    const Stm phi = build_phi(f, 0, 3);
    const Stm psi = build_psi(f, 0, 3);
    differed = differed || (phi.data - psi.data).max_abs() > 1e-9;
    const Gram gp_ = gram(phi), gs = gram(psi);
    CHECK((gp_.value.mat() - gs.value.mat()).max_abs() <= 1e-10);
  }
  CHECK(differed);
}

TEST_CASE("phi rows are a block permutation of psi rows") {
  Rng rng(307);
  testkit::SysInstance sys = testkit::random_system(rng, 2, false);
  while (sys.plant.n() != 1) sys = testkit::random_system(rng, 2, false);
  const auto f = raw_factors(sys);
  auto sorted_rows = [](const Stm& s) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < s.data.rows(); ++i) {
      std::vector<double> row;
      for (std::size_t j = 0; j < s.data.cols(); ++j) row.push_back(std::abs(s.data(i, j)));
      rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end());
    return rows;
  };
  CHECK(sorted_rows(build_phi(f, 0, 2)) == sorted_rows(build_psi(f, 0, 2)));
}

TEST_CASE("gram of the identity Stm is the identity") {
  Rng rng(308);
  testkit::SysInstance sys = testkit::random_system(rng, 2, false);
  const auto f = raw_factors(sys);
  const Gram g = gram(build_psi(f, 0, 0));
  CHECK((g.value.mat() - Mat::identity(2 * sys.plant.n())).max_abs() <= 1e-15);
}

TEST_CASE("depth-one gram is the factor quadratic sum") {
  Rng rng(309);
  testkit::SysInstance sys = testkit::random_system(rng, 2, false);
  const auto f = raw_factors(sys);
  const Gram g = gram(build_psi(f, 0, 1));
  Mat expect = f[0].m1.transpose() * f[0].m1;
  expect += f[0].m2.transpose() * f[0].m2;
  expect += f[0].m3.transpose() * f[0].m3;
  expect += f[0].m4.transpose() * f[0].m4;
  CHECK((g.value.mat() - expect).max_abs() <= 1e-13);
}

TEST_CASE("backward adjoint gram matches the explicit build at depth five") {
  Rng rng(310);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    testkit::SysInstance sys = testkit::random_system(rng, 5, false);
    const auto f = raw_factors(sys);
    const Gram exact = gram(build_psi(f, 0, 5));
    const Gram adj = gram_adjoint_backward(f, 0, 5);
    worst = std::max(worst, (exact.value.mat() - adj.value.mat()).max_abs());
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("backward adjoint gram at zero depth is the identity") {
  Rng rng(311);
  testkit::SysInstance sys = testkit::random_system(rng, 2, false);
  const auto f = raw_factors(sys);
  const Gram g = gram_adjoint_backward(f, 2, 2);
  CHECK((g.value.mat() - Mat::identity(2 * sys.plant.n())).max_abs() == 0.0);
}

TEST_CASE("adjoint gram degenerates to matrix powers") {
  Rng rng(312);
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 1 + rng.pick(2);
    // alpha = 0 with no noise feedthrough: only the A-block factor survives.
    const PlantParams plant(rng.mat(n, n, 0.6), Mat(n, n), rng.mat(n, 1, 0.6), Mat(n, n),
                            Mat(n, n), Mat(n, 1));
    const GainPackage gp(rng.mat(1, n, 0.4), Mat(1, n), Mat(1, 1), Mat(1, n), Mat(1, n), 0.0);
    const UncRealization real = UncRealization::zero(1, 1, 4);
    const auto f = factor_sequence(plant, gp, real);
    const Gram g = gram_adjoint_backward(f, 0, 4);
    Mat power = Mat::identity(2 * n);
    for (int k = 0; k < 4; ++k) power = f[0].m2 * power;
    const Mat expect = power.transpose() * power;
    CHECK((g.value.mat() - expect).max_abs() <= 1e-10 * (1.0 + expect.max_abs()));
  }
}

TEST_CASE("closed-loop example gram stays within the boundedness ratio") {
  const PlantParams plant = testkit::example_plant();
  const GainPackage gp = testkit::example_gains(0.5);
  const FtSpec spec = testkit::example_spec();
  const UncRealization real = UncRealization::zero(1, 1, 20);
  const auto f = scaled_factor_sequence(plant, gp, real, spec);
  const Gram g = gram_adjoint_backward(f, 0, 20);
  CHECK(eig_max(g.value) <= 2.0);
  CHECK(eig_min(g.value) >= 0.0);
}

TEST_CASE("weighting identity residual vanishes for identity weights") {
  Rng rng(313);
  testkit::SysInstance sys = testkit::random_system(rng, 3, false);
  const auto f = raw_factors(sys);
  std::vector<SymMat> R(4, SymMat::identity(sys.plant.n()));
  CHECK(weighted_identity_residual(StmFlavor::psi, f, R, 0, 3) <= 1e-12);
}

TEST_CASE("weighting identity holds for decaying scalar weights at depth four") {
  Rng rng(314);
  for (int t = 0; t < 10; ++t) {
    testkit::SysInstance sys = testkit::random_system(rng, 4, false);
    while (sys.plant.n() != 1) sys = testkit::random_system(rng, 4, false);
    const auto f = raw_factors(sys);
    const auto R = exp_decay_weights(1, 4, 1.0, 0.1);
    CHECK(weighted_identity_residual(StmFlavor::psi, f, R, 0, 4) <= 1e-10);
    CHECK(weighted_identity_residual(StmFlavor::phi, f, R, 0, 4) <= 1e-10);
  }
}

TEST_CASE("weighting identity holds for random PD weights") {
  Rng rng(315);
  for (int t = 0; t < 20; ++t) {
    testkit::SysInstance sys = testkit::random_system(rng, 3, true);
    const auto f = raw_factors(sys);
    CHECK(weighted_identity_residual(StmFlavor::psi, f, sys.spec.R, 0, 3) <= 1e-9);
  }
}

TEST_CASE("explicit builds refuse to exceed the row cap") {
  Rng rng(316);
  testkit::SysInstance sys = testkit::random_system(rng, 15, false);
  const auto f = raw_factors(sys);
  CHECK_THROWS_AS((void)build_psi(f, 0, 15), Error);
  try {
    (void)build_psi(f, 0, 15);
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::size_limit);
  }
}
