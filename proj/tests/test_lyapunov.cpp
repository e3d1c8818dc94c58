#include <doctest.h>

#include <cmath>
#include <vector>

#include "ftstab/lyapunov.hpp"
#include "support.hpp"

using namespace ftstab;
using testkit::Rng;

namespace {

StepFactors crafted_gap_factors() {
  StepFactors f;
  f.m1 = Mat(2, 2);
  f.m2 = Mat::from_rows({{1.0, 0.0}, {0.0, 0.0}});
  f.m3 = Mat(2, 2);
  f.m4 = Mat::from_rows({{0.0, 1.0}, {0.0, 0.0}});
  f.scaled = true;
  return f;
}

}  // namespace

TEST_CASE("pbar sequence starts at the identity and dies with zero dynamics") {
  std::vector<StepFactors> f(3);
  for (StepFactors& s : f) {
    s.m1 = s.m2 = s.m3 = s.m4 = Mat(4, 4);
    s.scaled = true;
  }
  const MomentSequence ms = pbar_sequence(f, 3);
  REQUIRE(ms.P.size() == 4);
  CHECK((ms.P[0].mat() - Mat::identity(4)).max_abs() == 0.0);
  for (std::size_t k = 1; k <= 3; ++k) CHECK(ms.P[k].mat().max_abs() == 0.0);
}

TEST_CASE("pbar degenerates to symmetric matrix powers") {
  Rng rng(501);
  for (int t = 0; t < 10; ++t) {
    std::vector<StepFactors> f(4);
    const Mat a = rng.mat(4, 4, 0.5);
    for (StepFactors& s : f) {
      s.m1 = Mat(4, 4);
      s.m2 = a;
      s.m3 = Mat(4, 4);
      s.m4 = Mat(4, 4);
      s.scaled = true;
    }
    const MomentSequence ms = pbar_sequence(f, 4);
    Mat power = Mat::identity(4);
    for (std::size_t k = 0; k <= 4; ++k) {
      const Mat expect = power * power.transpose();
      CHECK((ms.P[k].mat() - expect).max_abs() <= 1e-12 * (1.0 + expect.max_abs()));
      power = a * power;
    }
  }
}

TEST_CASE("pbar equals the block trace of the explicit outer product") {
  Rng rng(502);
  for (int t = 0; t < 10; ++t) {
    testkit::SysInstance sys = testkit::random_system(rng, 5, false);
    const auto f = scaled_factor_sequence(sys.plant, sys.gp, sys.real, sys.spec);
    const MomentSequence ms = pbar_sequence(f, 5);
    for (std::size_t k = 1; k <= 5; ++k) {
      const Stm phi = build_phi(f, 0, k);
      const Mat outer = phi.data * phi.data.transpose();
      const std::size_t branches = outer.rows() / (2 * sys.plant.n());
      const Mat bt = block_trace(outer, branches);
      CHECK((bt - ms.P[k].mat()).max_abs() <= 1e-10 * (1.0 + bt.max_abs()));
    }
  }
}

TEST_CASE("pbar preserves the exact gram trace") {
  Rng rng(503);
  for (int t = 0; t < 10; ++t) {
    testkit::SysInstance sys = testkit::random_system(rng, 6, true);
    const auto f = scaled_factor_sequence(sys.plant, sys.gp, sys.real, sys.spec);
    const MomentSequence ms = pbar_sequence(f, 6);
    for (std::size_t k = 0; k <= 6; ++k) {
      const Gram g = gram_adjoint_backward(f, 0, k);
      double tr_p = 0.0, tr_g = 0.0;
      for (std::size_t i = 0; i < ms.P[k].dim(); ++i) {
        tr_p += ms.P[k](i, i);
        tr_g += g.value(i, i);
      }
      CHECK(std::abs(tr_p - tr_g) <= 1e-10 * (1.0 + std::abs(tr_g)));
    }
  }
}

TEST_CASE("pbar factored and expanded recursions agree") {
  Rng rng(504);
  for (int t = 0; t < 10; ++t) {
    testkit::SysInstance sys = testkit::random_system(rng, 5, true);
    std::vector<AugmentedStep> steps;
    std::vector<StepFactors> factors;
    for (std::size_t k = 0; k < 5; ++k) {
      AugmentedStep aug = augment_step(sys.plant, sys.gp, sys.real.F[k]);
      aug = scale_step(aug, sys.spec.R[k], sys.spec.R[k + 1]);
      steps.push_back(aug);
      factors.push_back(step_factors(aug, sys.gp.alpha_bar));
    }
    const MomentSequence a = pbar_sequence(factors, 5);
    const MomentSequence b = pbar_sequence_expanded(steps, sys.gp.alpha_bar, 5);
    for (std::size_t k = 0; k <= 5; ++k) {
      CHECK((a.P[k].mat() - b.P[k].mat()).max_abs() <= 1e-12 * (1.0 + a.P[k].mat().max_abs()));
    }
  }
}

TEST_CASE("uniform factor scaling moves pbar by even powers") {
  Rng rng(505);
  testkit::SysInstance sys = testkit::random_system(rng, 4, false);
  const auto f = scaled_factor_sequence(sys.plant, sys.gp, sys.real, sys.spec);
  const double c = 0.7;
  std::vector<StepFactors> scaled = f;
  for (StepFactors& s : scaled) {
    s.m1 *= c;
    s.m2 *= c;
    s.m3 *= c;
    s.m4 *= c;
  }
  const MomentSequence base = pbar_sequence(f, 4);
  const MomentSequence moved = pbar_sequence(scaled, 4);
  for (std::size_t k = 0; k <= 4; ++k) {
    const double factor = std::pow(c, 2.0 * k);
    CHECK((moved.P[k].mat() - factor * base.P[k].mat()).max_abs() <=
          1e-12 * (1.0 + base.P[k].mat().max_abs()));
  }
}

TEST_CASE("moment-bound verdict passes identity dynamics and the example") {
  PlantParams ident(Mat::identity(1), Mat(1, 1), Mat(1, 1), Mat(1, 1), Mat(1, 1), Mat(1, 1));
  GainPackage gp0(Mat(1, 1), Mat(1, 1), Mat(1, 1), Mat(1, 1), Mat(1, 1), 0.0);
  FtSpec spec(1.0, 2.0, 5, std::vector<SymMat>(6, SymMat::identity(1)));
  const Verdict ident_v = pbar_sufficient_verdict(ident, gp0, spec, UncRealization::zero(1, 1, 5));
  CHECK(ident_v.pass);
  for (const StepReport& s : ident_v.per_step) CHECK(s.value == doctest::Approx(1.0));

  const Verdict ex = pbar_sufficient_verdict(testkit::example_plant(), testkit::example_gains(0.5),
                                   testkit::example_spec(), UncRealization::zero(1, 1, 20));
  CHECK(ex.pass);
  CHECK(ex.method.find("pbar") != std::string::npos);
}

TEST_CASE("crafted instance splits the moment bound from the exact criterion") {
  const std::vector<StepFactors> f{crafted_gap_factors()};
  const MomentSequence ms = pbar_sequence(f, 1);
  CHECK(eig_max(ms.P[1]) == doctest::Approx(2.0).epsilon(1e-12));

  const Gram g = gram_adjoint_backward(f, 0, 1);
  CHECK(eig_max(g.value) == doctest::Approx(1.0).epsilon(1e-12));

  // With the budget ratio between the two values, the conservative bound says
  // fail while the authoritative exact criterion passes.
  const Verdict exact = exact_ft_verdict(f, 1.5);
  CHECK(exact.pass);
  CHECK(exact.per_step[1].value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("candidate check accepts the constructive sequence and names violations") {
  Rng rng(506);
  // Contractive factors so the bound verdict passes comfortably.
  std::vector<StepFactors> f(4);
  for (StepFactors& s : f) {
    s.m1 = rng.mat(2, 2, 0.15);
    s.m2 = rng.mat(2, 2, 0.15);
    s.m3 = rng.mat(2, 2, 0.15);
    s.m4 = rng.mat(2, 2, 0.15);
    s.scaled = true;
  }
  FtSpec spec(1.0, 2.0, 4, std::vector<SymMat>(5, SymMat::identity(1)));

  const MomentSequence ms = pbar_sequence(f, 4);
  const Verdict ok = check_certificate_sequence(ms.P, f, spec);
  CHECK(ok.pass);

  std::vector<SymMat> bad = ms.P;
  bad[0] = SymMat::scaled_identity(2, 0.5);
  const Verdict nope = check_certificate_sequence(bad, f, spec);
  CHECK_FALSE(nope.pass);
  bool named = false;
  for (const std::string& n : nope.notes) named = named || n.find("P_0") != std::string::npos;
  CHECK(named);
}

TEST_CASE("candidate check accepts constant identity under zero dynamics") {
  std::vector<StepFactors> f(3);
  for (StepFactors& s : f) {
    s.m1 = s.m2 = s.m3 = s.m4 = Mat(2, 2);
    s.scaled = true;
  }
  FtSpec spec(1.0, 2.0, 3, std::vector<SymMat>(4, SymMat::identity(1)));
  const std::vector<SymMat> P(4, SymMat::identity(2));
  CHECK(check_certificate_sequence(P, f, spec).pass);
}

TEST_CASE("spectral gap report is flat for identity dynamics") {
  std::vector<StepFactors> f(3);
  for (StepFactors& s : f) {
    s.m1 = Mat(2, 2);
    s.m2 = Mat::identity(2);
    s.m3 = Mat(2, 2);
    s.m4 = Mat(2, 2);
    s.scaled = true;
  }
  const auto rep = spectral_gap_report(f);
  REQUIRE(rep.size() == 4);
  for (const GapEntry& e : rep) {
    CHECK(e.pbar_eig == doctest::Approx(e.gram_eig).epsilon(1e-12));
    CHECK(e.trace_rel <= 1e-10);
  }
}

TEST_CASE("spectral gap report shows the crafted divergence") {
  const std::vector<StepFactors> f{crafted_gap_factors()};
  const auto rep = spectral_gap_report(f);
  REQUIRE(rep.size() == 2);
  CHECK(rep[1].pbar_eig == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(rep[1].gram_eig == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep[1].trace_rel <= 1e-10);
}

TEST_CASE("spectral gap traces always agree on random systems") {
  Rng rng(507);
  for (int t = 0; t < 10; ++t) {
    const testkit::SysInstance sys = testkit::random_system(rng, 5, true);
    const auto rep = spectral_gap_report(sys.plant, sys.gp, sys.spec, sys.real);
    for (const GapEntry& e : rep) CHECK(e.trace_rel <= 1e-10);
  }
}
