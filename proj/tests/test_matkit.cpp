#include <doctest.h>

#include <cmath>
#include <vector>

#include "ftstab/matkit.hpp"
#include "support.hpp"

using namespace ftstab;
using testkit::Rng;

TEST_CASE("kron of identities is the identity") {
  const Mat r = kron(Mat::identity(2), Mat::identity(3));
  CHECK(r == Mat::identity(6));
}

TEST_CASE("kron matches the entrywise definition") {
  const Mat r = kron(Mat::from_rows({{1.0, 2.0}}), Mat::from_rows({{0.0, 1.0}}));
  CHECK(r == Mat::from_rows({{0.0, 1.0, 0.0, 2.0}}));
}

TEST_CASE("kron mixed product identity on random quadruples") {
  Rng rng(101);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t a = 1 + rng.pick(3), b = 1 + rng.pick(3), c = 1 + rng.pick(3),
                      d = 1 + rng.pick(3), e = 1 + rng.pick(3), f = 1 + rng.pick(3);
    const Mat A = rng.mat(a, b, 1.0), H = rng.mat(b, c, 1.0);
    const Mat G = rng.mat(d, e, 1.0), M = rng.mat(e, f, 1.0);
    const Mat lhs = kron(A, G) * kron(H, M);
    const Mat rhs = kron(A * H, G * M);
    worst = std::max(worst, (lhs - rhs).max_abs());
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("kron rejects results beyond the entry cap") {
  const Mat big(4096, 4096);
  CHECK_THROWS_AS((void)kron(big, big), Error);
  try {
    (void)kron(big, big);
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::size_limit);
  }
}

TEST_CASE("vstack stacks in order and keeps width") {
  const Mat r = vstack({Mat::identity(2), Mat::identity(2)});
  CHECK(r.rows() == 4);
  CHECK(r.cols() == 2);
  CHECK(r(0, 0) == 1.0);
  CHECK(r(2, 0) == 1.0);
  CHECK(r(3, 1) == 1.0);
}

TEST_CASE("vstack rejects empty input and width mismatch") {
  CHECK_THROWS_AS((void)vstack(std::initializer_list<Mat>{}), Error);
  CHECK_THROWS_AS((void)vstack({Mat(2, 2), Mat(2, 3)}), Error);
}

TEST_CASE("block_trace of identity blocks") {
  const Mat r = block_trace(Mat::identity(6), 3);
  CHECK(r == 3.0 * Mat::identity(2));
}

TEST_CASE("block_trace commutes with transposition") {
  Rng rng(102);
  for (int t = 0; t < 50; ++t) {
    const Mat a = rng.mat(6, 6, 1.0);
    const Mat lhs = block_trace(a.transpose(), 3);
    const Mat rhs = block_trace(a, 3).transpose();
    CHECK((lhs - rhs).max_abs() == 0.0);
  }
}

TEST_CASE("block_trace preserves the scalar trace") {
  Rng rng(103);
  for (int t = 0; t < 200; ++t) {
    const std::size_t r = 1 + rng.pick(6);
    const std::size_t s = 1 + rng.pick(4);
    const Mat a = rng.mat(r * s, r * s, 1.0);
    double tr_a = 0.0, tr_b = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) tr_a += a(i, i);
    const Mat bt = block_trace(a, r);
    for (std::size_t i = 0; i < bt.rows(); ++i) tr_b += bt(i, i);
    CHECK(std::abs(tr_a - tr_b) <= 1e-13 * (1.0 + std::abs(tr_a)));
  }
}

// Tr((I_r (x) [C1;..;Cn]) A (I_r (x) [D1;..;Dn])') = sum_i Ci Tr(A) Di'.
TEST_CASE("block_trace conjugation identity") {
  Rng rng(104);
  for (int t = 0; t < 50; ++t) {
    const std::size_t r = 2, nblocks = 2, s = 2;
    const Mat a = rng.mat(r * s, r * s, 1.0);
    std::vector<Mat> c, d;
    for (std::size_t i = 0; i < nblocks; ++i) {
      c.push_back(rng.mat(s, s, 1.0));
      d.push_back(rng.mat(s, s, 1.0));
    }
    const Mat cstack = vstack({c[0], c[1]});
    const Mat dstack = vstack({d[0], d[1]});
    const Mat theta = kron(Mat::identity(r), cstack) * a * kron(Mat::identity(r), dstack).transpose();
    const Mat lhs = block_trace(theta, r * nblocks);
    const Mat tr_a = block_trace(a, r);
    Mat rhs(s, s);
    for (std::size_t i = 0; i < nblocks; ++i) rhs += c[i] * tr_a * d[i].transpose();
    CHECK((lhs - rhs).max_abs() <= 1e-12 * (1.0 + rhs.max_abs()));
  }
}

TEST_CASE("block_trace rejects indivisible dimensions") {
  CHECK_THROWS_AS((void)block_trace(Mat::identity(6), 4), Error);
}

TEST_CASE("sym_eig on diagonal and reflection matrices") {
  const EigResult d = sym_eig(SymMat(Mat::from_rows({{3.0, 0.0}, {0.0, 1.0}})));
  CHECK(d.values[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(d.values[1] == doctest::Approx(1.0).epsilon(1e-12));

  const EigResult r = sym_eig(SymMat(Mat::from_rows({{0.0, 1.0}, {1.0, 0.0}})));
  CHECK(r.values[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.values[1] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("sym_eig reconstructs and is orthonormal at LMI block size") {
  Rng rng(105);
  for (int t = 0; t < 5; ++t) {
    const Mat g = rng.mat(18, 18, 1.0);
    const SymMat s(0.5 * (g + g.transpose()));
    const EigResult e = sym_eig(s);
    for (std::size_t i = 0; i + 1 < e.values.size(); ++i) CHECK(e.values[i] >= e.values[i + 1]);

    Mat lam(18, 18);
    for (std::size_t i = 0; i < 18; ++i) lam(i, i) = e.values[i];
    const Mat rec = e.vectors * lam * e.vectors.transpose();
    CHECK((rec - s.mat()).frob_norm() <= 1e-10 * (1.0 + s.mat().frob_norm()));

    const Mat vtv = e.vectors.transpose() * e.vectors;
    CHECK((vtv - Mat::identity(18)).frob_norm() <= 1e-10);
  }
}

TEST_CASE("SymMat rejects material asymmetry") {
  CHECK_THROWS_AS(SymMat(Mat::from_rows({{0.0, 1.0}, {0.0, 0.0}})), Error);
  try {
    SymMat bad(Mat::from_rows({{0.0, 1.0}, {0.0, 0.0}}));
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::contract);
  }
}

TEST_CASE("psd_sqrt_pair on identity and diagonal matrices") {
  const SqrtPair i = psd_sqrt_pair(SymMat::identity(3));
  CHECK((i.root.mat() - Mat::identity(3)).max_abs() <= 1e-12);
  CHECK((i.inv_root.mat() - Mat::identity(3)).max_abs() <= 1e-12);

  const SqrtPair d = psd_sqrt_pair(SymMat(Mat::from_rows({{4.0, 0.0}, {0.0, 9.0}})));
  CHECK(d.root(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(d.root(1, 1) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(d.inv_root(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(d.inv_root(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("psd_sqrt_pair on the scalar decaying weight") {
  const SqrtPair p = psd_sqrt_pair(SymMat(Mat::from_rows({{std::exp(-0.5)}})));
  CHECK(p.root(0, 0) == doctest::Approx(std::exp(-0.25)).epsilon(1e-12));
}

TEST_CASE("psd_sqrt_pair round trips on random PD matrices") {
  Rng rng(106);
  for (int t = 0; t < 30; ++t) {
    const SymMat s = rng.pos_def(1 + rng.pick(4));
    const SqrtPair p = psd_sqrt_pair(s);
    CHECK((p.root.mat() * p.root.mat() - s.mat()).frob_norm() <=
          1e-10 * (1.0 + s.mat().frob_norm()));
    CHECK((p.root.mat() * p.inv_root.mat() - Mat::identity(s.dim())).frob_norm() <= 1e-10);
  }
}

TEST_CASE("psd_sqrt_pair rejects indefinite input") {
  CHECK_THROWS_AS((void)psd_sqrt_pair(SymMat(Mat::from_rows({{1.0, 0.0}, {0.0, -1.0}}))), Error);
  try {
    (void)psd_sqrt_pair(SymMat(Mat::from_rows({{1.0, 0.0}, {0.0, -1.0}})));
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::definiteness);
  }
}

TEST_CASE("psd_dominates basics and tolerance boundary") {
  const SymMat two = SymMat::scaled_identity(2, 2.0);
  const SymMat one = SymMat::identity(2);

  const DomResult yes = psd_dominates(two, one);
  CHECK(yes.holds);
  CHECK(yes.margin == doctest::Approx(1.0).epsilon(1e-12));

  const DomResult no = psd_dominates(one, two);
  CHECK_FALSE(no.holds);
  CHECK(no.margin == doctest::Approx(-1.0).epsilon(1e-12));

  const SymMat near(Mat::from_rows({{2.0 + 1e-12, 0.0}, {0.0, 0.0}}));
  CHECK(psd_dominates(two, near, 1e-9).holds);
}

TEST_CASE("psd_dominates is transitive at combined tolerance") {
  Rng rng(107);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + rng.pick(3);
    const SymMat c = rng.pos_def(n);
    const Mat bump1 = rng.mat(n, n, 0.3), bump2 = rng.mat(n, n, 0.3);
    const SymMat b(c.mat() + bump1.transpose() * bump1);
    const SymMat a(b.mat() + bump2.transpose() * bump2);
    REQUIRE(psd_dominates(a, b).holds);
    REQUIRE(psd_dominates(b, c).holds);
    CHECK(psd_dominates(a, c, 2e-9).holds);
  }
}

TEST_CASE("spectral_norm matches the Gram eigenvalue on rectangles") {
  Rng rng(108);
  for (int t = 0; t < 30; ++t) {
    const Mat a = rng.mat(1 + rng.pick(4), 1 + rng.pick(4), 1.0);
    const Mat g = a.transpose() * a;
    const double expect = std::sqrt(std::max(0.0, eig_max(SymMat(0.5 * (g + g.transpose())))));
    CHECK(spectral_norm(a) == doctest::Approx(expect).epsilon(1e-9));
  }
}
