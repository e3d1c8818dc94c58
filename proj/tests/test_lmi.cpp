#include <doctest.h>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ftstab/lmi.hpp"
#include "ftstab/lyapunov.hpp"
#include "support.hpp"

using namespace ftstab;
using testkit::Rng;
using testkit::m1x1;

namespace {

const LmiBlock& block_named(const LmiProblem& pb, const std::string& name) {
  for (const LmiBlock& b : pb.blocks)
    if (b.name == name) return b;
  REQUIRE_MESSAGE(false, ("missing block " + name));
  return pb.blocks.front();
}

std::vector<double> random_point(Rng& rng, const VarLayout& layout) {
  std::vector<double> y(layout.num_vars() - 1);
  for (double& v : y) v = rng.normal();
  return y;
}

// Independent scalar-case rebuild of one synthesis step from the printed
// seven-by-seven layout. Everything is 1-dimensional, so the weight
// conjugations collapse to the factor sqrt(r_{k+1}/r_k).
Mat scalar_step_oracle(const PlantParams& plant, const UncChannel& ch, const FtSpec& spec,
                       double gamma, std::size_t k, const Candidate& cand) {
  const double a1 = plant.A1(0, 0), a2 = plant.A2(0, 0), b = plant.B(0, 0);
  const double c1 = plant.C1(0, 0), c2 = plant.C2(0, 0), d = plant.D(0, 0);
  const double mm = ch.M(0, 0), n1 = ch.N1(0, 0), n2 = ch.N2(0, 0), al = ch.alpha_bar;
  const double k1 = cand.K1(0, 0), k2 = cand.K2(0, 0);
  const double ratio = spec.eps1 / spec.eps2;
  const double w = std::sqrt(spec.R[k + 1](0, 0) / spec.R[k](0, 0));
  const double sa = std::sqrt(al), sna = std::sqrt(1.0 - al), sg = std::sqrt(gamma);

  const Mat pi1 = w * Mat::from_rows({{a1 + a2 + b * (k1 + k2), 0.0}, {0.0, a1 + b * k1}});
  const Mat cb1 = w * Mat::from_rows({{0.0, 0.0}, {c2 + c1 + d * (k2 + k1), c1 + d * k1}});
  const Mat pi2 =
      w * Mat::from_rows({{al * sa * b * mm, 0.0, al * sna * b * mm, 0.0},
                          {(sa - al) * b * mm, sa * b * mm, -al * sna * b * mm, al * b * mm}});
  const Mat pi3 = w * Mat::from_rows({{sg * (n1 + n2), 0.0, 0.0, 0.0}, {0.0, sg * n1, 0.0, 0.0}});
  const Mat pi4 = w * Mat::from_rows({{0.0, 0.0, sg * (n1 + n2), 0.0}, {0.0, 0.0, 0.0, 0.0}});
  const Mat pi5 = w * Mat::from_rows({{0.0, 0.0, 0.0, sg * (n1 + n2)}, {0.0, 0.0, 0.0, sg * n1}});

  Mat out(18, 18);
  const std::size_t off[] = {0, 2, 4, 6, 8, 10, 14};
  auto put = [&](std::size_t br, std::size_t bc, const Mat& piece) {
    out.set_block(off[br], off[bc], piece);
    if (br != bc) out.set_block(off[bc], off[br], piece.transpose());
  };

  put(0, 0, -1.0 * cand.P_seq[k + 1].mat());
  put(0, 1, sa * pi1);
  put(0, 2, sna * pi1);
  put(0, 3, sa * cb1);
  put(0, 4, sna * cb1);
  put(0, 5, pi2);
  for (std::size_t r = 1; r <= 4; ++r) put(r, r, -ratio * Mat::identity(2));
  put(1, 6, pi3);
  put(2, 6, pi4);
  put(3, 6, pi5);
  put(5, 5, -gamma * ratio * Mat::identity(4));
  put(6, 6, -ratio * Mat::identity(4));
  return out;
}

}  // namespace

TEST_CASE("layout counts variables the way the scalar example forces") {
  const LmiProblem pb = assemble_synthesis_lmi(testkit::example_plant(), testkit::example_spec(),
                                       testkit::example_channel(0.5), 0.5086);
  CHECK(pb.layout.num_vars() == 66);
  CHECK(pb.layout.margin_index() == 65);

  std::size_t synth = 0, caps = 0, anchors = 0;
  for (const LmiBlock& b : pb.blocks) {
    if (b.name.rfind("synthesis", 0) == 0) {
      ++synth;
      CHECK(b.size == 18);
      CHECK(b.require == BlockRequire::negative_definite);
    } else if (b.name.rfind("cap", 0) == 0) {
      ++caps;
      CHECK(b.size == 2);
      CHECK(b.require == BlockRequire::positive_semidefinite);
    } else if (b.name == "P_0 >= I") {
      ++anchors;
      CHECK(b.size == 2);
    }
  }
  CHECK(synth == 20);
  CHECK(caps == 21);
  CHECK(anchors == 1);
}

TEST_CASE("layout names are unambiguous") {
  const VarLayout layout{1, 1, 2};
  CHECK(layout.var_name(layout.p_index(0, 0, 0)).find("P0") != std::string::npos);
  CHECK(layout.var_name(layout.k1_index(0, 0)).find("K1") != std::string::npos);
  CHECK(layout.var_name(layout.margin_index()) == "t");
}

TEST_CASE("synthesis blocks match the scalar printed-form oracle") {
  Rng rng(601);
  for (int t = 0; t < 10; ++t) {
    const PlantParams plant(m1x1(rng.normal()), m1x1(rng.normal()), m1x1(rng.normal()),
                            m1x1(rng.normal()), m1x1(rng.normal()), m1x1(rng.normal()));
    const UncChannel ch{m1x1(rng.normal()), m1x1(rng.normal()), m1x1(rng.normal()), rng.unif()};
    const std::size_t T = 3;
    const FtSpec spec(1.0, 2.0 + rng.unif(), T, exp_decay_weights(1, T, 1.0, 0.1));
    const double gamma = 0.2 + rng.unif();
    const LmiProblem pb = assemble_synthesis_lmi(plant, spec, ch, gamma);

    Candidate cand;
    for (std::size_t k = 0; k <= T; ++k) {
      const Mat g = rng.mat(2, 2, 1.0);
      cand.P_seq.push_back(SymMat(0.5 * (g + g.transpose())));
    }
    cand.K1 = m1x1(rng.normal());
    cand.K2 = m1x1(rng.normal());
    const std::vector<double> y = pack_candidate(pb.layout, cand);

    for (std::size_t k = 0; k < T; ++k) {
      const LmiBlock& blk = block_named(pb, "synthesis k=" + std::to_string(k));
      const Mat got = instantiate_block(blk, y);
      const Mat want = scalar_step_oracle(plant, ch, spec, gamma, k, cand);
      CHECK((got - want).max_abs() <= 1e-12 * (1.0 + want.max_abs()));
    }

    const Mat p0 = instantiate_block(block_named(pb, "P_0 >= I"), y);
    CHECK((p0 - (cand.P_seq[0].mat() - Mat::identity(2))).max_abs() <= 1e-13);

    const Mat cap = instantiate_block(block_named(pb, "cap P_2 <= (eps2/eps1) I"), y);
    const Mat cap_want = spec.bound() * Mat::identity(2) - cand.P_seq[2].mat();
    CHECK((cap - cap_want).max_abs() <= 1e-13);
  }
}

TEST_CASE("blocks are affine in the decision vector") {
  Rng rng(602);
  const LmiProblem pb = assemble_synthesis_lmi(testkit::example_plant(), testkit::example_spec(),
                                       testkit::example_channel(0.4), 0.7);
  for (int t = 0; t < 5; ++t) {
    const std::vector<double> y1 = random_point(rng, pb.layout);
    const std::vector<double> y2 = random_point(rng, pb.layout);
    const double lam = rng.unif();
    std::vector<double> mix(y1.size());
    for (std::size_t i = 0; i < y1.size(); ++i) mix[i] = lam * y1[i] + (1.0 - lam) * y2[i];
    for (const LmiBlock& b : pb.blocks) {
      const Mat lhs = instantiate_block(b, mix);
      const Mat rhs = lam * instantiate_block(b, y1) + (1.0 - lam) * instantiate_block(b, y2);
      CHECK((lhs - rhs).max_abs() <= 1e-12 * (1.0 + rhs.max_abs()));
    }
  }
}

TEST_CASE("switching the channel off reduces synthesis to the fixed-gain shape") {
  // With M = 0 the noise-channel column vanishes identically.
  const UncChannel off{m1x1(0.0), m1x1(-0.6177), m1x1(0.4285), 0.5};
  const LmiProblem pb =
      assemble_synthesis_lmi(testkit::example_plant(), testkit::example_spec(), off, 0.5086);
  Rng rng(603);
  const std::vector<double> y = random_point(rng, pb.layout);
  const LmiBlock& blk = block_named(pb, "synthesis k=0");
  const Mat v = instantiate_block(blk, y);
  CHECK(v.block(0, 10, 2, 4).max_abs() == 0.0);
}

TEST_CASE("assembly rejects non-square channels and bad gamma") {
  const PlantParams plant = testkit::example_plant();
  const FtSpec spec = testkit::example_spec();
  const UncChannel wide{Mat(1, 2), Mat(2, 1), Mat(2, 1), 0.5};
  CHECK_THROWS_AS((void)assemble_synthesis_lmi(plant, spec, wide, 0.5), Error);
  CHECK_THROWS_AS((void)assemble_synthesis_lmi(plant, spec, testkit::example_channel(0.5), -1.0), Error);
}

TEST_CASE("fixed-gain step block on trivial inputs") {
  StepFactors zero;
  zero.m1 = zero.m2 = zero.m3 = zero.m4 = Mat(2, 2);
  zero.scaled = true;
  FtSpec spec(1.0, 2.0, 2, exp_decay_weights(1, 2, 1.0, 0.1));

  const SymMat blk =
      assemble_fixed_gain_step(zero, SymMat::identity(2), SymMat::identity(2), spec);
  CHECK(blk.dim() == 10);
  CHECK(eig_max(blk) < 0.0);

  const SymMat dead =
      assemble_fixed_gain_step(zero, SymMat::identity(2), SymMat::zero(2), spec);
  CHECK(eig_max(dead) >= 0.0);
}

TEST_CASE("fixed-gain step accepts a strictified moment sequence") {
  // Near-zero factors keep the quadratic term far below the added slack.
  Rng rng(604);
  std::vector<StepFactors> f(3);
  for (StepFactors& s : f) {
    s.m1 = rng.mat(2, 2, 1e-4);
    s.m2 = rng.mat(2, 2, 1e-4);
    s.m3 = rng.mat(2, 2, 1e-4);
    s.m4 = rng.mat(2, 2, 1e-4);
    s.scaled = true;
  }
  FtSpec spec(1.0, 1.0, 3, std::vector<SymMat>(4, SymMat::identity(1)));
  const MomentSequence ms = pbar_sequence(f, 3);
  for (std::size_t k = 0; k < 3; ++k) {
    const SymMat strict(ms.P[k + 1].mat() + 1e-6 * Mat::identity(2));
    const SymMat blk = assemble_fixed_gain_step(f[k], ms.P[k], strict, spec);
    CHECK(eig_max(blk) < 0.0);
  }
}

TEST_CASE("solver finds nothing for an uncontrollable explosive plant") {
  const PlantParams plant(m1x1(1.5), m1x1(0.0), m1x1(0.0), m1x1(0.0), m1x1(0.0), m1x1(0.0));
  const FtSpec spec(1.0, 1.0, 3, exp_decay_weights(1, 3, 1.0, 0.0));
  const UncChannel ch{m1x1(0.0), m1x1(0.0), m1x1(0.0), 0.0};
  const LmiProblem pb = assemble_synthesis_lmi(plant, spec, ch, 0.5);
  SolveParams params;
  params.max_iters = 2000;
  const SolveResult res = solve_feasibility(pb, params);
  CHECK(res.status == SolveStatus::undecided);
  CHECK_FALSE(res.candidate.has_value());
  CHECK(res.detail.find("not an infeasibility proof") != std::string::npos);
}

TEST_CASE("solver certifies a stable plant with the channel off") {
  const PlantParams plant(m1x1(0.3), m1x1(0.0), m1x1(0.0), m1x1(0.0), m1x1(0.0), m1x1(0.0));
  const FtSpec spec(1.0, 2.0, 3, exp_decay_weights(1, 3, 1.0, 0.0));
  const UncChannel ch{m1x1(0.0), m1x1(0.0), m1x1(0.0), 0.0};
  const LmiProblem pb = assemble_synthesis_lmi(plant, spec, ch, 0.5);
  const SolveResult res = solve_feasibility(pb);
  REQUIRE(res.status == SolveStatus::feasible);
  REQUIRE(res.candidate.has_value());
  CHECK(res.candidate->margin > 1e-6);
  CHECK(verify_candidate(pb, *res.candidate).pass);
}

TEST_CASE("solver is deterministic for fixed parameters") {
  const PlantParams plant(m1x1(0.4), m1x1(0.1), m1x1(1.0), m1x1(0.1), m1x1(0.0), m1x1(0.1));
  const FtSpec spec(1.0, 2.0, 3, exp_decay_weights(1, 3, 1.0, 0.1));
  const UncChannel ch{m1x1(0.05), m1x1(0.2), m1x1(0.1), 0.5};
  const LmiProblem pb = assemble_synthesis_lmi(plant, spec, ch, 0.6);
  SolveParams params;
  params.max_iters = 4000;
  const SolveResult a = solve_feasibility(pb, params);
  const SolveResult b = solve_feasibility(pb, params);
  CHECK(a.status == b.status);
  CHECK(a.best_margin == b.best_margin);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("verification flags a broken anchor block by name") {
  const LmiProblem pb = assemble_synthesis_lmi(testkit::example_plant(), testkit::example_spec(),
                                       testkit::example_channel(0.5), 0.5086);
  Candidate cand;
  for (std::size_t k = 0; k <= 20; ++k) cand.P_seq.push_back(SymMat::scaled_identity(2, 0.5));
  cand.K1 = m1x1(0.9627);
  cand.K2 = m1x1(0.7737);
  const Verdict v = verify_candidate(pb, cand);
  CHECK_FALSE(v.pass);
  bool named = false;
  for (const std::string& n : v.notes) named = named || n.find("P_0 >= I") != std::string::npos;
  CHECK(named);
}

TEST_CASE("example gains admit a completion over the moment variables") {
  const LmiProblem pb = assemble_synthesis_lmi(testkit::example_plant(), testkit::example_spec(),
                                       testkit::example_channel(0.5), 0.5086);
  SolveParams params;
  params.max_iters = 20000;
  params.fixed_vars.push_back({pb.layout.k1_index(0, 0), 0.9627});
  params.fixed_vars.push_back({pb.layout.k2_index(0, 0), 0.7737});
  const SolveResult res = solve_feasibility(pb, params);
  REQUIRE(res.candidate.has_value());
  CHECK(res.candidate->K1(0, 0) == doctest::Approx(0.9627));
  CHECK(res.candidate->K2(0, 0) == doctest::Approx(0.7737));
  CHECK(verify_candidate(pb, *res.candidate).pass);
}

TEST_CASE("sdpa export of a handmade one-variable toy round trips") {
  LmiProblem pb;
  pb.layout = VarLayout{1, 1, 0};  // layout is irrelevant to export; sizes come from blocks
  LmiBlock blk;
  blk.name = "toy";
  blk.size = 2;
  blk.require = BlockRequire::positive_semidefinite;
  blk.constant = -1.0 * Mat::identity(2);
  blk.coeffs.push_back({0, Mat::identity(2)});
  pb.blocks.push_back(blk);
  pb.meta = LmiMeta{1, 1, 0, 1.0, 1.0, 1.0};

  const std::string text = export_sdpa(pb);
  const SdpaProblem parsed = parse_sdpa(text);
  CHECK(parsed.num_vars == pb.layout.num_vars());
  REQUIRE(parsed.block_sizes.size() == 1);
  // Identity-only data on the diagonal: exporter may flag it diagonal.
  CHECK(std::abs(parsed.block_sizes[0]) == 2);
  CHECK(parsed.objective.back() == 1.0);

  Rng rng(605);
  for (int t = 0; t < 5; ++t) {
    std::vector<double> x(parsed.num_vars);
    for (double& v : x) v = rng.normal();
    const Mat got = sdpa_block_value(parsed, 0, x);
    Mat want = blk.constant;
    want += x[0] * Mat::identity(2);
    want -= x.back() * Mat::identity(2);
    CHECK((got - want).max_abs() <= 1e-12);
  }
}

TEST_CASE("sdpa export of the example problem reproduces every block") {
  const LmiProblem pb = assemble_synthesis_lmi(testkit::example_plant(), testkit::example_spec(),
                                       testkit::example_channel(0.5), 0.5086);
  const SdpaProblem parsed = parse_sdpa(export_sdpa(pb));
  REQUIRE(parsed.block_sizes.size() == pb.blocks.size());

  Rng rng(606);
  std::vector<double> x(parsed.num_vars);
  for (double& v : x) v = rng.normal();
  const std::span<const double> y(x.data(), x.size() - 1);
  for (std::size_t b = 0; b < pb.blocks.size(); ++b) {
    Mat want = instantiate_block(pb.blocks[b], y);
    if (pb.blocks[b].require == BlockRequire::negative_definite) want = -want;
    want -= x.back() * Mat::identity(want.rows());
    const Mat got = sdpa_block_value(parsed, b, x);
    CHECK((got - want).max_abs() <= 1e-12 * (1.0 + want.max_abs()));
  }
}

TEST_CASE("sdpa parser tolerates comments and rejects truncation") {
  const std::string text =
      "\"exported problem\"\n"
      "* comment line\n"
      "1\n"
      "1\n"
      "-2\n"
      "1.0\n"
      "0 1 1 1 1.0\n"
      "1 1 1 1 1.0\n"
      "1 1 2 2 1.0\n";
  const SdpaProblem p = parse_sdpa(text);
  CHECK(p.num_vars == 1);
  CHECK(p.block_sizes[0] == -2);

  CHECK_THROWS_AS((void)parse_sdpa("2\n1\n"), Error);
  try {
    (void)parse_sdpa("2\n1\n");
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::io);
  }
}

TEST_CASE("default gamma grid leads with the user value") {
  const auto grid = default_gamma_grid(0.5086);
  REQUIRE(grid.size() == 26);
  CHECK(grid[0] == 0.5086);
  CHECK(grid[1] == doctest::Approx(1e-3));
  CHECK(grid.back() == doctest::Approx(1e3));
  CHECK(default_gamma_grid(std::nullopt).size() == 25);
}

TEST_CASE("gain synthesis certifies an easy plant and screens the result") {
  const PlantParams plant(m1x1(0.5), m1x1(0.2), m1x1(1.0), m1x1(0.1), m1x1(0.05), m1x1(0.1));
  const FtSpec spec(1.0, 3.0, 4, exp_decay_weights(1, 4, 1.0, 0.1));
  const UncChannel ch{m1x1(0.05), m1x1(0.3), m1x1(0.2), 0.5};
  // Feasible window for this instance is roughly gamma in [0.03, 0.3].
  const double grid[] = {0.1};
  SolveParams params;
  params.max_iters = 8000;
  const SynthesisResult res = synthesize_gains(plant, spec, ch, grid, params);
  REQUIRE(res.certified);
  REQUIRE(res.best.has_value());
  REQUIRE(res.exact.has_value());
  CHECK(res.exact->pass);
  REQUIRE(res.falsification.has_value());
  CHECK_FALSE(res.falsification->counterexample.has_value());
  CHECK(res.attempts.size() == 1);
  CHECK(res.best_gamma == 0.1);
}

TEST_CASE("gain synthesis reports an empty grid sweep honestly") {
  const PlantParams plant(m1x1(2.0), m1x1(0.0), m1x1(0.0), m1x1(0.0), m1x1(0.0), m1x1(0.0));
  const FtSpec spec(1.0, 1.2, 3, exp_decay_weights(1, 3, 1.0, 0.0));
  const UncChannel ch{m1x1(0.0), m1x1(0.0), m1x1(0.0), 0.0};
  const double grid[] = {0.5, 1.0};
  SolveParams params;
  params.max_iters = 600;
  const SynthesisResult res = synthesize_gains(plant, spec, ch, grid, params);
  CHECK_FALSE(res.certified);
  CHECK_FALSE(res.best.has_value());
  CHECK(res.detail.find("not an infeasibility proof") != std::string::npos);
}
