#include "ftstab/lmi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <utility>

namespace ftstab {

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

// Assembles a symmetric matrix from a grid of blocks; off-diagonal pieces
// are mirrored as their transposes so the result is exactly symmetric.
class BlockGrid {
 public:
  explicit BlockGrid(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
    offsets_.push_back(0);
    for (std::size_t s : sizes_) offsets_.push_back(offsets_.back() + s);
    m_ = Mat(offsets_.back(), offsets_.back());
  }

  void put(std::size_t br, std::size_t bc, const Mat& x) {
    if (x.rows() != sizes_[br] || x.cols() != sizes_[bc]) {
      throw_internal("block grid: piece is " + std::to_string(x.rows()) + "x" +
                     std::to_string(x.cols()) + " but cell wants " + std::to_string(sizes_[br]) +
                     "x" + std::to_string(sizes_[bc]));
    }
    m_.set_block(offsets_[br], offsets_[bc], x);
    if (br != bc) m_.set_block(offsets_[bc], offsets_[br], x.transpose());
  }

  Mat take() { return std::move(m_); }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  Mat m_;
};

Mat sym_basis(std::size_t dim, std::size_t i, std::size_t j) {
  Mat e(dim, dim);
  e(i, j) = 1.0;
  e(j, i) = 1.0;
  return e;
}

Mat single_entry(std::size_t rows, std::size_t cols, std::size_t r, std::size_t c) {
  Mat e(rows, cols);
  e(r, c) = 1.0;
  return e;
}

Mat two_by_two(const Mat& tl, const Mat& tr, const Mat& bl, const Mat& br) {
  const std::size_t n = tl.rows();
  Mat out(2 * n, 2 * n);
  out.set_block(0, 0, tl);
  out.set_block(0, n, tr);
  out.set_block(n, 0, bl);
  out.set_block(n, n, br);
  return out;
}

double frob_inner(const Mat& a, const Mat& b) {
  const std::vector<double>& x = a.data();
  const std::vector<double>& y = b.data();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

Mat cholesky_lower(const Mat& s) {
  const std::size_t d = s.rows();
  Mat l(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = s(i, j);
      for (std::size_t t = 0; t < j; ++t) sum -= l(i, t) * l(j, t);
      if (i == j) {
        if (sum <= 0.0) throw_internal("projection normal matrix lost positive definiteness");
        l(i, i) = std::sqrt(sum);
      } else {
        l(i, j) = sum / l(j, j);
      }
    }
  }
  return l;
}

std::vector<double> chol_solve(const Mat& l, std::vector<double> b) {
  const std::size_t d = l.rows();
  for (std::size_t i = 0; i < d; ++i) {
    double sum = b[i];
    for (std::size_t t = 0; t < i; ++t) sum -= l(i, t) * b[t];
    b[i] = sum / l(i, i);
  }
  for (std::size_t i = d; i-- > 0;) {
    double sum = b[i];
    for (std::size_t t = i + 1; t < d; ++t) sum -= l(t, i) * b[t];
    b[i] = sum / l(i, i);
  }
  return b;
}

// V diag(clamped eigenvalues) V', pushed to the required side of the cone.
Mat clamp_to_cone(const EigResult& eg, bool negative_definite, double target) {
  const std::size_t d = eg.vectors.rows();
  Mat scaled = eg.vectors;
  for (std::size_t c = 0; c < d; ++c) {
    const double lc = negative_definite ? std::min(eg.values[c], -target)
                                        : std::max(eg.values[c], target);
    for (std::size_t r = 0; r < d; ++r) scaled(r, c) *= lc;
  }
  Mat out = scaled * eg.vectors.transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace

std::size_t VarLayout::p_index(std::size_t k, std::size_t i, std::size_t j) const {
  const std::size_t d = 2 * n;
  if (k > T || i >= d || j >= d) throw_shape("variable layout: P index out of range");
  if (i < j) std::swap(i, j);
  return k * sym_per_p() + i * (i + 1) / 2 + j;
}

std::size_t VarLayout::k1_index(std::size_t r, std::size_t c) const {
  if (r >= m || c >= n) throw_shape("variable layout: K1 index out of range");
  return (T + 1) * sym_per_p() + r * n + c;
}

std::size_t VarLayout::k2_index(std::size_t r, std::size_t c) const {
  if (r >= m || c >= n) throw_shape("variable layout: K2 index out of range");
  return (T + 1) * sym_per_p() + m * n + r * n + c;
}

std::string VarLayout::var_name(std::size_t idx) const {
  if (idx == margin_index()) return "t";
  const std::size_t spp = sym_per_p();
  if (idx < (T + 1) * spp) {
    const std::size_t k = idx / spp;
    std::size_t r = idx % spp;
    std::size_t i = 0;
    while ((i + 1) * (i + 2) / 2 <= r) ++i;
    const std::size_t j = r - i * (i + 1) / 2;
    return "P" + std::to_string(k) + "[" + std::to_string(i) + "," + std::to_string(j) + "]";
  }
  std::size_t r = idx - (T + 1) * spp;
  const char* which = "K1";
  if (r >= m * n) {
    r -= m * n;
    which = "K2";
  }
  if (r >= m * n) throw_shape("variable layout: index out of range");
  return std::string(which) + "[" + std::to_string(r / n) + "," + std::to_string(r % n) + "]";
}

std::vector<double> pack_candidate(const VarLayout& layout, const Candidate& cand) {
  const std::size_t d = 2 * layout.n;
  if (cand.P_seq.size() != layout.T + 1) {
    throw_shape("candidate: P sequence has " + std::to_string(cand.P_seq.size()) +
                " entries, layout wants " + std::to_string(layout.T + 1));
  }
  for (const SymMat& p : cand.P_seq) {
    if (p.dim() != d) throw_shape("candidate: P block dimension mismatch");
  }
  if (cand.K1.rows() != layout.m || cand.K1.cols() != layout.n || cand.K2.rows() != layout.m ||
      cand.K2.cols() != layout.n) {
    throw_shape("candidate: gain shape mismatch");
  }
  std::vector<double> y(layout.num_vars() - 1, 0.0);
  for (std::size_t k = 0; k <= layout.T; ++k)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j <= i; ++j) y[layout.p_index(k, i, j)] = cand.P_seq[k](i, j);
  for (std::size_t r = 0; r < layout.m; ++r)
    for (std::size_t c = 0; c < layout.n; ++c) {
      y[layout.k1_index(r, c)] = cand.K1(r, c);
      y[layout.k2_index(r, c)] = cand.K2(r, c);
    }
  return y;
}

Candidate unpack_candidate(const VarLayout& layout, std::span<const double> y, double margin) {
  if (y.size() != layout.num_vars() - 1) {
    throw_shape("candidate: flat vector has " + std::to_string(y.size()) + " entries, want " +
                std::to_string(layout.num_vars() - 1));
  }
  const std::size_t d = 2 * layout.n;
  Candidate cand{{}, Mat(layout.m, layout.n), Mat(layout.m, layout.n), margin};
  cand.P_seq.reserve(layout.T + 1);
  for (std::size_t k = 0; k <= layout.T; ++k) {
    Mat p(d, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        p(i, j) = y[layout.p_index(k, i, j)];
        p(j, i) = p(i, j);
      }
    cand.P_seq.push_back(SymMat(p));
  }
  for (std::size_t r = 0; r < layout.m; ++r)
    for (std::size_t c = 0; c < layout.n; ++c) {
      cand.K1(r, c) = y[layout.k1_index(r, c)];
      cand.K2(r, c) = y[layout.k2_index(r, c)];
    }
  return cand;
}

Mat instantiate_block(const LmiBlock& block, std::span<const double> y) {
  Mat x = block.constant;
  for (const auto& [idx, coeff] : block.coeffs) {
    if (idx >= y.size()) throw_internal("block '" + block.name + "' references variable " +
                                        std::to_string(idx) + " beyond the vector");
    if (y[idx] != 0.0) x += y[idx] * coeff;
  }
  return x;
}

LmiProblem assemble_synthesis_lmi(const PlantParams& plant, const FtSpec& spec, const UncChannel& channel,
                          double gamma) {
  const std::size_t n = plant.n();
  const std::size_t m = plant.m();
  if (spec.n() != n) {
    throw_shape("synthesis assembly: weights are " + std::to_string(spec.n()) +
                "-dimensional, plant is " + std::to_string(n));
  }
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw_validation("synthesis assembly: gamma must be positive and finite");
  }
  if (!(channel.alpha_bar >= 0.0 && channel.alpha_bar <= 1.0)) {
    throw_validation("synthesis assembly: alpha_bar outside [0, 1]");
  }
  if (channel.M.rows() != m) {
    throw_shape("synthesis assembly: M has " + std::to_string(channel.M.rows()) +
                " rows, plant input dimension is " + std::to_string(m));
  }
  if (channel.M.cols() != n || channel.N1.rows() != n || channel.N2.rows() != n ||
      channel.N1.cols() != n || channel.N2.cols() != n) {
    throw_shape(
        "synthesis assembly: no printed synthesis form exists unless the channel is square "
        "(q = p = n); got q=" +
        std::to_string(channel.M.cols()) + ", p=" + std::to_string(channel.N1.rows()) +
        ", n=" + std::to_string(n));
  }

  const double a = channel.alpha_bar;
  const double sa = std::sqrt(a);
  const double s1a = std::sqrt(1.0 - a);
  const double ratio = spec.eps1 / spec.eps2;
  const double sg = std::sqrt(gamma);
  const std::size_t s2 = 2 * n;
  const std::size_t s4 = 4 * n;

  LmiProblem pb;
  pb.layout = VarLayout{n, m, spec.T};
  pb.meta = LmiMeta{n, m, spec.T, gamma, spec.eps1, spec.eps2};

  std::vector<Mat> root(spec.T + 1), inv(spec.T + 1);
  for (std::size_t k = 0; k <= spec.T; ++k) {
    const SqrtPair sp = psd_sqrt_pair(spec.R[k]);
    root[k] = dup_diag(sp.root.mat());
    inv[k] = dup_diag(sp.inv_root.mat());
  }

  const Mat BM = plant.B * channel.M;  // n x n since q = n
  const Mat N1t = channel.N1.transpose();
  const Mat N2t = channel.N2.transpose();
  const Mat zn(n, n);
  const std::vector<std::size_t> sizes{s2, s2, s2, s2, s2, s4, s4};

  for (std::size_t k = 0; k < spec.T; ++k) {
    const Mat i2inv = kron(Mat::identity(2), inv[k]);

    BlockGrid grid(sizes);
    for (std::size_t d = 1; d <= 4; ++d) grid.put(d, d, -ratio * Mat::identity(s2));
    grid.put(5, 5, -(gamma * ratio) * Mat::identity(s4));
    grid.put(6, 6, -ratio * Mat::identity(s4));

    Mat w2(s2, s4);
    w2.set_block(0, 0, std::pow(a, 1.5) * BM);
    w2.set_block(0, 2 * n, (a * s1a) * BM);
    w2.set_block(n, 0, (sa - a) * BM);
    w2.set_block(n, n, sa * BM);
    w2.set_block(n, 2 * n, -(a * s1a) * BM);
    w2.set_block(n, 3 * n, a * BM);
    grid.put(0, 5, root[k + 1] * w2 * i2inv);

    Mat w3(s2, s4), w4(s2, s4), w5(s2, s4);
    w3.set_block(0, 0, sg * (N1t + N2t));
    w3.set_block(n, n, sg * N1t);
    w4.set_block(0, 2 * n, sg * (N1t + N2t));
    w5.set_block(0, 3 * n, sg * (N1t + N2t));
    w5.set_block(n, 3 * n, sg * N1t);
    grid.put(1, 6, root[k + 1] * w3 * i2inv);
    grid.put(2, 6, root[k + 1] * w4 * i2inv);
    grid.put(3, 6, root[k + 1] * w5 * i2inv);

    const Mat pi1_0 = root[k + 1] * two_by_two(plant.A1 + plant.A2, zn, zn, plant.A1) * inv[k];
    const Mat cb1_0 = root[k + 1] * two_by_two(zn, zn, plant.C1 + plant.C2, plant.C1) * inv[k];
    grid.put(0, 1, sa * pi1_0);
    grid.put(0, 2, s1a * pi1_0);
    grid.put(0, 3, sa * cb1_0);
    grid.put(0, 4, s1a * cb1_0);

    LmiBlock blk;
    blk.name = "synthesis k=" + std::to_string(k);
    blk.size = 18 * n;
    blk.require = BlockRequire::negative_definite;
    blk.constant = grid.take();

    for (std::size_t i = 0; i < s2; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        BlockGrid g(sizes);
        g.put(0, 0, -1.0 * sym_basis(s2, i, j));
        blk.coeffs.emplace_back(pb.layout.p_index(k + 1, i, j), g.take());
      }
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < n; ++c) {
        const Mat be = plant.B * single_entry(m, n, r, c);
        const Mat de = plant.D * single_entry(m, n, r, c);
        const Mat dpi1_k1 = root[k + 1] * two_by_two(be, zn, zn, be) * inv[k];
        const Mat dcb1_k1 = root[k + 1] * two_by_two(zn, zn, de, de) * inv[k];
        BlockGrid g1(sizes);
        g1.put(0, 1, sa * dpi1_k1);
        g1.put(0, 2, s1a * dpi1_k1);
        g1.put(0, 3, sa * dcb1_k1);
        g1.put(0, 4, s1a * dcb1_k1);
        blk.coeffs.emplace_back(pb.layout.k1_index(r, c), g1.take());

        const Mat dpi1_k2 = root[k + 1] * two_by_two(be, zn, zn, zn) * inv[k];
        const Mat dcb1_k2 = root[k + 1] * two_by_two(zn, zn, de, zn) * inv[k];
        BlockGrid g2(sizes);
        g2.put(0, 1, sa * dpi1_k2);
        g2.put(0, 2, s1a * dpi1_k2);
        g2.put(0, 3, sa * dcb1_k2);
        g2.put(0, 4, s1a * dcb1_k2);
        blk.coeffs.emplace_back(pb.layout.k2_index(r, c), g2.take());
      }
    pb.blocks.push_back(std::move(blk));
  }

  {
    LmiBlock blk;
    blk.name = "P_0 >= I";
    blk.size = s2;
    blk.require = BlockRequire::positive_semidefinite;
    blk.constant = -1.0 * Mat::identity(s2);
    for (std::size_t i = 0; i < s2; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        blk.coeffs.emplace_back(pb.layout.p_index(0, i, j), sym_basis(s2, i, j));
    pb.blocks.push_back(std::move(blk));
  }
  for (std::size_t k = 0; k <= spec.T; ++k) {
    LmiBlock blk;
    blk.name = "cap P_" + std::to_string(k) + " <= (eps2/eps1) I";
    blk.size = s2;
    blk.require = BlockRequire::positive_semidefinite;
    blk.constant = spec.bound() * Mat::identity(s2);
    for (std::size_t i = 0; i < s2; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        blk.coeffs.emplace_back(pb.layout.p_index(k, i, j), -1.0 * sym_basis(s2, i, j));
    pb.blocks.push_back(std::move(blk));
  }
  return pb;
}

SymMat assemble_fixed_gain_step(const StepFactors& f, const SymMat& P_k, const SymMat& P_next,
                                const FtSpec& spec) {
  const std::size_t dim = f.m1.rows();
  for (const Mat* m : {&f.m1, &f.m2, &f.m3, &f.m4}) {
    if (m->rows() != dim || m->cols() != dim) {
      throw_shape("fixed-gain block: step factors are not uniformly square");
    }
  }
  if (P_k.dim() != dim || P_next.dim() != dim) {
    throw_shape("fixed-gain block: P blocks are " + std::to_string(P_k.dim()) + " and " +
                std::to_string(P_next.dim()) + ", factors are " + std::to_string(dim));
  }
  if (2 * spec.n() != dim) {
    throw_shape("fixed-gain block: weights do not match the augmented dimension");
  }
  const double ratio = spec.eps1 / spec.eps2;
  BlockGrid grid({dim, dim, dim, dim, dim});
  grid.put(0, 0, -1.0 * P_next.mat());
  grid.put(0, 1, f.m1);
  grid.put(0, 2, f.m2);
  grid.put(0, 3, f.m3);
  grid.put(0, 4, f.m4);
  for (std::size_t d = 1; d <= 4; ++d) grid.put(d, d, -ratio * Mat::identity(dim));
  return SymMat(grid.take());
}

SolveResult solve_feasibility(const LmiProblem& problem, const SolveParams& params) {
  const VarLayout& layout = problem.layout;
  const std::size_t nv = layout.num_vars() - 1;  // margin handled by the ramp, not a coordinate

  std::vector<double> pinned_val(nv, 0.0);
  std::vector<bool> pinned(nv, false);
  for (const auto& [idx, val] : params.fixed_vars) {
    if (idx >= nv) {
      throw_validation("solver: fixed variable index " + std::to_string(idx) +
                       " out of range (the margin cannot be pinned)");
    }
    pinned[idx] = true;
    pinned_val[idx] = val;
  }
  std::vector<std::size_t> free_vars;
  std::vector<std::ptrdiff_t> slot(nv, -1);
  for (std::size_t i = 0; i < nv; ++i) {
    if (!pinned[i]) {
      slot[i] = static_cast<std::ptrdiff_t>(free_vars.size());
      free_vars.push_back(i);
    }
  }
  const std::size_t nf = free_vars.size();

  struct RBlock {
    bool nd = false;
    Mat cst;
    std::vector<std::pair<std::size_t, const Mat*>> cf;  // (free slot, coefficient)
  };
  std::vector<RBlock> rb;
  rb.reserve(problem.blocks.size());
  for (const LmiBlock& b : problem.blocks) {
    RBlock r;
    r.nd = b.require == BlockRequire::negative_definite;
    r.cst = b.constant;
    for (const auto& [idx, coeff] : b.coeffs) {
      if (pinned[idx]) {
        if (pinned_val[idx] != 0.0) r.cst += pinned_val[idx] * coeff;
      } else {
        r.cf.emplace_back(static_cast<std::size_t>(slot[idx]), &coeff);
      }
    }
    rb.push_back(std::move(r));
  }

  const auto merge_full = [&](const std::vector<double>& yf) {
    std::vector<double> full(nv);
    for (std::size_t i = 0; i < nv; ++i) {
      full[i] = pinned[i] ? pinned_val[i] : yf[static_cast<std::size_t>(slot[i])];
    }
    return full;
  };
  const auto finish = [&](std::vector<double> yf, double margin, std::size_t iters,
                          std::string note) {
    SolveResult res;
    res.iterations = iters;
    res.best_margin = margin;
    Candidate cand = unpack_candidate(layout, merge_full(yf), margin);
    if (margin > params.tol) {
      const Verdict v = verify_candidate(problem, cand, params.tol);
      if (v.pass) {
        res.status = SolveStatus::feasible;
        res.candidate = std::move(cand);
        res.detail = "verified margin " + fmt3(margin) + "; " + note;
        return res;
      }
      res.detail = "margin " + fmt3(margin) + " not confirmed by block verification; " + note;
      return res;
    }
    res.detail = (margin <= 0.0 ? std::string("no positive-margin point found")
                                : "margin " + fmt3(margin) + " below tolerance") +
                 " (not an infeasibility proof); " + note;
    return res;
  };

  if (nf == 0) {
    double worst = std::numeric_limits<double>::infinity();
    for (const RBlock& b : rb) {
      const EigResult eg = sym_eig(SymMat(b.cst));
      worst = std::min(worst, b.nd ? -eg.values.front() : eg.values.back());
    }
    return finish({}, worst, 0, "all variables pinned");
  }

  // Normal matrix of the affine least-squares projection, factored once.
  Mat gram = Mat::identity(nf);
  for (const RBlock& b : rb) {
    for (std::size_t i = 0; i < b.cf.size(); ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        const double v = frob_inner(*b.cf[i].second, *b.cf[j].second);
        gram(b.cf[i].first, b.cf[j].first) += v;
        if (b.cf[i].first != b.cf[j].first) gram(b.cf[j].first, b.cf[i].first) += v;
      }
    }
  }
  const Mat chol = cholesky_lower(gram);

  // Start at P_k = I, gains 0.
  std::vector<double> y(nf, 0.0);
  for (std::size_t k = 0; k <= layout.T; ++k) {
    for (std::size_t i = 0; i < 2 * layout.n; ++i) {
      const std::size_t idx = layout.p_index(k, i, i);
      if (slot[idx] >= 0) y[static_cast<std::size_t>(slot[idx])] = 1.0;
    }
  }

  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> y_best = y;
  double target = std::max(params.tol, 1e-12);
  std::size_t no_improve = 0;
  int restarts = 0;
  std::vector<Mat> clamped(rb.size(), Mat(0, 0));
  std::size_t it = 0;
  std::string stop_note = "iteration budget exhausted";

  for (; it < params.max_iters; ++it) {
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < rb.size(); ++b) {
      Mat x = rb[b].cst;
      for (const auto& [s, coeff] : rb[b].cf) {
        if (y[s] != 0.0) x += y[s] * (*coeff);
      }
      const EigResult eg = sym_eig(SymMat(x));
      worst = std::min(worst, rb[b].nd ? -eg.values.front() : eg.values.back());
      clamped[b] = clamp_to_cone(eg, rb[b].nd, target);
    }
    if (worst > best + 1e-15) {
      best = worst;
      y_best = y;
      no_improve = 0;
    } else {
      ++no_improve;
    }
    if (params.progress && it % 200 == 0) params.progress(it, best, target);
    // Projections attain the target only in the limit, so ramp already at
    // 95% of it; the clamp keeps pushing against the new, higher target.
    if (worst >= 0.95 * target) {
      target = std::max(target, worst) * 1.6;
      no_improve = 0;
      if (target > 1e3) {
        ++it;
        stop_note = "margin ramp exhausted";
        break;
      }
    }
    if (no_improve >= 600) {
      if (restarts >= 2) {
        ++it;
        stop_note = "stalled after " + std::to_string(restarts) + " restarts";
        break;
      }
      ++restarts;
      no_improve = 0;
      y = y_best;
      for (double& v : y) v += 0.05 * gauss(rng);
    }
    std::vector<double> rhs = y;
    for (std::size_t b = 0; b < rb.size(); ++b) {
      const Mat diff = clamped[b] - rb[b].cst;
      for (const auto& [s, coeff] : rb[b].cf) rhs[s] += frob_inner(*coeff, diff);
    }
    y = chol_solve(chol, std::move(rhs));
  }

  return finish(std::move(y_best), best, it, stop_note);
}

Verdict verify_candidate(const LmiProblem& problem, const Candidate& cand, double tol) {
  const std::vector<double> y = pack_candidate(problem.layout, cand);
  Verdict v;
  v.method = "block-eig";
  v.pass = true;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < problem.blocks.size(); ++b) {
    const LmiBlock& blk = problem.blocks[b];
    const Mat x = instantiate_block(blk, y);
    const EigResult eg = sym_eig(SymMat(x));
    const bool nd = blk.require == BlockRequire::negative_definite;
    const double value = nd ? eg.values.front() : eg.values.back();
    const double margin = nd ? (-tol - value) : (value + tol);
    v.per_step.push_back(StepReport{b, value, -tol, margin});
    if (margin < 0.0) {
      v.pass = false;
      v.notes.push_back("block '" + blk.name + "' violated (worst eigenvalue " + fmt3(value) +
                        ")");
    }
    if (margin < worst) {
      worst = margin;
      v.worst_step = b;
    }
  }
  const LmiBlock& wb = problem.blocks[v.worst_step];
  const EigResult eg = sym_eig(SymMat(instantiate_block(wb, y)));
  const std::size_t col = wb.require == BlockRequire::negative_definite ? 0 : wb.size - 1;
  v.worst_direction.resize(wb.size);
  for (std::size_t i = 0; i < wb.size; ++i) v.worst_direction[i] = eg.vectors(i, col);
  return v;
}

std::string export_sdpa(const LmiProblem& problem) {
  const std::size_t nvars = problem.layout.num_vars();
  const std::size_t margin_mat = nvars;  // 1-based matrix number of the margin variable

  const auto is_diag = [](const Mat& m) {
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.cols(); ++j)
        if (i != j && m(i, j) != 0.0) return false;
    return true;
  };

  std::ostringstream out;
  out << nvars << "\n";
  out << problem.blocks.size() << "\n";
  for (std::size_t b = 0; b < problem.blocks.size(); ++b) {
    const LmiBlock& blk = problem.blocks[b];
    bool diag = is_diag(blk.constant);
    for (const auto& [idx, coeff] : blk.coeffs) {
      if (!diag) break;
      diag = is_diag(coeff);
    }
    out << (b ? " " : "") << (diag ? "-" : "") << blk.size;
  }
  out << "\n";
  for (std::size_t v = 0; v < nvars; ++v) out << (v ? " " : "") << (v + 1 == margin_mat ? 1 : 0);
  out << "\n";

  const auto emit = [&out](std::size_t mat, std::size_t bno, std::size_t i, std::size_t j,
                           double value) {
    if (value == 0.0) return;
    out << mat << " " << bno << " " << (i + 1) << " " << (j + 1) << " " << fmt17(value) << "\n";
  };
  for (std::size_t b = 0; b < problem.blocks.size(); ++b) {
    const LmiBlock& blk = problem.blocks[b];
    const bool nd = blk.require == BlockRequire::negative_definite;
    const std::size_t bno = b + 1;
    // F_0: the constant moved to the right-hand side of F(y) >= 0.
    for (std::size_t i = 0; i < blk.size; ++i)
      for (std::size_t j = i; j < blk.size; ++j)
        emit(0, bno, i, j, nd ? blk.constant(i, j) : -blk.constant(i, j));
    for (const auto& [idx, coeff] : blk.coeffs)
      for (std::size_t i = 0; i < blk.size; ++i)
        for (std::size_t j = i; j < blk.size; ++j)
          emit(idx + 1, bno, i, j, nd ? -coeff(i, j) : coeff(i, j));
    for (std::size_t i = 0; i < blk.size; ++i) emit(margin_mat, bno, i, i, -1.0);
  }
  return out.str();
}

SdpaProblem parse_sdpa(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  SdpaProblem pb;
  std::size_t expected_blocks = 0;
  int stage = 0;
  const auto clean = [](std::string s) {
    for (char& ch : s) {
      if (ch == '{' || ch == '}' || ch == '(' || ch == ')' || ch == ',') ch = ' ';
    }
    return s;
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '*' || line[0] == '"') continue;
    std::istringstream ls(clean(line));
    if (stage == 0) {
      if (!(ls >> pb.num_vars)) throw_io("sdpa parse: bad variable count line");
      stage = 1;
    } else if (stage == 1) {
      if (!(ls >> expected_blocks)) throw_io("sdpa parse: bad block count line");
      stage = 2;
    } else if (stage == 2) {
      long long s = 0;
      while (ls >> s) {
        if (s == 0) throw_io("sdpa parse: zero block size");
        pb.block_sizes.push_back(s);
      }
      if (pb.block_sizes.size() != expected_blocks) {
        throw_io("sdpa parse: block size line lists " + std::to_string(pb.block_sizes.size()) +
                 " sizes, header said " + std::to_string(expected_blocks));
      }
      stage = 3;
    } else if (stage == 3) {
      double c = 0.0;
      while (ls >> c) pb.objective.push_back(c);
      if (pb.objective.size() != pb.num_vars) {
        throw_io("sdpa parse: objective lists " + std::to_string(pb.objective.size()) +
                 " coefficients for " + std::to_string(pb.num_vars) + " variables");
      }
      stage = 4;
    } else {
      SdpaEntry e;
      if (!(ls >> e.mat >> e.block >> e.i >> e.j >> e.value)) {
        throw_io("sdpa parse: malformed entry line: " + line);
      }
      if (e.mat > pb.num_vars) throw_io("sdpa parse: entry names matrix beyond variable count");
      if (e.block == 0 || e.block > pb.block_sizes.size()) {
        throw_io("sdpa parse: entry names block " + std::to_string(e.block) + " of " +
                 std::to_string(pb.block_sizes.size()));
      }
      const std::size_t dim =
          static_cast<std::size_t>(std::llabs(pb.block_sizes[e.block - 1]));
      if (e.i == 0 || e.j == 0 || e.i > dim || e.j > dim) {
        throw_io("sdpa parse: entry index outside block");
      }
      if (e.i > e.j) std::swap(e.i, e.j);
      pb.entries.push_back(e);
    }
  }
  if (stage < 4) throw_io("sdpa parse: truncated text (header incomplete)");
  return pb;
}

Mat sdpa_block_value(const SdpaProblem& problem, std::size_t block, std::span<const double> x) {
  if (block >= problem.block_sizes.size()) {
    throw_shape("sdpa value: block index out of range");
  }
  if (x.size() != problem.num_vars) {
    throw_shape("sdpa value: x has " + std::to_string(x.size()) + " entries for " +
                std::to_string(problem.num_vars) + " variables");
  }
  const std::size_t dim = static_cast<std::size_t>(std::llabs(problem.block_sizes[block]));
  Mat out(dim, dim);
  for (const SdpaEntry& e : problem.entries) {
    if (e.block != block + 1) continue;
    const double w = e.mat == 0 ? -e.value : x[e.mat - 1] * e.value;
    out(e.i - 1, e.j - 1) += w;
    if (e.i != e.j) out(e.j - 1, e.i - 1) += w;
  }
  return out;
}

std::vector<double> default_gamma_grid(std::optional<double> user_gamma) {
  std::vector<double> grid;
  if (user_gamma) grid.push_back(*user_gamma);
  for (int i = 0; i < 25; ++i) grid.push_back(std::pow(10.0, -3.0 + 6.0 * i / 24.0));
  return grid;
}

SynthesisResult synthesize_gains(const PlantParams& plant, const FtSpec& spec,
                                 const UncChannel& channel, std::span<const double> gamma_grid,
                                 const SolveParams& params) {
  if (gamma_grid.empty()) throw_validation("synthesis: gamma grid must not be empty");
  SynthesisResult out;
  double best_margin = -std::numeric_limits<double>::infinity();
  for (const double gamma : gamma_grid) {
    const LmiProblem pb = assemble_synthesis_lmi(plant, spec, channel, gamma);
    const SolveResult r = solve_feasibility(pb, params);
    out.attempts.push_back(GammaAttempt{gamma, r.status, r.best_margin});
    if (r.status == SolveStatus::feasible && r.best_margin > best_margin) {
      best_margin = r.best_margin;
      out.best = r.candidate;
      out.best_gamma = gamma;
    }
  }
  if (out.best) {
    out.certified = true;
    const GainPackage gp(out.best->K1, out.best->K2, channel);
    const UncRealization nominal =
        UncRealization::zero(channel.M.cols(), channel.N1.rows(), spec.T);
    out.exact = exact_ft_verdict(plant, gp, spec, nominal);
    FalsifyParams fp;
    fp.strategy = FalsifyStrategy::constant_grid;
    fp.budget = 200;
    fp.seed = params.seed;
    out.falsification = falsify_uncertainty(plant, gp, spec, fp);
    out.detail = "certified at gamma=" + fmt17(out.best_gamma) + " with margin " +
                 fmt3(best_margin);
  } else {
    out.detail = "no certificate found across the gamma grid (not an infeasibility proof)";
  }
  return out;
}

}  // namespace ftstab
