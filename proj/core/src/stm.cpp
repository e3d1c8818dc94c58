#include "ftstab/stm.hpp"

#include <string>
#include <vector>

namespace ftstab {

namespace {

// Validates the requested range, returns the augmented dimension 2n.
std::size_t check_range(std::span<const StepFactors> factors, std::size_t k, std::size_t l) {
  if (l < k) throw_shape("stm: to_step " + std::to_string(l) + " < from_step " + std::to_string(k));
  if (l > factors.size()) {
    throw_shape("stm: range up to step " + std::to_string(l) + " but only " +
                std::to_string(factors.size()) + " step factors given");
  }
  std::size_t dim = 0;
  for (std::size_t j = k; j < l; ++j) {
    const StepFactors& f = factors[j];
    if (j == k) dim = f.m1.rows();
    for (const Mat* m : {&f.m1, &f.m2, &f.m3, &f.m4}) {
      if (m->rows() != dim || m->cols() != dim) {
        throw_shape("stm: factor at step " + std::to_string(j) + " is not " +
                    std::to_string(dim) + "x" + std::to_string(dim));
      }
    }
    if (factors[j].scaled != factors[k].scaled) {
      throw_contract("stm: mixed scaled and unscaled factors in one range");
    }
  }
  if (l == k) {
    dim = factors.empty() ? 0 : factors.front().m1.rows();
    if (dim == 0) throw_shape("stm: cannot infer dimension for an empty build");
  }
  return dim;
}

void check_cap(std::size_t depth, std::size_t dim, std::size_t row_cap) {
  std::size_t rows = dim;
  for (std::size_t d = 0; d < depth; ++d) {
    if (rows > row_cap / 4) {
      std::size_t feasible = 0;
      std::size_t r = dim;
      while (r <= row_cap / 4) {
        r *= 4;
        ++feasible;
      }
      throw_size_limit("stm: depth " + std::to_string(depth) + " needs 4^" +
                       std::to_string(depth) + " * " + std::to_string(dim) +
                       " rows, over the cap of " + std::to_string(row_cap) +
                       " (max feasible depth here is " + std::to_string(feasible) + ")");
    }
    rows *= 4;
  }
}

bool range_scaled(std::span<const StepFactors> factors, std::size_t k, std::size_t l) {
  if (l > k) return factors[k].scaled;
  return !factors.empty() && factors.front().scaled;
}

}  // namespace

Stm build_psi(std::span<const StepFactors> factors, std::size_t k, std::size_t l,
              std::size_t row_cap) {
  const std::size_t dim = check_range(factors, k, l);
  check_cap(l - k, dim, row_cap);
  Mat s = Mat::identity(dim);
  for (std::size_t j = l; j-- > k;) {
    const StepFactors& f = factors[j];
    s = vstack({s * f.m1, s * f.m2, s * f.m3, s * f.m4});
  }
  return Stm{k, l, StmFlavor::psi, range_scaled(factors, k, l), std::move(s)};
}

Stm build_varphi(std::span<const StepFactors> factors, std::size_t k, std::size_t l,
                 std::size_t row_cap) {
  const std::size_t dim = check_range(factors, k, l);
  check_cap(l - k, dim, row_cap);
  Mat v = Mat::identity(dim);
  for (std::size_t j = k; j < l; ++j) {
    const StepFactors& f = factors[j];
    const Mat stack = vstack({f.m1, f.m2, f.m3, f.m4});
    // (I_m kron stack) * v, applied block-row-wise.
    const std::size_t m = v.rows() / dim;
    Mat next(4 * m * dim, dim);
    for (std::size_t i = 0; i < m; ++i) {
      next.set_block(i * 4 * dim, 0, stack * v.block(i * dim, 0, dim, dim));
    }
    v = std::move(next);
  }
  return Stm{k, l, StmFlavor::varphi, range_scaled(factors, k, l), std::move(v)};
}

Stm build_phi(std::span<const StepFactors> factors, std::size_t k, std::size_t l,
              std::size_t row_cap) {
  const std::size_t dim = check_range(factors, k, l);
  check_cap(l - k, dim, row_cap);
  Mat p = Mat::identity(dim);
  for (std::size_t j = k; j < l; ++j) {
    const StepFactors& f = factors[j];
    const std::size_t m = p.rows() / dim;
    Mat next(4 * m * dim, dim);
    std::size_t branch = 0;
    for (const Mat* mj : {&f.m1, &f.m2, &f.m3, &f.m4}) {
      // (I_m kron M_j) * p lands as branch block number `branch`.
      for (std::size_t i = 0; i < m; ++i) {
        next.set_block((branch * m + i) * dim, 0, *mj * p.block(i * dim, 0, dim, dim));
      }
      ++branch;
    }
    p = std::move(next);
  }
  return Stm{k, l, StmFlavor::phi, range_scaled(factors, k, l), std::move(p)};
}

Gram gram(const Stm& s) {
  const std::size_t cols = s.data.cols();
  Mat acc(cols, cols);
  const std::vector<double>& d = s.data.data();
  for (std::size_t r = 0; r < s.data.rows(); ++r) {
    const double* row = d.data() + r * cols;
    for (std::size_t a = 0; a < cols; ++a) {
      const double ra = row[a];
      if (ra == 0.0) continue;
      for (std::size_t b = 0; b <= a; ++b) acc(a, b) += ra * row[b];
    }
  }
  for (std::size_t a = 0; a < cols; ++a)
    for (std::size_t b = a + 1; b < cols; ++b) acc(a, b) = acc(b, a);
  return Gram{s.from_k, s.to_l, s.flavor, s.scaled, SymMat(acc)};
}

Gram gram_adjoint_backward(std::span<const StepFactors> factors, std::size_t k, std::size_t l) {
  const std::size_t dim = check_range(factors, k, l);
  Mat g = Mat::identity(dim);
  for (std::size_t j = l; j-- > k;) {
    const StepFactors& f = factors[j];
    Mat next(dim, dim);
    for (const Mat* m : {&f.m1, &f.m2, &f.m3, &f.m4}) {
      next += m->transpose() * g * (*m);
    }
    // Re-symmetrize; the recursion preserves symmetry only up to rounding.
    g = 0.5 * (next + next.transpose());
  }
  return Gram{k, l, StmFlavor::psi, range_scaled(factors, k, l), SymMat(g)};
}

double weighted_identity_residual(StmFlavor flavor, std::span<const StepFactors> factors,
                                  std::span<const SymMat> R_seq, std::size_t k, std::size_t l,
                                  std::size_t row_cap) {
  const std::size_t dim = check_range(factors, k, l);
  if (range_scaled(factors, k, l)) {
    throw_contract("weighted_identity_residual: factors must be unscaled");
  }
  if (R_seq.size() < l + 1) {
    throw_shape("weighted_identity_residual: R sequence has " + std::to_string(R_seq.size()) +
                " entries, need at least " + std::to_string(l + 1));
  }
  const auto build = [&](std::span<const StepFactors> fs, std::size_t from, std::size_t to) {
    switch (flavor) {
      case StmFlavor::varphi:
        return build_varphi(fs, from, to, row_cap);
      case StmFlavor::phi:
        return build_phi(fs, from, to, row_cap);
      case StmFlavor::psi:
      default:
        return build_psi(fs, from, to, row_cap);
    }
  };

  const Stm raw = build(factors, k, l);

  // LHS = S'(I kron Rb_l) S, accumulated over 2n-row blocks.
  const Mat rb_l = dup_diag(R_seq[l].mat());
  Mat lhs(dim, dim);
  const std::size_t blocks = raw.data.rows() / dim;
  for (std::size_t i = 0; i < blocks; ++i) {
    const Mat bi = raw.data.block(i * dim, 0, dim, dim);
    lhs += bi.transpose() * rb_l * bi;
  }

  // RHS = Rb_k^{1/2} Sbar' Sbar Rb_k^{1/2} from the scaled factors.
  std::vector<StepFactors> scaled;
  scaled.reserve(l - k);
  for (std::size_t j = k; j < l; ++j) {
    scaled.push_back(scale_factors(factors[j], R_seq[j], R_seq[j + 1]));
  }
  const Stm bar = build(scaled, 0, l - k);
  const Mat root_k = dup_diag(psd_sqrt_pair(R_seq[k]).root.mat());
  const Mat rhs = root_k * (bar.data.transpose() * bar.data) * root_k;

  return (lhs - rhs).frob_norm();
}

}  // namespace ftstab
