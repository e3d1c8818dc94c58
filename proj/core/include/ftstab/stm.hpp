#pragma once

#include <span>

#include "ftstab/model.hpp"

namespace ftstab {

// Explicit stacked transition matrices grow by a factor 4 per step; builds
// beyond this many rows are refused with a size-limit error.
inline constexpr std::size_t kStmRowCap = std::size_t{1} << 21;

// Three equivalent stackings of the same second-moment transition object:
// psi stacks on the right (backward recursion), varphi applies the newest
// step factors under an identity Kronecker blow-up (forward recursion, equal
// to psi elementwise), phi stacks per factor index (forward, a row
// permutation of psi with identical Gram).
enum class StmFlavor { psi, varphi, phi };

struct Stm {
  std::size_t from_k = 0;
  std::size_t to_l = 0;
  StmFlavor flavor = StmFlavor::psi;
  bool scaled = false;
  Mat data;  // (4^(l-k) * 2n) x 2n
};

struct Gram {
  std::size_t from_k = 0;
  std::size_t to_l = 0;
  StmFlavor flavor = StmFlavor::psi;
  bool scaled = false;
  SymMat value;  // 2n x 2n, PSD
};

// `factors` is indexed by absolute step: entry j advances step j -> j+1.
// All builders use entries k..l-1 and require l >= k.
Stm build_psi(std::span<const StepFactors> factors, std::size_t k, std::size_t l,
              std::size_t row_cap = kStmRowCap);
Stm build_varphi(std::span<const StepFactors> factors, std::size_t k, std::size_t l,
                 std::size_t row_cap = kStmRowCap);
Stm build_phi(std::span<const StepFactors> factors, std::size_t k, std::size_t l,
              std::size_t row_cap = kStmRowCap);

// data' * data, accumulated row-block-wise (the big side is never formed).
Gram gram(const Stm& s);

// Backward expansion of the psi Gram: G_{l,l} = I and
// G_{l,j} = sum_i M_i^(j)' G_{l,j+1} M_i^(j). Polynomial cost, no 4^depth
// blow-up; this is the production path every criterion rides on.
Gram gram_adjoint_backward(std::span<const StepFactors> factors, std::size_t k, std::size_t l);

// Frobenius residual of the scaling identity
//   S'(I kron Rb_l) S  =  Rb_k^{1/2} Sbar' Sbar Rb_k^{1/2}
// where S is the raw flavor build and Sbar its R-scaled counterpart.
// `factors` must be unscaled; R_seq[j] weights step j and must cover 0..l.
double weighted_identity_residual(StmFlavor flavor, std::span<const StepFactors> factors,
                                  std::span<const SymMat> R_seq, std::size_t k, std::size_t l,
                                  std::size_t row_cap = kStmRowCap);

}  // namespace ftstab
