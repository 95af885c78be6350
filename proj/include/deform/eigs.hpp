// Smallest eigenpairs of sparse symmetric-definite pencils (A, B).
#pragma once

#include "deform/grid.hpp"

namespace deform {

struct EigenPairs {
  Vec values;     // ascending
  Mat vectors;    // B-orthonormal columns
  int iterations = 0;
  bool converged = false;
};

/// Shift-invert block subspace iteration for the k smallest eigenvalues of A x = λ B x
/// with A symmetric positive semi-definite and B symmetric positive definite.
/// `shift` > 0 factors A + shift·B; start block drawn from a seeded generator.
EigenPairs smallest_eigenpairs(const SpMat& A, const SpMat& B, int k, double shift, unsigned seed = 1,
                               double tol = 1e-10, int max_iter = 300);

}  // namespace deform
