#include "deform/eigs.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <random>
#include <stdexcept>

namespace deform {

EigenPairs smallest_eigenpairs(const SpMat& A, const SpMat& B, int k, double shift, unsigned seed, double tol,
                               int max_iter) {
  const int n = static_cast<int>(A.rows());
  if (k <= 0 || n == 0) return {};
  k = std::min(k, n);
  const int m = std::min(n, std::max(2 * k, k + 6));

  SpMat S = A + shift * B;
  Eigen::SimplicialLDLT<SpMat> solver(S);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigensolver: shifted factorization failed");

  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  Mat X(n, m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < n; ++i) X(i, j) = nd(rng);

  EigenPairs out;
  Vec prev = Vec::Constant(k, std::numeric_limits<double>::infinity());
  for (int it = 1; it <= max_iter; ++it) {
    Mat Y = solver.solve(B * X);
    // B-orthonormalize through the Rayleigh-Ritz projection.
    Mat Ar = Y.transpose() * (A * Y);
    Mat Br = Y.transpose() * (B * Y);
    Ar = 0.5 * (Ar + Ar.transpose());
    Br = 0.5 * (Br + Br.transpose());
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> rr(Ar, Br);
    if (rr.info() != Eigen::Success) throw std::runtime_error("eigensolver: Rayleigh-Ritz failed");
    X = Y * rr.eigenvectors();
    Vec lam = rr.eigenvalues().head(k);

    double worst = 0;
    for (int j = 0; j < k; ++j) {
      Vec ax = A * X.col(j), bx = B * X.col(j);
      // relative to the largest wanted eigenvalue, so near-null vectors are judged on that scale
      double scale = ax.norm() + std::abs(lam[k - 1]) * bx.norm();
      double r = (ax - lam[j] * bx).norm() / std::max(scale, 1e-300);
      worst = std::max(worst, r);
    }
    out.iterations = it;
    double change = (lam - prev).cwiseAbs().maxCoeff() / std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
    prev = lam;
    if (worst < tol || (change < 1e-9 && worst < std::sqrt(tol))) {  // stalled at the roundoff floor
      out.converged = true;
      break;
    }
  }
  out.values = prev;
  out.vectors = X.leftCols(k);
  return out;
}

}  // namespace deform
