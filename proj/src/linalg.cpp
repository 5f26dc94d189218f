#include "nvmix/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "nvmix/error.hpp"

namespace nvmix {

void check_scale_matrix(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0)
    throw DomainError("scale matrix must be square and non-empty");
  if (!sigma.allFinite()) throw DomainError("scale matrix has non-finite entries");
  const double scale = sigma.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
    if (sigma(i, i) < 0.0) throw DomainError("scale matrix has a negative diagonal entry");
    for (Eigen::Index j = 0; j < i; ++j) {
      if (std::abs(sigma(i, j) - sigma(j, i)) > 1e-10 * scale) {
        std::ostringstream msg;
        msg << "scale matrix is not symmetric at (" << i << ", " << j << ")";
        throw DomainError(msg.str());
      }
    }
  }
}

double ScaleFactor::log_det() const {
  if (!full_rank()) throw DomainError("log determinant of a singular scale matrix");
  double s = 0.0;
  for (int i = 0; i < rank; ++i) s += std::log(lower(i, i));
  return 2.0 * s;
}

Eigen::MatrixXd ScaleFactor::original_order() const {
  Eigen::MatrixXd a(lower.rows(), lower.cols());
  for (int i = 0; i < dim(); ++i) a.row(perm[i]) = lower.row(i);
  return a;
}

ScaleFactor singular_cholesky(const Eigen::MatrixXd& sigma, double tol_zero) {
  check_scale_matrix(sigma);
  const int d = static_cast<int>(sigma.rows());
  const double max_diag = sigma.diagonal().maxCoeff();
  const double tol = tol_zero < 0.0 ? 1e-10 * max_diag : tol_zero;

  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(d, d);
  std::vector<int> pivots;
  for (int i = 0; i < d; ++i) {
    for (int j : pivots) {
      if (j >= i) break;
      double s = sigma(i, j);
      for (int k : pivots) {
        if (k >= j) break;
        s -= L(i, k) * L(j, k);
      }
      L(i, j) = s / L(j, j);
    }
    double rem = sigma(i, i);
    for (int k : pivots) rem -= L(i, k) * L(i, k);
    if (rem > tol) {
      L(i, i) = std::sqrt(rem);
      pivots.push_back(i);
    } else if (rem < -std::max(1e-8 * max_diag, tol)) {
      std::ostringstream msg;
      msg << "scale matrix is not positive semi-definite (pivot " << rem << " at row " << i << ")";
      throw DomainError(msg.str());
    }
  }

  const int r = static_cast<int>(pivots.size());
  Eigen::MatrixXd C(d, r);
  for (int l = 0; l < r; ++l) C.col(l) = L.col(pivots[l]);

  // Level of each row: index of its last non-negligible column, -1 if none.
  const double coef_tol = 1e-8 * std::sqrt(max_diag);
  std::vector<int> level(d, -1);
  for (int i = 0; i < d; ++i)
    for (int l = r - 1; l >= 0; --l)
      if (std::abs(C(i, l)) > coef_tol) {
        level[i] = l;
        break;
      }

  ScaleFactor f;
  f.rank = r;
  f.perm.resize(d);
  std::iota(f.perm.begin(), f.perm.end(), 0);
  std::stable_sort(f.perm.begin(), f.perm.end(), [&](int a, int b) {
    const int la = level[a] < 0 ? r : level[a];
    const int lb = level[b] < 0 ? r : level[b];
    return la < lb;
  });
  f.lower.resize(d, r);
  f.row_scale.resize(d);
  f.block_start.assign(r + 1, d);
  for (int i = d - 1; i >= 0; --i) {
    const int src = f.perm[i];
    f.lower.row(i) = C.row(src);
    const int l = level[src];
    // Entries beyond a row's level are rounding noise.
    if (l >= 0) {
      for (int k = l + 1; k < r; ++k) f.lower(i, k) = 0.0;
      f.row_scale(i) = C(src, l);
      f.block_start[l] = i;
    } else {
      f.lower.row(i).setZero();
      f.row_scale(i) = 0.0;
      f.block_start[r] = i;
    }
  }
  return f;
}

ScaleFactor cholesky(const Eigen::MatrixXd& sigma, OnSingular on_singular) {
  ScaleFactor f = singular_cholesky(sigma);
  if (!f.full_rank() && on_singular == OnSingular::error) {
    std::ostringstream msg;
    msg << "scale matrix is not positive definite (rank " << f.rank << " of " << f.dim() << ")";
    throw DomainError(msg.str());
  }
  return f;
}

double mahalanobis_sq(const Eigen::VectorXd& x, const Eigen::VectorXd& mu, const ScaleFactor& f) {
  if (!f.full_rank()) throw DomainError("Mahalanobis distance needs a full-rank scale matrix");
  if (x.size() != f.dim() || mu.size() != f.dim()) throw DomainError("dimension mismatch");
  Eigen::VectorXd z = x - mu;
  f.lower.triangularView<Eigen::Lower>().solveInPlace(z);
  return z.squaredNorm();
}

Eigen::VectorXd mahalanobis_sq_rows(const Eigen::MatrixXd& X, const Eigen::VectorXd& mu,
                                    const ScaleFactor& f) {
  if (!f.full_rank()) throw DomainError("Mahalanobis distance needs a full-rank scale matrix");
  if (X.cols() != f.dim() || mu.size() != f.dim()) throw DomainError("dimension mismatch");
  Eigen::MatrixXd Z = (X.rowwise() - mu.transpose()).transpose();
  f.lower.triangularView<Eigen::Lower>().solveInPlace(Z);
  return Z.colwise().squaredNorm().transpose();
}

}  // namespace nvmix
