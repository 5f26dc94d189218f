#pragma once

#include <vector>

#include <Eigen/Core>

namespace nvmix {

// Lower-triangular factor of a (possibly singular) scale matrix.
//
// For a full-rank matrix this is the Cholesky factor, perm is the identity
// and there is one row per block. For rank r < d, `lower` is d x r, rows are
// permuted so that row i depends on columns up to its level, and rows of the
// same level form one block (block l spans rows block_start[l] to
// block_start[l+1]). Rows that are identically zero come last, starting at
// block_start[r]. row_scale holds each row's coefficient on its own level
// (zero for zero rows). lower * lower^T equals the permuted matrix
// sigma(perm, perm).
struct ScaleFactor {
  Eigen::MatrixXd lower;
  int rank = 0;
  std::vector<int> perm;
  Eigen::VectorXd row_scale;
  std::vector<int> block_start;

  int dim() const { return static_cast<int>(lower.rows()); }
  bool full_rank() const { return rank == dim(); }
  // log det of sigma; requires full rank.
  double log_det() const;
  // A with A A^T = sigma in the original coordinate order (d x rank).
  Eigen::MatrixXd original_order() const;
};

enum class OnSingular { error, factor_singular };

// Cholesky factorization. A non-positive pivot raises DomainError, or falls
// back to singular_cholesky when requested.
ScaleFactor cholesky(const Eigen::MatrixXd& sigma, OnSingular on_singular = OnSingular::error);

// Factorization of a positive semi-definite matrix following Healy's
// algorithm; pivots at or below tol_zero (default 1e-10 times the largest
// diagonal entry) are treated as zero.
ScaleFactor singular_cholesky(const Eigen::MatrixXd& sigma, double tol_zero = -1.0);

// (x - mu)^T sigma^{-1} (x - mu) through a full-rank factor.
double mahalanobis_sq(const Eigen::VectorXd& x, const Eigen::VectorXd& mu, const ScaleFactor& f);

// Squared distances for every row of X.
Eigen::VectorXd mahalanobis_sq_rows(const Eigen::MatrixXd& X, const Eigen::VectorXd& mu,
                                    const ScaleFactor& f);

// Throws DomainError unless sigma is square, finite and symmetric.
void check_scale_matrix(const Eigen::MatrixXd& sigma);

}  // namespace nvmix
