#pragma once

#include <Eigen/Core>

#include "nvmix/linalg.hpp"
#include "nvmix/mixture.hpp"

namespace nvmix {

// X = loc + sqrt(W) A Z with A A^T = scale, Z standard normal, W ~ mixture.
class NvmModel {
 public:
  NvmModel(Eigen::VectorXd loc, Eigen::MatrixXd scale, MixtureSpec mixture);
  // loc = 0
  NvmModel(Eigen::MatrixXd scale, MixtureSpec mixture);

  int dim() const { return static_cast<int>(loc_.size()); }
  const Eigen::VectorXd& loc() const { return loc_; }
  const Eigen::MatrixXd& scale() const { return scale_; }
  const MixtureSpec& mixture() const { return mixture_; }
  const ScaleFactor& factor() const { return factor_; }
  bool full_rank() const { return factor_.full_rank(); }
  double log_det() const { return factor_.log_det(); }

  NvmModel with_mixture(MixtureSpec m) const;

 private:
  Eigen::VectorXd loc_;
  Eigen::MatrixXd scale_;
  MixtureSpec mixture_;
  ScaleFactor factor_;
};

}  // namespace nvmix
