#include "nvmix/model.hpp"

#include "nvmix/error.hpp"

namespace nvmix {

NvmModel::NvmModel(Eigen::VectorXd loc, Eigen::MatrixXd scale, MixtureSpec mixture)
    : loc_(std::move(loc)), scale_(std::move(scale)), mixture_(std::move(mixture)) {
  if (loc_.size() != scale_.rows()) throw DomainError("location and scale dimensions differ");
  if (!loc_.allFinite()) throw DomainError("location vector has non-finite entries");
  factor_ = cholesky(scale_, OnSingular::factor_singular);
}

NvmModel::NvmModel(Eigen::MatrixXd scale, MixtureSpec mixture)
    : loc_(Eigen::VectorXd::Zero(scale.rows())), scale_(std::move(scale)), mixture_(std::move(mixture)) {
  factor_ = cholesky(scale_, OnSingular::factor_singular);
}

NvmModel NvmModel::with_mixture(MixtureSpec m) const {
  NvmModel copy = *this;
  copy.mixture_ = std::move(m);
  return copy;
}

}  // namespace nvmix
