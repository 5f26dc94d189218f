#include "nvmix/sampling.hpp"

#include <cmath>
#include <random>

#include "nvmix/error.hpp"
#include "nvmix/rqmc.hpp"
#include "nvmix/special.hpp"

namespace nvmix {

namespace {

constexpr std::int64_t kBlockRows = 4096;

// Uniform on the open interval, 53 random bits centred in their cell.
double open_uniform(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1p-53;
}

}  // namespace

Eigen::MatrixXd rnvmix(std::int64_t n, const NvmModel& model, std::uint64_t seed,
                       SamplingMethod method, int threads) {
  if (n < 1) throw DomainError("number of draws must be positive");
  const Eigen::MatrixXd A = model.factor().original_order();
  const int r = static_cast<int>(A.cols());
  const MixtureSpec& mix = model.mixture();

  // Uniforms: column 0 drives W, the rest drive Z.
  RowMatrix U(n, r + 1);
  if (method == SamplingMethod::sobol) {
    SobolStream stream(r + 1, seed);
    U = stream.next(static_cast<std::size_t>(n)).array() + 0x1p-54;
  } else {
    const std::int64_t blocks = (n + kBlockRows - 1) / kBlockRows;
    parallel_for(static_cast<std::size_t>(blocks), resolve_threads(threads), [&](std::size_t b) {
      std::mt19937_64 rng(derive_seed(seed, b));
      const std::int64_t end = std::min<std::int64_t>(n, (b + 1) * kBlockRows);
      for (std::int64_t i = b * kBlockRows; i < end; ++i)
        for (int j = 0; j <= r; ++j) U(i, j) = open_uniform(rng);
    });
  }

  Eigen::MatrixXd Z(n, r);
  Eigen::VectorXd sqrt_w(n);
  for (std::int64_t i = 0; i < n; ++i) {
    sqrt_w(i) = std::sqrt(mix.quantile(Prob::from_p(U(i, 0))));
    for (int j = 0; j < r; ++j) Z(i, j) = norm_quantile(U(i, j + 1));
  }
  Eigen::MatrixXd X = (Z * A.transpose()).array().colwise() * sqrt_w.array();
  X.rowwise() += model.loc().transpose();
  return X;
}

}  // namespace nvmix
