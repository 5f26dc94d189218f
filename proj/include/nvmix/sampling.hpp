#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "nvmix/model.hpp"

namespace nvmix {

enum class SamplingMethod { pseudo, sobol };

// n draws of loc + sqrt(W) A Z, one per row. W and Z are obtained by
// inversion from r + 1 uniforms (r = rank of the scale), so both drivers
// share the transformation. Pseudo-random uniforms come from fixed blocks of
// rows with their own seeds; the output does not depend on the thread count.
Eigen::MatrixXd rnvmix(std::int64_t n, const NvmModel& model, std::uint64_t seed,
                       SamplingMethod method = SamplingMethod::pseudo, int threads = 0);

}  // namespace nvmix
