#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace simba {

using Index = Eigen::Index;

template <typename Scalar = double>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar = double>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar = double>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using IndexSet = std::vector<Index>;

} // namespace simba
