#pragma once

#include <Eigen/Dense>

namespace tlab {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec = Eigen::VectorXd;

using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;
using Mat = Eigen::MatrixXd;

using Mat42 = Eigen::Matrix<double, 4, 2>;
using Mat24 = Eigen::Matrix<double, 2, 4>;

/// Additive offset between kelvin and degrees Celsius.
inline constexpr double kCelsiusOffset = 273.15;

}  // namespace tlab
