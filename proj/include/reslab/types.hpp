#pragma once

#include <Eigen/Dense>

#include "reslab/dual.hpp"

namespace reslab {

/// Small vectors and matrices; storage is inline (at most kMaxDim entries per axis).
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

struct Grad1 {
    double value = 0.0;
    Vec gradient;
};

/// Value, gradient and symmetric Hessian at a point.
struct Jet2 {
    double value = 0.0;
    Vec gradient;
    Mat hessian;
};

} // namespace reslab
