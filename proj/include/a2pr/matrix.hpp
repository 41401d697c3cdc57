#pragma once

#include <Eigen/Dense>

namespace a2pr {

// Row-major everywhere: batches are (rows = samples, cols = features) and
// checkpoints dump weight matrices row by row.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

inline bool all_finite(const Mat& m) { return m.allFinite(); }
inline bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace a2pr
