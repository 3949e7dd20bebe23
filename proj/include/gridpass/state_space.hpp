#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace gridpass {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

// x' = A x + B u, y = C x. For device models u is the terminal current
// deviation (A) and y the terminal voltage deviation (V).
struct StateSpaceModel {
  Mat A;
  Mat B;
  Mat C;
  std::vector<std::string> labels;

  Eigen::Index states() const { return A.rows(); }
  void validate() const;
  Eigen::VectorXcd eigenvalues() const;
  double max_real_eigenvalue() const;
  bool is_hurwitz() const { return max_real_eigenvalue() < 0.0; }
};

}  // namespace gridpass
