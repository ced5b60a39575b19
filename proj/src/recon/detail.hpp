#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "pipl/grid.hpp"

namespace pipl::detail {

/// Products of cosines cos(j pi (x - a) / L) over the bounding box, j <= mx per axis, k <= mt in time.
std::vector<Field> cosine_basis(const SpaceTimeGrid& grid, int mx, int mt);

/// Minimizer of |A c - b|^2 + alpha |c|^2 with alpha = alpha_rel * sigma_max^2 (SVD).
Eigen::VectorXd tikhonov(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double alpha_rel,
                         double* alpha_abs = nullptr);

/// Quadrature weights of Sigma-entries times time levels, level-major like boundary fields.
std::vector<double> sigma_weights(const SpaceTimeGrid& grid, const std::vector<BoundaryEntry>& entries);

/// Quadrature weights of Q, level-major.
std::vector<double> q_weights(const SpaceTimeGrid& grid);

using LinearMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// CGLS for min |B x - y|^2 + alpha |x|^2 started from x. `monitor` receives |y - B x| after
/// every iteration.
void cgls(const LinearMap& B, const LinearMap& Bt, const Eigen::VectorXd& y, double alpha, int iterations,
          Eigen::VectorXd& x, const std::function<void(double)>& monitor = {});

/// Power iteration for the largest eigenvalue of Bt B.
double largest_eigenvalue(const LinearMap& B, const LinearMap& Bt, Eigen::Index cols, int iterations = 20);

/// Transpose of normal_derivative: level-major entry values to a nodal field on Q.
Field normal_derivative_transpose(const SpaceTimeGrid& grid, const std::vector<BoundaryEntry>& entries,
                                  const std::vector<double>& values);

}  // namespace pipl::detail
