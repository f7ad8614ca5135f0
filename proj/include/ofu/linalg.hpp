#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

#include "ofu/rng.hpp"

namespace ofu {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Spectral norm (largest singular value).
inline double operator_norm(const MatrixXd& a) {
    if (a.size() == 0) return 0.0;
    if (a.rows() == 1 || a.cols() == 1) return a.norm();
    Eigen::JacobiSVD<MatrixXd> svd(a);
    return svd.singularValues()(0);
}

/// Symmetric principal inverse square root of an SPD matrix. Eigenvalues are
/// floored at `eig_floor` before inversion.
inline MatrixXd inverse_sqrt_spd(const MatrixXd& v, double eig_floor = 1e-12) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(v);
    VectorXd inv_root = es.eigenvalues().unaryExpr([eig_floor](double x) { return 1.0 / std::sqrt(std::max(x, eig_floor)); });
    return es.eigenvectors() * inv_root.asDiagonal() * es.eigenvectors().transpose();
}

inline MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, RngStream& rng) {
    MatrixXd g(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) g(i, j) = rng.normal();
    return g;
}

inline VectorXd gaussian_vector(Eigen::Index n, RngStream& rng) {
    VectorXd g(n);
    for (Eigen::Index i = 0; i < n; ++i) g(i) = rng.normal();
    return g;
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the sign fix).
inline MatrixXd random_orthogonal(Eigen::Index n, RngStream& rng) {
    Eigen::HouseholderQR<MatrixXd> qr(gaussian_matrix(n, n, rng));
    MatrixXd q = qr.householderQ();
    const MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < n; ++i)
        if (r(i, i) < 0) q.col(i) *= -1.0;
    return q;
}

/// Uniform sample from the Euclidean ball of the given radius.
inline VectorXd uniform_in_ball(Eigen::Index dim, double radius, RngStream& rng) {
    if (dim == 0) return VectorXd(0);
    VectorXd dir = gaussian_vector(dim, rng);
    double n = dir.norm();
    while (n == 0.0) {
        dir = gaussian_vector(dim, rng);
        n = dir.norm();
    }
    const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
    return dir * (r / n);
}

/// Radial projection onto the closed ball of radius `radius` centered at 0.
inline void project_to_ball(Eigen::Ref<VectorXd> x, double radius) {
    const double n = x.norm();
    if (n > radius) x *= radius / n;
}

}  // namespace ofu
