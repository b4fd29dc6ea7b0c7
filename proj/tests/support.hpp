#pragma once

#include "fluidhit/chain_model.hpp"
#include "fluidhit/named_examples.hpp"

#include <Eigen/Dense>

#include <vector>

namespace support {

inline Eigen::MatrixXd to_eigen(const fluidhit::num::DenseMatrix &a) {
    Eigen::MatrixXd m(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            m(i, j) = a(i, j);
        }
    }
    return m;
}

inline Eigen::MatrixXd to_eigen(const fluidhit::num::SparseMatrix &a) { return to_eigen(a.to_dense()); }

inline Eigen::VectorXd to_eigen(const std::vector<double> &v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline fluidhit::num::DenseMatrix from_eigen(const Eigen::MatrixXd &m) {
    fluidhit::num::DenseMatrix a(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            a(i, j) = m(i, j);
        }
    }
    return a;
}

inline fluidhit::SubGenerator random_sub(std::size_t transient, std::uint64_t seed, double density = 0.5) {
    fluidhit::Rng rng(seed);
    return fluidhit::decompose(fluidhit::random_chain(transient, rng, density));
}

/// Matrix exponential oracle by scaling and squaring of a Taylor series, in Eigen.
inline Eigen::MatrixXd expm(const Eigen::MatrixXd &a) {
    const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
    int squarings = 0;
    double scale = 1.0;
    while (norm * scale > 0.25) {
        scale *= 0.5;
        ++squarings;
    }
    const Eigen::MatrixXd b = a * scale;
    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(a.rows(), a.cols());
    Eigen::MatrixXd sum = term;
    for (int k = 1; k <= 30; ++k) {
        term = term * b / k;
        sum += term;
    }
    for (int i = 0; i < squarings; ++i) {
        sum = sum * sum;
    }
    return sum;
}

} // namespace support
