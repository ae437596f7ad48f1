#pragma once

#include <Eigen/Dense>

namespace rcamon::linalg {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

/// Eigen-decomposition of a symmetric matrix with eigenvalues in descending
/// order. Ties keep the order produced by the underlying solver.
struct SymmetricEigen {
    VectorXd values;
    MatrixXd vectors;
};

SymmetricEigen eig_descending(const MatrixXd& symmetric);

/// Symmetric inverse square root via eigendecomposition. Throws IndefiniteBlock
/// when the smallest eigenvalue is not strictly positive.
MatrixXd inv_sqrt_symmetric(const MatrixXd& spd);

/// ||K B K^T - I||_F, the whitening defect of K with respect to B.
double whitening_defect(const MatrixXd& k, const MatrixXd& b);

/// ||P^T P - I||_F.
double orthonormality_defect(const MatrixXd& p);

/// Largest principal angle between span(a) and span(b), in degrees.
double max_principal_angle_deg(const MatrixXd& a, const MatrixXd& b);

/// Orthonormal basis for the column span of a (thin QR, column signs kept so
/// that diag(R) >= 0).
MatrixXd orthonormalize(const MatrixXd& a);

/// Flips column signs so that, within rows [ref_row_begin, ref_row_begin +
/// ref_row_count), the largest-magnitude entry of each column is positive.
void fix_column_signs(MatrixXd& m, Eigen::Index ref_row_begin, Eigen::Index ref_row_count);

inline MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

}  // namespace rcamon::linalg
