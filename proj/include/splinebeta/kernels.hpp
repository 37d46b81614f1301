#pragma once

#include <vector>

#include <Eigen/Dense>

#include "splinebeta/design.hpp"

// Matrix products against the factored design. Every kernel has a serial
// reference and an OpenMP version. The parallel versions split work over
// output entries (rows, blocks, block pairs) and keep each sum in the serial
// order, so both produce bit-identical results for any thread count.
namespace splinebeta::kernels {

enum class Exec { Serial, Parallel };

/// R * gamma, length n.
Eigen::VectorXd apply(const DesignSystem& sys, const Eigen::VectorXd& gamma, Exec exec = Exec::Parallel);

/// R^T * v, length pK.
Eigen::VectorXd apply_transpose(const DesignSystem& sys, const Eigen::VectorXd& v,
                                Exec exec = Exec::Parallel);

/// sum_i w_i R_i R_i^T restricted to the listed blocks (all blocks when empty),
/// in the listed order. Unit weights when `weights` is null.
Eigen::MatrixXd gram(const DesignSystem& sys, const Eigen::VectorXd* weights = nullptr,
                     const std::vector<int>& blocks = {}, Exec exec = Exec::Parallel);

/// The p diagonal K x K blocks of the Gram matrix.
std::vector<Eigen::MatrixXd> block_grams(const DesignSystem& sys, Exec exec = Exec::Parallel);

/// R R^T, n x n, computed as (X X^T) .* (B B^T) without forming R.
Eigen::MatrixXd row_gram(const DesignSystem& sys, Exec exec = Exec::Parallel);

/// Set the OpenMP thread count used by the parallel kernels (0 keeps the default).
void set_threads(int threads);
int max_threads();

}  // namespace splinebeta::kernels
