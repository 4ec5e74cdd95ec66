#pragma once

#include <filesystem>
#include <string>

#include "nhl/network.hpp"

namespace nhl {

// Symmetric kernel evaluation on a finite sample.
struct GramMatrix {
    MatrixXd entries;
    std::string label;

    Eigen::Index n() const { return entries.rows(); }
};

// kappa^(l) on the columns of `inputs`:
//   l = 0 : x_j . x_k
//   l > 0 : (1/m) sum_i sigma(h^(l)_i(x_j)) sigma(h^(l)_i(x_k))   (biases inside h)
GramMatrix layer_kernel_gram(const NetworkState& state, const MatrixXd& inputs, int layer);

// gamma^(l): all ones for l = L, otherwise
//   (1/m) sum_i q^(l)_i(x_j) q^(l)_i(x_k) sigma'(h^(l)_i(x_j)) sigma'(h^(l)_i(x_k)).
GramMatrix gamma_gram(const NetworkState& state, const MatrixXd& inputs, int layer);

// theta = sum_{l=1}^{L} kappa^(l-1) o gamma^(l). When biases are trained at
// relative rate beta the flow picks up beta * sum_{l=1}^{L-1} gamma^(l) as well;
// beta = 0 gives the plain ladder sum.
GramMatrix tangent_gram(const NetworkState& state, const MatrixXd& inputs, double beta = 0.0);

// y y^T
GramMatrix target_gram(const VectorXd& values);

// Centered kernel alignment <HKH, HK*H>_F / (||HKH||_F ||HK*H||_F).
double cka(const GramMatrix& K, const GramMatrix& K_star);

// sqrt(y^T (K + lambda I)^{-1} y). Throws "singular_system" when the system
// cannot be solved (lambda = 0 with a rank-deficient K).
double min_norm_in_span(const GramMatrix& K, const VectorXd& values, double ridge);

struct MinNormResult {
    double value = 0.0;
    double ridge = 0.0;
    bool fallback = false;  // true when the default ridge had to be substituted
};

// As min_norm_in_span, but a singular lambda = 0 solve is retried with the
// default ridge 1e-8 * trace(K) / n; the substitution is reported.
MinNormResult min_norm_with_fallback(const GramMatrix& K, const VectorXd& values, double ridge);

double min_eigenvalue(const GramMatrix& K);

// min eigenvalue >= -1e-8 * trace / n
bool is_psd(const GramMatrix& K, double rel_tol = 1e-8);

// Row-major CSV preceded by a "# label=<label> n=<n>" line.
void write_gram_csv(const GramMatrix& K, const std::filesystem::path& path);

}  // namespace nhl
