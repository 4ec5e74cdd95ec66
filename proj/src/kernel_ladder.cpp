#include "nhl/kernel_ladder.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "nhl/csv.hpp"
#include "nhl/error.hpp"
#include "nhl/gradflow.hpp"

namespace nhl {

namespace {

void require_inputs(const NetworkState& state, const MatrixXd& inputs) {
    require(inputs.cols() >= 1, "kernel evaluation needs at least one input");
    require(inputs.rows() == state.d, "input dimension mismatch");
}

MatrixXd symmetrized(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

GramMatrix layer_kernel_gram(const NetworkState& state, const MatrixXd& inputs, int layer) {
    require_inputs(state, inputs);
    require(layer >= 0 && layer <= state.L - 1, "kappa layer " + std::to_string(layer) + " outside [0, L-1]");
    GramMatrix K;
    K.label = "kappa_" + std::to_string(layer);
    if (layer == 0) {
        K.entries = inputs.transpose() * inputs;
        return K;
    }
    const BatchTrace tr = forward_batch(state, inputs);
    const MatrixXd& s = tr.post[layer - 1];
    K.entries = symmetrized(s.transpose() * s) / state.m;
    return K;
}

GramMatrix gamma_gram(const NetworkState& state, const MatrixXd& inputs, int layer) {
    require_inputs(state, inputs);
    require(layer >= 1 && layer <= state.L, "gamma layer " + std::to_string(layer) + " outside [1, L]");
    GramMatrix G;
    G.label = "gamma_" + std::to_string(layer);
    const Eigen::Index n = inputs.cols();
    if (layer == state.L) {
        G.entries = MatrixXd::Ones(n, n);
        return G;
    }
    const BatchTrace tr = forward_batch(state, inputs);
    const auto q = backprop_batch(state, tr);
    const MatrixXd& pre = tr.pre[layer - 1];
    const MatrixXd g =
        q[layer - 1].cwiseProduct(pre.unaryExpr([&](double u) { return activate_deriv(state.activation, u); }));
    G.entries = symmetrized(g.transpose() * g) / state.m;
    return G;
}

GramMatrix tangent_gram(const NetworkState& state, const MatrixXd& inputs, double beta) {
    require_inputs(state, inputs);
    require(beta >= 0.0, "bias rate beta must be >= 0");
    const BatchTrace tr = forward_batch(state, inputs);
    const auto q = backprop_batch(state, tr);
    const double inv_m = 1.0 / state.m;

    GramMatrix theta;
    theta.label = "theta";
    // l = L: gamma^(L) = 1, kappa^(L-1) from the last hidden layer
    theta.entries = inv_m * (tr.post.back().transpose() * tr.post.back());
    for (int l = 1; l < state.L; ++l) {
        const MatrixXd kappa = l == 1 ? MatrixXd(inputs.transpose() * inputs)
                                      : MatrixXd(inv_m * (tr.post[l - 2].transpose() * tr.post[l - 2]));
        const MatrixXd g = q[l - 1].cwiseProduct(
            tr.pre[l - 1].unaryExpr([&](double u) { return activate_deriv(state.activation, u); }));
        const MatrixXd gamma = inv_m * (g.transpose() * g);
        theta.entries += kappa.cwiseProduct(gamma);
        if (beta > 0.0 && state.has_bias()) theta.entries += beta * gamma;
    }
    theta.entries = symmetrized(theta.entries);
    return theta;
}

GramMatrix target_gram(const VectorXd& values) {
    return GramMatrix{values * values.transpose(), "target"};
}

namespace {

MatrixXd centered(const MatrixXd& K) {
    // H K H with H = I - (1/n) 1 1^T
    const VectorXd row_mean = K.rowwise().mean();
    const Eigen::RowVectorXd col_mean = K.colwise().mean();
    const double all_mean = K.mean();
    MatrixXd C = K;
    C.colwise() -= row_mean;
    C.rowwise() -= col_mean;
    C.array() += all_mean;
    return C;
}

}  // namespace

double cka(const GramMatrix& K, const GramMatrix& K_star) {
    require(K.n() == K_star.n() && K.entries.cols() == K_star.entries.cols(), "CKA needs equally sized Grams");
    require(K.n() >= 1, "CKA of empty Grams");
    const MatrixXd a = centered(K.entries);
    const MatrixXd b = centered(K_star.entries);
    const double na = a.norm();
    const double nb = b.norm();
    if (!(na > 0.0) || !(nb > 0.0))
        fail("degenerate_input", "CKA undefined: a centered Gram matrix has zero Frobenius norm");
    return a.cwiseProduct(b).sum() / (na * nb);
}

double min_norm_in_span(const GramMatrix& K, const VectorXd& values, double ridge) {
    require(K.n() == values.size(), "value vector length does not match the Gram size");
    require(ridge >= 0.0, "ridge must be >= 0");
    if (values.isZero(0.0)) return 0.0;
    const Eigen::Index n = K.n();
    const MatrixXd A = K.entries + ridge * MatrixXd::Identity(n, n);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(A);
    const VectorXd ev = eig.eigenvalues();
    const double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    if (ev.minCoeff() <= std::numeric_limits<double>::epsilon() * scale * static_cast<double>(n))
        fail("singular_system",
             "kernel system is singular or indefinite; pass a ridge lambda > 0 (e.g. 1e-8 * trace(K) / n)");
    const VectorXd c = eig.eigenvectors().transpose() * values;
    const double quad = (c.array().square() / ev.array()).sum();
    return std::sqrt(std::max(quad, 0.0));
}

MinNormResult min_norm_with_fallback(const GramMatrix& K, const VectorXd& values, double ridge) {
    try {
        return {min_norm_in_span(K, values, ridge), ridge, false};
    } catch (const Error& e) {
        if (e.code() != "singular_system" || ridge != 0.0) throw;
    }
    const double fallback = 1e-8 * K.entries.trace() / static_cast<double>(K.n());
    return {min_norm_in_span(K, values, fallback), fallback, true};
}

double min_eigenvalue(const GramMatrix& K) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(K.entries, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

bool is_psd(const GramMatrix& K, double rel_tol) {
    const double tol = rel_tol * std::abs(K.entries.trace()) / static_cast<double>(K.n());
    return min_eigenvalue(K) >= -tol;
}

void write_gram_csv(const GramMatrix& K, const std::filesystem::path& path) {
    CsvWriter out(path, {});
    out.raw_line("# label=" + K.label + " n=" + std::to_string(K.n()));
    for (Eigen::Index i = 0; i < K.n(); ++i) {
        std::vector<double> row(K.entries.cols());
        for (Eigen::Index j = 0; j < K.entries.cols(); ++j) row[j] = K.entries(i, j);
        out.row(row);
    }
}

}  // namespace nhl
