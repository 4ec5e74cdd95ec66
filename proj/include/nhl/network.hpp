#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "nhl/activation.hpp"

namespace nhl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Trainable parameters of an L-layer network of width m on R^d.
//
//   z : m x d          input-layer rows z_i
//   W : L-2 matrices   W[l-1] is the m x m matrix W^(l), l = 1..L-2
//   a : m              output weights
//   b : L-1 vectors    b[l-1] is the bias of hidden layer l (empty when disabled)
//
// The same shape doubles as the gradient-flow velocity ("parameter delta").
struct Params {
    MatrixXd z;
    std::vector<MatrixXd> W;
    VectorXd a;
    std::vector<VectorXd> b;

    Params& operator+=(const Params& other);
    Params& operator*=(double s);

    // this += s * other
    Params& add_scaled(const Params& other, double s);

    Params zeros_like() const;
    bool all_finite() const;
    double max_abs() const;
};

Params operator+(Params lhs, const Params& rhs);
Params operator*(double s, Params p);

// A finite-width network under mean-field scaling:
//   h^(1)_i(x)   = z_i . x + b^(1)_i
//   h^(l+1)_i(x) = b^(l+1)_i + (1/m) sum_j W^(l)_ij sigma(h^(l)_j(x))
//   f(x)         = (1/m) sum_i a_i sigma(h^(L-1)_i(x))
struct NetworkState {
    int L = 2;
    int m = 1;
    int d = 1;
    Activation activation = Activation::relu;
    Params params;

    bool has_bias() const { return !params.b.empty(); }

    // Throws on inconsistent shapes or non-finite entries.
    void validate() const;
};

// Zero-filled network with the right shapes.
NetworkState make_network(int L, int m, int d, Activation act, bool bias = false);

struct InitSpec {
    int L = 3;
    int m = 64;
    int d = 1;
    Activation activation = Activation::relu;
    double std_a = 1.0;
    double std_z = 1.0;
    double std_W = 1.0;
    double std_b = 1.0;
    bool bias_enabled = false;
    std::uint64_t seed = 0;
};

// I.i.d. zero-mean Gaussian draws in the order z, W^(1..L-2), a, b^(1..L-1),
// each row-major, from a single mt19937_64 stream seeded with spec.seed.
NetworkState init_network(const InitSpec& spec);

// Single-input forward pass. h[l-1] holds the pre-activations of hidden
// layer l (bias included).
struct ForwardTrace {
    double f = 0.0;
    std::vector<VectorXd> h;
};

// Forward pass over a batch of inputs stored as the columns of a d x n matrix.
// pre[l-1] and post[l-1] are m x n: pre-activations and sigma(pre) of layer l.
struct BatchTrace {
    std::vector<MatrixXd> pre;
    std::vector<MatrixXd> post;
    VectorXd f;
};

ForwardTrace forward(const NetworkState& state, const VectorXd& x);
BatchTrace forward_batch(const NetworkState& state, const MatrixXd& inputs);
VectorXd predict(const NetworkState& state, const MatrixXd& inputs);

inline constexpr double kInfNorm = std::numeric_limits<double>::infinity();

// Layer-wise group norm M^(l)_{m,p}, l in [1, L], p in [2, inf]:
//   l = 1     : ( (1/m) sum_i ||z_i||^p )^(1/p)
//   1 < l < L : ( (1/m) sum_i ( (1/m) sum_j W^(l-1)_ij^2 )^(p/2) )^(1/p)
//   l = L     : ( (1/m) sum_i a_i^2 )^(1/2)            (for every p)
// p = inf takes the maximum over i. Biases are not included.
double group_norm(const NetworkState& state, int layer, double p);

// prod_{l=1}^{L} M^(l)_{m,p}: an upper bound on the NHL complexity of f_m.
double complexity_upper_bound(const NetworkState& state, double p);

// For identity activation without biases f(x) = v . x; returns v.
VectorXd effective_linear_map(const NetworkState& state);

}  // namespace nhl
