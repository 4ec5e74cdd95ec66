#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "nhl/dataset.hpp"
#include "nhl/network.hpp"

namespace testing {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline nhl::NetworkState random_net(int L, int m, int d, nhl::Activation act, bool bias, std::uint64_t seed,
                                    double scale = 1.0) {
    nhl::InitSpec s;
    s.L = L;
    s.m = m;
    s.d = d;
    s.activation = act;
    s.bias_enabled = bias;
    s.std_a = s.std_z = s.std_W = s.std_b = scale;
    s.seed = seed;
    return nhl::init_network(s);
}

inline MatrixXd gaussian_matrix(int rows, int cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    MatrixXd out(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) out(i, j) = normal(rng);
    return out;
}

// Points drawn uniformly from the closed unit ball.
inline MatrixXd ball_points(int d, int n, std::uint64_t seed) {
    nhl::InputSpec spec;
    spec.distribution = nhl::InputDistribution::unit_ball;
    spec.d = d;
    return nhl::sample_inputs(spec, n, seed);
}

}  // namespace testing
