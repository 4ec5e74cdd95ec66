#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "nhl/network.hpp"

namespace nhl {

// M (sqrt(2 L log(2 J)) + 1) / sqrt(n)
double rademacher_bound(int L, int n, double M, double J_sigma = 1.0);

struct AscentConfig {
    int steps = 200;
    double lr = 0.5;
    int restarts = 5;
};

struct RadEstimate {
    double estimate = 0.0;
    double stderr_ = 0.0;  // Monte Carlo standard error over the sign draws
    int num_tau = 0;
    double bound = 0.0;
};

// Rescales every layer of a bias-free relu network so that each group norm
// M^(l)_{m,2} equals target_product^(1/L). With target_product equal to the
// current product the output is unchanged. Networks with a zero layer are
// returned as is.
NetworkState balance_layers(const NetworkState& state, double target_product);

// (1/n) sum_k tau_k f(x_k)
double signed_correlation(const NetworkState& state, const MatrixXd& inputs, const VectorXd& tau);

// Lower estimate of E_tau[(1/n) sup_f sum_k tau_k f(x_k)] over width-m relu
// networks with prod_l M^(l)_{m,2} <= M. Each sign vector gets `restarts`
// projected gradient ascents; the best value seen is kept. Inputs (columns)
// must lie in the closed unit ball.
RadEstimate estimate_rademacher(int L, int m, const MatrixXd& inputs, double M, int num_tau,
                                const AscentConfig& ascent, std::uint64_t seed);

// Appends one row keyed by (L, n, M, seed); the header is written once.
// Columns: L, n, M, seed, m, num_tau, estimate, stderr, bound
void append_rad_estimate_csv(const std::filesystem::path& path, int L, int n, double M, std::uint64_t seed, int m,
                             const RadEstimate& est);

enum class DepthTarget { pyramid, radial_bump };

DepthTarget parse_depth_target(const std::string& name);
std::string to_string(DepthTarget kind);

// pyramid:     max(1 - ||x||_1, 0)
// radial_bump: 1 on ||x|| <= eps0, linear down to 0 at ||x|| = 1, 0 outside
double depth_sep_target(DepthTarget kind, const VectorXd& x, double eps0 = 0.5);

}  // namespace nhl
