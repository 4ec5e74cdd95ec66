#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "nhl/network.hpp"

namespace nhl {

// Index multisets I^(l), l = 1..L-1, each of size m_out with entries in [0, m_teacher).
using LayerIndices = std::vector<std::vector<int>>;

// Draws every I^(l) i.i.d. uniform with replacement; layers are independent.
LayerIndices draw_layer_indices(int L, int m_teacher, int m_out, std::uint64_t seed);

// Width-m_out network built from `teacher` along the given index sets:
//   z   = teacher z rows at I^(1)
//   W^(l) = teacher W^(l) restricted to rows I^(l+1), columns I^(l)
//   a   = teacher a at I^(L-1)
//   b^(l) = teacher b^(l) at I^(l)
// No weight is refitted. The identity map at full width returns the teacher.
NetworkState subsample_with_indices(const NetworkState& teacher, const LayerIndices& indices);

NetworkState subsample_network(const NetworkState& teacher, int m_out, std::uint64_t seed);

struct DecayRow {
    int m_out = 0;
    int trials = 0;
    double mean_mse = 0.0;
    double std_mse = 0.0;  // sample standard deviation over trials
};

struct DecayTable {
    std::vector<DecayRow> rows;
    // Least-squares fit of log(mean MSE) against log(m_out). Empty when some
    // mean MSE is zero (the log is undefined) or fewer than two rows exist.
    std::optional<double> slope;
    std::optional<double> intercept;
};

// Mean squared deviation (1/n) sum_k (f_sub(x_k) - f_teacher(x_k))^2 over the
// columns of eval_inputs, averaged over `trials` independent subsamples per
// width. Trial t at width m uses derive_seed(seed, "sampler.m<m>", t).
DecayTable mse_decay(const NetworkState& teacher, const std::vector<int>& m_list, int trials,
                     const MatrixXd& eval_inputs, std::uint64_t seed);

// (L-1)^2 * M_nu * (prod_l M^(l)_{m,inf})^2 / m_out for 1-Lipschitz activations,
// with M_nu the empirical mean of ||x||^2.
double sampling_error_bound(const NetworkState& teacher, double M_nu, int m_out);

double mean_squared_norm(const MatrixXd& inputs);

// Columns: m_out, trials, mean_mse, std_mse, bound
void write_decay_csv(const DecayTable& table, const NetworkState& teacher, double M_nu,
                     const std::filesystem::path& path);

}  // namespace nhl
