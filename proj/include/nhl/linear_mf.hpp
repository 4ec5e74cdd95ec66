#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace nhl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Mean-field limit of a deep linear network fitting f*(x) = v*.x with the
// squared loss. rho_a has unit variance and rho_z identity covariance.
struct LinearMFConfig {
    int d = 1;
    int L = 3;
    double dt = 1e-3;
    double T = 1.0;
    MatrixXd Sigma;  // empirical second moment (1/n) sum x x^T
    VectorXd v_star;
    // Memory tables are kept every mem_stride time steps; v is advanced with
    // mem_stride RK4 sub-steps of size dt between grid nodes.
    int mem_stride = 1;
    // Gauss-Seidel sweeps that resolve the implicit new-row coupling.
    int sweeps = 3;

    void validate() const;
};

// Bytes held by the two-time tables for a given configuration.
std::size_t linear_mf_memory_bytes(const LinearMFConfig& cfg);

// Smallest stride whose memory tables fit in `budget_bytes`.
int stride_for_budget(LinearMFConfig cfg, std::size_t budget_bytes);

// Two-time memory tables on the node grid t_k = k * dt * mem_stride.
//   K^(l)_{t,s} (d x d), l = 0..L-1, with K^(0) = I_d
//   c^(l)_{t,s} (scalar), l = 1..L,  with c^(L) = 1
// Stored densely and symmetrically: K^(l)_{s,t} = (K^(l)_{t,s})^T and
// c^(l)_{s,t} = c^(l)_{t,s} hold by construction.
class MemoryGrid {
public:
    MemoryGrid() = default;
    MemoryGrid(int d, int L, int nodes, double spacing);

    int d() const { return d_; }
    int L() const { return L_; }
    int nodes() const { return nodes_; }
    double spacing() const { return spacing_; }

    MatrixXd K(int level, int t, int s) const;
    double c(int level, int t, int s) const;

    // Raw storage for one level: (d*nodes) x (d*nodes) and nodes x nodes.
    MatrixXd& K_table(int level) { return K_[level - 1]; }
    MatrixXd& c_table(int level) { return c_[level - 1]; }
    const MatrixXd& K_table(int level) const { return K_[level - 1]; }
    const MatrixXd& c_table(int level) const { return c_[level - 1]; }

    std::vector<VectorXd> zeta_history;

private:
    int d_ = 0;
    int L_ = 0;
    int nodes_ = 0;
    double spacing_ = 0.0;
    std::vector<MatrixXd> K_;  // levels 1..L-1
    std::vector<MatrixXd> c_;  // levels 1..L-1
};

struct LinearTrajectory {
    std::vector<double> times;
    std::vector<VectorXd> v;
    std::vector<std::vector<double>> c_diag;   // c_diag[k][l-1] = c^(l)_{t_k,t_k}, l = 1..L-1
    std::vector<std::vector<double>> K_trace;  // K_trace[k][l-1] = tr K^(l)_{t_k,t_k} / d
    std::vector<double> risk;                  // (1/2)(v - v*)^T Sigma (v - v*)
};

struct LinearMFResult {
    LinearTrajectory trajectory;
    MemoryGrid grid;
};

// zeta = Sigma (v - v*)
VectorXd residual(const VectorXd& v, const MatrixXd& Sigma, const VectorXd& v_star);

// Causal integration of the closed two-time system. At node k the row k of
// every table is filled by trapezoid quadrature of
//   K^(l)_{t,s} = K^(l)_0 + X_t + X_s^T
//               + int_0^t int_0^s c^(l)_{r,p} K^(l-1)_{t,r} zeta_r zeta_p^T K^(l-1)_{p,s} dp dr
//   c^(l)_{t,s} = c^(l)_0 + x_t + x_s
//               + int_0^t int_0^s c^(l+1)_{t,r} c^(l+1)_{s,p} zeta_r^T K^(l)_{r,p} zeta_p dp dr
// where the boundary terms only live on the level carrying initial randomness:
//   X_t = int_0^t int_0^r c^(2)_{r,p} K^(0)_{t,r} zeta_r zeta_p^T K^(1)_{p,0} dp dr      (level 1)
//   x_t = int_0^t int_0^r c^(L)_{t,r} c^(L-1)_{p,0} zeta_r^T K^(L-2)_{r,p} zeta_p dp dr  (level L-1)
// and then v is advanced by RK4 on
//   dv/dt = -( sum_{l=1}^{L} c^(l)_t K^(l-1)_t ) zeta_t
// with the equal-time kernels frozen at the node.
LinearMFResult integrate_linear_mf(const LinearMFConfig& cfg);

// Columns: t, v_1..v_d, c_1..c_{L-1}, risk
void write_linear_trajectory_csv(const LinearTrajectory& traj, int L, const std::filesystem::path& path);

}  // namespace nhl
