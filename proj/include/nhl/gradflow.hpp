#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nhl/dataset.hpp"
#include "nhl/network.hpp"

namespace nhl {

enum class Loss { squared, logistic };

// squared:  l(yhat, y) = (yhat - y)^2 / 2
// logistic: l(yhat, y) = log(1 + exp(-y yhat)), labels y in {-1, +1}
double loss_value(Loss loss, double yhat, double y);
double loss_deriv(Loss loss, double yhat, double y);

std::string to_string(Loss loss);
Loss parse_loss(const std::string& name);

// Adjoint fields of one input. q[l-1] is q^(l), l = 1..L-1, with q^(L-1) = a
// and q^(l)_j = (1/m) sum_i W^(l)_ij q^(l+1)_i sigma'(h^(l+1)_i).
struct BackpropTrace {
    std::vector<VectorXd> q;
    std::optional<double> zeta;
};

BackpropTrace backprop_fields(const NetworkState& state, const VectorXd& x);
BackpropTrace backprop_fields(const NetworkState& state, const VectorXd& x, double target, Loss loss);

// Batched adjoints: q[l-1] is m x n.
std::vector<MatrixXd> backprop_batch(const NetworkState& state, const BatchTrace& trace);

// Residuals zeta_k = d/dyhat l(f(x_k), y_k).
VectorXd residuals(const VectorXd& predictions, const VectorXd& targets, Loss loss);

// Gradient-flow velocity for arbitrary residuals zeta over the columns of
// `inputs`:
//   dz_i      = -E[zeta q^(1)_i sigma'(h^(1)_i) x]
//   da_i      = -E[zeta sigma(h^(L-1)_i)]
//   dW^(l)_ij = -E[zeta q^(l+1)_i sigma'(h^(l+1)_i) sigma(h^(l)_j)]
//   db^(l)_i  = -beta E[zeta q^(l)_i sigma'(h^(l)_i)]
// This equals (-m, -m, -m^2, -beta m) times the gradient of E[zeta f].
Params flow_from_residuals(const NetworkState& state, const MatrixXd& inputs, const BatchTrace& trace,
                           const VectorXd& zeta, double beta);

// Right-hand side of the gradient-flow ODE for the empirical risk.
Params gf_rhs(const NetworkState& state, const Dataset& data, Loss loss, double beta = 0.0);

double empirical_risk(const NetworkState& state, const Dataset& data, Loss loss);

enum class Integrator { euler, rk4 };

std::string to_string(Integrator integrator);
Integrator parse_integrator(const std::string& name);

struct GFConfig {
    double dt = 1e-3;
    double T = 1.0;
    Integrator integrator = Integrator::rk4;
    double beta = 0.0;
    int record_every = 1;
    // When false, snapshots are only handed to the observer (wide networks).
    bool keep_states = true;

    void validate() const;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<NetworkState> states;
    std::vector<double> risks;
};

// Called at every recorded snapshot with (step index, time, state, risk).
using SnapshotObserver = std::function<void(int, double, const NetworkState&, double)>;

// Explicit integration of the gradient flow. Snapshots are taken at t = 0,
// every `record_every` steps, and at the final step; the final time is
// round(T/dt)*dt.
Trajectory integrate(const NetworkState& initial, const Dataset& data, Loss loss, const GFConfig& cfg,
                     const SnapshotObserver& observer = {});

// One explicit step of size dt; exposed for constrained training loops.
NetworkState gf_step(const NetworkState& state, const Dataset& data, Loss loss, double beta, double dt,
                     Integrator integrator);

}  // namespace nhl
