#include "nhl/gradflow.hpp"

#include <cmath>

#include "nhl/error.hpp"

namespace nhl {

double loss_value(Loss loss, double yhat, double y) {
    switch (loss) {
        case Loss::squared: return 0.5 * (yhat - y) * (yhat - y);
        case Loss::logistic: {
            const double u = -y * yhat;
            // log(1 + e^u) without overflow
            return u > 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
        }
    }
    return 0.0;
}

double loss_deriv(Loss loss, double yhat, double y) {
    switch (loss) {
        case Loss::squared: return yhat - y;
        case Loss::logistic: {
            const double u = y * yhat;
            // -y / (1 + e^u)
            return u > 0 ? -y * std::exp(-u) / (1.0 + std::exp(-u)) : -y / (1.0 + std::exp(u));
        }
    }
    return 0.0;
}

std::string to_string(Loss loss) { return loss == Loss::squared ? "squared" : "logistic"; }

Loss parse_loss(const std::string& name) {
    if (name == "squared") return Loss::squared;
    if (name == "logistic") return Loss::logistic;
    fail("invalid_argument", "unknown loss '" + name + "'");
}

std::string to_string(Integrator integrator) { return integrator == Integrator::euler ? "euler" : "rk4"; }

Integrator parse_integrator(const std::string& name) {
    if (name == "euler") return Integrator::euler;
    if (name == "rk4") return Integrator::rk4;
    fail("invalid_argument", "unknown integrator '" + name + "'");
}

namespace {

MatrixXd activation_deriv(Activation act, const MatrixXd& pre) {
    if (act == Activation::identity) return MatrixXd::Ones(pre.rows(), pre.cols());
    return pre.unaryExpr([act](double u) { return activate_deriv(act, u); });
}

}  // namespace

std::vector<MatrixXd> backprop_batch(const NetworkState& state, const BatchTrace& trace) {
    const int hidden = state.L - 1;
    const Eigen::Index n = trace.f.size();
    const double inv_m = 1.0 / state.m;
    std::vector<MatrixXd> q(hidden);
    q[hidden - 1] = state.params.a.replicate(1, n);
    for (int l = hidden - 1; l >= 1; --l) {
        // q^(l) = (1/m) W^(l)^T (q^(l+1) o sigma'(h^(l+1)))
        const MatrixXd g = q[l].cwiseProduct(activation_deriv(state.activation, trace.pre[l]));
        q[l - 1] = inv_m * (state.params.W[l - 1].transpose() * g);
    }
    return q;
}

BackpropTrace backprop_fields(const NetworkState& state, const VectorXd& x) {
    const BatchTrace tr = forward_batch(state, x);
    const auto q = backprop_batch(state, tr);
    BackpropTrace out;
    for (const auto& col : q) out.q.push_back(col.col(0));
    return out;
}

BackpropTrace backprop_fields(const NetworkState& state, const VectorXd& x, double target, Loss loss) {
    BackpropTrace out = backprop_fields(state, x);
    out.zeta = loss_deriv(loss, forward(state, x).f, target);
    return out;
}

VectorXd residuals(const VectorXd& predictions, const VectorXd& targets, Loss loss) {
    require(predictions.size() == targets.size(), "prediction/target length mismatch");
    VectorXd z(predictions.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = loss_deriv(loss, predictions(k), targets(k));
    return z;
}

Params flow_from_residuals(const NetworkState& state, const MatrixXd& inputs, const BatchTrace& trace,
                           const VectorXd& zeta, double beta) {
    const Eigen::Index n = inputs.cols();
    require(n >= 1, "gradient flow needs a nonempty dataset");
    require(zeta.size() == n, "residual vector length mismatch");
    const int hidden = state.L - 1;
    const VectorXd w = zeta / static_cast<double>(n);
    const auto q = backprop_batch(state, trace);

    // g[l-1] = q^(l) o sigma'(h^(l)) scaled column-wise by zeta_k / n
    std::vector<MatrixXd> g(hidden);
    for (int l = 0; l < hidden; ++l)
        g[l] = q[l].cwiseProduct(activation_deriv(state.activation, trace.pre[l])) * w.asDiagonal();

    // Negate the thin m x n factors rather than the m x m products.
    for (auto& gl : g) gl = -gl;
    Params out;
    out.z.noalias() = g[0] * inputs.transpose();
    for (int l = 1; l < hidden; ++l) {
        out.W.emplace_back(state.m, state.m);
        out.W.back().noalias() = g[l] * trace.post[l - 1].transpose();
    }
    out.a.noalias() = trace.post[hidden - 1] * (-w);
    if (state.has_bias())
        for (int l = 0; l < hidden; ++l) out.b.push_back(beta * g[l].rowwise().sum());
    return out;
}

Params gf_rhs(const NetworkState& state, const Dataset& data, Loss loss, double beta) {
    require(data.n() >= 1, "gradient flow needs a nonempty dataset");
    require(beta >= 0.0, "bias rate beta must be >= 0");
    const BatchTrace tr = forward_batch(state, data.inputs);
    return flow_from_residuals(state, data.inputs, tr, residuals(tr.f, data.targets, loss), beta);
}

double empirical_risk(const NetworkState& state, const Dataset& data, Loss loss) {
    require(data.n() >= 1, "empirical risk of an empty dataset");
    const VectorXd f = predict(state, data.inputs);
    double sum = 0.0;
    for (int k = 0; k < data.n(); ++k) sum += loss_value(loss, f(k), data.targets(k));
    return sum / data.n();
}

void GFConfig::validate() const {
    require(dt > 0.0, "time step dt must be > 0");
    require(T >= 0.0, "horizon T must be >= 0");
    require(T == 0.0 || dt <= T, "time step dt must not exceed the horizon T");
    require(beta >= 0.0, "bias rate beta must be >= 0");
    require(record_every >= 1, "record_every must be >= 1");
}

namespace {

NetworkState with_params(const NetworkState& like, Params p) {
    NetworkState s = like;
    s.params = std::move(p);
    return s;
}

}  // namespace

NetworkState gf_step(const NetworkState& state, const Dataset& data, Loss loss, double beta, double dt,
                     Integrator integrator) {
    if (integrator == Integrator::euler) {
        NetworkState next = state;
        next.params.add_scaled(gf_rhs(state, data, loss, beta), dt);
        return next;
    }
    // Classical RK4; residuals are recomputed from scratch at every stage.
    const Params k1 = gf_rhs(state, data, loss, beta);
    const Params k2 = gf_rhs(with_params(state, Params(state.params).add_scaled(k1, 0.5 * dt)), data, loss, beta);
    const Params k3 = gf_rhs(with_params(state, Params(state.params).add_scaled(k2, 0.5 * dt)), data, loss, beta);
    const Params k4 = gf_rhs(with_params(state, Params(state.params).add_scaled(k3, dt)), data, loss, beta);
    NetworkState next = state;
    next.params.add_scaled(k1, dt / 6.0).add_scaled(k2, dt / 3.0).add_scaled(k3, dt / 3.0).add_scaled(k4, dt / 6.0);
    return next;
}

Trajectory integrate(const NetworkState& initial, const Dataset& data, Loss loss, const GFConfig& cfg,
                     const SnapshotObserver& observer) {
    cfg.validate();
    initial.validate();
    require(data.n() >= 1, "gradient flow needs a nonempty dataset");
    require(data.d() == initial.d, "dataset dimension does not match the network");

    const long steps = cfg.T == 0.0 ? 0 : std::lround(cfg.T / cfg.dt);
    Trajectory traj;
    auto record = [&](long step, const NetworkState& s) {
        const double t = static_cast<double>(step) * cfg.dt;
        const double risk = empirical_risk(s, data, loss);
        traj.times.push_back(t);
        traj.risks.push_back(risk);
        if (cfg.keep_states) traj.states.push_back(s);
        if (observer) observer(static_cast<int>(step), t, s, risk);
    };

    NetworkState state = initial;
    record(0, state);
    for (long step = 1; step <= steps; ++step) {
        if (cfg.integrator == Integrator::euler)
            state.params.add_scaled(gf_rhs(state, data, loss, cfg.beta), cfg.dt);
        else
            state = gf_step(state, data, loss, cfg.beta, cfg.dt, cfg.integrator);
        if (!state.params.all_finite())
            fail("non_finite", "parameters became non-finite at step " + std::to_string(step) + " (t = " +
                                   std::to_string(step * cfg.dt) + ")");
        if (step % cfg.record_every == 0 || step == steps) record(step, state);
    }
    return traj;
}

}  // namespace nhl
