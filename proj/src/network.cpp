#include "nhl/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "nhl/error.hpp"

namespace nhl {

Params& Params::operator+=(const Params& other) { return add_scaled(other, 1.0); }

Params& Params::operator*=(double s) {
    z *= s;
    for (auto& w : W) w *= s;
    a *= s;
    for (auto& v : b) v *= s;
    return *this;
}

Params& Params::add_scaled(const Params& other, double s) {
    z.noalias() += s * other.z;
    for (std::size_t l = 0; l < W.size(); ++l) W[l].noalias() += s * other.W[l];
    a.noalias() += s * other.a;
    for (std::size_t l = 0; l < b.size(); ++l) b[l].noalias() += s * other.b[l];
    return *this;
}

Params Params::zeros_like() const {
    Params out;
    out.z = MatrixXd::Zero(z.rows(), z.cols());
    for (const auto& w : W) out.W.push_back(MatrixXd::Zero(w.rows(), w.cols()));
    out.a = VectorXd::Zero(a.size());
    for (const auto& v : b) out.b.push_back(VectorXd::Zero(v.size()));
    return out;
}

bool Params::all_finite() const {
    if (!z.allFinite() || !a.allFinite()) return false;
    for (const auto& w : W)
        if (!w.allFinite()) return false;
    for (const auto& v : b)
        if (!v.allFinite()) return false;
    return true;
}

double Params::max_abs() const {
    double out = 0.0;
    if (z.size()) out = std::max(out, z.cwiseAbs().maxCoeff());
    if (a.size()) out = std::max(out, a.cwiseAbs().maxCoeff());
    for (const auto& w : W)
        if (w.size()) out = std::max(out, w.cwiseAbs().maxCoeff());
    for (const auto& v : b)
        if (v.size()) out = std::max(out, v.cwiseAbs().maxCoeff());
    return out;
}

Params operator+(Params lhs, const Params& rhs) { return lhs += rhs; }

Params operator*(double s, Params p) { return p *= s; }

void NetworkState::validate() const {
    require(L >= 2, "network depth L must be >= 2, got " + std::to_string(L));
    require(m >= 1, "network width m must be >= 1, got " + std::to_string(m));
    require(d >= 1, "input dimension d must be >= 1, got " + std::to_string(d));
    require(params.z.rows() == m && params.z.cols() == d, "z must be m x d");
    require(static_cast<int>(params.W.size()) == L - 2, "expected L-2 middle weight matrices");
    for (const auto& w : params.W) require(w.rows() == m && w.cols() == m, "W^(l) must be m x m");
    require(params.a.size() == m, "a must have length m");
    require(params.b.empty() || static_cast<int>(params.b.size()) == L - 1,
            "biases must be absent or given for all L-1 hidden layers");
    for (const auto& v : params.b) require(v.size() == m, "b^(l) must have length m");
    if (!params.all_finite()) fail("non_finite", "network parameters contain non-finite entries");
}

NetworkState make_network(int L, int m, int d, Activation act, bool bias) {
    require(L >= 2, "network depth L must be >= 2, got " + std::to_string(L));
    require(m >= 1, "network width m must be >= 1, got " + std::to_string(m));
    require(d >= 1, "input dimension d must be >= 1, got " + std::to_string(d));
    NetworkState s;
    s.L = L;
    s.m = m;
    s.d = d;
    s.activation = act;
    s.params.z = MatrixXd::Zero(m, d);
    for (int l = 0; l < L - 2; ++l) s.params.W.push_back(MatrixXd::Zero(m, m));
    s.params.a = VectorXd::Zero(m);
    if (bias)
        for (int l = 0; l < L - 1; ++l) s.params.b.push_back(VectorXd::Zero(m));
    return s;
}

NetworkState init_network(const InitSpec& spec) {
    require(spec.std_a >= 0 && spec.std_z >= 0 && spec.std_W >= 0 && spec.std_b >= 0,
            "initialization standard deviations must be nonnegative");
    NetworkState s = make_network(spec.L, spec.m, spec.d, spec.activation, spec.bias_enabled);
    std::mt19937_64 gen(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto fill = [&](auto& mat, double sd) {
        for (Eigen::Index i = 0; i < mat.rows(); ++i)
            for (Eigen::Index j = 0; j < mat.cols(); ++j) mat(i, j) = sd * normal(gen);
    };
    fill(s.params.z, spec.std_z);
    for (auto& w : s.params.W) fill(w, spec.std_W);
    fill(s.params.a, spec.std_a);
    for (auto& v : s.params.b) fill(v, spec.std_b);
    return s;
}

namespace {

MatrixXd apply_activation(Activation act, const MatrixXd& pre) {
    if (act == Activation::identity) return pre;
    return pre.unaryExpr([act](double u) { return activate(act, u); });
}

}  // namespace

BatchTrace forward_batch(const NetworkState& state, const MatrixXd& inputs) {
    require(inputs.rows() == state.d, "input dimension mismatch: expected " + std::to_string(state.d) +
                                          ", got " + std::to_string(inputs.rows()));
    const auto& p = state.params;
    const double inv_m = 1.0 / state.m;
    BatchTrace tr;
    tr.pre.reserve(state.L - 1);
    tr.post.reserve(state.L - 1);

    MatrixXd h = p.z * inputs;
    if (state.has_bias()) h.colwise() += p.b[0];
    tr.post.push_back(apply_activation(state.activation, h));
    tr.pre.push_back(std::move(h));
    for (int l = 1; l < state.L - 1; ++l) {
        MatrixXd next = inv_m * (p.W[l - 1] * tr.post.back());
        if (state.has_bias()) next.colwise() += p.b[l];
        tr.post.push_back(apply_activation(state.activation, next));
        tr.pre.push_back(std::move(next));
    }
    tr.f = inv_m * (tr.post.back().transpose() * p.a);
    return tr;
}

ForwardTrace forward(const NetworkState& state, const VectorXd& x) {
    BatchTrace batch = forward_batch(state, x);
    ForwardTrace out;
    out.f = batch.f(0);
    out.h.reserve(batch.pre.size());
    for (const auto& h : batch.pre) out.h.push_back(h.col(0));
    return out;
}

VectorXd predict(const NetworkState& state, const MatrixXd& inputs) {
    return forward_batch(state, inputs).f;
}

namespace {

// ( (1/m) sum_i r_i^p )^(1/p) with r_i >= 0, or max_i r_i when p = inf.
double power_mean(const VectorXd& r, double p) {
    if (std::isinf(p)) return r.size() ? r.maxCoeff() : 0.0;
    const double mean = r.array().pow(p).mean();
    return std::pow(mean, 1.0 / p);
}

}  // namespace

double group_norm(const NetworkState& state, int layer, double p) {
    require(layer >= 1 && layer <= state.L, "layer index " + std::to_string(layer) + " outside [1, L]");
    require(p >= 2.0, "group norm exponent p must be >= 2");
    const auto& prm = state.params;
    if (layer == state.L) return std::sqrt(prm.a.squaredNorm() / state.m);
    if (layer == 1) return power_mean(prm.z.rowwise().norm(), p);
    const MatrixXd& w = prm.W[layer - 2];
    const VectorXd row_rms = (w.rowwise().squaredNorm() / state.m).cwiseSqrt();
    return power_mean(row_rms, p);
}

double complexity_upper_bound(const NetworkState& state, double p) {
    double prod = 1.0;
    for (int l = 1; l <= state.L; ++l) prod *= group_norm(state, l, p);
    return prod;
}

VectorXd effective_linear_map(const NetworkState& state) {
    if (state.activation != Activation::identity)
        fail("invalid_argument", "effective_linear_map requires the identity activation");
    if (state.has_bias()) fail("invalid_argument", "effective_linear_map requires biases to be disabled");
    const double inv_m = 1.0 / state.m;
    // Row vector r^T = (1/m) a^T (1/m) W^(L-2) ... (1/m) W^(1); v = z^T r.
    VectorXd r = inv_m * state.params.a;
    for (int l = state.L - 3; l >= 0; --l) r = inv_m * (state.params.W[l].transpose() * r);
    return state.params.z.transpose() * r;
}

}  // namespace nhl
