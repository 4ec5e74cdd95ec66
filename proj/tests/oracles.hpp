#pragma once

#include <algorithm>
#include <vector>

#include <Eigen/Dense>

#include "nhl/dataset.hpp"
#include "nhl/network.hpp"

// Reference implementations written without the library's forward pass.
namespace testing::oracle {

using namespace nhl;

// Loop-based forward pass, written independently of the library.
inline double oracle_output(const NetworkState& s, const VectorXd& x) {
    const int m = s.m;
    auto sig = [&](double u) { return activate(s.activation, u); };
    std::vector<double> h(m), next(m);
    for (int i = 0; i < m; ++i) {
        h[i] = s.has_bias() ? s.params.b[0](i) : 0.0;
        for (int k = 0; k < s.d; ++k) h[i] += s.params.z(i, k) * x(k);
    }
    for (int l = 1; l < s.L - 1; ++l) {
        for (int i = 0; i < m; ++i) {
            double acc = 0.0;
            for (int j = 0; j < m; ++j) acc += s.params.W[l - 1](i, j) * sig(h[j]);
            next[i] = acc / m + (s.has_bias() ? s.params.b[l](i) : 0.0);
        }
        h.swap(next);
    }
    double f = 0.0;
    for (int i = 0; i < m; ++i) f += s.params.a(i) * sig(h[i]);
    return f / m;
}

inline double oracle_risk(const NetworkState& s, const Dataset& data) {
    double r = 0.0;
    for (int k = 0; k < data.n(); ++k) {
        const double e = oracle_output(s, data.inputs.col(k)) - data.targets(k);
        r += 0.5 * e * e;
    }
    return r / data.n();
}

inline double compare(const Eigen::Ref<const MatrixXd>& analytic, const Eigen::Ref<const MatrixXd>& fd) {
    const double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-300);
    return (analytic - fd).cwiseAbs().maxCoeff() / scale;
}

// factor * central difference of the squared risk over each entry of one block.
template <class Access>
MatrixXd central_fd(NetworkState s, const Dataset& data, Access access, double factor) {
    const double h = 1e-5;
    auto& block = access(s.params);
    MatrixXd out(block.rows(), block.cols());
    for (Eigen::Index i = 0; i < block.rows(); ++i)
        for (Eigen::Index j = 0; j < block.cols(); ++j) {
            const double keep = block(i, j);
            block(i, j) = keep + h;
            const double up = oracle_risk(s, data);
            block(i, j) = keep - h;
            const double down = oracle_risk(s, data);
            block(i, j) = keep;
            out(i, j) = factor * (up - down) / (2.0 * h);
        }
    return out;
}

}  // namespace testing::oracle
