#include "nhl/dataset.hpp"

#include <cmath>
#include <random>

#include "nhl/error.hpp"

namespace nhl {

InputDistribution parse_distribution(const std::string& name) {
    if (name == "gaussian") return InputDistribution::gaussian;
    if (name == "uniform_interval" || name == "uniform") return InputDistribution::uniform_interval;
    if (name == "unit_ball") return InputDistribution::unit_ball;
    fail("invalid_argument", "unknown input distribution '" + name + "'");
}

std::string to_string(InputDistribution dist) {
    switch (dist) {
        case InputDistribution::gaussian: return "gaussian";
        case InputDistribution::uniform_interval: return "uniform_interval";
        case InputDistribution::unit_ball: return "unit_ball";
    }
    return "unknown";
}

Eigen::MatrixXd sample_inputs(const InputSpec& spec, int n, std::uint64_t seed) {
    require(spec.d >= 1, "input dimension must be >= 1");
    require(n >= 1, "sample size must be >= 1");
    std::mt19937_64 gen(seed);
    Eigen::MatrixXd x(spec.d, n);
    switch (spec.distribution) {
        case InputDistribution::gaussian: {
            std::normal_distribution<double> normal(0.0, 1.0);
            for (int k = 0; k < n; ++k)
                for (int j = 0; j < spec.d; ++j) x(j, k) = normal(gen);
            break;
        }
        case InputDistribution::uniform_interval: {
            require(spec.hi > spec.lo, "uniform interval needs hi > lo");
            std::uniform_real_distribution<double> unif(spec.lo, spec.hi);
            for (int k = 0; k < n; ++k)
                for (int j = 0; j < spec.d; ++j) x(j, k) = unif(gen);
            break;
        }
        case InputDistribution::unit_ball: {
            // Gaussian direction, radius U^(1/d).
            std::normal_distribution<double> normal(0.0, 1.0);
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            for (int k = 0; k < n; ++k) {
                Eigen::VectorXd g(spec.d);
                for (int j = 0; j < spec.d; ++j) g(j) = normal(gen);
                const double radius = std::pow(unif(gen), 1.0 / spec.d);
                x.col(k) = radius * g / g.norm();
            }
            break;
        }
    }
    return x;
}

Dataset make_dataset(const Eigen::MatrixXd& inputs, const TargetFn& target) {
    Dataset ds;
    ds.inputs = inputs;
    ds.targets.resize(inputs.cols());
    for (Eigen::Index k = 0; k < inputs.cols(); ++k) ds.targets(k) = target(inputs.col(k));
    return ds;
}

Eigen::MatrixXd second_moment(const Eigen::MatrixXd& inputs) {
    require(inputs.cols() >= 1, "second moment of an empty sample");
    return inputs * inputs.transpose() / static_cast<double>(inputs.cols());
}

}  // namespace nhl
