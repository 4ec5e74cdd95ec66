#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include <Eigen/Dense>

namespace nhl {

struct NetworkState;

// Training/evaluation sample: inputs are the columns of a d x n matrix.
struct Dataset {
    Eigen::MatrixXd inputs;
    Eigen::VectorXd targets;

    int n() const { return static_cast<int>(inputs.cols()); }
    int d() const { return static_cast<int>(inputs.rows()); }
};

enum class InputDistribution { gaussian, uniform_interval, unit_ball };

struct InputSpec {
    InputDistribution distribution = InputDistribution::gaussian;
    int d = 1;
    double lo = 0.0;  // uniform_interval bounds, applied per coordinate
    double hi = 1.0;
};

InputDistribution parse_distribution(const std::string& name);
std::string to_string(InputDistribution dist);

Eigen::MatrixXd sample_inputs(const InputSpec& spec, int n, std::uint64_t seed);

using TargetFn = std::function<double(const Eigen::VectorXd&)>;

Dataset make_dataset(const Eigen::MatrixXd& inputs, const TargetFn& target);

// Second-moment matrix (1/n) sum_k x_k x_k^T.
Eigen::MatrixXd second_moment(const Eigen::MatrixXd& inputs);

}  // namespace nhl
