#pragma once

#include <cmath>
#include <string>

namespace nhl {

enum class Activation { relu, tanh, identity };

// All three satisfy sigma(0) = 0 and are 1-Lipschitz.
inline double activate(Activation act, double u) {
    switch (act) {
        case Activation::relu: return u > 0.0 ? u : 0.0;
        case Activation::tanh: return std::tanh(u);
        case Activation::identity: return u;
    }
    return u;
}

// relu'(0) is taken to be 0.
inline double activate_deriv(Activation act, double u) {
    switch (act) {
        case Activation::relu: return u > 0.0 ? 1.0 : 0.0;
        case Activation::tanh: {
            const double t = std::tanh(u);
            return 1.0 - t * t;
        }
        case Activation::identity: return 1.0;
    }
    return 1.0;
}

inline constexpr double lipschitz_constant(Activation) { return 1.0; }

// relu and identity are positively 1-homogeneous.
inline constexpr bool is_homogeneous(Activation act) { return act != Activation::tanh; }

std::string to_string(Activation act);
Activation parse_activation(const std::string& name);

}  // namespace nhl
