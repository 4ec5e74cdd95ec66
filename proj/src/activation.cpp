#include "nhl/activation.hpp"

#include "nhl/error.hpp"

namespace nhl {

std::string to_string(Activation act) {
    switch (act) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::identity: return "identity";
    }
    return "unknown";
}

Activation parse_activation(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    if (name == "identity" || name == "linear") return Activation::identity;
    fail("invalid_argument", "unknown activation '" + name + "'");
}

}  // namespace nhl
