#pragma once

#include <cstdint>
#include <string_view>

namespace nhl {

// 64-bit FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t fnv1a64(std::string_view text);

std::uint64_t splitmix64(std::uint64_t x);

// Per-component seed: splitmix64(master ^ fnv1a64(component)).
// Every random draw in an experiment flows through this derivation.
std::uint64_t derive_seed(std::uint64_t master, std::string_view component);
std::uint64_t derive_seed(std::uint64_t master, std::string_view component, std::uint64_t index);

}  // namespace nhl
