#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "glean/bundle.hpp"

namespace glean {

inline constexpr const char* kPlantedModel = "planted";

/// `n` synthetic tables, each with one qa example (planted answer cell and a
/// simple gold SQL query) and one verdict example whose label is a fair coin
/// independent of its content. Predictions under kPlantedModel copy the gold.
/// Throws Error(kInvalidArgument) when n is 0.
DatasetBundle synth_generate(std::size_t n, std::uint64_t seed);

}  // namespace glean
