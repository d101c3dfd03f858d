#pragma once

#include "grass/data/shape_record.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace grass {

inline const std::vector<std::string> kCategories{"chair", "table", "candelabrum"};

// Deterministic in (category, count, seed). Shape i uses its own stream
// derived from (seed, i), so prefixes agree across counts.
std::vector<ShapeRecord> generate_shapes(const std::string& category, int count, std::uint64_t seed);

// Subclass is chosen by the caller ("four-leg", "swivel", "armchair", ...).
ShapeRecord generate_shape(const std::string& category, const std::string& subclass, std::uint64_t seed);

const std::vector<std::string>& category_subclasses(const std::string& category);

}  // namespace grass
