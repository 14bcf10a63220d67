#pragma once

#include <cstddef>

namespace foley {

inline constexpr std::size_t kQuantBins = 256;

// Linear map of [-1, 1] onto bins 0..255 with half-up rounding:
// bin = clamp(floor((x + 1) / 2 * 255 + 0.5), 0, 255). Throws RangeError outside [-1, 1].
std::size_t quantize(double amplitude);

// 2 * bin / 255 - 1
double dequantize(std::size_t bin);

}  // namespace foley
