#include "foley/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "foley/errors.hpp"

namespace foley {

std::size_t quantize(double amplitude) {
  if (!(amplitude >= -1.0 && amplitude <= 1.0)) {
    throw RangeError("quantize: amplitude " + std::to_string(amplitude) + " outside [-1, 1]");
  }
  const double bin = std::floor((amplitude + 1.0) / 2.0 * 255.0 + 0.5);
  return static_cast<std::size_t>(std::clamp(bin, 0.0, 255.0));
}

double dequantize(std::size_t bin) {
  if (bin >= kQuantBins) throw RangeError("dequantize: bin " + std::to_string(bin) + " outside [0, 255]");
  return 2.0 * static_cast<double>(bin) / 255.0 - 1.0;
}

}  // namespace foley
