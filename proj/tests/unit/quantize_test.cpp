#include <gtest/gtest.h>

#include <cmath>

#include "foley/errors.hpp"
#include "foley/quantize.hpp"

namespace foley {
namespace {

TEST(Quantize, Endpoints) {
  EXPECT_EQ(quantize(-1.0), 0u);
  EXPECT_EQ(quantize(1.0), 255u);
  EXPECT_EQ(dequantize(0), -1.0);
  EXPECT_EQ(dequantize(255), 1.0);
}

TEST(Quantize, ZeroRoundsHalfUp) {
  // (0 + 1) / 2 * 255 = 127.5
  EXPECT_EQ(quantize(0.0), 128u);
}

TEST(Quantize, GridRoundTripWithinBinSpacing) {
  std::size_t previous = 0;
  for (int i = 0; i <= 10000; ++i) {
    const double x = -1.0 + 2.0 * i / 10000.0;
    const std::size_t bin = quantize(x);
    ASSERT_LE(std::abs(dequantize(bin) - x), 1.0 / 255.0) << x;
    ASSERT_GE(bin, previous);  // monotone
    previous = bin;
  }
}

TEST(Quantize, EveryBinIsAFixedPoint) {
  for (std::size_t b = 0; b < kQuantBins; ++b) EXPECT_EQ(quantize(dequantize(b)), b);
}

TEST(Quantize, OutOfRangeIsRangeError) {
  EXPECT_THROW(quantize(1.0000001), RangeError);
  EXPECT_THROW(quantize(-1.5), RangeError);
  EXPECT_THROW(quantize(std::nan("")), RangeError);
  EXPECT_THROW(dequantize(256), RangeError);
}

}  // namespace
}  // namespace foley
