#include <gtest/gtest.h>

#include <cmath>

#include "foley/errors.hpp"
#include "foley/grad_check.hpp"
#include "foley/ops.hpp"
#include "test_util.hpp"

namespace foley {
namespace {

using test::random_tensor;
using test::values;
using V = std::vector<Tensor>;

constexpr double kOpTol = 1e-4;

Tensor vec(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor::from({n}, std::move(v));
}

// --- linear ----------------------------------------------------------------

TEST(Linear, IdentityWeights) {
  const Tensor y = ops::linear(vec({1, 2}), Tensor::from({2, 2}, {1, 0, 0, 1}), vec({0, 0}));
  EXPECT_EQ(values(y), (std::vector<double>{1, 2}));
}

TEST(Linear, HandProductWithBias) {
  const Tensor y = ops::linear(vec({1, 2}), Tensor::from({2, 1}, {1, 1}), vec({3}));
  EXPECT_EQ(values(y), (std::vector<double>{6}));
}

TEST(Linear, ZeroInputPassesBias) {
  Rng rng(1);
  const Tensor y = ops::linear(vec({0, 0}), random_tensor({2, 2}, rng), vec({5, 7}));
  EXPECT_EQ(values(y), (std::vector<double>{5, 7}));
}

TEST(Linear, BatchedLeadingAxesMatchRowwiseOracle) {
  Rng rng(2);
  const Tensor x = random_tensor({2, 3, 4}, rng), w = random_tensor({4, 5}, rng), b = random_tensor({5}, rng);
  const Tensor y = ops::linear(x, w, b);
  ASSERT_EQ(y.shape(), (Shape{2, 3, 5}));
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t o = 0; o < 5; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < 4; ++i) acc += x[r * 4 + i] * w[i * 5 + o];
      EXPECT_NEAR(y[r * 5 + o], acc, 1e-12);
    }
}

TEST(Linear, ShapeMismatchNamesBothShapes) {
  try {
    ops::linear(Tensor::zeros({3}), Tensor::zeros({2, 2}), Tensor());
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(3)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("(2, 2)"), std::string::npos) << msg;
  }
}

TEST(Linear, GradCheck) {
  Rng rng(3);
  const double e = grad_check([](const V& in) { return ops::linear(in[0], in[1], in[2]); },
                              {random_tensor({3, 3}, rng), random_tensor({3, 3}, rng), random_tensor({3}, rng)});
  EXPECT_LT(e, kOpTol);
}

// --- conv1d_causal ---------------------------------------------------------

TEST(Conv1dCausal, KernelTwoDilationOne) {
  const Tensor y = ops::conv1d_causal(Tensor::from({1, 3}, {1, 2, 3}), Tensor::from({1, 1, 2}, {1, 1}), 1);
  EXPECT_EQ(values(y), (std::vector<double>{1, 3, 5}));
}

TEST(Conv1dCausal, KernelTwoDilationTwo) {
  const Tensor y = ops::conv1d_causal(Tensor::from({1, 3}, {1, 2, 3}), Tensor::from({1, 1, 2}, {1, 1}), 2);
  EXPECT_EQ(values(y), (std::vector<double>{1, 2, 4}));
}

TEST(Conv1dCausal, IdentityKernel) {
  const Tensor y = ops::conv1d_causal(Tensor::from({1, 3}, {5, 5, 5}), Tensor::from({1, 1, 1}, {1}), 1);
  EXPECT_EQ(values(y), (std::vector<double>{5, 5, 5}));
}

TEST(Conv1dCausal, NonPositiveDilationIsParameterError) {
  EXPECT_THROW(ops::conv1d_causal(Tensor::zeros({1, 3}), Tensor::zeros({1, 1, 2}), 0), ParameterError);
  EXPECT_THROW(ops::conv1d_causal(Tensor::zeros({1, 3}), Tensor::zeros({1, 1, 2}), -1), ParameterError);
}

TEST(Conv1dCausal, MatchesDirectSumOracle) {
  Rng rng(4);
  const std::size_t cin = 2, cout = 3, T = 9, K = 3;
  const long d = 2;
  const Tensor x = random_tensor({cin, T}, rng), k = random_tensor({cout, cin, K}, rng), b = random_tensor({cout}, rng);
  const Tensor y = ops::conv1d_causal(x, k, d, b);
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t t = 0; t < T; ++t) {
      // Tap j reads x[t - d*(K-1-j)], so the last tap sees the current step.
      double acc = b[o];
      for (std::size_t i = 0; i < cin; ++i)
        for (std::size_t j = 0; j < K; ++j) {
          const long src = static_cast<long>(t) - d * static_cast<long>(K - 1 - j);
          if (src >= 0) acc += k[(o * cin + i) * K + j] * x[i * T + static_cast<std::size_t>(src)];
        }
      EXPECT_NEAR(y[o * T + t], acc, 1e-12);
    }
}

TEST(Conv1dCausal, PerturbationOnlyAffectsLaterSteps) {
  Rng rng(5);
  const Tensor x = random_tensor({2, 16}, rng), k = random_tensor({2, 2, 3}, rng);
  const Tensor y = ops::conv1d_causal(x, k, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t t = rng.below(16);
    Tensor xp = test::with_value(x, t, x[t] + 1.0);
    const Tensor yp = ops::conv1d_causal(xp, k, 3);
    for (std::size_t o = 0; o < 2; ++o)
      for (std::size_t s = 0; s < t; ++s) EXPECT_EQ(y[o * 16 + s], yp[o * 16 + s]);
  }
}

TEST(Conv1dCausal, GradCheck) {
  Rng rng(6);
  const double e = grad_check([](const V& in) { return ops::conv1d_causal(in[0], in[1], 2, in[2]); },
                              {random_tensor({2, 7}, rng), random_tensor({3, 2, 3}, rng), random_tensor({3}, rng)});
  EXPECT_LT(e, kOpTol);
}

TEST(Conv1d, StrideAndPaddingShapes) {
  ops::Conv1dOptions opt;
  opt.stride = 2;
  const Tensor y = ops::conv1d(Tensor::zeros({2, 8}), Tensor::zeros({4, 2, 2}), Tensor(), opt);
  EXPECT_EQ(y.shape(), (Shape{4, 4}));
  opt.pad_left = 1;
  opt.pad_right = 1;
  opt.stride = 1;
  EXPECT_EQ(ops::conv1d(Tensor::zeros({2, 8}), Tensor::zeros({4, 2, 3}), Tensor(), opt).shape(), (Shape{4, 8}));
}

TEST(Conv1d, StridedGradCheck) {
  Rng rng(7);
  ops::Conv1dOptions opt;
  opt.stride = 2;
  const double e = grad_check([&](const V& in) { return ops::conv1d(in[0], in[1], in[2], opt); },
                              {random_tensor({2, 8}, rng), random_tensor({3, 2, 2}, rng), random_tensor({3}, rng)});
  EXPECT_LT(e, kOpTol);
}

// --- conv3d ----------------------------------------------------------------

TEST(Conv3d, AllOnesSumsEight) {
  const Tensor y = ops::conv3d(Tensor::full({1, 2, 2, 2}, 1.0), Tensor::full({1, 1, 2, 2, 2}, 1.0), Tensor(),
                               {1, 1, 1}, {0, 0, 0});
  ASSERT_EQ(y.size(), 1u);
  EXPECT_EQ(y[0], 8.0);
}

TEST(Conv3d, UnitKernelIsIdentity) {
  Rng rng(8);
  const Tensor x = random_tensor({1, 3, 4, 5}, rng);
  const Tensor y = ops::conv3d(x, Tensor::full({1, 1, 1, 1, 1}, 1.0), Tensor(), {1, 1, 1}, {0, 0, 0});
  EXPECT_EQ(values(y), values(x));
}

TEST(Conv3d, StrideShapeFormula) {
  const Tensor y = ops::conv3d(Tensor::zeros({1, 2, 4, 4}), Tensor::full({1, 1, 1, 2, 2}, 1.0), Tensor(),
                               {1, 2, 2}, {0, 0, 0});
  EXPECT_EQ(y.shape(), (Shape{1, 2, 2, 2}));
}

TEST(Conv3d, KernelLargerThanPaddedInputIsDimensionError) {
  EXPECT_THROW(ops::conv3d(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 3, 3, 3}), Tensor(), {1, 1, 1},
                           {0, 0, 0}),
               DimensionError);
}

TEST(Conv3d, PaddedMatchesDirectOracle) {
  Rng rng(9);
  const Tensor x = random_tensor({2, 2, 3, 3}, rng), k = random_tensor({2, 2, 3, 3, 3}, rng);
  const Tensor y = ops::conv3d(x, k, Tensor(), {1, 1, 1}, {1, 1, 1});
  ASSERT_EQ(y.shape(), (Shape{2, 2, 3, 3}));
  auto xv = [&](long c, long t, long h, long w) -> double {
    if (t < 0 || t >= 2 || h < 0 || h >= 3 || w < 0 || w >= 3) return 0.0;
    return x[((c * 2 + t) * 3 + h) * 3 + w];
  };
  for (long o = 0; o < 2; ++o)
    for (long t = 0; t < 2; ++t)
      for (long h = 0; h < 3; ++h)
        for (long w = 0; w < 3; ++w) {
          double acc = 0;
          for (long c = 0; c < 2; ++c)
            for (long a = 0; a < 3; ++a)
              for (long b = 0; b < 3; ++b)
                for (long d = 0; d < 3; ++d)
                  acc += k[(((o * 2 + c) * 3 + a) * 3 + b) * 3 + d] * xv(c, t + a - 1, h + b - 1, w + d - 1);
          EXPECT_NEAR(y[((o * 2 + t) * 3 + h) * 3 + w], acc, 1e-12);
        }
}

TEST(Conv3d, GradCheck) {
  Rng rng(10);
  const double e = grad_check([](const V& in) { return ops::conv3d(in[0], in[1], in[2], {1, 2, 1}, {1, 1, 0}); },
                              {random_tensor({2, 3, 4, 3}, rng), random_tensor({2, 2, 2, 3, 2}, rng),
                               random_tensor({2}, rng)});
  EXPECT_LT(e, kOpTol);
}

// --- conv1x1_channels ------------------------------------------------------

TEST(Conv1x1, IdentityKernel) {
  Rng rng(11);
  const Tensor x = random_tensor({2, 5}, rng);
  EXPECT_EQ(values(ops::conv1x1_channels(x, Tensor::from({2, 2}, {1, 0, 0, 1}))), values(x));
}

TEST(Conv1x1, ChannelSum) {
  const Tensor y = ops::conv1x1_channels(Tensor::from({2, 2}, {1, 2, 3, 4}), Tensor::from({1, 2}, {1, 1}));
  EXPECT_EQ(y.shape(), (Shape{1, 2}));
  EXPECT_EQ(values(y), (std::vector<double>{4, 6}));
}

TEST(Conv1x1, ZeroKernel) {
  Rng rng(12);
  const Tensor y = ops::conv1x1_channels(random_tensor({3, 2, 2}, rng), Tensor::zeros({2, 3}));
  EXPECT_EQ(y.shape(), (Shape{2, 2, 2}));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Conv1x1, ChannelMismatchIsDimensionError) {
  EXPECT_THROW(ops::conv1x1_channels(Tensor::zeros({3, 4}), Tensor::zeros({2, 2})), DimensionError);
}

TEST(Conv1x1, GradCheck) {
  Rng rng(13);
  const double e = grad_check([](const V& in) { return ops::conv1x1_channels(in[0], in[1], in[2]); },
                              {random_tensor({3, 2, 2}, rng), random_tensor({2, 3}, rng), random_tensor({2}, rng)});
  EXPECT_LT(e, kOpTol);
}

// --- attention -------------------------------------------------------------

ops::AttentionParams random_attention(std::size_t d, std::size_t heads, Rng& rng) {
  ops::AttentionParams p;
  p.wq = random_tensor({d, d}, rng, -1, 1);
  p.bq = random_tensor({d}, rng, -1, 1);
  p.wk = random_tensor({d, d}, rng, -1, 1);
  p.bk = random_tensor({d}, rng, -1, 1);
  p.wv = random_tensor({d, d}, rng, -1, 1);
  p.bv = random_tensor({d}, rng, -1, 1);
  p.wo = random_tensor({d, d}, rng, -1, 1);
  p.bo = random_tensor({d}, rng, -1, 1);
  p.heads = heads;
  return p;
}

// Straight-line attention: per head softmax(Q K^T / sqrt(dh)) V, concat, Wo.
std::vector<double> attention_oracle(const Tensor& x, const ops::AttentionParams& p, bool causal) {
  const std::size_t T = x.dim(0), d = x.dim(1), h = p.heads, dh = d / h;
  auto proj = [&](const Tensor& w, const Tensor& b) {
    std::vector<double> out(T * d);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t o = 0; o < d; ++o) {
        double acc = b[o];
        for (std::size_t i = 0; i < d; ++i) acc += x[t * d + i] * w[i * d + o];
        out[t * d + o] = acc;
      }
    return out;
  };
  const auto q = proj(p.wq, p.bq), k = proj(p.wk, p.bk), v = proj(p.wv, p.bv);
  std::vector<double> concat(T * d, 0.0);
  for (std::size_t head = 0; head < h; ++head)
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t limit = causal ? t + 1 : T;
      std::vector<double> s(limit);
      double mx = -1e300;
      for (std::size_t u = 0; u < limit; ++u) {
        double dot = 0;
        for (std::size_t j = 0; j < dh; ++j) dot += q[t * d + head * dh + j] * k[u * d + head * dh + j];
        s[u] = dot / std::sqrt(static_cast<double>(dh));
        mx = std::max(mx, s[u]);
      }
      double z = 0;
      for (auto& e : s) z += (e = std::exp(e - mx));
      for (std::size_t u = 0; u < limit; ++u)
        for (std::size_t j = 0; j < dh; ++j) concat[t * d + head * dh + j] += s[u] / z * v[u * d + head * dh + j];
    }
  std::vector<double> out(T * d);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t o = 0; o < d; ++o) {
      double acc = p.bo[o];
      for (std::size_t i = 0; i < d; ++i) acc += concat[t * d + i] * p.wo[i * d + o];
      out[t * d + o] = acc;
    }
  return out;
}

TEST(Attention, SinglePositionIsValueThroughOutputProjection) {
  Rng rng(14);
  const auto p = random_attention(4, 2, rng);
  const Tensor x = random_tensor({1, 4}, rng);
  const Tensor y = ops::multi_head_attention(x, p, false);
  const Tensor expected = ops::linear(ops::linear(x, p.wv, p.bv), p.wo, p.bo);
  EXPECT_LT(test::max_abs_diff(y, expected), 1e-12);
}

TEST(Attention, EqualKeysGiveUniformWeights) {
  Rng rng(15);
  auto p = random_attention(3, 1, rng);
  p.wk = Tensor::zeros({3, 3});  // every key equals bk
  std::vector<Tensor> weights;
  ops::multi_head_attention(random_tensor({5, 3}, rng), p, false, false, &weights);
  ASSERT_EQ(weights.size(), 1u);
  for (double w : weights[0].data()) EXPECT_NEAR(w, 1.0 / 5.0, 1e-15);
}

TEST(Attention, ThreeTokensMatchBruteForceOracle) {
  Rng rng(16);
  const auto p = random_attention(4, 1, rng);
  const Tensor x = random_tensor({3, 4}, rng);
  for (bool causal : {false, true}) {
    const auto expected = attention_oracle(x, p, causal);
    const Tensor y = ops::multi_head_attention(x, p, causal);
    for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(y[i], expected[i], 1e-12);
  }
}

TEST(Attention, MultiHeadMatchesOracle) {
  Rng rng(17);
  const auto p = random_attention(6, 3, rng);
  const Tensor x = random_tensor({5, 6}, rng);
  const auto expected = attention_oracle(x, p, true);
  const Tensor y = ops::multi_head_attention(x, p, true);
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(y[i], expected[i], 1e-12);
}

TEST(Attention, LastQueryOnlyEqualsFinalRow) {
  Rng rng(18);
  const auto p = random_attention(4, 2, rng);
  const Tensor x = random_tensor({6, 4}, rng);
  const Tensor full = ops::multi_head_attention(x, p, true);
  const Tensor last = ops::multi_head_attention(x, p, true, true);
  ASSERT_EQ(last.shape(), (Shape{1, 4}));
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(last[j], full[5 * 4 + j], 1e-14);
}

TEST(Attention, HeadsMustDivideModelWidth) {
  Rng rng(19);
  auto p = random_attention(4, 3, rng);
  EXPECT_THROW(ops::multi_head_attention(random_tensor({2, 4}, rng), p, true), ParameterError);
}

TEST(Attention, CausalMaskKeepsEarlierPositionsFixed) {
  Rng rng(20);
  const auto p = random_attention(4, 2, rng);
  const Tensor x = random_tensor({7, 4}, rng);
  const Tensor y = ops::multi_head_attention(x, p, true);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t t = rng.below(7);
    const Tensor xp = test::with_value(x, t * 4 + rng.below(4), 3.0);
    const Tensor yp = ops::multi_head_attention(xp, p, true);
    for (std::size_t i = 0; i < t * 4; ++i) EXPECT_EQ(y[i], yp[i]);
  }
}

TEST(Attention, GradCheckWithKeyBiasHeldFixed) {
  Rng rng(21);
  const Tensor key_bias = random_tensor({4}, rng, -1, 1);
  for (bool causal : {false, true}) {
    const double e = grad_check(
        [&](const V& in) {
          ops::AttentionParams p{in[1], in[2], in[3], key_bias, in[4], in[5], in[6], in[7], 2};
          return ops::multi_head_attention(in[0], p, causal);
        },
        {random_tensor({3, 4}, rng), random_tensor({4, 4}, rng, -1, 1), random_tensor({4}, rng, -1, 1),
         random_tensor({4, 4}, rng, -1, 1), random_tensor({4, 4}, rng, -1, 1), random_tensor({4}, rng, -1, 1),
         random_tensor({4, 4}, rng, -1, 1), random_tensor({4}, rng, -1, 1)});
    EXPECT_LT(e, kOpTol) << "causal=" << causal;
  }
}

TEST(Attention, KeyBiasGradientIsZero) {
  Rng rng(22);
  auto p = random_attention(4, 2, rng);
  p.bk = random_tensor({4}, rng, -1, 1, true);
  const Tensor x = random_tensor({5, 4}, rng);
  backward(ops::sum(ops::square(ops::multi_head_attention(x, p, true))));
  for (double g : p.bk.grad()) EXPECT_LT(std::abs(g), 1e-12);
}

// --- activations and elementwise -----------------------------------------

TEST(Activation, Examples) {
  EXPECT_EQ(ops::activation(vec({0}), ops::Activation::tanh)[0], 0.0);
  EXPECT_EQ(values(ops::activation(vec({-1, 2}), ops::Activation::relu)), (std::vector<double>{0, 2}));
  const Tensor s = ops::activation(vec({0.3, 0.3, 0.3}), ops::Activation::softmax_lastdim);
  for (double v : s.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Activation, ReluGradientAtZeroIsZero) {
  Tensor x = Tensor::from({3}, {-1.0, 0.0, 1.0}, true);
  backward(ops::sum(ops::relu(x)));
  EXPECT_EQ(x.grad()[0], 0.0);
  EXPECT_EQ(x.grad()[1], 0.0);
  EXPECT_EQ(x.grad()[2], 1.0);
}

TEST(Activation, SoftmaxRowsSumToOne) {
  Rng rng(23);
  const Tensor s = ops::softmax_lastdim(random_tensor({7, 11}, rng, -30, 30));
  for (std::size_t r = 0; r < 7; ++r) {
    double total = 0;
    for (std::size_t c = 0; c < 11; ++c) total += s[r * 11 + c];
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Activation, CausalSoftmaxRowsSumToOneAndMaskFuture) {
  Rng rng(24);
  const Tensor s = ops::causal_softmax(random_tensor({4, 6}, rng), 2);
  for (std::size_t r = 0; r < 4; ++r) {
    double total = 0;
    for (std::size_t c = 0; c < 6; ++c) {
      if (c > r + 2) EXPECT_EQ(s[r * 6 + c], 0.0);
      total += s[r * 6 + c];
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Activation, GradChecks) {
  Rng rng(25);
  EXPECT_LT(grad_check([](const V& in) { return ops::tanh(in[0]); }, {random_tensor({6}, rng)}), kOpTol);
  EXPECT_LT(grad_check([](const V& in) { return ops::relu(in[0]); }, {test::kink_free({8}, rng)}), kOpTol);
  EXPECT_LT(grad_check([](const V& in) { return ops::softmax_lastdim(in[0]); }, {random_tensor({3, 4}, rng)}),
            kOpTol);
  EXPECT_LT(grad_check([](const V& in) { return ops::causal_softmax(in[0], 1); }, {random_tensor({3, 5}, rng)}),
            kOpTol);
}

TEST(Elementwise, GradChecks) {
  Rng rng(26);
  const Tensor a = random_tensor({2, 3}, rng), b = random_tensor({2, 3}, rng);
  EXPECT_LT(grad_check([](const V& in) { return ops::add(in[0], in[1]); }, {a, b}), kOpTol);
  EXPECT_LT(grad_check([](const V& in) { return ops::sub(in[0], in[1]); }, {a, b}), kOpTol);
  EXPECT_LT(grad_check([](const V& in) { return ops::mul(in[0], in[1]); }, {a, b}), kOpTol);
  EXPECT_LT(grad_check([](const V& in) { return ops::affine(in[0], -1.5, 0.25); }, {a}), kOpTol);
  EXPECT_LT(grad_check([](const V& in) { return ops::scale_by(in[0], in[1]); }, {a, random_tensor({1}, rng)}),
            kOpTol);
  EXPECT_LT(grad_check([](const V& in) { return ops::square(in[0]); }, {a}), kOpTol);
  EXPECT_LT(grad_check([](const V& in) { return ops::abs(in[0]); }, {test::kink_free({5}, rng)}), kOpTol);
  EXPECT_LT(grad_check([](const V& in) { return ops::log(in[0]); }, {random_tensor({5}, rng, 0.2, 3.0)}), kOpTol);
  // Inputs away from the clamp bounds on both sides.
  EXPECT_LT(grad_check([](const V& in) { return ops::clamp(in[0], -1.0, 1.0); },
                       {Tensor::from({4}, {-1.7, -0.4, 0.5, 1.6})}),
            kOpTol);
}

TEST(Elementwise, ShapeMismatchIsDimensionError) {
  EXPECT_THROW(ops::add(Tensor::zeros({2}), Tensor::zeros({3})), DimensionError);
  EXPECT_THROW(ops::mul(Tensor::zeros({2, 1}), Tensor::zeros({2})), DimensionError);
}

// --- reductions and reshaping ---------------------------------------------

TEST(Shape, ReductionsAndReshapesMatchOracles) {
  const Tensor x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(ops::sum(x)[0], 21.0);
  EXPECT_EQ(ops::mean(x)[0], 3.5);
  EXPECT_EQ(values(ops::mean_axis(x, 0)), (std::vector<double>{2.5, 3.5, 4.5}));
  EXPECT_EQ(values(ops::mean_axis(x, 1)), (std::vector<double>{2, 5}));
  EXPECT_EQ(values(ops::transpose(x)), (std::vector<double>{1, 4, 2, 5, 3, 6}));
  EXPECT_EQ(values(ops::slice(x, 1, 1, 3)), (std::vector<double>{2, 3, 5, 6}));
  EXPECT_EQ(values(ops::concat({x, x}, 0)).size(), 12u);
  EXPECT_EQ(values(ops::concat({ops::slice(x, 1, 0, 1), ops::slice(x, 1, 1, 3)}, 1)), values(x));
  EXPECT_EQ(values(ops::repeat_axis(Tensor::from({2, 1}, {7, 8}), 1, 3)), (std::vector<double>{7, 7, 7, 8, 8, 8}));
  EXPECT_EQ(ops::reshape(x, {3, 2}).shape(), (Shape{3, 2}));
  EXPECT_THROW(ops::reshape(x, {4, 2}), DimensionError);
}

TEST(Shape, GradChecks) {
  Rng rng(27);
  const Tensor x = random_tensor({2, 3, 2}, rng);
  EXPECT_LT(grad_check([](const V& in) { return ops::mean_axis(in[0], 1); }, {x}), kOpTol);
  EXPECT_LT(grad_check([](const V& in) { return ops::slice(in[0], 2, 1, 2); }, {x}), kOpTol);
  EXPECT_LT(grad_check([](const V& in) { return ops::concat({in[0], in[1]}, 1); }, {x, x}), kOpTol);
  EXPECT_LT(grad_check([](const V& in) { return ops::transpose(in[0]); }, {random_tensor({3, 4}, rng)}), kOpTol);
  EXPECT_LT(grad_check([](const V& in) { return ops::repeat_axis(in[0], 1, 4); }, {random_tensor({2, 1, 3}, rng)}),
            kOpTol);
  EXPECT_LT(grad_check([](const V& in) { return ops::matmul(in[0], in[1]); },
                       {random_tensor({2, 3}, rng), random_tensor({3, 4}, rng)}),
            kOpTol);
}

TEST(CrossEntropyLogits, MatchesLogSoftmaxOracle) {
  Rng rng(28);
  const Tensor logits = random_tensor({3, 5}, rng);
  const std::vector<std::size_t> t = {4, 0, 2};
  double expected = 0;
  for (std::size_t r = 0; r < 3; ++r) {
    double z = 0;
    for (std::size_t c = 0; c < 5; ++c) z += std::exp(logits[r * 5 + c]);
    expected += -(logits[r * 5 + t[r]] - std::log(z));
  }
  EXPECT_NEAR(ops::cross_entropy_logits(logits, t)[0], expected / 3, 1e-12);
  EXPECT_LT(grad_check([&](const V& in) { return ops::cross_entropy_logits(in[0], t); }, {logits}), kOpTol);
  EXPECT_THROW(ops::cross_entropy_logits(logits, {5, 0, 0}), BoundsError);
}

// --- grad_check itself ----------------------------------------------------

TEST(GradCheck, ConstantFunctionHasZeroError) {
  Rng rng(29);
  const double e = grad_check([](const V&) { return Tensor::from({2}, {1.0, 2.0}); }, {random_tensor({3}, rng)});
  EXPECT_EQ(e, 0.0);
}

TEST(GradCheck, DetectsAWrongGradient) {
  // An op whose backward deliberately reports double the true gradient.
  Rng rng(30);
  const TensorFn wrong = [](const V& in) {
    const Tensor& a = in[0];
    std::vector<double> y(a.data().begin(), a.data().end());
    for (auto& v : y) v = v * v;
    return make_result(a.shape(), std::move(y), {a}, "bad_square", [](Node& self) {
      auto& x = *self.inputs[0];
      for (std::size_t i = 0; i < x.data.size(); ++i) x.grad[i] += 4.0 * x.data[i] * self.grad[i];
    });
  };
  EXPECT_GT(grad_check(wrong, {random_tensor({3}, rng)}), 0.3);
}

}  // namespace
}  // namespace foley
