#include "doctest.h"

#include <cmath>

#include "feater/errors.hpp"
#include "feater/kernels.hpp"
#include "helpers.hpp"
#include "reference.hpp"

using namespace feater;
using testutil::max_abs_diff;
using testutil::random_tensor;

TEST_CASE("matmul identity and annihilator") {
  RngStream rng(1);
  Tensor b = random_tensor({3, 2}, rng);
  CHECK(testutil::bit_equal(matmul_batched(Tensor::identity(3), b), b));

  Tensor z({2, 4});
  Tensor any = random_tensor({4, 5}, rng);
  Tensor out = matmul_batched(z, any);
  CHECK(out.shape() == std::vector<std::size_t>{2, 5});
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 0.0);
}

TEST_CASE("matmul matches the naive triple-loop reference") {
  RngStream rng(2);
  Tensor a = random_tensor({4, 4}, rng);
  Tensor b = random_tensor({4, 4}, rng);
  CHECK(max_abs_diff(matmul_batched(a, b), reference::matmul(a, b)) <= 1e-12);

  Tensor ab = random_tensor({3, 2, 5, 4}, rng);
  Tensor bb = random_tensor({3, 2, 4, 6}, rng);
  CHECK(max_abs_diff(matmul_batched(ab, bb), reference::matmul(ab, bb)) <= 1e-12);
}

TEST_CASE("matmul identity commutes for square inputs") {
  RngStream rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + rng.next_below(7);
    Tensor x = random_tensor({n, n}, rng);
    Tensor id = Tensor::identity(n);
    CHECK(max_abs_diff(matmul_batched(id, x), x) <= 1e-12);
    CHECK(max_abs_diff(matmul_batched(x, id), x) <= 1e-12);
  }
}

TEST_CASE("matmul rejects mismatched shapes and names both") {
  Tensor a({2, 4});
  Tensor b({5, 3});
  CHECK_THROWS_WITH_AS(matmul_batched(a, b), doctest::Contains("[2, 4]"), DimensionError);
  CHECK_THROWS_WITH_AS(matmul_batched(a, b), doctest::Contains("[5, 3]"), DimensionError);
  CHECK_THROWS_AS(matmul_batched(Tensor(), b), DimensionError);
  // batch dims must be identical
  CHECK_THROWS_AS(matmul_batched(Tensor({2, 3, 4}), Tensor({3, 4, 5})), DimensionError);
}

TEST_CASE("matmul records p*q*r MACs per slice") {
  RngStream rng(4);
  MacCounter macs;
  matmul_batched(random_tensor({3, 4}, rng), random_tensor({4, 5}, rng), &macs);
  CHECK(macs.total() == 60);
  matmul_batched(random_tensor({2, 3, 4}, rng), random_tensor({2, 4, 5}, rng), &macs, "second");
  CHECK(macs.total() == 60 + 120);
  CHECK(macs.report().rows.size() == 2);
}

TEST_CASE("softmax fixed values") {
  Tensor uniform({4}, {0.0, 0.0, 0.0, 0.0});
  Tensor s = softmax_lastdim(uniform);
  for (std::size_t i = 0; i < 4; ++i) CHECK(s[i] == doctest::Approx(0.25).epsilon(1e-12));

  Tensor two({2}, {0.0, std::log(3.0)});
  Tensor s2 = softmax_lastdim(two);
  CHECK(s2[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(s2[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax matches the direct exp/sum reference") {
  RngStream rng(5);
  Tensor x = random_tensor({6, 9}, rng, -4.0, 4.0);
  CHECK(max_abs_diff(softmax_lastdim(x), reference::softmax_lastdim(x)) <= 1e-12);
}

TEST_CASE("softmax rows sum to one, stay nonnegative, shift-invariant") {
  RngStream rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x = random_tensor({5, 8}, rng, -30.0, 30.0);
    Tensor y = softmax_lastdim(x);
    for (std::size_t r = 0; r < 5; ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < 8; ++c) {
        CHECK(y.at2(r, c) >= 0.0);
        sum += y.at2(r, c);
      }
      CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
    const double shift = rng.uniform_range(-20.0, 20.0);
    Tensor xs = x;
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] += shift;
    CHECK(max_abs_diff(softmax_lastdim(xs), y) <= 1e-9);
  }
}

TEST_CASE("softmax handles extreme logits without NaN") {
  Tensor x({3}, {-1e300, 0.0, 1e300});
  Tensor y = softmax_lastdim(x);
  CHECK(y.all_finite());
  CHECK(y[2] == doctest::Approx(1.0));
  CHECK_THROWS_AS(softmax_lastdim(Tensor()), DimensionError);
}

TEST_CASE("layer_norm fixed values") {
  Tensor gain({1}, {1.0});
  Tensor bias({1}, {0.0});
  Tensor constant({3}, {2.0, 2.0, 2.0});
  Tensor y = layer_norm(constant, 1, gain, bias, 1e-5);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(y[i]) < 1e-9);

  Tensor pm({2}, {-1.0, 1.0});
  Tensor y2 = layer_norm(pm, 1, gain, bias, 1e-5);
  CHECK(y2[0] == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(y2[1] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("layer_norm matches the direct mean/variance reference") {
  RngStream rng(7);
  Tensor x = random_tensor({4, 6}, rng, -3.0, 3.0);
  Tensor gain = random_tensor({6}, rng);
  Tensor bias = random_tensor({6}, rng);
  CHECK(max_abs_diff(layer_norm(x, 1, gain, bias, 1e-5),
                     reference::layer_norm(x, 1, gain, bias, 1e-5)) <= 1e-9);

  // per-channel affine over a grid
  Tensor x3 = random_tensor({3, 4, 5}, rng, -2.0, 2.0);
  Tensor g3 = random_tensor({3}, rng);
  Tensor b3 = random_tensor({3}, rng);
  CHECK(max_abs_diff(layer_norm(x3, 2, g3, b3, 1e-5),
                     reference::layer_norm(x3, 2, g3, b3, 1e-5)) <= 1e-9);
}

TEST_CASE("layer_norm normalizes to zero mean and unit variance") {
  RngStream rng(8);
  Tensor gain({1}, {1.0});
  Tensor bias({1}, {0.0});
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x({32});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal(3.0, 2.0);
    Tensor y = layer_norm(x, 1, gain, bias, 1e-9);
    double mean = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) mean += y[i];
    mean /= static_cast<double>(y.size());
    double var = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) var += (y[i] - mean) * (y[i] - mean);
    var /= static_cast<double>(y.size());
    CHECK(std::abs(mean) < 1e-7);
    CHECK(std::abs(var - 1.0) < 1e-4);
  }
}

TEST_CASE("layer_norm rejects bad eps and bad affine shapes") {
  Tensor x({2, 3});
  Tensor g({3}), b({3});
  CHECK_THROWS_AS(layer_norm(x, 1, g, b, 0.0), ParameterError);
  CHECK_THROWS_AS(layer_norm(x, 1, g, b, -1.0), ParameterError);
  CHECK_THROWS_AS(layer_norm(x, 1, Tensor({4}), Tensor({4}), 1e-5), DimensionError);
  CHECK_THROWS_AS(layer_norm(x, 0, g, b, 1e-5), ParameterError);
}

TEST_CASE("conv_channel_1x1 identity and constant") {
  RngStream rng(9);
  Tensor x = random_tensor({3, 4, 5}, rng);
  Tensor zero_bias({3});
  CHECK(testutil::bit_equal(conv_channel_1x1(x, Tensor::identity(3), zero_bias), x));

  Tensor zero_w({2, 3});
  Tensor c_bias = Tensor::full({2}, 1.5);
  Tensor out = conv_channel_1x1(x, zero_w, c_bias);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 1.5);
}

TEST_CASE("conv_channel_1x1 matches the per-pixel reference") {
  RngStream rng(10);
  Tensor x = random_tensor({4, 5, 6}, rng);
  Tensor w = random_tensor({7, 4}, rng);
  Tensor b = random_tensor({7}, rng);
  CHECK(max_abs_diff(conv_channel_1x1(x, w, b), reference::conv_channel_1x1(x, w, b)) <= 1e-12);

  MacCounter macs;
  conv_channel_1x1(x, w, b, &macs);
  CHECK(macs.total() == 7u * 4u * 5u * 6u);
}

TEST_CASE("conv_channel_1x1 rejects channel mismatch") {
  Tensor x({3, 2, 2});
  CHECK_THROWS_AS(conv_channel_1x1(x, Tensor({2, 4}), Tensor({2})), DimensionError);
  CHECK_THROWS_AS(conv_channel_1x1(Tensor({3, 2}), Tensor({2, 3}), Tensor({2})),
                  DimensionError);
}

TEST_CASE("published kernels keep finite inputs finite") {
  RngStream rng(12);
  Tensor x = random_tensor({4, 8, 8}, rng, -50.0, 50.0);
  Tensor g = random_tensor({4}, rng);
  Tensor b = random_tensor({4}, rng);
  CHECK(softmax_lastdim(x).all_finite());
  CHECK(layer_norm(x, 2, g, b, 1e-5).all_finite());
  CHECK(gelu(x).all_finite());
  CHECK(conv_channel_1x1(x, random_tensor({8, 4}, rng), random_tensor({8}, rng)).all_finite());
}

TEST_CASE("swap_axes and slice round trip") {
  RngStream rng(13);
  Tensor x = random_tensor({3, 4, 5}, rng);
  Tensor t = swap_axes(x, 1, 2);
  CHECK(t.shape() == std::vector<std::size_t>{3, 5, 4});
  CHECK(t.at3(2, 4, 3) == x.at3(2, 3, 4));
  CHECK(testutil::bit_equal(swap_axes(t, 1, 2), x));

  Tensor s = slice_lastdim(x, 1, 3);
  CHECK(s.shape() == std::vector<std::size_t>{3, 4, 3});
  CHECK(s.at3(1, 2, 0) == x.at3(1, 2, 1));
  CHECK_THROWS_AS(slice_lastdim(x, 3, 4), DimensionError);
}
