// Compares the OpenMP kernels against the serial reference implementations
// and the two block architectures against each other. Wall-clock numbers are
// an uncalibrated convenience; the MACs column is the analytical count.

#include <chrono>
#include <cstdio>
#include <functional>

#include "feater/blocks.hpp"
#include "feater/costmodel.hpp"
#include "feater/kernels.hpp"
#include "feater/rng.hpp"
#include "reference.hpp"

using namespace feater;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, RngStream& rng) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform_range(-1.0, 1.0);
  return t;
}

double time_ms(const std::function<void()>& fn, int repeats) {
  fn();  // warm up
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < repeats; ++i) fn();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / repeats;
}

void row(const char* label, double serial_ms, double parallel_ms) {
  std::printf("%-34s %10.3f %10.3f %8.2fx\n", label, serial_ms, parallel_ms,
              serial_ms / parallel_ms);
}

}  // namespace

int main() {
  RngStream rng(1);

  std::printf("%-34s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");

  {
    Tensor a = random_tensor({256, 256}, rng);
    Tensor b = random_tensor({256, 256}, rng);
    row("matmul 256x256 * 256x256",
        time_ms([&] { reference::matmul(a, b); }, 5),
        time_ms([&] { matmul_batched(a, b); }, 5));
  }
  {
    Tensor a = random_tensor({64, 32, 64}, rng);
    Tensor b = random_tensor({64, 64, 32}, rng);
    row("matmul batched 64x[32x64 * 64x32]",
        time_ms([&] { reference::matmul(a, b); }, 5),
        time_ms([&] { matmul_batched(a, b); }, 5));
  }
  {
    Tensor x = random_tensor({512, 1024}, rng);
    row("softmax 512x1024",
        time_ms([&] { reference::softmax_lastdim(x); }, 10),
        time_ms([&] { softmax_lastdim(x); }, 10));
  }
  {
    Tensor x = random_tensor({64, 64, 64}, rng);
    Tensor gain = random_tensor({64}, rng);
    Tensor bias = random_tensor({64}, rng);
    row("layer_norm 64ch over 64x64",
        time_ms([&] { reference::layer_norm(x, 2, gain, bias, 1e-5); }, 10),
        time_ms([&] { layer_norm(x, 2, gain, bias, 1e-5); }, 10));
  }
  {
    Tensor x = random_tensor({64, 64, 64}, rng);
    Tensor w = random_tensor({128, 64}, rng);
    Tensor b = random_tensor({128}, rng);
    row("conv1x1 64->128 over 64x64",
        time_ms([&] { reference::conv_channel_1x1(x, w, b); }, 5),
        time_ms([&] { conv_channel_1x1(x, w, b); }, 5));
  }

  std::printf("\n%-34s %10s %14s\n", "block forward (omp)", "ms", "MACs");
  {
    const std::size_t n = 32, h = 64, w = 64;
    FeatERBlockParams fp = FeatERBlockParams::init(n, h, w, 1, RngStream(2));
    Tensor x = random_tensor({n, h, w}, rng);
    const double ms = time_ms([&] { feater_block_forward(x, fp); }, 3);
    std::printf("%-34s %10.3f %14llu\n", "feater block [32,64,64]", ms,
                static_cast<unsigned long long>(macs_feater_block(n, h, w).total_macs()));

    VanillaBlockParams vp = VanillaBlockParams::init(h * w, 1, RngStream(3));
    Tensor tokens = flatten_stack(x);
    const double vms = time_ms([&] { vanilla_block_forward(tokens, vp); }, 3);
    std::printf("%-34s %10.3f %14llu\n", "vanilla block [32,4096]", vms,
                static_cast<unsigned long long>(macs_vanilla_block(n, h * w).total_macs()));
  }
  return 0;
}
