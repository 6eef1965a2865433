// Micro-benchmark for the dense kernels; reports effective GMAC/s so
// training budgets can be sized for the host machine.

#include <chrono>
#include <cstdio>

#include "pansharp/ops.hpp"
#include "pansharp/rng.hpp"

using pansharp::Rng;
using pansharp::Tensor;

namespace {

Tensor<float> random_tensor(pansharp::Shape shape, Rng& rng) {
  Tensor<float> t(shape);
  for (int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

void bench_conv(int B, int C_in, int C_out, int H, int W, int k, int stride,
                int padding, int reps) {
  Rng rng(42);
  auto x = random_tensor({B, C_in, H, W}, rng);
  auto w = random_tensor({C_out, C_in, k, k}, rng);
  auto bias = random_tensor({C_out}, rng);
  auto out = pansharp::ops::conv2d(x, w, bias, stride, padding);  // warm-up

  const int Ho = out.extent(2), Wo = out.extent(3);
  const double macs =
      double(B) * C_out * Ho * Wo * C_in * k * k * reps;

  auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r)
    out = pansharp::ops::conv2d(x, w, bias, stride, padding);
  const double fwd = seconds_since(t0);

  Tensor<float> gx(x.shape()), gw(w.shape()), gb(bias.shape());
  t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r)
    pansharp::ops::conv2d_backward(x, w, out, stride, padding, &gx, &gw, &gb);
  const double bwd = seconds_since(t0);

  std::printf(
      "conv %dx%dx%dx%d k%d s%d -> Cout %d: fwd %.2f GMAC/s, bwd %.2f GMAC/s\n",
      B, C_in, H, W, k, stride, C_out, macs / fwd / 1e9, 2 * macs / bwd / 1e9);
}

}  // namespace

int main() {
  std::printf("workers: %d\n", pansharp::worker_count());
  bench_conv(4, 32, 32, 64, 64, 3, 1, 1, 30);
  bench_conv(4, 8, 8, 64, 64, 3, 1, 1, 200);
  bench_conv(4, 16, 16, 128, 128, 3, 1, 1, 30);
  bench_conv(32, 32, 32, 64, 64, 3, 1, 1, 4);
  bench_conv(4, 32, 64, 32, 32, 2, 2, 0, 100);
  return 0;
}
