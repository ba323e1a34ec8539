// Times the OpenMP kernels against their serial reference counterparts and
// a full transformer block forward at training-like shapes.

#include <omp.h>

#include <cstdio>
#include <vector>

#include "vle2/kernels.hpp"
#include "vle2/nn.hpp"
#include "vle2/rng.hpp"

using namespace vle2;

namespace {

std::vector<float> random_mat(int r, int c, RngStream& rng) {
  std::vector<float> m(static_cast<size_t>(r) * c);
  for (auto& v : m) v = static_cast<float>(rng.normal());
  return m;
}

template <class F>
double time_ms(F&& fn, int reps) {
  fn();  // warm up
  const double t0 = omp_get_wtime();
  for (int i = 0; i < reps; ++i) fn();
  return (omp_get_wtime() - t0) * 1000.0 / reps;
}

void bench_matmul(int M, int K, int N, int reps) {
  RngStream rng(1);
  auto A = random_mat(M, K, rng), B = random_mat(K, N, rng);
  std::vector<float> C(static_cast<size_t>(M) * N);
  const double flops = 2.0 * M * K * N;
  const double t_par = time_ms(
      [&] { kernels::matmul_nn<float>(A.data(), B.data(), nullptr, C.data(), M, K, N); }, reps);
  const double t_ref = time_ms(
      [&] { kernels::ref::matmul_nn<float>(A.data(), B.data(), nullptr, C.data(), M, K, N); },
      reps);
  std::printf("matmul_nn %4dx%4dx%4d  omp %8.3f ms (%6.2f GF/s)  ref %8.3f ms (%6.2f GF/s)  "
              "speedup %.2fx\n",
              M, K, N, t_par, flops / t_par / 1e6, t_ref, flops / t_ref / 1e6, t_ref / t_par);
}

void bench_block(int L, int d, int heads, int reps) {
  TransformerBlockT<float> block;
  RngStream rng(2);
  block.init("b", d, heads, rng);
  TensorT<float> x({L, d});
  for (auto& v : x.data) v = static_cast<float>(rng.normal() * 0.1);
  BlockCache<float> cache;
  const double t = time_ms([&] { block.forward(x, MaskKind::Causal, cache); }, reps);
  std::printf("block fwd L=%3d d=%3d heads=%d  %8.3f ms\n", L, d, heads, t);
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());
  bench_matmul(64, 128, 128, 200);
  bench_matmul(256, 256, 256, 50);
  bench_matmul(512, 512, 512, 10);
  bench_matmul(1024, 1024, 1024, 3);
  bench_block(48, 128, 4, 100);
  bench_block(96, 128, 4, 50);
  return 0;
}
