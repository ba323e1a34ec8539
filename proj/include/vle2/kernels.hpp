#pragma once

#include <vector>

namespace vle2::kernels {

// Dense matmul kernels used by every forward/backward path. All of them
// accumulate in double and walk the reduction dimension in ascending order,
// so results are bit-stable for a given build regardless of thread count
// (each output element is owned by exactly one thread). The serial
// counterparts in kernels::ref are deliberately naive and kept as the
// test/bench baseline.

// C[M x N] = A[M x K] * B[K x N] (+ bias per output column, optional)
template <class S>
void matmul_nn(const S* A, const S* B, const S* bias, S* C, int M, int K, int N,
               bool accumulate = false) {
#pragma omp parallel
  {
    std::vector<double> acc(static_cast<size_t>(N));
#pragma omp for schedule(static)
    for (int i = 0; i < M; ++i) {
      if (bias) {
        for (int j = 0; j < N; ++j) acc[j] = static_cast<double>(bias[j]);
      } else {
        for (int j = 0; j < N; ++j) acc[j] = 0.0;
      }
      if (accumulate) {
        const S* c = C + static_cast<size_t>(i) * N;
        for (int j = 0; j < N; ++j) acc[j] += static_cast<double>(c[j]);
      }
      const S* a = A + static_cast<size_t>(i) * K;
      for (int k = 0; k < K; ++k) {
        const double aik = static_cast<double>(a[k]);
        const S* b = B + static_cast<size_t>(k) * N;
        for (int j = 0; j < N; ++j) acc[j] += aik * static_cast<double>(b[j]);
      }
      S* c = C + static_cast<size_t>(i) * N;
      for (int j = 0; j < N; ++j) c[j] = static_cast<S>(acc[j]);
    }
  }
}

// C[M x N] = A[M x K] * B[N x K]^T
template <class S>
void matmul_nt(const S* A, const S* B, S* C, int M, int K, int N, bool accumulate = false) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < M; ++i) {
    const S* a = A + static_cast<size_t>(i) * K;
    S* c = C + static_cast<size_t>(i) * N;
    for (int j = 0; j < N; ++j) {
      const S* b = B + static_cast<size_t>(j) * K;
      // four independent chains; combined in a fixed order
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      int k = 0;
      for (; k + 4 <= K; k += 4) {
        s0 += static_cast<double>(a[k]) * static_cast<double>(b[k]);
        s1 += static_cast<double>(a[k + 1]) * static_cast<double>(b[k + 1]);
        s2 += static_cast<double>(a[k + 2]) * static_cast<double>(b[k + 2]);
        s3 += static_cast<double>(a[k + 3]) * static_cast<double>(b[k + 3]);
      }
      for (; k < K; ++k) s0 += static_cast<double>(a[k]) * static_cast<double>(b[k]);
      double s = ((s0 + s1) + (s2 + s3)) + (accumulate ? static_cast<double>(c[j]) : 0.0);
      c[j] = static_cast<S>(s);
    }
  }
}

// C[K x N] (+)= A[M x K]^T * D[M x N]
template <class S>
void matmul_tn(const S* A, const S* D, S* C, int M, int K, int N, bool accumulate = true) {
#pragma omp parallel
  {
    std::vector<double> acc(static_cast<size_t>(N));
#pragma omp for schedule(static)
    for (int k = 0; k < K; ++k) {
      if (accumulate) {
        const S* c = C + static_cast<size_t>(k) * N;
        for (int j = 0; j < N; ++j) acc[j] = static_cast<double>(c[j]);
      } else {
        for (int j = 0; j < N; ++j) acc[j] = 0.0;
      }
      for (int i = 0; i < M; ++i) {
        const double aik = static_cast<double>(A[static_cast<size_t>(i) * K + k]);
        const S* d = D + static_cast<size_t>(i) * N;
        for (int j = 0; j < N; ++j) acc[j] += aik * static_cast<double>(d[j]);
      }
      S* c = C + static_cast<size_t>(k) * N;
      for (int j = 0; j < N; ++j) c[j] = static_cast<S>(acc[j]);
    }
  }
}

namespace ref {

// Naive serial baselines: one double accumulator per output element.

template <class S>
void matmul_nn(const S* A, const S* B, const S* bias, S* C, int M, int K, int N,
               bool accumulate = false) {
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < N; ++j) {
      double s = bias ? static_cast<double>(bias[j]) : 0.0;
      if (accumulate) s += static_cast<double>(C[static_cast<size_t>(i) * N + j]);
      for (int k = 0; k < K; ++k)
        s += static_cast<double>(A[static_cast<size_t>(i) * K + k]) *
             static_cast<double>(B[static_cast<size_t>(k) * N + j]);
      C[static_cast<size_t>(i) * N + j] = static_cast<S>(s);
    }
  }
}

template <class S>
void matmul_nt(const S* A, const S* B, S* C, int M, int K, int N, bool accumulate = false) {
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < N; ++j) {
      double s = accumulate ? static_cast<double>(C[static_cast<size_t>(i) * N + j]) : 0.0;
      for (int k = 0; k < K; ++k)
        s += static_cast<double>(A[static_cast<size_t>(i) * K + k]) *
             static_cast<double>(B[static_cast<size_t>(j) * K + k]);
      C[static_cast<size_t>(i) * N + j] = static_cast<S>(s);
    }
  }
}

template <class S>
void matmul_tn(const S* A, const S* D, S* C, int M, int K, int N, bool accumulate = true) {
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < N; ++j) {
      double s = accumulate ? static_cast<double>(C[static_cast<size_t>(k) * N + j]) : 0.0;
      for (int i = 0; i < M; ++i)
        s += static_cast<double>(A[static_cast<size_t>(i) * K + k]) *
             static_cast<double>(D[static_cast<size_t>(i) * N + j]);
      C[static_cast<size_t>(k) * N + j] = static_cast<S>(s);
    }
  }
}

}  // namespace ref

}  // namespace vle2::kernels
