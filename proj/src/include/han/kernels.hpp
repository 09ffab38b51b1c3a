#pragma once

// Dense kernels backing the encoders. han::kernels::serial holds the plain
// reference loops; the functions in han::kernels run the same arithmetic with
// OpenMP work-sharing over rows (or output columns), so every output element
// is still a single serially-accumulated dot product. Parallel results are
// therefore bitwise identical to the serial reference at any thread count —
// the unit tests assert exactly that, and the bench target measures the gap.

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace han::kernels {

// Work-sharing below this many multiply-adds costs more than it saves.
inline constexpr std::size_t kParallelCutoff = 1 << 14;

namespace serial {

// y = W x  (W is rows x cols, row-major)
template <class T>
void matvec(const T* w, const T* x, T* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    T acc = T(0);
    const T* wr = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
}

// y += W x
template <class T>
void matvec_acc(const T* w, const T* x, T* y, std::size_t rows,
                std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    T acc = T(0);
    const T* wr = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] += acc;
  }
}

// dx += W^T dy  (each dx[c] is one serial reduction over rows)
template <class T>
void matvec_t_acc(const T* w, const T* dy, T* dx, std::size_t rows,
                  std::size_t cols) {
  for (std::size_t c = 0; c < cols; ++c) {
    T acc = T(0);
    for (std::size_t r = 0; r < rows; ++r) acc += w[r * cols + c] * dy[r];
    dx[c] += acc;
  }
}

// dW += dy x^T
template <class T>
void outer_acc(T* dw, const T* dy, const T* x, std::size_t rows,
               std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    T* dwr = dw + r * cols;
    const T g = dy[r];
    for (std::size_t c = 0; c < cols; ++c) dwr[c] += g * x[c];
  }
}

}  // namespace serial

template <class T>
void matvec(const T* w, const T* x, T* y, std::size_t rows, std::size_t cols) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelCutoff)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r) {
    T acc = T(0);
    const T* wr = w + static_cast<std::size_t>(r) * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
#else
  serial::matvec(w, x, y, rows, cols);
#endif
}

template <class T>
void matvec_acc(const T* w, const T* x, T* y, std::size_t rows,
                std::size_t cols) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelCutoff)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r) {
    T acc = T(0);
    const T* wr = w + static_cast<std::size_t>(r) * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] += acc;
  }
#else
  serial::matvec_acc(w, x, y, rows, cols);
#endif
}

template <class T>
void matvec_t_acc(const T* w, const T* dy, T* dx, std::size_t rows,
                  std::size_t cols) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelCutoff)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(cols); ++c) {
    T acc = T(0);
    for (std::size_t r = 0; r < rows; ++r) {
      acc += w[r * cols + static_cast<std::size_t>(c)] * dy[r];
    }
    dx[c] += acc;
  }
#else
  serial::matvec_t_acc(w, dy, dx, rows, cols);
#endif
}

template <class T>
void outer_acc(T* dw, const T* dy, const T* x, std::size_t rows,
               std::size_t cols) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (rows * cols >= kParallelCutoff)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r) {
    T* dwr = dw + static_cast<std::size_t>(r) * cols;
    const T g = dy[r];
    for (std::size_t c = 0; c < cols; ++c) dwr[c] += g * x[c];
  }
#else
  serial::outer_acc(dw, dy, x, rows, cols);
#endif
}

template <class T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace han::kernels
