#pragma once

// Dense kernels in two flavours: a serial reference and an OpenMP row-parallel
// version. Both accumulate every output element in the same order, so their
// results are bit-identical; tests rely on that.

#include <cstddef>
#include <span>

namespace eat::kernels {

enum class Execution { serial, parallel };

struct MatrixView {
  std::span<const double> data;
  std::size_t rows;
  std::size_t cols;
};

namespace serial {

/// out[n x m] = x[n x k] * w[k x m] (+ bias[m] when non-empty)
void affine(MatrixView x, MatrixView w, std::span<const double> bias, std::span<double> out);
/// out[k x m] += a[n x k]^T * b[n x m]
void accumulate_at_b(MatrixView a, MatrixView b, std::span<double> out);
/// out[n x k] += a[n x m] * b[k x m]^T
void accumulate_a_bt(MatrixView a, MatrixView b, std::span<double> out);
void relu(std::span<const double> in, std::span<double> out);

}  // namespace serial

namespace parallel {

void affine(MatrixView x, MatrixView w, std::span<const double> bias, std::span<double> out);
void accumulate_at_b(MatrixView a, MatrixView b, std::span<double> out);
void accumulate_a_bt(MatrixView a, MatrixView b, std::span<double> out);
void relu(std::span<const double> in, std::span<double> out);

}  // namespace parallel

inline void affine(Execution exec, MatrixView x, MatrixView w, std::span<const double> bias,
                   std::span<double> out) {
  exec == Execution::parallel ? parallel::affine(x, w, bias, out)
                              : serial::affine(x, w, bias, out);
}

inline void relu(Execution exec, std::span<const double> in, std::span<double> out) {
  exec == Execution::parallel ? parallel::relu(in, out) : serial::relu(in, out);
}

/// Number of OpenMP threads the parallel kernels will use.
int max_threads() noexcept;

}  // namespace eat::kernels
