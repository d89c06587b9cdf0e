#include "eat/kernels.hpp"

#include <algorithm>

#include <omp.h>

#include "eat/errors.hpp"

namespace eat::kernels {
namespace {

void check_affine(MatrixView x, MatrixView w, std::span<const double> bias,
                  std::span<double> out) {
  if (x.cols != w.rows) throw ContractViolation("affine: inner dimensions disagree");
  if (!bias.empty() && bias.size() != w.cols) throw ContractViolation("affine: bias length");
  if (out.size() != x.rows * w.cols) throw ContractViolation("affine: output size");
}

inline void affine_row(MatrixView x, MatrixView w, std::span<const double> bias,
                       std::span<double> out, std::size_t i) {
  double* y = out.data() + i * w.cols;
  if (bias.empty()) {
    std::fill(y, y + w.cols, 0.0);
  } else {
    std::copy(bias.begin(), bias.end(), y);
  }
  const double* xi = x.data.data() + i * x.cols;
  for (std::size_t p = 0; p < x.cols; ++p) {
    const double a = xi[p];
    const double* wp = w.data.data() + p * w.cols;
    for (std::size_t j = 0; j < w.cols; ++j) y[j] += a * wp[j];
  }
}

inline void at_b_row(MatrixView a, MatrixView b, std::span<double> out, std::size_t p) {
  double* o = out.data() + p * b.cols;
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double s = a.data[i * a.cols + p];
    if (s == 0.0) continue;
    const double* bi = b.data.data() + i * b.cols;
    for (std::size_t j = 0; j < b.cols; ++j) o[j] += s * bi[j];
  }
}

inline void a_bt_row(MatrixView a, MatrixView b, std::span<double> out, std::size_t i) {
  const double* ai = a.data.data() + i * a.cols;
  double* o = out.data() + i * b.rows;
  for (std::size_t p = 0; p < b.rows; ++p) {
    const double* bp = b.data.data() + p * b.cols;
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) s += ai[j] * bp[j];
    o[p] += s;
  }
}

void check_at_b(MatrixView a, MatrixView b, std::span<double> out) {
  if (a.rows != b.rows) throw ContractViolation("accumulate_at_b: row counts disagree");
  if (out.size() != a.cols * b.cols) throw ContractViolation("accumulate_at_b: output size");
}

void check_a_bt(MatrixView a, MatrixView b, std::span<double> out) {
  if (a.cols != b.cols) throw ContractViolation("accumulate_a_bt: column counts disagree");
  if (out.size() != a.rows * b.rows) throw ContractViolation("accumulate_a_bt: output size");
}

}  // namespace

int max_threads() noexcept { return omp_get_max_threads(); }

namespace serial {

void affine(MatrixView x, MatrixView w, std::span<const double> bias, std::span<double> out) {
  check_affine(x, w, bias, out);
  for (std::size_t i = 0; i < x.rows; ++i) affine_row(x, w, bias, out, i);
}

void accumulate_at_b(MatrixView a, MatrixView b, std::span<double> out) {
  check_at_b(a, b, out);
  for (std::size_t p = 0; p < a.cols; ++p) at_b_row(a, b, out, p);
}

void accumulate_a_bt(MatrixView a, MatrixView b, std::span<double> out) {
  check_a_bt(a, b, out);
  for (std::size_t i = 0; i < a.rows; ++i) a_bt_row(a, b, out, i);
}

void relu(std::span<const double> in, std::span<double> out) {
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

}  // namespace serial

namespace parallel {

void affine(MatrixView x, MatrixView w, std::span<const double> bias, std::span<double> out) {
  check_affine(x, w, bias, out);
  const auto n = static_cast<std::ptrdiff_t>(x.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    affine_row(x, w, bias, out, static_cast<std::size_t>(i));
  }
}

void accumulate_at_b(MatrixView a, MatrixView b, std::span<double> out) {
  check_at_b(a, b, out);
  const auto k = static_cast<std::ptrdiff_t>(a.cols);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < k; ++p) at_b_row(a, b, out, static_cast<std::size_t>(p));
}

void accumulate_a_bt(MatrixView a, MatrixView b, std::span<double> out) {
  check_a_bt(a, b, out);
  const auto n = static_cast<std::ptrdiff_t>(a.rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) a_bt_row(a, b, out, static_cast<std::size_t>(i));
}

void relu(std::span<const double> in, std::span<double> out) {
  const auto n = static_cast<std::ptrdiff_t>(in.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

}  // namespace parallel
}  // namespace eat::kernels
