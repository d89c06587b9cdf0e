#include "eat/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eat/errors.hpp"

namespace eat {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::numeric_domain: return "numeric-domain";
    case ErrorKind::oracle_failure: return "oracle-failure";
    case ErrorKind::config: return "config";
    case ErrorKind::contract: return "contract";
    case ErrorKind::parse: return "parse";
    case ErrorKind::undefined_metric: return "undefined-metric";
    case ErrorKind::training_failure: return "training-failure";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

std::size_t shape_product(const std::vector<std::size_t>& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  for (auto d : shape_) {
    if (d == 0) throw ContractViolation("tensor dimensions must be positive");
  }
  data_.assign(shape_product(shape_), fill);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_) {
    if (d == 0) throw ContractViolation("tensor dimensions must be positive");
  }
  if (shape_product(shape_) != data_.size()) {
    throw ContractViolation("tensor data length " + std::to_string(data_.size()) +
                            " does not match shape product " +
                            std::to_string(shape_product(shape_)));
  }
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::rows() const noexcept {
  if (shape_.empty()) return 0;
  return shape_.size() == 1 ? 1 : shape_[0];
}

std::size_t Tensor::cols() const noexcept {
  if (shape_.empty()) return 0;
  return shape_.back();
}

std::span<double> Tensor::ensure_grad() {
  if (grad_.size() != data_.size()) grad_.assign(data_.size(), 0.0);
  return grad_;
}

void Tensor::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

void Tensor::require_finite(const std::string& where) const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw NumericDomainError(where + ": non-finite value at index " + std::to_string(i));
    }
  }
}

double log_sum_exp(std::span<const double> values) {
  const double top = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - top);
  return top + std::log(sum);
}

void softmax_into(std::span<const double> logits, std::span<double> out) {
  if (logits.empty()) throw ContractViolation("softmax of an empty vector");
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits[i])) {
      throw NumericDomainError("softmax: non-finite logit at index " + std::to_string(i));
    }
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
}

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 1) throw ContractViolation("softmax expects a rank-1 tensor");
  Tensor out = Tensor::zeros_like(logits);
  softmax_into(logits.data(), out.data());
  return out;
}

Tensor finite_diff_grad(const ScalarFunction& f, const Tensor& params, double eps) {
  if (!(eps >= 1e-8 && eps <= 1e-4)) {
    throw ConfigError("finite-difference step must lie in [1e-8, 1e-4]");
  }
  Tensor probe = params;
  probe.drop_grad();
  Tensor grad = Tensor::zeros_like(params);
  auto eval = [&](std::size_t i) {
    const double v = f(probe);
    if (!std::isfinite(v)) {
      throw OracleFailure("finite-difference probe evaluated non-finite at coordinate " +
                              std::to_string(i),
                          i);
    }
    return v;
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double x = params[i];
    probe[i] = x + 2 * eps;
    const double f2p = eval(i);
    probe[i] = x + eps;
    const double f1p = eval(i);
    probe[i] = x - eps;
    const double f1m = eval(i);
    probe[i] = x - 2 * eps;
    const double f2m = eval(i);
    probe[i] = x;
    grad[i] = (-f2p + 8.0 * f1p - 8.0 * f1m + f2m) / (12.0 * eps);
  }
  return grad;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                          double floor) {
  if (analytic.size() != numeric.size()) {
    throw ContractViolation("max_relative_error: length mismatch");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max(std::abs(analytic[i]), floor);
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) noexcept { return std::sqrt(dot(a, a)); }

}  // namespace eat
