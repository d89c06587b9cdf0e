#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace eat {

/// Dense row-major array of doubles with an optional gradient buffer of the same shape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  /// Rank-2 accessors; a rank-1 tensor is treated as a single row.
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& at(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols(), cols()};
  }

  bool has_grad() const noexcept { return !grad_.empty(); }
  /// Allocates a zeroed gradient slot if none exists.
  std::span<double> ensure_grad();
  std::span<double> grad() noexcept { return grad_; }
  std::span<const double> grad() const noexcept { return grad_; }
  void zero_grad();
  void drop_grad() { grad_.clear(); }

  /// Throws NumericDomainError naming `where` if any value is NaN or infinite.
  void require_finite(const std::string& where) const;

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
  std::vector<double> grad_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape) noexcept;

/// Numerically stable softmax of a rank-1 tensor.
Tensor softmax(const Tensor& logits);
void softmax_into(std::span<const double> logits, std::span<double> out);
/// log(sum(exp(x))) with max subtraction.
double log_sum_exp(std::span<const double> values);

using ScalarFunction = std::function<double(const Tensor&)>;

/// Fourth-order central-difference gradient of `f` at `params`.
///
/// Each coordinate is probed at +-eps and +-2*eps. Throws OracleFailure carrying the
/// coordinate index when `f` is non-finite at a probe, and ConfigError when eps lies
/// outside [1e-8, 1e-4].
Tensor finite_diff_grad(const ScalarFunction& f, const Tensor& params, double eps = 1e-5);

/// max_i |a_i - b_i| / max(|a_i|, floor)
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                          double floor);

double dot(std::span<const double> a, std::span<const double> b) noexcept;
double norm2(std::span<const double> a) noexcept;

}  // namespace eat
