#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace ssrcnn {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  bool is_zero() const;
  Matrix transposed() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

// y = A x
Vector matvec(const Matrix& a, std::span<const double> x);
// y = A^T x
Vector matvec_t(const Matrix& a, std::span<const double> x);

Vector add(std::span<const double> a, std::span<const double> b);
void add_inplace(Vector& a, std::span<const double> b);
Vector relu(std::span<const double> x);
double dot(std::span<const double> a, std::span<const double> b);
// Numerically stable softmax.
Vector softmax(std::span<const double> x);

inline constexpr double kLayerNormEps = 1e-5;

// (x - mean) / sqrt(var + eps) * gain + bias, population variance.
Vector layer_norm(std::span<const double> x, std::span<const double> gain,
                  std::span<const double> bias, double eps = kLayerNormEps);
// Unit gain, zero bias.
Vector layer_norm(std::span<const double> x, double eps = kLayerNormEps);

// Throws NonFinite naming `what` when any entry is NaN or infinite.
void require_finite(std::span<const double> x, const char* what);

// C = A B. OpenMP-parallel over rows of C; the per-element accumulation
// order matches serial::gemm so both produce identical results.
Matrix gemm(const Matrix& a, const Matrix& b);
// Row i of the result is A applied to xs[i]; parallel over i.
std::vector<Vector> matvec_batch(const Matrix& a, const std::vector<Vector>& xs);

namespace serial {
// Reference kernels kept for testing and benchmarking.
Matrix gemm(const Matrix& a, const Matrix& b);
std::vector<Vector> matvec_batch(const Matrix& a, const std::vector<Vector>& xs);
}  // namespace serial

struct AttentionWeights {
  Matrix query;   // d x d
  Matrix key;     // d x d
  Matrix value;   // d x d
  Matrix output;  // d x d
};

struct AttentionResult {
  std::vector<Vector> outputs;
  // One N x N row-stochastic matrix per head.
  std::vector<Matrix> attention;
};

// Multi-head scaled dot-product attention. Queries are projected from
// `query_src`, keys from `key_src`, values from `value_src`; all three
// hold N vectors of dimension d, and d must be divisible by `heads`.
AttentionResult mh_attention(const std::vector<Vector>& query_src,
                             const std::vector<Vector>& key_src,
                             const std::vector<Vector>& value_src, std::size_t heads,
                             const AttentionWeights& w);

inline AttentionResult mh_attention(const std::vector<Vector>& x, std::size_t heads,
                                    const AttentionWeights& w) {
  return mh_attention(x, x, x, heads, w);
}

using ScalarFn = std::function<double(const Vector&)>;

// Central-difference gradient (f(x + h e_i) - f(x - h e_i)) / 2h.
Vector fd_gradient(const ScalarFn& f, const Vector& x, double h = 1e-5);

}  // namespace ssrcnn
