#include "ssrcnn/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ssrcnn/error.hpp"
#include "parallel.hpp"

namespace ssrcnn {

namespace {

void check_dims(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    std::ostringstream os;
    os << what << ": dimension " << a << " != " << b;
    throw DimensionMismatch(os.str());
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  check_dims(rows * cols, data_.size(), "Matrix");
}

bool Matrix::is_zero() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return v == 0.0; });
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Vector matvec(const Matrix& a, std::span<const double> x) {
  check_dims(a.cols(), x.size(), "matvec");
  Vector y(a.rows(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto row = a.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) s += row[c] * x[c];
    y[r] = s;
  }
  return y;
}

Vector matvec_t(const Matrix& a, std::span<const double> x) {
  check_dims(a.rows(), x.size(), "matvec_t");
  Vector y(a.cols(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto row = a.row(r);
    const double xr = x[r];
    if (xr == 0.0) continue;
    for (std::size_t c = 0; c < row.size(); ++c) y[c] += row[c] * xr;
  }
  return y;
}

Vector add(std::span<const double> a, std::span<const double> b) {
  check_dims(a.size(), b.size(), "add");
  Vector y(a.begin(), a.end());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i];
  return y;
}

void add_inplace(Vector& a, std::span<const double> b) {
  check_dims(a.size(), b.size(), "add_inplace");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

Vector relu(std::span<const double> x) {
  Vector y(x.size());
  std::transform(x.begin(), x.end(), y.begin(), [](double v) { return v > 0.0 ? v : 0.0; });
  return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
  check_dims(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Vector softmax(std::span<const double> x) {
  Vector y(x.size());
  if (x.empty()) return y;
  const double m = *std::max_element(x.begin(), x.end());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::exp(x[i] - m);
    z += y[i];
  }
  for (double& v : y) v /= z;
  return y;
}

Vector layer_norm(std::span<const double> x, std::span<const double> gain,
                  std::span<const double> bias, double eps) {
  check_dims(x.size(), gain.size(), "layer_norm gain");
  check_dims(x.size(), bias.size(), "layer_norm bias");
  if (!(eps > 0.0)) throw InvalidArgument("layer_norm eps must be positive");
  if (x.empty()) return {};
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  const double inv = 1.0 / std::sqrt(var + eps);
  Vector y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mean) * inv * gain[i] + bias[i];
  return y;
}

Vector layer_norm(std::span<const double> x, double eps) {
  const Vector ones(x.size(), 1.0), zeros(x.size(), 0.0);
  return layer_norm(x, ones, zeros, eps);
}

void require_finite(std::span<const double> x, const char* what) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) {
      std::ostringstream os;
      os << what << ": non-finite entry at index " << i;
      throw NonFinite(os.str());
    }
  }
}

Matrix gemm(const Matrix& a, const Matrix& b) {
  check_dims(a.cols(), b.rows(), "gemm");
  Matrix c(a.rows(), b.cols());
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto crow = c.row(static_cast<std::size_t>(i));
    const auto arow = a.row(static_cast<std::size_t>(i));
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = arow[k];
      const auto brow = b.row(k);
      for (std::size_t j = 0; j < brow.size(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

std::vector<Vector> matvec_batch(const Matrix& a, const std::vector<Vector>& xs) {
  std::vector<Vector> ys(xs.size());
  detail::parallel_for(xs.size(), [&](std::size_t i) { ys[i] = matvec(a, xs[i]); });
  return ys;
}

namespace serial {

Matrix gemm(const Matrix& a, const Matrix& b) {
  check_dims(a.cols(), b.rows(), "gemm");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

std::vector<Vector> matvec_batch(const Matrix& a, const std::vector<Vector>& xs) {
  std::vector<Vector> ys;
  ys.reserve(xs.size());
  for (const auto& x : xs) ys.push_back(matvec(a, x));
  return ys;
}

}  // namespace serial

AttentionResult mh_attention(const std::vector<Vector>& query_src,
                             const std::vector<Vector>& key_src,
                             const std::vector<Vector>& value_src, std::size_t heads,
                             const AttentionWeights& w) {
  const std::size_t n = query_src.size();
  check_dims(key_src.size(), n, "mh_attention keys");
  check_dims(value_src.size(), n, "mh_attention values");
  AttentionResult res;
  if (n == 0) return res;
  const std::size_t d = query_src.front().size();
  if (heads == 0 || d % heads != 0) {
    std::ostringstream os;
    os << "mh_attention: dimension " << d << " not divisible by " << heads << " heads";
    throw DimensionMismatch(os.str());
  }
  for (const Matrix* m : {&w.query, &w.key, &w.value, &w.output}) {
    check_dims(m->rows(), d, "mh_attention weight rows");
    check_dims(m->cols(), d, "mh_attention weight cols");
  }
  const std::vector<Vector> q = matvec_batch(w.query, query_src);
  const std::vector<Vector> k = matvec_batch(w.key, key_src);
  const std::vector<Vector> v = matvec_batch(w.value, value_src);

  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  res.attention.assign(heads, Matrix(n, n));
  std::vector<Vector> mixed(n, Vector(d, 0.0));
  const auto nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < nn; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    Vector logits(n);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dh;
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t t = 0; t < dh; ++t) s += q[i][off + t] * k[j][off + t];
        logits[j] = s * scale;
      }
      const Vector a = softmax(logits);
      for (std::size_t j = 0; j < n; ++j) {
        res.attention[h](i, j) = a[j];
        for (std::size_t t = 0; t < dh; ++t) mixed[i][off + t] += a[j] * v[j][off + t];
      }
    }
  }
  res.outputs = matvec_batch(w.output, mixed);
  return res;
}

Vector fd_gradient(const ScalarFn& f, const Vector& x, double h) {
  if (!(h > 0.0)) throw InvalidArgument("fd_gradient step must be positive");
  Vector g(x.size());
  Vector probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = f(probe);
    probe[i] = x[i] - h;
    const double fm = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      std::ostringstream os;
      os << "fd_gradient: non-finite function value around coordinate " << i;
      throw NonFinite(os.str());
    }
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace ssrcnn
