#include "tsdl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tsdl/error.hpp"
#include "tsdl/rng.hpp"

namespace tsdl {

namespace {

void check_extents(const Shape& shape) {
  for (const std::size_t e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + to_string(shape));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) +
                     " vs " + to_string(b.shape()));
  }
}

// Splits a shape around `axis` into (outer, extent, inner) block sizes.
struct AxisBlocks {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisBlocks blocks(const Shape& shape, std::size_t axis) {
  AxisBlocks b;
  for (std::size_t i = 0; i < axis; ++i) b.outer *= shape[i];
  b.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) b.inner *= shape[i];
  return b;
}

void check_axis(const Tensor& a, std::size_t axis, const char* op) {
  if (axis >= a.rank()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " invalid for rank " + std::to_string(a.rank()));
  }
}

}  // namespace

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (const std::size_t e : shape) n *= e;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() : data_(1, real{0}) {}

Tensor::Tensor(Shape shape, real fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<real> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  check_extents(shape_);
  if (data_.size() != element_count(shape_)) {
    throw ShapeError("tensor of shape " + to_string(shape_) + " needs " +
                     std::to_string(element_count(shape_)) + " values, got " +
                     std::to_string(data_.size()));
  }
}

Tensor::Tensor(Shape shape, const GaussianFill& fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.resize(element_count(shape_));
  Rng rng(fill.seed);
  for (real& v : data_) v = static_cast<real>(rng.normal(fill.mean, fill.stdev));
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     to_string(shape_));
  }
  return shape_[axis];
}

std::size_t Tensor::offset(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw ShapeError("index rank " + std::to_string(index.size()) +
                     " does not match tensor rank " + std::to_string(shape_.size()));
  }
  std::size_t off = 0;
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= shape_[i]) {
      throw ShapeError("index out of range on axis " + std::to_string(i) +
                       " of shape " + to_string(shape_));
    }
    off = off * shape_[i] + index[i];
  }
  return off;
}

real& Tensor::at(std::initializer_list<std::size_t> index) {
  return data_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
}

real Tensor::at(std::initializer_list<std::size_t> index) const {
  return data_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
}

real Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape_));
  return data_[0];
}

Tensor Tensor::reshape(Shape shape) const {
  if (element_count(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(real v) { std::fill(data_.begin(), data_.end(), v); }

Tensor make(Shape shape, real fill) { return Tensor(std::move(shape), fill); }
Tensor make(Shape shape, std::vector<real> values) {
  return Tensor(std::move(shape), std::move(values));
}
Tensor make(Shape shape, const GaussianFill& fill) { return Tensor(std::move(shape), fill); }

Tensor ewise(EwiseOp op, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "ewise");
  Tensor out(a.shape());
  const auto x = a.data();
  const auto y = b.data();
  auto z = out.data();
  for (std::size_t i = 0; i < z.size(); ++i) {
    switch (op) {
      case EwiseOp::add: z[i] = x[i] + y[i]; break;
      case EwiseOp::sub: z[i] = x[i] - y[i]; break;
      case EwiseOp::mul: z[i] = x[i] * y[i]; break;
      case EwiseOp::max: z[i] = std::max(x[i], y[i]); break;
    }
  }
  return out;
}

Tensor ewise(EwiseOp op, const Tensor& a, real b) {
  return ewise(op, a, Tensor(a.shape(), b));
}

Tensor add(const Tensor& a, const Tensor& b) { return ewise(EwiseOp::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return ewise(EwiseOp::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return ewise(EwiseOp::mul, a, b); }
Tensor maximum(const Tensor& a, const Tensor& b) { return ewise(EwiseOp::max, a, b); }

Tensor scale(const Tensor& a, real s) {
  Tensor out = a;
  for (real& v : out.data()) v *= s;
  return out;
}

Tensor map(const Tensor& a, const std::function<real(real)>& fn) {
  Tensor out = a;
  for (real& v : out.data()) v = fn(v);
  return out;
}

void add_into(Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add_into");
  auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
}

namespace kernels {

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          real alpha, const real* a, std::size_t lda, const real* b, std::size_t ldb,
          real beta, real* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    real* crow = c + i * ldc;
    if (beta == real{0}) {
      std::fill(crow, crow + n, real{0});
    } else if (beta != real{1}) {
      for (std::size_t j = 0; j < n; ++j) crow[j] *= beta;
    }
  }
  if (!trans_b) {
    // Row of B is contiguous: accumulate C[i,:] += A(i,p) * B[p,:].
    for (std::size_t i = 0; i < m; ++i) {
      real* crow = c + i * ldc;
      for (std::size_t p = 0; p < k; ++p) {
        const real av = alpha * (trans_a ? a[p * lda + i] : a[i * lda + p]);
        if (av == real{0}) continue;
        const real* brow = b + p * ldb;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else {
    // B transposed: C[i,j] += dot(A(i,:), B[j,:]).
    for (std::size_t i = 0; i < m; ++i) {
      real* crow = c + i * ldc;
      for (std::size_t j = 0; j < n; ++j) {
        const real* brow = b + j * ldb;
        real acc = 0;
        if (trans_a) {
          for (std::size_t p = 0; p < k; ++p) acc += a[p * lda + i] * brow[p];
        } else {
          const real* arow = a + i * lda;
          for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
        }
        crow[j] += alpha * acc;
      }
    }
  }
}

}  // namespace kernels

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul needs rank-2 operands, got " + to_string(a.shape()) +
                     " and " + to_string(b.shape()));
  }
  const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  if (b.extent(0) != k) {
    throw ShapeError("matmul inner extents differ: " + to_string(a.shape()) + " x " +
                     to_string(b.shape()));
  }
  Tensor c({m, n});
  kernels::gemm(false, false, m, n, k, 1, a.raw(), k, b.raw(), n, 0, c.raw(), n);
  return c;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose needs rank 2, got " + to_string(a.shape()));
  const std::size_t m = a.extent(0), n = a.extent(1);
  Tensor t({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) t(j, i) = a(i, j);
  return t;
}

Tensor reduce(ReduceOp op, const Tensor& a, std::optional<std::size_t> axis) {
  if (!axis) {
    const auto x = a.data();
    real acc = op == ReduceOp::max ? x[0] : real{0};
    for (const real v : x) acc = op == ReduceOp::max ? std::max(acc, v) : acc + v;
    if (op == ReduceOp::mean) acc /= static_cast<real>(x.size());
    return Tensor::scalar(acc);
  }
  check_axis(a, *axis, "reduce");
  const AxisBlocks blk = blocks(a.shape(), *axis);
  Shape out_shape;
  for (std::size_t i = 0; i < a.rank(); ++i)
    if (i != *axis) out_shape.push_back(a.shape()[i]);
  Tensor out(out_shape);
  const auto x = a.data();
  auto y = out.data();
  for (std::size_t o = 0; o < blk.outer; ++o) {
    for (std::size_t in = 0; in < blk.inner; ++in) {
      real acc = x[o * blk.extent * blk.inner + in];
      for (std::size_t e = 1; e < blk.extent; ++e) {
        const real v = x[(o * blk.extent + e) * blk.inner + in];
        acc = op == ReduceOp::max ? std::max(acc, v) : acc + v;
      }
      if (op == ReduceOp::mean) acc /= static_cast<real>(blk.extent);
      y[o * blk.inner + in] = acc;
    }
  }
  return out;
}

Tensor concat(std::span<const Tensor> tensors, std::size_t axis) {
  if (tensors.empty()) throw ShapeError("concat of an empty list");
  const Tensor& first = tensors.front();
  check_axis(first, axis, "concat");
  Shape out_shape = first.shape();
  out_shape[axis] = 0;
  for (const Tensor& t : tensors) {
    if (t.rank() != first.rank()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < t.rank(); ++i) {
      if (i != axis && t.shape()[i] != first.shape()[i]) {
        throw ShapeError("concat: incompatible shapes " + to_string(first.shape()) +
                         " and " + to_string(t.shape()) + " on axis " + std::to_string(axis));
      }
    }
    out_shape[axis] += t.shape()[axis];
  }
  Tensor out(out_shape);
  const AxisBlocks ob = blocks(out_shape, axis);
  std::size_t placed = 0;
  for (const Tensor& t : tensors) {
    const AxisBlocks tb = blocks(t.shape(), axis);
    const std::size_t run = tb.extent * tb.inner;
    for (std::size_t o = 0; o < tb.outer; ++o) {
      std::copy_n(t.raw() + o * run, run,
                  out.raw() + (o * ob.extent + placed) * ob.inner);
    }
    placed += tb.extent;
  }
  return out;
}

Tensor concat(std::initializer_list<Tensor> tensors, std::size_t axis) {
  return concat(std::span<const Tensor>(tensors.begin(), tensors.size()), axis);
}

Tensor pad(const Tensor& a, std::size_t axis, std::size_t before, std::size_t after,
           real value) {
  check_axis(a, axis, "pad");
  Shape out_shape = a.shape();
  out_shape[axis] += before + after;
  Tensor out(out_shape, value);
  const AxisBlocks ab = blocks(a.shape(), axis);
  const AxisBlocks ob = blocks(out_shape, axis);
  const std::size_t run = ab.extent * ab.inner;
  for (std::size_t o = 0; o < ab.outer; ++o) {
    std::copy_n(a.raw() + o * run, run, out.raw() + (o * ob.extent + before) * ob.inner);
  }
  return out;
}

Tensor crop(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
  check_axis(a, axis, "crop");
  if (length == 0 || start + length > a.shape()[axis]) {
    throw ShapeError("crop window [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") outside extent " +
                     std::to_string(a.shape()[axis]));
  }
  Shape out_shape = a.shape();
  out_shape[axis] = length;
  Tensor out(out_shape);
  const AxisBlocks ab = blocks(a.shape(), axis);
  for (std::size_t o = 0; o < ab.outer; ++o) {
    std::copy_n(a.raw() + (o * ab.extent + start) * ab.inner, length * ab.inner,
                out.raw() + o * length * ab.inner);
  }
  return out;
}

Tensor take_rows(const Tensor& a, std::span<const std::size_t> rows) {
  if (a.rank() == 0) throw ShapeError("take_rows needs rank >= 1");
  Shape shape = a.shape();
  const std::size_t n = shape[0];
  const std::size_t stride = n == 0 ? 0 : a.size() / n;
  shape[0] = rows.size();
  std::vector<real> out;
  out.reserve(rows.size() * stride);
  for (std::size_t r : rows) {
    if (r >= n) throw ShapeError("take_rows index " + std::to_string(r) + " out of range " + std::to_string(n));
    out.insert(out.end(), a.raw() + r * stride, a.raw() + (r + 1) * stride);
  }
  return Tensor(std::move(shape), std::move(out));
}

Tensor flip(const Tensor& a, std::size_t axis) {
  check_axis(a, axis, "flip");
  Tensor out(a.shape());
  const AxisBlocks ab = blocks(a.shape(), axis);
  for (std::size_t o = 0; o < ab.outer; ++o) {
    for (std::size_t e = 0; e < ab.extent; ++e) {
      std::copy_n(a.raw() + (o * ab.extent + e) * ab.inner, ab.inner,
                  out.raw() + (o * ab.extent + (ab.extent - 1 - e)) * ab.inner);
    }
  }
  return out;
}

bool all_finite(const Tensor& a) {
  return std::all_of(a.data().begin(), a.data().end(),
                     [](real v) { return std::isfinite(v); });
}

real max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  real m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace tsdl
