#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tsdl {

#ifdef TSDL_SINGLE_PRECISION
using real = float;
#else
using real = double;
#endif

/// Ordered list of positive extents. The empty shape denotes a scalar.
using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

struct GaussianFill {
  real mean = 0;
  real stdev = 1;
  std::uint64_t seed = 0;
};

/// Dense row-major n-dimensional array. The shape is fixed at construction;
/// element values may be written through data() or operator().
class Tensor {
 public:
  /// Rank-0 tensor holding a single zero.
  Tensor();

  explicit Tensor(Shape shape, real fill = 0);
  Tensor(Shape shape, std::vector<real> values);
  Tensor(Shape shape, const GaussianFill& fill);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), real{0}); }
  static Tensor scalar(real v) { return Tensor(Shape{}, std::vector<real>{v}); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t extent(std::size_t axis) const;

  std::span<real> data() noexcept { return data_; }
  std::span<const real> data() const noexcept { return data_; }
  real* raw() noexcept { return data_.data(); }
  const real* raw() const noexcept { return data_.data(); }

  /// Row-major flat offset of a multi-index.
  std::size_t offset(std::span<const std::size_t> index) const;

  real& at(std::initializer_list<std::size_t> index);
  real at(std::initializer_list<std::size_t> index) const;

  template <class... I>
  real& operator()(I... i) {
    const std::size_t idx[] = {static_cast<std::size_t>(i)...};
    return data_[offset(idx)];
  }
  template <class... I>
  real operator()(I... i) const {
    const std::size_t idx[] = {static_cast<std::size_t>(i)...};
    return data_[offset(idx)];
  }

  real item() const;

  /// Same elements, same order, new shape.
  Tensor reshape(Shape shape) const;

  void fill(real v);

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<real> data_;
};

// ---- construction -------------------------------------------------------

Tensor make(Shape shape, real fill);
Tensor make(Shape shape, std::vector<real> values);
Tensor make(Shape shape, const GaussianFill& fill);

// ---- elementwise --------------------------------------------------------

enum class EwiseOp { add, sub, mul, max };

Tensor ewise(EwiseOp op, const Tensor& a, const Tensor& b);
Tensor ewise(EwiseOp op, const Tensor& a, real b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, real s);
Tensor map(const Tensor& a, const std::function<real(real)>& fn);

/// In-place a += b; shapes must match.
void add_into(Tensor& a, const Tensor& b);

// ---- linear algebra -----------------------------------------------------

/// [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// ---- reductions ---------------------------------------------------------

enum class ReduceOp { sum, mean, max };

/// Reduces along `axis`, removing it; std::nullopt reduces every element to a
/// rank-0 tensor.
Tensor reduce(ReduceOp op, const Tensor& a, std::optional<std::size_t> axis);

// ---- layout -------------------------------------------------------------

Tensor concat(std::span<const Tensor> tensors, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> tensors, std::size_t axis);
Tensor pad(const Tensor& a, std::size_t axis, std::size_t before,
           std::size_t after, real value = 0);
Tensor crop(const Tensor& a, std::size_t axis, std::size_t start,
            std::size_t length);
/// Reverses the order of entries along `axis`.
Tensor flip(const Tensor& a, std::size_t axis);
/// Gathers entries of the leading axis in the given order (repeats allowed).
Tensor take_rows(const Tensor& a, std::span<const std::size_t> rows);

bool all_finite(const Tensor& a);
real max_abs_diff(const Tensor& a, const Tensor& b);

namespace kernels {

/// C = alpha * op(A) * op(B) + beta * C on row-major strided storage, where
/// op(X) is X or its transpose. m x n result, k the shared extent.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, real alpha, const real* a, std::size_t lda,
          const real* b, std::size_t ldb, real beta, real* c, std::size_t ldc);

}  // namespace kernels

}  // namespace tsdl
