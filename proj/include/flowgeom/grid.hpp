#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "flowgeom/error.hpp"

namespace flowgeom {

// Row-major H x W image of per-pixel values. A default-constructed grid is
// empty and stands for "absent"; any constructed grid has rows, cols > 0.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int rows, int cols) : Grid(rows, cols, zero_value()) {}
  Grid(int rows, int cols, const T& fill) : rows_(rows), cols_(cols) {
    if (rows <= 0 || cols <= 0) {
      throw Error(ErrorCode::ShapeMismatch,
                  "grid dimensions must be positive, got " + std::to_string(rows) + "x" +
                      std::to_string(cols));
    }
    data_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill);
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int r, int c) { return data_[index(r, c)]; }
  const T& operator()(int r, int c) const { return data_[index(r, c)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  template <typename U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return rows_ == other.rows() && cols_ == other.cols();
  }

  bool operator==(const Grid& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
  }

  static T zero_value() {
    if constexpr (requires { T::Zero(); }) {
      return T::Zero();
    } else {
      return T{};
    }
  }

 private:
  std::size_t index(int r, int c) const noexcept {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) +
           static_cast<std::size_t>(c);
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using Tensor2 = Grid<double>;
using Tensor3 = Grid<Eigen::Vector3d>;
using PixelMap = Grid<Eigen::Vector2d>;
using Mask = Grid<std::uint8_t>;

inline std::string shape_string(int rows, int cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename A, typename B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": expected " +
                                              shape_string(a.rows(), a.cols()) + ", got " +
                                              shape_string(b.rows(), b.cols()));
  }
}

// An empty mask means "every pixel valid".
inline bool mask_at(const Mask& mask, std::size_t i) { return mask.empty() || mask[i] != 0; }

inline std::size_t count(const Mask& mask) {
  std::size_t n = 0;
  for (auto v : mask.values()) n += v != 0;
  return n;
}

}  // namespace flowgeom
