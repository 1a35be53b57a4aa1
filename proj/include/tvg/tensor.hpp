#ifndef TVG_TENSOR_HPP
#define TVG_TENSOR_HPP

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "tvg/rng.hpp"

namespace tvg {

using Shape = std::vector<int>;

// Dense row-major tensor of 64-bit reals. Rank is 1 (vectors), 2 (matrices)
// or 3 (channel-first images for 2-D convolution). Scalars are [1,1].
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  // Row-major 2-D literal, mostly for tests.
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor uniform(Shape shape, double lo, double hi, Rng& rng);
  static Tensor normal(Shape shape, double mean, double stddev, Rng& rng);
  // Glorot/Xavier-uniform initialization for weight matrices.
  static Tensor xavier(Shape shape, int fan_in, int fan_out, Rng& rng);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int numel() const { return static_cast<int>(data_.size()); }
  bool empty() const { return data_.empty(); }

  // 2-D accessors (matrices).
  int rows() const;
  int cols() const;
  double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols() + c]; }

  // 3-D accessors ([channels, height, width] images).
  int channels() const;
  int height() const;
  int width() const;
  double& at(int c, int y, int x);
  double at(int c, int y, int x) const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](int i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return data_[static_cast<std::size_t>(i)]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  void fill(double value);
  void add_in_place(const Tensor& other);

  std::string shape_str() const;
  static std::string shape_str(const Shape& shape);

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace tvg

#endif  // TVG_TENSOR_HPP
