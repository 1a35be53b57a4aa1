#include "tvg/tensor.hpp"

#include <cmath>
#include <sstream>

#include "tvg/errors.hpp"

namespace tvg {

namespace {
std::size_t checked_numel(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor: empty shape");
  std::size_t n = 1;
  for (int extent : shape) {
    if (extent <= 0) {
      throw DimensionError("tensor: non-positive extent in shape " + Tensor::shape_str(shape));
    }
    n *= static_cast<std::size_t>(extent);
  }
  return n;
}
}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(checked_numel(shape_), 0.0) {}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

Tensor Tensor::scalar(double value) {
  Tensor t(Shape{1, 1});
  t[0] = value;
  return t;
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const int n = static_cast<int>(rows.size());
  if (n == 0) throw DimensionError("tensor: from_rows needs at least one row");
  const int m = static_cast<int>(rows.begin()->size());
  Tensor t(Shape{n, m});
  int r = 0;
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != m) {
      throw DimensionError("tensor: ragged rows in from_rows");
    }
    int c = 0;
    for (double v : row) t.at(r, c++) = v;
    ++r;
  }
  return t;
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, Rng& rng) {
  Tensor t(std::move(shape));
  for (int i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

Tensor Tensor::normal(Shape shape, double mean, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (int i = 0; i < t.numel(); ++i) t[i] = rng.normal(mean, stddev);
  return t;
}

Tensor Tensor::xavier(Shape shape, int fan_in, int fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  return uniform(std::move(shape), -limit, limit, rng);
}

int Tensor::rows() const {
  if (rank() != 2) throw DimensionError("tensor: rows() on non-matrix " + shape_str());
  return shape_[0];
}

int Tensor::cols() const {
  if (rank() != 2) throw DimensionError("tensor: cols() on non-matrix " + shape_str());
  return shape_[1];
}

int Tensor::channels() const {
  if (rank() != 3) throw DimensionError("tensor: channels() on non-image " + shape_str());
  return shape_[0];
}

int Tensor::height() const {
  if (rank() != 3) throw DimensionError("tensor: height() on non-image " + shape_str());
  return shape_[1];
}

int Tensor::width() const {
  if (rank() != 3) throw DimensionError("tensor: width() on non-image " + shape_str());
  return shape_[2];
}

double& Tensor::at(int c, int y, int x) {
  return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
}

double Tensor::at(int c, int y, int x) const {
  return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(double value) {
  for (double& v : data_) v = value;
}

void Tensor::add_in_place(const Tensor& other) {
  if (!same_shape(other)) {
    throw DimensionError("tensor: add_in_place shape mismatch " + shape_str() + " vs " +
                         other.shape_str());
  }
  for (int i = 0; i < numel(); ++i) data_[i] += other.data_[i];
}

std::string Tensor::shape_str() const { return shape_str(shape_); }

std::string Tensor::shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

}  // namespace tvg
