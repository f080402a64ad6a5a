// SPDX-License-Identifier: Apache-2.0

#include "ddpm/tensor.hpp"

#include <cmath>
#include <numeric>

#include "ddpm/errors.hpp"

namespace ddpm {

std::string Shape::str() const {
  return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
}

ImageTensor::ImageTensor(Shape shape, double fill) : shape_(shape), data_(shape.size(), fill) {
  if (shape.channels == 0 || shape.height == 0 || shape.width == 0) {
    throw ShapeError("tensor shape components must be positive, got " + shape.str());
  }
}

ImageTensor::ImageTensor(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (shape.channels == 0 || shape.height == 0 || shape.width == 0) {
    throw ShapeError("tensor shape components must be positive, got " + shape.str());
  }
  if (data_.size() != shape.size()) {
    throw ShapeError("tensor data has " + std::to_string(data_.size()) + " values, shape " +
                     shape.str() + " needs " + std::to_string(shape.size()));
  }
}

bool ImageTensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double ImageTensor::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

double ImageTensor::mean() const { return data_.empty() ? 0.0 : sum() / data_.size(); }

ImageTensor& ImageTensor::operator+=(const ImageTensor& other) {
  require_same_shape(*this, other, "tensor +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

ImageTensor& ImageTensor::operator-=(const ImageTensor& other) {
  require_same_shape(*this, other, "tensor -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

ImageTensor& ImageTensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

ImageTensor operator+(ImageTensor a, const ImageTensor& b) { return a += b; }
ImageTensor operator-(ImageTensor a, const ImageTensor& b) { return a -= b; }
ImageTensor operator*(double s, ImageTensor a) { return a *= s; }

ImageTensor lincomb(double a, const ImageTensor& u, double b, const ImageTensor& v) {
  require_same_shape(u, v, "lincomb");
  ImageTensor out(u.shape());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = a * u[i] + b * v[i];
  return out;
}

void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
  }
}

}  // namespace ddpm
