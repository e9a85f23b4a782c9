#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mfchaos {

/// n points in R^d stored row-major.
class Cloud {
 public:
  Cloud() = default;
  Cloud(std::size_t n, std::size_t dim, double fill = 0.0)
      : n_(n), dim_(dim), data_(n * dim, fill) {}

  std::size_t size() const { return n_; }
  std::size_t dim() const { return dim_; }
  bool empty() const { return n_ == 0; }

  std::span<double> operator[](std::size_t i) { return {data_.data() + i * dim_, dim_}; }
  std::span<const double> operator[](std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  friend bool operator==(const Cloud&, const Cloud&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double norm_sq(std::span<const double> a) { return dot(a, a); }

double norm(std::span<const double> a);

/// Coordinate-wise mean of the cloud, written into `out` (size dim).
void mean_into(const Cloud& c, std::span<double> out);

}  // namespace mfchaos
