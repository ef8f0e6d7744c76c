#include "netcast/tensor.hpp"

#include <cmath>
#include <sstream>

namespace netcast {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  require(values_.size() == shape_product(shape_), errc::shape_mismatch,
          "value count " + std::to_string(values_.size()) + " does not match shape " +
              shape_str());
}

void Tensor::ensure_finite(const char* op) const {
  for (double v : values_) {
    if (!std::isfinite(v)) {
      fail(errc::non_finite, std::string(op) + " produced a non-finite value");
    }
  }
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << 'x';
    os << shape_[i];
  }
  os << ']';
  return os.str();
}

}  // namespace netcast
