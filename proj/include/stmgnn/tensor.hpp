#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace stmgnn {

/// Dense row-major rank-3 array. The toolkit's (region, time, category)
/// blocks are small enough that a strided vector is all that is needed.
template <typename T>
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(int d0, int d1, int d2, T fill = T{})
      : d0_(d0), d1_(d1), d2_(d2),
        data_(static_cast<std::size_t>(d0) * d1 * d2, fill) {
    if (d0 < 0 || d1 < 0 || d2 < 0) {
      throw std::invalid_argument("Tensor3: negative dimension");
    }
  }

  int dim0() const { return d0_; }
  int dim1() const { return d1_; }
  int dim2() const { return d2_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(int i, int j, int k) {
    return data_[(static_cast<std::size_t>(i) * d1_ + j) * d2_ + k];
  }
  const T& operator()(int i, int j, int k) const {
    return data_[(static_cast<std::size_t>(i) * d1_ + j) * d2_ + k];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  bool same_shape(const Tensor3& other) const {
    return d0_ == other.d0_ && d1_ == other.d1_ && d2_ == other.d2_;
  }

  friend bool operator==(const Tensor3& a, const Tensor3& b) {
    return a.d0_ == b.d0_ && a.d1_ == b.d1_ && a.d2_ == b.d2_ && a.data_ == b.data_;
  }

 private:
  int d0_ = 0, d1_ = 0, d2_ = 0;
  std::vector<T> data_;
};

using DTensor3 = Tensor3<double>;
using ITensor3 = Tensor3<std::int64_t>;

}  // namespace stmgnn
