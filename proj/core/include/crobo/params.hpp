// Copyright 2026 The crobo Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CROBO_PARAMS_HPP
#define CROBO_PARAMS_HPP

#include <Eigen/Core>
#include <cstddef>
#include <memory>
#include <new>
#include <string>
#include <vector>

namespace crobo::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

// Allocator with a fixed 64-byte base alignment. Eigen picks its vectorized
// peeling from the address of mapped data, so a fixed alignment keeps
// reductions over parameter views reproducible from run to run.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

template <typename T>
using FlatVector = std::vector<T, AlignedAllocator<T>>;

enum class Init { kTruncNormal, kNormal, kZeros, kOnes };

struct TensorInfo {
  std::string name;
  int rows = 1;
  int cols = 1;  // vectors are stored as rows == 1
  std::size_t offset = 0;
  Init init = Init::kZeros;
  bool decay = false;  // subject to decoupled weight decay

  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

/// Ordered list of named tensors packed into one flat buffer.
class ParamLayout {
 public:
  int add(std::string name, int rows, int cols, Init init, bool decay);

  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  const TensorInfo& operator[](int i) const { return tensors_[i]; }
  int find(const std::string& name) const;  // -1 when absent
  std::size_t total() const { return total_; }
  std::vector<char> decay_mask() const;

 private:
  std::vector<TensorInfo> tensors_;
  std::size_t total_ = 0;
};

template <typename T>
class ParamSet {
 public:
  ParamSet() = default;
  explicit ParamSet(std::shared_ptr<const ParamLayout> layout)
      : layout_(std::move(layout)), data_(layout_->total(), T(0)) {}

  const ParamLayout& layout() const { return *layout_; }
  std::shared_ptr<const ParamLayout> layout_ptr() const { return layout_; }

  FlatVector<T>& flat() { return data_; }
  const FlatVector<T>& flat() const { return data_; }

  Eigen::Map<Mat<T>> mat(int i) {
    const auto& t = (*layout_)[i];
    return {data_.data() + t.offset, t.rows, t.cols};
  }
  Eigen::Map<const Mat<T>> mat(int i) const {
    const auto& t = (*layout_)[i];
    return {data_.data() + t.offset, t.rows, t.cols};
  }
  Eigen::Map<RowVec<T>> vec(int i) {
    const auto& t = (*layout_)[i];
    return {data_.data() + t.offset, static_cast<Eigen::Index>(t.size())};
  }
  Eigen::Map<const RowVec<T>> vec(int i) const {
    const auto& t = (*layout_)[i];
    return {data_.data() + t.offset, static_cast<Eigen::Index>(t.size())};
  }

  void set_zero() { std::fill(data_.begin(), data_.end(), T(0)); }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out(layout_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.flat()[i] = static_cast<U>(data_[i]);
    return out;
  }

  bool operator==(const ParamSet& o) const { return data_ == o.data_; }

 private:
  std::shared_ptr<const ParamLayout> layout_;
  FlatVector<T> data_;
};

}  // namespace crobo::nn

#endif  // CROBO_PARAMS_HPP
