#pragma once

#include <memory>
#include <utility>

namespace mela {

// Immutable heap cell with value semantics, used for recursive AST nodes.
// Copies share the pointee, which is safe because it is never mutated.
// Equality compares the pointed-to values.
template <typename T>
class Box {
 public:
  Box(T value) : ptr_(std::make_shared<const T>(std::move(value))) {}  // NOLINT implicit

  const T& operator*() const { return *ptr_; }
  const T* operator->() const { return ptr_.get(); }
  const T& get() const { return *ptr_; }

  friend bool operator==(const Box& a, const Box& b) {
    return a.ptr_ == b.ptr_ || *a.ptr_ == *b.ptr_;
  }

 private:
  std::shared_ptr<const T> ptr_;
};

}  // namespace mela
