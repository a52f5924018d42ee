#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace fscd {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// Forward behavior shared by dropout and the depth-dropout residual blocks.
// Eval is fully deterministic; Train draws unit-dropout masks and per-block
// depth decisions; McSample draws unit-dropout masks only.
enum class ForwardMode { Train, Eval, McSample };

template <typename T>
struct TensorStorage {
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;  // empty until backward touches this tensor
  bool requires_grad = false;
  int64_t node_id = -1;
  uint64_t tape_tag = 0;  // which tape assigned node_id
};

// Shared-ownership handle over a shaped buffer. Copying a Tensor aliases the
// same storage; weight tying and tape records rely on that.
template <typename T>
class Tensor {
 public:
  using Scalar = T;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    Tensor t;
    t.d_ = std::make_shared<TensorStorage<T>>();
    t.d_->shape = std::move(shape);
    t.d_->values.assign(shape_numel(t.d_->shape), T(0));
    t.d_->requires_grad = requires_grad;
    return t;
  }

  static Tensor from_values(Shape shape, std::vector<T> values,
                            bool requires_grad = false) {
    if (static_cast<int64_t>(values.size()) != shape_numel(shape))
      throw std::invalid_argument("tensor: " + std::to_string(values.size()) +
                                  " values do not fill shape " +
                                  shape_str(shape));
    Tensor t;
    t.d_ = std::make_shared<TensorStorage<T>>();
    t.d_->shape = std::move(shape);
    t.d_->values = std::move(values);
    t.d_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(T value, bool requires_grad = false) {
    return from_values({1}, {value}, requires_grad);
  }

  bool defined() const { return d_ != nullptr; }
  const Shape& shape() const { return d_->shape; }
  int64_t numel() const { return static_cast<int64_t>(d_->values.size()); }
  int64_t dim(size_t i) const { return d_->shape.at(i); }

  std::vector<T>& values() { return d_->values; }
  const std::vector<T>& values() const { return d_->values; }
  std::vector<T>& grad() { return d_->grad; }
  const std::vector<T>& grad() const { return d_->grad; }
  bool has_grad() const { return !d_->grad.empty(); }

  bool requires_grad() const { return d_->requires_grad; }
  void set_requires_grad(bool v) { d_->requires_grad = v; }
  int64_t node_id() const { return d_->node_id; }

  T item() const {
    if (numel() != 1)
      throw std::invalid_argument("item: tensor has " +
                                  std::to_string(numel()) + " elements");
    return d_->values[0];
  }

  // Deep copy; grad is not carried over.
  Tensor clone() const {
    Tensor t = from_values(d_->shape, d_->values, d_->requires_grad);
    return t;
  }

  void zero_grad() { d_->grad.clear(); }

  TensorStorage<T>* storage() const { return d_.get(); }
  std::shared_ptr<TensorStorage<T>> storage_ptr() const { return d_; }

 private:
  std::shared_ptr<TensorStorage<T>> d_;
};

// Records the differentiable ops of one forward pass, in execution order.
// Confined to a single thread; independent tapes may run concurrently.
template <typename T>
class Tape {
 public:
  Tape() : uid_(next_uid()) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // When not recording, ops skip their backward bookkeeping entirely
  // (inference passes).
  bool recording() const { return recording_; }
  void set_recording(bool r) { recording_ = r; }

  uint64_t uid() const { return uid_; }
  size_t size() const { return records_.size(); }

  // Adopt a tensor into this tape's node table.
  void watch(const Tensor<T>& t) {
    auto* s = t.storage();
    if (s->tape_tag == uid_) return;
    s->tape_tag = uid_;
    s->node_id = static_cast<int64_t>(nodes_.size());
    nodes_.push_back(t.storage_ptr());
  }

  bool owns(const Tensor<T>& t) const {
    return t.defined() && t.storage()->tape_tag == uid_;
  }

  // Record one executed op. `backward_fn` reads the output grad and
  // accumulates into the input grads; inputs/output are adopted so that
  // backward() can allocate and zero their grad buffers first.
  void record(std::initializer_list<Tensor<T>> inputs, const Tensor<T>& output,
              std::function<void()> backward_fn) {
    if (!recording_) return;
    for (const auto& in : inputs) watch(in);
    watch(output);
    records_.push_back(std::move(backward_fn));
  }

  // Reverse sweep. Zeroes the grad of every adopted tensor whose gradient is
  // needed, seeds d(loss)/d(loss) = 1, then replays records in exact reverse
  // order, accumulating contributions additively.
  void backward(const Tensor<T>& loss) {
    if (!loss.defined() || loss.numel() != 1)
      throw std::invalid_argument(
          "backward: loss must be a scalar tensor (got " +
          (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")) +
          ")");
    if (!owns(loss))
      throw std::invalid_argument("backward: loss was not recorded on this tape");
    for (auto& n : nodes_) {
      if (n->requires_grad)
        n->grad.assign(n->values.size(), T(0));
      else
        n->grad.clear();
    }
    auto* ls = loss.storage();
    if (ls->grad.empty()) ls->grad.assign(1, T(0));
    ls->grad[0] = T(1);
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
  }

 private:
  static uint64_t next_uid() {
    static std::atomic_uint64_t counter{1};
    return counter.fetch_add(1);
  }

  bool recording_ = true;
  uint64_t uid_ = 0;
  std::vector<std::shared_ptr<TensorStorage<T>>> nodes_;
  std::vector<std::function<void()>> records_;
};

}  // namespace fscd
