#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "mcgan/errors.hpp"
#include "mcgan/rng.hpp"

namespace mcgan {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

namespace detail {

template <class T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // allocated lazily; same length as data when present
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> backward;  // reads this->grad, accumulates into parents

  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

// Recording of backward rules can be switched off (eval / detached regions).
inline bool& grad_enabled() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

struct NoGradGuard {
  NoGradGuard() : prev_(detail::grad_enabled()) { detail::grad_enabled() = false; }
  ~NoGradGuard() { detail::grad_enabled() = prev_; }

 private:
  bool prev_;
};

inline bool grad_mode_enabled() { return detail::grad_enabled(); }

template <class T>
class TensorT {
 public:
  using Scalar = T;

  TensorT() = default;

  static TensorT zeros(Shape s) { return filled(std::move(s), T(0)); }

  static TensorT filled(Shape s, T v) {
    TensorT t;
    t.node_ = std::make_shared<detail::Node<T>>();
    t.node_->shape = std::move(s);
    t.node_->data.assign(shape_numel(t.node_->shape), v);
    return t;
  }

  static TensorT from(Shape s, std::vector<T> d) {
    if (shape_numel(s) != static_cast<int64_t>(d.size()))
      throw ShapeError("tensor data length " + std::to_string(d.size()) +
                       " does not match shape " + shape_str(s));
    TensorT t;
    t.node_ = std::make_shared<detail::Node<T>>();
    t.node_->shape = std::move(s);
    t.node_->data = std::move(d);
    return t;
  }

  static TensorT scalar(T v) { return from({}, {v}); }

  static TensorT randn(Shape s, Rng& rng, T stddev = T(1), T mean = T(0)) {
    TensorT t = zeros(std::move(s));
    for (T& v : t.data()) v = static_cast<T>(rng.gaussian(mean, stddev));
    return t;
  }

  static TensorT uniform(Shape s, Rng& rng, T lo, T hi) {
    TensorT t = zeros(std::move(s));
    for (T& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t numel() const { return static_cast<int64_t>(node_->data.size()); }
  int64_t rank() const { return static_cast<int64_t>(node_->shape.size()); }

  std::vector<T>& data() { return node_->data; }
  const std::vector<T>& data() const { return node_->data; }

  std::vector<T>& grad() { return node_->ensure_grad(); }
  bool has_grad() const { return !node_->grad.empty(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  TensorT& set_requires_grad(bool b = true) {
    node_->requires_grad = b;
    return *this;
  }

  T item() const {
    if (numel() != 1)
      throw ContractError("item() requires a scalar tensor, got shape " +
                          shape_str(shape()));
    return node_->data[0];
  }

  void zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
  }

  // Copies the values into a fresh leaf with no history.
  TensorT detach() const {
    TensorT t;
    t.node_ = std::make_shared<detail::Node<T>>();
    t.node_->shape = node_->shape;
    t.node_->data = node_->data;
    return t;
  }

  std::shared_ptr<detail::Node<T>> node() const { return node_; }

  static TensorT wrap(std::shared_ptr<detail::Node<T>> n) {
    TensorT t;
    t.node_ = std::move(n);
    return t;
  }

 private:
  std::shared_ptr<detail::Node<T>> node_;
};

namespace detail {

// Creates the output node of an op. Parents and the backward rule are only
// recorded when grad mode is on and some parent requires grad.
template <class T>
TensorT<T> make_result(Shape shape, const std::vector<TensorT<T>>& inputs) {
  TensorT<T> out = TensorT<T>::zeros(std::move(shape));
  bool track = grad_enabled();
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (track && any) {
    out.node()->requires_grad = true;
    for (const auto& in : inputs) out.node()->parents.push_back(in.node());
  }
  return out;
}

template <class T>
void attach_backward(TensorT<T>& out, std::function<void()> fn) {
  if (out.requires_grad()) out.node()->backward = std::move(fn);
}

}  // namespace detail

// Reverse-mode sweep from a scalar loss. Builds the topological order of the
// recorded graph (the tape), then fires each backward rule exactly once.
template <class T>
void backward(TensorT<T> loss) {
  if (loss.numel() != 1)
    throw ContractError("backward() requires a scalar loss, got shape " +
                        shape_str(loss.shape()));
  if (!loss.requires_grad()) return;

  using Node = detail::Node<T>;
  std::vector<Node*> order;  // topological: parents before children
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* n;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.node().get(), 0});
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.n->parents.size()) {
      Node* p = f.n->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }

  loss.node()->ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward();
  }
}

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

}  // namespace mcgan
