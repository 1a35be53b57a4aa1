#ifndef TVG_AUTODIFF_HPP
#define TVG_AUTODIFF_HPP

#include <functional>
#include <memory>
#include <vector>

#include "tvg/tensor.hpp"

namespace tvg {

namespace detail {

// One record of the computation tape. Each op produces a node holding its
// forward value, references to its inputs, and a closure that scatters the
// node's adjoint into the inputs' adjoints. backward() replays the records
// in reverse topological order exactly once.
struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  bool is_leaf = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backprop;

  void accumulate(const Tensor& g);
};

}  // namespace detail

// Handle to a tape node. Cheap to copy; the tape is the shared ownership
// graph of these handles. Graphs built from the same leaves in the same
// order replay bit-identically.
class Var {
 public:
  Var() = default;

  // Leaf without gradient tracking.
  static Var constant(Tensor value);
  // Leaf with gradient tracking (trainable parameter or probed input).
  static Var parameter(Tensor value);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const;
  bool has_grad() const { return node_ && node_->grad.numel() > 0; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void zero_grad();

  const Shape& shape() const { return node_->value.shape(); }
  int rows() const { return node_->value.rows(); }
  int cols() const { return node_->value.cols(); }

  detail::Node* node() const { return node_.get(); }
  std::shared_ptr<detail::Node> shared_node() const { return node_; }

 private:
  friend Var make_node(const char* op, Tensor value, std::vector<Var> inputs,
                       std::function<void(detail::Node&)> backprop);
  std::shared_ptr<detail::Node> node_;
};

// --- differentiable primitives -------------------------------------------

Var matmul(const Var& a, const Var& b);     // [n,k]x[k,m] -> [n,m]
Var matmul_nt(const Var& a, const Var& b);  // [n,k]x[m,k]^T -> [n,m]
Var linear(const Var& x, const Var& w, const Var& b);  // x[n,i], w[o,i], b[1,o]
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var affine(const Var& x, double scale, double shift);  // scale*x + shift
Var relu(const Var& x);
Var leaky_relu(const Var& x, double negative_slope);
Var vexp(const Var& x);
Var vlog(const Var& x);
Var reciprocal(const Var& x);
Var clamp(const Var& x, double lo, double hi);
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double epsilon);
Var max_over_axis(const Var& x, int axis);   // 0: column max [1,m]; 1: row max [n,1]
Var mean_over_axis(const Var& x, int axis);
Var sum_all(const Var& x);  // -> [1,1]
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(const Var& x, int begin, int end);  // [begin, end)
Var l2_normalize_rows(const Var& x);
Var cosine_similarity_rows(const Var& a, const Var& b);  // -> [n,1]
Var log_softmax_rows(const Var& x);
Var select_per_row(const Var& x, const std::vector<int>& cols);  // -> [n,1]
Var conv2d(const Var& image, const Var& kernel, const Var& bias);  // same pad, stride 1
Var rows_to_image(const Var& x, int height, int width);  // [h*w, c] -> [c,h,w]
Var image_to_rows(const Var& image);                     // [c,h,w] -> [h*w, c]

// Reverse-mode sweep from a scalar loss. Populates grad on every
// requires_grad node reachable from `loss`, with d(loss)/d(loss) = 1.
void backward(const Var& loss);

}  // namespace tvg

#endif  // TVG_AUTODIFF_HPP
