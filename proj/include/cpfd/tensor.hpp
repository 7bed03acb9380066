#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace cpfd {

using Shape = std::vector<int>;

std::string shape_str(const Shape& shape);
int shape_numel(const Shape& shape);

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated on first use
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void()> backprop;  // pulls this->grad into parents

  std::vector<double>& grad_buffer();
};

}  // namespace detail

// Dense fp64 tensor on a define-by-run autodiff graph. A Tensor is a cheap
// handle; copies share storage. Values are immutable after construction
// except through mutable_value(), which is reserved for leaf parameters.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int numel() const { return static_cast<int>(node_->value.size()); }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad_buffer() const { return !node_->grad.empty(); }

  const std::vector<double>& value() const { return node_->value; }
  std::vector<double>& mutable_value() { return node_->value; }
  const std::vector<double>& grad() const;
  void zero_grad();

  // Scalar access; throws unless numel() == 1.
  double item() const;

  std::shared_ptr<detail::TensorNode> node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::TensorNode> node_;

  friend Tensor make_op_result(Shape shape, std::vector<double> value,
                               const std::vector<Tensor>& parents);
  friend Tensor wrap_node(std::shared_ptr<detail::TensorNode> node);
};

// Reverse-mode sweep from a scalar loss. Gradients accumulate across calls;
// callers zero leaf grads between optimizer steps.
void backward(const Tensor& loss);

// ---------------------------------------------------------------------------
// Primitives. Every op validates shapes and names the offenders on mismatch.
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

// [r, c] + [c], the bias-add the model needs.
Tensor add_rowwise(const Tensor& m, const Tensor& v);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose2d(const Tensor& a);

Tensor sum_all(const Tensor& a);
Tensor sum_axis(const Tensor& a, int axis);

Tensor softmax_last(const Tensor& a);
Tensor log_softmax_last(const Tensor& a);

Tensor vlog(const Tensor& a);
Tensor vexp(const Tensor& a);
Tensor gelu(const Tensor& a);

// sum((a - b)^2) over all elements, reduced to a scalar.
Tensor sum_sq_diff(const Tensor& a, const Tensor& b);

// Row-wise layer normalization of a [r, c] matrix with learnable gain/bias.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

// Gathers rows of table [V, d] by id; gradient scatter-adds into the table.
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);

// Concatenation of [r, c_i] matrices along the last axis.
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, int begin, int end);
Tensor slice_rows(const Tensor& a, int rows);

// Stacks k same-shape tensors into a new leading axis.
Tensor stack0(const std::vector<Tensor>& parts);

// [K, N, N] -> [K, n, n], keeping the leading n of both trailing axes.
Tensor slice_last2(const Tensor& a, int n);

}  // namespace cpfd
