#include "cpfd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace cpfd {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != 0) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

int shape_numel(const Shape& shape) {
  int n = 1;
  for (int d : shape) {
    if (d <= 0) {
      throw std::invalid_argument("tensor: nonpositive dimension in " + shape_str(shape));
    }
    n *= d;
  }
  return n;
}

namespace detail {

std::vector<double>& TensorNode::grad_buffer() {
  if (grad.empty()) {
    grad.assign(value.size(), 0.0);
  }
  return grad;
}

}  // namespace detail

using detail::TensorNode;

namespace {

std::shared_ptr<TensorNode> new_node(Shape shape, std::vector<double> value,
                                     bool requires_grad) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return node;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace

Tensor wrap_node(std::shared_ptr<TensorNode> node) {
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const int n = shape_numel(shape);
  return wrap_node(new_node(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  const int n = shape_numel(shape);
  return wrap_node(new_node(std::move(shape), std::vector<double>(n, v), requires_grad));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_data({1}, {v}, requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  const int n = shape_numel(shape);
  if (n != static_cast<int>(data.size())) {
    throw std::invalid_argument("tensor: data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  }
  return wrap_node(new_node(std::move(shape), std::move(data), requires_grad));
}

const std::vector<double>& Tensor::grad() const {
  return node_->grad_buffer();
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) {
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }
}

double Tensor::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("Tensor::item: tensor has shape " + shape_str(shape()));
  }
  return node_->value[0];
}

// Attaches the op to the graph. The backprop closure is installed only when a
// parent requires gradients, so frozen-model inference never allocates grads.
Tensor make_op_result(Shape shape, std::vector<double> value,
                      const std::vector<Tensor>& parents) {
  bool needs_grad = false;
  for (const Tensor& p : parents) {
    needs_grad = needs_grad || p.requires_grad();
  }
  auto node = new_node(std::move(shape), std::move(value), needs_grad);
  if (needs_grad) {
    node->parents.reserve(parents.size());
    for (const Tensor& p : parents) {
      node->parents.push_back(p.node());
    }
  }
  return wrap_node(node);
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw std::invalid_argument("backward: root must be a scalar tensor");
  }
  if (!loss.requires_grad()) {
    return;  // nothing on the tape depends on a parameter
  }

  // Iterative post-order DFS; children appear after all their parents.
  std::vector<TensorNode*> topo;
  std::unordered_set<TensorNode*> seen;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }

  // Interior grads are scratch space for this sweep; only leaves accumulate
  // across repeated backward calls.
  for (TensorNode* node : topo) {
    if (node->backprop && !node->grad.empty()) {
      std::fill(node->grad.begin(), node->grad.end(), 0.0);
    }
  }

  loss.node()->grad_buffer()[0] += 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    if ((*it)->backprop) {
      (*it)->backprop();
    }
  }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  std::vector<double> out(a.value());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  auto an = a.node(), bn = b.node();
  Tensor result = make_op_result(a.shape(), std::move(out), {a, b});
  TensorNode* r = result.node().get();
  if (result.requires_grad()) {
    result.node()->backprop = [r, an, bn]() {
      const auto& g = r->grad;
      if (an->requires_grad) {
        auto& ga = an->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (bn->requires_grad) {
        auto& gb = bn->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    };
  }
  return result;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  std::vector<double> out(a.value());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  auto an = a.node(), bn = b.node();
  Tensor result = make_op_result(a.shape(), std::move(out), {a, b});
  TensorNode* r = result.node().get();
  if (result.requires_grad()) {
    result.node()->backprop = [r, an, bn]() {
      const auto& g = r->grad;
      if (an->requires_grad) {
        auto& ga = an->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (bn->requires_grad) {
        auto& gb = bn->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    };
  }
  return result;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  std::vector<double> out(a.value());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  auto an = a.node(), bn = b.node();
  Tensor result = make_op_result(a.shape(), std::move(out), {a, b});
  TensorNode* r = result.node().get();
  if (result.requires_grad()) {
    result.node()->backprop = [r, an, bn]() {
      const auto& g = r->grad;
      if (an->requires_grad) {
        auto& ga = an->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bn->value[i];
      }
      if (bn->requires_grad) {
        auto& gb = bn->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * an->value[i];
      }
    };
  }
  return result;
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.value());
  for (double& v : out) v *= s;
  auto an = a.node();
  Tensor result = make_op_result(a.shape(), std::move(out), {a});
  TensorNode* r = result.node().get();
  if (result.requires_grad()) {
    result.node()->backprop = [r, an, s]() {
      auto& ga = an->grad_buffer();
      for (std::size_t i = 0; i < r->grad.size(); ++i) ga[i] += s * r->grad[i];
    };
  }
  return result;
}

Tensor add_rowwise(const Tensor& m, const Tensor& v) {
  if (m.rank() != 2 || v.rank() != 1 || m.shape()[1] != v.shape()[0]) {
    throw std::invalid_argument("add_rowwise: incompatible shapes " +
                                shape_str(m.shape()) + " vs " + shape_str(v.shape()));
  }
  const int rows = m.shape()[0], cols = m.shape()[1];
  std::vector<double> out(m.value());
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) out[i * cols + j] += v.value()[j];
  }
  auto mn = m.node(), vn = v.node();
  Tensor result = make_op_result(m.shape(), std::move(out), {m, v});
  TensorNode* r = result.node().get();
  if (result.requires_grad()) {
    result.node()->backprop = [r, mn, vn, rows, cols]() {
      const auto& g = r->grad;
      if (mn->requires_grad) {
        auto& gm = mn->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
      }
      if (vn->requires_grad) {
        auto& gv = vn->grad_buffer();
        for (int i = 0; i < rows; ++i) {
          for (int j = 0; j < cols; ++j) gv[j] += g[i * cols + j];
        }
      }
    };
  }
  return result;
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw std::invalid_argument("matmul: incompatible shapes " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double av = a.value()[i * k + p];
      for (int j = 0; j < n; ++j) out[i * n + j] += av * b.value()[p * n + j];
    }
  }
  auto an = a.node(), bn = b.node();
  Tensor result = make_op_result({m, n}, std::move(out), {a, b});
  TensorNode* r = result.node().get();
  if (result.requires_grad()) {
    result.node()->backprop = [r, an, bn, m, k, n]() {
      const auto& g = r->grad;
      if (an->requires_grad) {
        auto& ga = an->grad_buffer();  // dA = g . B^T
        for (int i = 0; i < m; ++i) {
          for (int p = 0; p < k; ++p) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += g[i * n + j] * bn->value[p * n + j];
            ga[i * k + p] += acc;
          }
        }
      }
      if (bn->requires_grad) {
        auto& gb = bn->grad_buffer();  // dB = A^T . g
        for (int p = 0; p < k; ++p) {
          for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int i = 0; i < m; ++i) acc += an->value[i * k + p] * g[i * n + j];
            gb[p * n + j] += acc;
          }
        }
      }
    };
  }
  return result;
}

Tensor transpose2d(const Tensor& a) {
  if (a.rank() != 2) {
    throw std::invalid_argument("transpose2d: expected rank-2, got " + shape_str(a.shape()));
  }
  const int m = a.shape()[0], n = a.shape()[1];
  std::vector<double> out(a.value().size());
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) out[j * m + i] = a.value()[i * n + j];
  }
  auto an = a.node();
  Tensor result = make_op_result({n, m}, std::move(out), {a});
  TensorNode* r = result.node().get();
  if (result.requires_grad()) {
    result.node()->backprop = [r, an, m, n]() {
      auto& ga = an->grad_buffer();
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) ga[i * n + j] += r->grad[j * m + i];
      }
    };
  }
  return result;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

Tensor sum_all(const Tensor& a) {
  double total = 0.0;
  for (double v : a.value()) total += v;
  auto an = a.node();
  Tensor result = make_op_result({1}, {total}, {a});
  TensorNode* r = result.node().get();
  if (result.requires_grad()) {
    result.node()->backprop = [r, an]() {
      auto& ga = an->grad_buffer();
      const double g = r->grad[0];
      for (double& v : ga) v += g;
    };
  }
  return result;
}

Tensor sum_axis(const Tensor& a, int axis) {
  const int rank = a.rank();
  if (axis < 0 || axis >= rank) {
    throw std::invalid_argument("sum_axis: axis " + std::to_string(axis) +
                                " out of range for shape " + shape_str(a.shape()));
  }
  Shape out_shape;
  for (int d = 0; d < rank; ++d) {
    if (d != axis) out_shape.push_back(a.shape()[d]);
  }
  if (out_shape.empty()) out_shape.push_back(1);

  // outer * axis * inner layout
  int outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= a.shape()[d];
  for (int d = axis + 1; d < rank; ++d) inner *= a.shape()[d];
  const int extent = a.shape()[axis];

  std::vector<double> out(static_cast<std::size_t>(outer) * inner, 0.0);
  for (int o = 0; o < outer; ++o) {
    for (int e = 0; e < extent; ++e) {
      const double* src = a.value().data() + (static_cast<std::size_t>(o) * extent + e) * inner;
      double* dst = out.data() + static_cast<std::size_t>(o) * inner;
      for (int i = 0; i < inner; ++i) dst[i] += src[i];
    }
  }
  auto an = a.node();
  Tensor result = make_op_result(std::move(out_shape), std::move(out), {a});
  TensorNode* r = result.node().get();
  if (result.requires_grad()) {
    result.node()->backprop = [r, an, outer, extent, inner]() {
      auto& ga = an->grad_buffer();
      for (int o = 0; o < outer; ++o) {
        const double* g = r->grad.data() + static_cast<std::size_t>(o) * inner;
        for (int e = 0; e < extent; ++e) {
          double* dst = ga.data() + (static_cast<std::size_t>(o) * extent + e) * inner;
          for (int i = 0; i < inner; ++i) dst[i] += g[i];
        }
      }
    };
  }
  return result;
}

Tensor sum_sq_diff(const Tensor& a, const Tensor& b) {
  check_same_shape("sum_sq_diff", a, b);
  double total = 0.0;
  for (std::size_t i = 0; i < a.value().size(); ++i) {
    const double d = a.value()[i] - b.value()[i];
    total += d * d;
  }
  auto an = a.node(), bn = b.node();
  Tensor result = make_op_result({1}, {total}, {a, b});
  TensorNode* r = result.node().get();
  if (result.requires_grad()) {
    result.node()->backprop = [r, an, bn]() {
      const double g = r->grad[0];
      if (an->requires_grad) {
        auto& ga = an->grad_buffer();
        for (std::size_t i = 0; i < ga.size(); ++i) {
          ga[i] += 2.0 * g * (an->value[i] - bn->value[i]);
        }
      }
      if (bn->requires_grad) {
        auto& gb = bn->grad_buffer();
        for (std::size_t i = 0; i < gb.size(); ++i) {
          gb[i] -= 2.0 * g * (an->value[i] - bn->value[i]);
        }
      }
    };
  }
  return result;
}

// ---------------------------------------------------------------------------
// nonlinearities
// ---------------------------------------------------------------------------

namespace {

int last_dim(const Tensor& a) {
  if (a.rank() < 1) {
    throw std::invalid_argument("softmax: tensor has no axes");
  }
  return a.shape()[a.rank() - 1];
}

}  // namespace

Tensor softmax_last(const Tensor& a) {
  const int cols = last_dim(a);
  const int rows = a.numel() / cols;
  std::vector<double> out(a.value().size());
  for (int i = 0; i < rows; ++i) {
    const double* src = a.value().data() + static_cast<std::size_t>(i) * cols;
    double* dst = out.data() + static_cast<std::size_t>(i) * cols;
    double mx = src[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, src[j]);
    double sum = 0.0;
    for (int j = 0; j < cols; ++j) {
      dst[j] = std::exp(src[j] - mx);
      sum += dst[j];
    }
    for (int j = 0; j < cols; ++j) dst[j] /= sum;
  }
  auto an = a.node();
  Tensor result = make_op_result(a.shape(), std::move(out), {a});
  TensorNode* r = result.node().get();
  if (result.requires_grad()) {
    result.node()->backprop = [r, an, rows, cols]() {
      auto& ga = an->grad_buffer();
      for (int i = 0; i < rows; ++i) {
        const double* p = r->value.data() + static_cast<std::size_t>(i) * cols;
        const double* g = r->grad.data() + static_cast<std::size_t>(i) * cols;
        double dot = 0.0;
        for (int j = 0; j < cols; ++j) dot += g[j] * p[j];
        double* dst = ga.data() + static_cast<std::size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) dst[j] += p[j] * (g[j] - dot);
      }
    };
  }
  return result;
}

Tensor log_softmax_last(const Tensor& a) {
  const int cols = last_dim(a);
  const int rows = a.numel() / cols;
  std::vector<double> out(a.value().size());
  for (int i = 0; i < rows; ++i) {
    const double* src = a.value().data() + static_cast<std::size_t>(i) * cols;
    double* dst = out.data() + static_cast<std::size_t>(i) * cols;
    double mx = src[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, src[j]);
    double sum = 0.0;
    for (int j = 0; j < cols; ++j) sum += std::exp(src[j] - mx);
    const double lse = mx + std::log(sum);
    for (int j = 0; j < cols; ++j) dst[j] = src[j] - lse;
  }
  auto an = a.node();
  Tensor result = make_op_result(a.shape(), std::move(out), {a});
  TensorNode* r = result.node().get();
  if (result.requires_grad()) {
    result.node()->backprop = [r, an, rows, cols]() {
      auto& ga = an->grad_buffer();
      for (int i = 0; i < rows; ++i) {
        const double* lp = r->value.data() + static_cast<std::size_t>(i) * cols;
        const double* g = r->grad.data() + static_cast<std::size_t>(i) * cols;
        double gsum = 0.0;
        for (int j = 0; j < cols; ++j) gsum += g[j];
        double* dst = ga.data() + static_cast<std::size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) dst[j] += g[j] - std::exp(lp[j]) * gsum;
      }
    };
  }
  return result;
}

Tensor vlog(const Tensor& a) {
  std::vector<double> out(a.value().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(a.value()[i]);
  auto an = a.node();
  Tensor result = make_op_result(a.shape(), std::move(out), {a});
  TensorNode* r = result.node().get();
  if (result.requires_grad()) {
    result.node()->backprop = [r, an]() {
      auto& ga = an->grad_buffer();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += r->grad[i] / an->value[i];
    };
  }
  return result;
}

Tensor vexp(const Tensor& a) {
  std::vector<double> out(a.value().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.value()[i]);
  auto an = a.node();
  Tensor result = make_op_result(a.shape(), std::move(out), {a});
  TensorNode* r = result.node().get();
  if (result.requires_grad()) {
    result.node()->backprop = [r, an]() {
      auto& ga = an->grad_buffer();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += r->grad[i] * r->value[i];
    };
  }
  return result;
}

namespace {
// Exact erf form of GELU; smooth everywhere, which keeps finite-difference
// checks clean.
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

Tensor gelu(const Tensor& a) {
  std::vector<double> out(a.value().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = a.value()[i];
    out[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
  }
  auto an = a.node();
  Tensor result = make_op_result(a.shape(), std::move(out), {a});
  TensorNode* r = result.node().get();
  if (result.requires_grad()) {
    result.node()->backprop = [r, an]() {
      auto& ga = an->grad_buffer();
      for (std::size_t i = 0; i < ga.size(); ++i) {
        const double x = an->value[i];
        const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
        ga[i] += r->grad[i] * (cdf + x * pdf);
      }
    };
  }
  return result;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.rank() != 2) {
    throw std::invalid_argument("layer_norm: expected rank-2 input, got " + shape_str(x.shape()));
  }
  const int rows = x.shape()[0], cols = x.shape()[1];
  if (gamma.rank() != 1 || gamma.shape()[0] != cols || beta.rank() != 1 ||
      beta.shape()[0] != cols) {
    throw std::invalid_argument("layer_norm: gain/bias " + shape_str(gamma.shape()) + "/" +
                                shape_str(beta.shape()) + " do not match input " +
                                shape_str(x.shape()));
  }
  std::vector<double> out(x.value().size());
  std::vector<double> xhat(x.value().size());
  std::vector<double> inv_std(rows);
  for (int i = 0; i < rows; ++i) {
    const double* src = x.value().data() + static_cast<std::size_t>(i) * cols;
    double mean = 0.0;
    for (int j = 0; j < cols; ++j) mean += src[j];
    mean /= cols;
    double var = 0.0;
    for (int j = 0; j < cols; ++j) {
      const double d = src[j] - mean;
      var += d * d;
    }
    var /= cols;
    const double s = 1.0 / std::sqrt(var + eps);
    inv_std[i] = s;
    for (int j = 0; j < cols; ++j) {
      const double h = (src[j] - mean) * s;
      xhat[static_cast<std::size_t>(i) * cols + j] = h;
      out[static_cast<std::size_t>(i) * cols + j] = gamma.value()[j] * h + beta.value()[j];
    }
  }
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  Tensor result = make_op_result(x.shape(), std::move(out), {x, gamma, beta});
  TensorNode* r = result.node().get();
  if (result.requires_grad()) {
    auto xhat_s = std::make_shared<std::vector<double>>(std::move(xhat));
    auto inv_std_s = std::make_shared<std::vector<double>>(std::move(inv_std));
    result.node()->backprop = [r, xn, gn, bn, xhat_s, inv_std_s, rows, cols]() {
      const auto& g = r->grad;
      const auto& xh = *xhat_s;
      if (gn->requires_grad) {
        auto& gg = gn->grad_buffer();
        for (int i = 0; i < rows; ++i) {
          for (int j = 0; j < cols; ++j) {
            gg[j] += g[static_cast<std::size_t>(i) * cols + j] *
                     xh[static_cast<std::size_t>(i) * cols + j];
          }
        }
      }
      if (bn->requires_grad) {
        auto& gb = bn->grad_buffer();
        for (int i = 0; i < rows; ++i) {
          for (int j = 0; j < cols; ++j) gb[j] += g[static_cast<std::size_t>(i) * cols + j];
        }
      }
      if (xn->requires_grad) {
        auto& gx = xn->grad_buffer();
        for (int i = 0; i < rows; ++i) {
          const double* gi = g.data() + static_cast<std::size_t>(i) * cols;
          const double* hi = xh.data() + static_cast<std::size_t>(i) * cols;
          double mean_dh = 0.0, mean_dh_h = 0.0;
          for (int j = 0; j < cols; ++j) {
            const double dh = gi[j] * gn->value[j];
            mean_dh += dh;
            mean_dh_h += dh * hi[j];
          }
          mean_dh /= cols;
          mean_dh_h /= cols;
          const double s = (*inv_std_s)[i];
          double* dst = gx.data() + static_cast<std::size_t>(i) * cols;
          for (int j = 0; j < cols; ++j) {
            const double dh = gi[j] * gn->value[j];
            dst[j] += s * (dh - mean_dh - hi[j] * mean_dh_h);
          }
        }
      }
    };
  }
  return result;
}

// ---------------------------------------------------------------------------
// indexing / reshaping
// ---------------------------------------------------------------------------

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  if (table.rank() != 2) {
    throw std::invalid_argument("embedding_lookup: table must be rank-2, got " +
                                shape_str(table.shape()));
  }
  const int vocab = table.shape()[0], dim = table.shape()[1];
  for (int id : ids) {
    if (id < 0 || id >= vocab) {
      throw std::invalid_argument("embedding_lookup: id " + std::to_string(id) +
                                  " outside vocabulary of size " + std::to_string(vocab));
    }
  }
  const int n = static_cast<int>(ids.size());
  std::vector<double> out(static_cast<std::size_t>(n) * dim);
  for (int i = 0; i < n; ++i) {
    const double* src = table.value().data() + static_cast<std::size_t>(ids[i]) * dim;
    std::copy(src, src + dim, out.begin() + static_cast<std::size_t>(i) * dim);
  }
  auto tn = table.node();
  Tensor result = make_op_result({n, dim}, std::move(out), {table});
  TensorNode* r = result.node().get();
  if (result.requires_grad()) {
    result.node()->backprop = [r, tn, ids, dim]() {
      auto& gt = tn->grad_buffer();
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const double* g = r->grad.data() + i * dim;
        double* dst = gt.data() + static_cast<std::size_t>(ids[i]) * dim;
        for (int j = 0; j < dim; ++j) dst[j] += g[j];
      }
    };
  }
  return result;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) {
    throw std::invalid_argument("concat_cols: no parts");
  }
  const int rows = parts[0].shape()[0];
  int total_cols = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.shape()[0] != rows) {
      throw std::invalid_argument("concat_cols: part shape " + shape_str(p.shape()) +
                                  " incompatible with " + shape_str(parts[0].shape()));
    }
    total_cols += p.shape()[1];
  }
  std::vector<double> out(static_cast<std::size_t>(rows) * total_cols);
  int col0 = 0;
  for (const Tensor& p : parts) {
    const int cols = p.shape()[1];
    for (int i = 0; i < rows; ++i) {
      std::copy(p.value().begin() + static_cast<std::size_t>(i) * cols,
                p.value().begin() + static_cast<std::size_t>(i + 1) * cols,
                out.begin() + static_cast<std::size_t>(i) * total_cols + col0);
    }
    col0 += cols;
  }
  std::vector<std::shared_ptr<TensorNode>> nodes;
  for (const Tensor& p : parts) nodes.push_back(p.node());
  Tensor result = make_op_result({rows, total_cols}, std::move(out), parts);
  TensorNode* r = result.node().get();
  if (result.requires_grad()) {
    result.node()->backprop = [r, nodes, rows, total_cols]() {
      int col0 = 0;
      for (const auto& pn : nodes) {
        const int cols = pn->shape[1];
        if (pn->requires_grad) {
          auto& gp = pn->grad_buffer();
          for (int i = 0; i < rows; ++i) {
            const double* g = r->grad.data() + static_cast<std::size_t>(i) * total_cols + col0;
            double* dst = gp.data() + static_cast<std::size_t>(i) * cols;
            for (int j = 0; j < cols; ++j) dst[j] += g[j];
          }
        }
        col0 += cols;
      }
    };
  }
  return result;
}

Tensor slice_cols(const Tensor& a, int begin, int end) {
  if (a.rank() != 2 || begin < 0 || end > a.shape()[1] || begin >= end) {
    throw std::invalid_argument("slice_cols: range [" + std::to_string(begin) + ", " +
                                std::to_string(end) + ") invalid for " + shape_str(a.shape()));
  }
  const int rows = a.shape()[0], cols = a.shape()[1], width = end - begin;
  std::vector<double> out(static_cast<std::size_t>(rows) * width);
  for (int i = 0; i < rows; ++i) {
    std::copy(a.value().begin() + static_cast<std::size_t>(i) * cols + begin,
              a.value().begin() + static_cast<std::size_t>(i) * cols + end,
              out.begin() + static_cast<std::size_t>(i) * width);
  }
  auto an = a.node();
  Tensor result = make_op_result({rows, width}, std::move(out), {a});
  TensorNode* r = result.node().get();
  if (result.requires_grad()) {
    result.node()->backprop = [r, an, rows, cols, begin, width]() {
      auto& ga = an->grad_buffer();
      for (int i = 0; i < rows; ++i) {
        const double* g = r->grad.data() + static_cast<std::size_t>(i) * width;
        double* dst = ga.data() + static_cast<std::size_t>(i) * cols + begin;
        for (int j = 0; j < width; ++j) dst[j] += g[j];
      }
    };
  }
  return result;
}

Tensor slice_rows(const Tensor& a, int rows) {
  if (a.rank() != 2 || rows < 1 || rows > a.shape()[0]) {
    throw std::invalid_argument("slice_rows: cannot take " + std::to_string(rows) +
                                " rows of " + shape_str(a.shape()));
  }
  const int cols = a.shape()[1];
  std::vector<double> out(a.value().begin(),
                          a.value().begin() + static_cast<std::size_t>(rows) * cols);
  auto an = a.node();
  Tensor result = make_op_result({rows, cols}, std::move(out), {a});
  TensorNode* r = result.node().get();
  if (result.requires_grad()) {
    result.node()->backprop = [r, an]() {
      auto& ga = an->grad_buffer();
      for (std::size_t i = 0; i < r->grad.size(); ++i) ga[i] += r->grad[i];
    };
  }
  return result;
}

Tensor stack0(const std::vector<Tensor>& parts) {
  if (parts.empty()) {
    throw std::invalid_argument("stack0: no parts");
  }
  const Shape& inner = parts[0].shape();
  for (const Tensor& p : parts) {
    if (p.shape() != inner) {
      throw std::invalid_argument("stack0: part shape " + shape_str(p.shape()) +
                                  " differs from " + shape_str(inner));
    }
  }
  Shape out_shape;
  out_shape.push_back(static_cast<int>(parts.size()));
  out_shape.insert(out_shape.end(), inner.begin(), inner.end());
  const std::size_t block = parts[0].value().size();
  std::vector<double> out(block * parts.size());
  for (std::size_t k = 0; k < parts.size(); ++k) {
    std::copy(parts[k].value().begin(), parts[k].value().end(), out.begin() + k * block);
  }
  std::vector<std::shared_ptr<TensorNode>> nodes;
  for (const Tensor& p : parts) nodes.push_back(p.node());
  Tensor result = make_op_result(std::move(out_shape), std::move(out), parts);
  TensorNode* r = result.node().get();
  if (result.requires_grad()) {
    result.node()->backprop = [r, nodes, block]() {
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        if (!nodes[k]->requires_grad) continue;
        auto& gp = nodes[k]->grad_buffer();
        const double* g = r->grad.data() + k * block;
        for (std::size_t i = 0; i < block; ++i) gp[i] += g[i];
      }
    };
  }
  return result;
}

Tensor slice_last2(const Tensor& a, int n) {
  if (a.rank() != 3 || a.shape()[1] != a.shape()[2] || n < 1 || n > a.shape()[1]) {
    throw std::invalid_argument("slice_last2: cannot take " + std::to_string(n) +
                                "x" + std::to_string(n) + " of " + shape_str(a.shape()));
  }
  const int k = a.shape()[0], full = a.shape()[1];
  std::vector<double> out(static_cast<std::size_t>(k) * n * n);
  for (int h = 0; h < k; ++h) {
    for (int i = 0; i < n; ++i) {
      const double* src =
          a.value().data() + (static_cast<std::size_t>(h) * full + i) * full;
      double* dst = out.data() + (static_cast<std::size_t>(h) * n + i) * n;
      std::copy(src, src + n, dst);
    }
  }
  auto an = a.node();
  Tensor result = make_op_result({k, n, n}, std::move(out), {a});
  TensorNode* r = result.node().get();
  if (result.requires_grad()) {
    result.node()->backprop = [r, an, k, full, n]() {
      auto& ga = an->grad_buffer();
      for (int h = 0; h < k; ++h) {
        for (int i = 0; i < n; ++i) {
          const double* g = r->grad.data() + (static_cast<std::size_t>(h) * n + i) * n;
          double* dst = ga.data() + (static_cast<std::size_t>(h) * full + i) * full;
          for (int j = 0; j < n; ++j) dst[j] += g[j];
        }
      }
    };
  }
  return result;
}

}  // namespace cpfd
