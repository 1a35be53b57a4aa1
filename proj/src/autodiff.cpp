#include "tvg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "tvg/errors.hpp"

namespace tvg {

namespace detail {

void Node::accumulate(const Tensor& g) {
  if (grad.numel() == 0) {
    grad = g;
  } else {
    grad.add_in_place(g);
  }
}

}  // namespace detail

using detail::Node;

namespace {

void check_finite(const char* op, const Tensor& t) {
  if (!t.all_finite()) {
    throw NumericError(std::string(op) + ": non-finite input value");
  }
}

void check_matrix(const char* op, const Tensor& t) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected matrix, got " + t.shape_str());
  }
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
  }
}

}  // namespace

Var make_node(const char* op, Tensor value, std::vector<Var> inputs,
              std::function<void(Node&)> backprop) {
  (void)op;
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  for (const Var& in : inputs) {
    if (in.requires_grad()) {
      node->requires_grad = true;
      break;
    }
  }
  if (node->requires_grad) {
    node->inputs.reserve(inputs.size());
    for (const Var& in : inputs) node->inputs.push_back(in.shared_node());
    node->backprop = std::move(backprop);
  }
  Var v;
  v.node_ = std::move(node);
  return v;
}

Var Var::constant(Tensor value) {
  check_finite("constant", value);
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->is_leaf = true;
  Var v;
  v.node_ = std::move(node);
  return v;
}

Var Var::parameter(Tensor value) {
  check_finite("parameter", value);
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->is_leaf = true;
  Var v;
  v.node_ = std::move(node);
  return v;
}

const Tensor& Var::grad() const {
  if (!has_grad()) throw ContractError("grad: no gradient populated on this node");
  return node_->grad;
}

void Var::zero_grad() {
  if (node_ && node_->grad.numel() > 0) node_->grad.fill(0.0);
}

// --- matrix products -------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  check_matrix("matmul", a.value());
  check_matrix("matmul", b.value());
  check_finite("matmul", a.value());
  check_finite("matmul", b.value());
  const int n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions " + a.value().shape_str() + " vs " +
                         b.value().shape_str());
  }
  Tensor out(Shape{n, m});
  const double* pa = a.value().data();
  const double* pb = b.value().data();
  double* po = out.data();
  for (int i = 0; i < n; ++i) {
    for (int kk = 0; kk < k; ++kk) {
      const double aik = pa[i * k + kk];
      const double* brow = pb + kk * m;
      double* orow = po + i * m;
      for (int j = 0; j < m; ++j) orow[j] += aik * brow[j];
    }
  }
  Node* na = a.node();
  Node* nb = b.node();
  return make_node("matmul", std::move(out), {a, b}, [na, nb, n, k, m](Node& self) {
    const double* g = self.grad.data();
    if (na->requires_grad) {
      Tensor da(Shape{n, k});
      const double* pb2 = nb->value.data();
      for (int i = 0; i < n; ++i) {
        for (int kk = 0; kk < k; ++kk) {
          const double* grow = g + i * m;
          const double* brow = pb2 + kk * m;
          double acc = 0.0;
          for (int j = 0; j < m; ++j) acc += grow[j] * brow[j];
          da.at(i, kk) = acc;
        }
      }
      na->accumulate(da);
    }
    if (nb->requires_grad) {
      Tensor db(Shape{k, m});
      const double* pa2 = na->value.data();
      double* pdb = db.data();
      for (int i = 0; i < n; ++i) {
        for (int kk = 0; kk < k; ++kk) {
          const double aik = pa2[i * k + kk];
          const double* grow = g + i * m;
          double* dbrow = pdb + kk * m;
          for (int j = 0; j < m; ++j) dbrow[j] += aik * grow[j];
        }
      }
      nb->accumulate(db);
    }
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  check_matrix("matmul_nt", a.value());
  check_matrix("matmul_nt", b.value());
  check_finite("matmul_nt", a.value());
  check_finite("matmul_nt", b.value());
  const int n = a.rows(), k = a.cols(), m = b.rows();
  if (b.cols() != k) {
    throw DimensionError("matmul_nt: inner dimensions " + a.value().shape_str() + " vs " +
                         b.value().shape_str());
  }
  Tensor out(Shape{n, m});
  const double* pa = a.value().data();
  const double* pb = b.value().data();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const double* arow = pa + i * k;
      const double* brow = pb + j * k;
      double acc = 0.0;
      for (int kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
      out.at(i, j) = acc;
    }
  }
  Node* na = a.node();
  Node* nb = b.node();
  return make_node("matmul_nt", std::move(out), {a, b}, [na, nb, n, k, m](Node& self) {
    const double* g = self.grad.data();
    if (na->requires_grad) {
      Tensor da(Shape{n, k});
      const double* pb2 = nb->value.data();
      double* pda = da.data();
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
          const double gij = g[i * m + j];
          const double* brow = pb2 + j * k;
          double* darow = pda + i * k;
          for (int kk = 0; kk < k; ++kk) darow[kk] += gij * brow[kk];
        }
      }
      na->accumulate(da);
    }
    if (nb->requires_grad) {
      Tensor db(Shape{m, k});
      const double* pa2 = na->value.data();
      double* pdb = db.data();
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
          const double gij = g[i * m + j];
          const double* arow = pa2 + i * k;
          double* dbrow = pdb + j * k;
          for (int kk = 0; kk < k; ++kk) dbrow[kk] += gij * arow[kk];
        }
      }
      nb->accumulate(db);
    }
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  check_matrix("linear", x.value());
  check_matrix("linear", w.value());
  check_matrix("linear", b.value());
  check_finite("linear", x.value());
  check_finite("linear", w.value());
  check_finite("linear", b.value());
  const int n = x.rows(), in = x.cols(), out_dim = w.rows();
  if (w.cols() != in) {
    throw DimensionError("linear: weight " + w.value().shape_str() + " does not accept input " +
                         x.value().shape_str());
  }
  if (b.rows() != 1 || b.cols() != out_dim) {
    throw DimensionError("linear: bias " + b.value().shape_str() + " must be [1x" +
                         std::to_string(out_dim) + "]");
  }
  Tensor out(Shape{n, out_dim});
  const double* px = x.value().data();
  const double* pw = w.value().data();
  const double* pbias = b.value().data();
  for (int r = 0; r < n; ++r) {
    const double* xrow = px + r * in;
    double* orow = out.data() + r * out_dim;
    for (int c = 0; c < out_dim; ++c) {
      const double* wrow = pw + c * in;
      double acc = pbias[c];
      for (int i = 0; i < in; ++i) acc += xrow[i] * wrow[i];
      orow[c] = acc;
    }
  }
  Node* nx = x.node();
  Node* nw = w.node();
  Node* nb = b.node();
  return make_node("linear", std::move(out), {x, w, b}, [nx, nw, nb, n, in, out_dim](Node& self) {
    const double* g = self.grad.data();
    if (nx->requires_grad) {
      Tensor dx(Shape{n, in});
      const double* pw2 = nw->value.data();
      double* pdx = dx.data();
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < out_dim; ++c) {
          const double grc = g[r * out_dim + c];
          const double* wrow = pw2 + c * in;
          double* dxrow = pdx + r * in;
          for (int i = 0; i < in; ++i) dxrow[i] += grc * wrow[i];
        }
      }
      nx->accumulate(dx);
    }
    if (nw->requires_grad) {
      Tensor dw(Shape{out_dim, in});
      const double* px2 = nx->value.data();
      double* pdw = dw.data();
      for (int r = 0; r < n; ++r) {
        const double* xrow = px2 + r * in;
        for (int c = 0; c < out_dim; ++c) {
          const double grc = g[r * out_dim + c];
          double* dwrow = pdw + c * in;
          for (int i = 0; i < in; ++i) dwrow[i] += grc * xrow[i];
        }
      }
      nw->accumulate(dw);
    }
    if (nb->requires_grad) {
      Tensor db(Shape{1, out_dim});
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < out_dim; ++c) db[c] += g[r * out_dim + c];
      }
      nb->accumulate(db);
    }
  });
}

// --- elementwise -----------------------------------------------------------

namespace {

template <typename Fwd, typename Bwd>
Var binary_elementwise(const char* op, const Var& a, const Var& b, Fwd fwd, Bwd bwd) {
  check_finite(op, a.value());
  check_finite(op, b.value());
  check_same_shape(op, a.value(), b.value());
  Tensor out(a.value().shape());
  const int n = out.numel();
  for (int i = 0; i < n; ++i) out[i] = fwd(a.value()[i], b.value()[i]);
  Node* na = a.node();
  Node* nb = b.node();
  return make_node(op, std::move(out), {a, b}, [na, nb, n, bwd](Node& self) {
    Tensor da(self.value.shape());
    Tensor db(self.value.shape());
    for (int i = 0; i < n; ++i) {
      auto [ga, gb] = bwd(na->value[i], nb->value[i], self.grad[i]);
      da[i] = ga;
      db[i] = gb;
    }
    if (na->requires_grad) na->accumulate(da);
    if (nb->requires_grad) nb->accumulate(db);
  });
}

template <typename Fwd, typename Bwd>
Var unary_elementwise(const char* op, const Var& x, Fwd fwd, Bwd bwd) {
  check_finite(op, x.value());
  Tensor out(x.value().shape());
  const int n = out.numel();
  for (int i = 0; i < n; ++i) out[i] = fwd(x.value()[i]);
  Node* nx = x.node();
  return make_node(op, std::move(out), {x}, [nx, n, bwd](Node& self) {
    if (!nx->requires_grad) return;
    Tensor dx(self.value.shape());
    for (int i = 0; i < n; ++i) dx[i] = bwd(nx->value[i], self.value[i], self.grad[i]);
    nx->accumulate(dx);
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  return binary_elementwise(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double g) { return std::pair<double, double>(g, g); });
}

Var sub(const Var& a, const Var& b) {
  return binary_elementwise(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double g) { return std::pair<double, double>(g, -g); });
}

Var mul(const Var& a, const Var& b) {
  return binary_elementwise(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double x, double y, double g) { return std::pair<double, double>(g * y, g * x); });
}

Var affine(const Var& x, double scale, double shift) {
  return unary_elementwise(
      "affine", x, [scale, shift](double v) { return scale * v + shift; },
      [scale](double, double, double g) { return scale * g; });
}

Var relu(const Var& x) {
  return unary_elementwise(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double, double g) { return v > 0.0 ? g : 0.0; });
}

Var leaky_relu(const Var& x, double negative_slope) {
  return unary_elementwise(
      "leaky_relu", x, [negative_slope](double v) { return v > 0.0 ? v : negative_slope * v; },
      [negative_slope](double v, double, double g) { return v > 0.0 ? g : negative_slope * g; });
}

Var vexp(const Var& x) {
  return unary_elementwise(
      "exp", x, [](double v) { return std::exp(v); },
      [](double, double out, double g) { return g * out; });
}

Var vlog(const Var& x) {
  check_finite("log", x.value());
  for (int i = 0; i < x.value().numel(); ++i) {
    if (x.value()[i] <= 0.0) throw NumericError("log: non-positive input");
  }
  return unary_elementwise(
      "log", x, [](double v) { return std::log(v); },
      [](double v, double, double g) { return g / v; });
}

Var reciprocal(const Var& x) {
  check_finite("reciprocal", x.value());
  for (int i = 0; i < x.value().numel(); ++i) {
    if (x.value()[i] == 0.0) throw NumericError("reciprocal: zero input");
  }
  return unary_elementwise(
      "reciprocal", x, [](double v) { return 1.0 / v; },
      [](double v, double, double g) { return -g / (v * v); });
}

Var clamp(const Var& x, double lo, double hi) {
  if (!(lo < hi)) throw ContractError("clamp: lo must be < hi");
  return unary_elementwise(
      "clamp", x,
      [lo, hi](double v) { return std::min(std::max(v, lo), hi); },
      [lo, hi](double v, double, double g) { return (v > lo && v < hi) ? g : 0.0; });
}

// --- normalization ---------------------------------------------------------

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double epsilon) {
  if (!(epsilon > 0.0)) throw ContractError("layer_norm: epsilon must be > 0");
  check_matrix("layer_norm", x.value());
  check_finite("layer_norm", x.value());
  check_finite("layer_norm", gain.value());
  check_finite("layer_norm", bias.value());
  const int n = x.rows(), d = x.cols();
  if (gain.value().rank() != 2 || gain.rows() != 1 || gain.cols() != d ||
      bias.value().rank() != 2 || bias.rows() != 1 || bias.cols() != d) {
    throw DimensionError("layer_norm: gain/bias must be [1x" + std::to_string(d) + "]");
  }
  Tensor out(Shape{n, d});
  Tensor yhat(Shape{n, d});
  Tensor inv_sigma(Shape{n, 1});
  for (int r = 0; r < n; ++r) {
    double mu = 0.0;
    for (int c = 0; c < d; ++c) mu += x.value().at(r, c);
    mu /= d;
    double var = 0.0;
    for (int c = 0; c < d; ++c) {
      const double diff = x.value().at(r, c) - mu;
      var += diff * diff;
    }
    var /= d;
    const double inv = 1.0 / std::sqrt(var + epsilon);
    inv_sigma.at(r, 0) = inv;
    for (int c = 0; c < d; ++c) {
      const double yh = (x.value().at(r, c) - mu) * inv;
      yhat.at(r, c) = yh;
      out.at(r, c) = gain.value()[c] * yh + bias.value()[c];
    }
  }
  Node* nx = x.node();
  Node* ng = gain.node();
  Node* nb = bias.node();
  return make_node("layer_norm", std::move(out), {x, gain, bias},
                   [nx, ng, nb, n, d, yhat = std::move(yhat),
                    inv_sigma = std::move(inv_sigma)](Node& self) {
                     const Tensor& g = self.grad;
                     if (nx->requires_grad) {
                       Tensor dx(Shape{n, d});
                       for (int r = 0; r < n; ++r) {
                         double m1 = 0.0, m2 = 0.0;
                         for (int c = 0; c < d; ++c) {
                           const double dy = g.at(r, c) * ng->value[c];
                           m1 += dy;
                           m2 += dy * yhat.at(r, c);
                         }
                         m1 /= d;
                         m2 /= d;
                         const double inv = inv_sigma.at(r, 0);
                         for (int c = 0; c < d; ++c) {
                           const double dy = g.at(r, c) * ng->value[c];
                           dx.at(r, c) = (dy - m1 - yhat.at(r, c) * m2) * inv;
                         }
                       }
                       nx->accumulate(dx);
                     }
                     if (ng->requires_grad) {
                       Tensor dg(Shape{1, d});
                       for (int r = 0; r < n; ++r) {
                         for (int c = 0; c < d; ++c) dg[c] += g.at(r, c) * yhat.at(r, c);
                       }
                       ng->accumulate(dg);
                     }
                     if (nb->requires_grad) {
                       Tensor db(Shape{1, d});
                       for (int r = 0; r < n; ++r) {
                         for (int c = 0; c < d; ++c) db[c] += g.at(r, c);
                       }
                       nb->accumulate(db);
                     }
                   });
}

Var l2_normalize_rows(const Var& x) {
  check_matrix("l2_normalize_rows", x.value());
  check_finite("l2_normalize_rows", x.value());
  const int n = x.rows(), d = x.cols();
  Tensor out(Shape{n, d});
  Tensor norms(Shape{n, 1});
  for (int r = 0; r < n; ++r) {
    double s = 0.0;
    for (int c = 0; c < d; ++c) s += x.value().at(r, c) * x.value().at(r, c);
    const double norm = std::sqrt(s);
    norms.at(r, 0) = norm;
    if (norm > 0.0) {
      for (int c = 0; c < d; ++c) out.at(r, c) = x.value().at(r, c) / norm;
    }
    // zero rows stay zero by convention
  }
  Node* nx = x.node();
  return make_node("l2_normalize_rows", std::move(out), {x},
                   [nx, n, d, norms = std::move(norms)](Node& self) {
                     if (!nx->requires_grad) return;
                     Tensor dx(Shape{n, d});
                     for (int r = 0; r < n; ++r) {
                       const double norm = norms.at(r, 0);
                       if (norm == 0.0) continue;
                       double dot = 0.0;
                       for (int c = 0; c < d; ++c) dot += self.value.at(r, c) * self.grad.at(r, c);
                       for (int c = 0; c < d; ++c) {
                         dx.at(r, c) =
                             (self.grad.at(r, c) - self.value.at(r, c) * dot) / norm;
                       }
                     }
                     nx->accumulate(dx);
                   });
}

Var cosine_similarity_rows(const Var& a, const Var& b) {
  check_matrix("cosine_similarity_rows", a.value());
  check_matrix("cosine_similarity_rows", b.value());
  check_finite("cosine_similarity_rows", a.value());
  check_finite("cosine_similarity_rows", b.value());
  check_same_shape("cosine_similarity_rows", a.value(), b.value());
  const int n = a.rows(), d = a.cols();
  Tensor out(Shape{n, 1});
  for (int r = 0; r < n; ++r) {
    double dot = 0.0, na2 = 0.0, nb2 = 0.0;
    for (int c = 0; c < d; ++c) {
      dot += a.value().at(r, c) * b.value().at(r, c);
      na2 += a.value().at(r, c) * a.value().at(r, c);
      nb2 += b.value().at(r, c) * b.value().at(r, c);
    }
    out.at(r, 0) = (na2 > 0.0 && nb2 > 0.0) ? dot / std::sqrt(na2 * nb2) : 0.0;
  }
  Node* na = a.node();
  Node* nb = b.node();
  return make_node("cosine_similarity_rows", std::move(out), {a, b}, [na, nb, n, d](Node& self) {
    Tensor da(Shape{n, d});
    Tensor db(Shape{n, d});
    for (int r = 0; r < n; ++r) {
      double na2 = 0.0, nb2 = 0.0;
      for (int c = 0; c < d; ++c) {
        na2 += na->value.at(r, c) * na->value.at(r, c);
        nb2 += nb->value.at(r, c) * nb->value.at(r, c);
      }
      if (na2 == 0.0 || nb2 == 0.0) continue;  // cosine pinned to 0, gradient 0
      const double norm_a = std::sqrt(na2), norm_b = std::sqrt(nb2);
      const double cos_v = self.value.at(r, 0);
      const double g = self.grad.at(r, 0);
      for (int c = 0; c < d; ++c) {
        da.at(r, c) = g * (nb->value.at(r, c) / (norm_a * norm_b) -
                           cos_v * na->value.at(r, c) / na2);
        db.at(r, c) = g * (na->value.at(r, c) / (norm_a * norm_b) -
                           cos_v * nb->value.at(r, c) / nb2);
      }
    }
    if (na->requires_grad) na->accumulate(da);
    if (nb->requires_grad) nb->accumulate(db);
  });
}

Var log_softmax_rows(const Var& x) {
  check_matrix("log_softmax_rows", x.value());
  check_finite("log_softmax_rows", x.value());
  const int n = x.rows(), m = x.cols();
  Tensor out(Shape{n, m});
  for (int r = 0; r < n; ++r) {
    double mx = x.value().at(r, 0);
    for (int c = 1; c < m; ++c) mx = std::max(mx, x.value().at(r, c));
    double sum = 0.0;
    for (int c = 0; c < m; ++c) sum += std::exp(x.value().at(r, c) - mx);
    const double lse = mx + std::log(sum);
    for (int c = 0; c < m; ++c) out.at(r, c) = x.value().at(r, c) - lse;
  }
  Node* nx = x.node();
  return make_node("log_softmax_rows", std::move(out), {x}, [nx, n, m](Node& self) {
    if (!nx->requires_grad) return;
    Tensor dx(Shape{n, m});
    for (int r = 0; r < n; ++r) {
      double gsum = 0.0;
      for (int c = 0; c < m; ++c) gsum += self.grad.at(r, c);
      for (int c = 0; c < m; ++c) {
        dx.at(r, c) = self.grad.at(r, c) - std::exp(self.value.at(r, c)) * gsum;
      }
    }
    nx->accumulate(dx);
  });
}

Var select_per_row(const Var& x, const std::vector<int>& cols) {
  check_matrix("select_per_row", x.value());
  check_finite("select_per_row", x.value());
  const int n = x.rows(), m = x.cols();
  if (static_cast<int>(cols.size()) != n) {
    throw ContractError("select_per_row: need one column index per row");
  }
  for (int c : cols) {
    if (c < 0 || c >= m) throw ContractError("select_per_row: column index out of range");
  }
  Tensor out(Shape{n, 1});
  for (int r = 0; r < n; ++r) out.at(r, 0) = x.value().at(r, cols[r]);
  Node* nx = x.node();
  return make_node("select_per_row", std::move(out), {x}, [nx, n, m, cols](Node& self) {
    if (!nx->requires_grad) return;
    Tensor dx(Shape{n, m});
    for (int r = 0; r < n; ++r) dx.at(r, cols[r]) = self.grad.at(r, 0);
    nx->accumulate(dx);
  });
}

// --- reductions ------------------------------------------------------------

Var max_over_axis(const Var& x, int axis) {
  check_matrix("max_over_axis", x.value());
  check_finite("max_over_axis", x.value());
  if (axis != 0 && axis != 1) throw ContractError("max_over_axis: axis must be 0 or 1");
  const int n = x.rows(), m = x.cols();
  if (axis == 0) {
    Tensor out(Shape{1, m});
    std::vector<int> argmax(m, 0);
    for (int c = 0; c < m; ++c) {
      double best = x.value().at(0, c);
      int best_r = 0;
      for (int r = 1; r < n; ++r) {
        if (x.value().at(r, c) > best) {  // ties keep the lowest index
          best = x.value().at(r, c);
          best_r = r;
        }
      }
      out.at(0, c) = best;
      argmax[c] = best_r;
    }
    Node* nx = x.node();
    return make_node("max_over_axis", std::move(out), {x},
                     [nx, n, m, argmax = std::move(argmax)](Node& self) {
                       if (!nx->requires_grad) return;
                       Tensor dx(Shape{n, m});
                       for (int c = 0; c < m; ++c) dx.at(argmax[c], c) = self.grad.at(0, c);
                       nx->accumulate(dx);
                     });
  }
  Tensor out(Shape{n, 1});
  std::vector<int> argmax(n, 0);
  for (int r = 0; r < n; ++r) {
    double best = x.value().at(r, 0);
    int best_c = 0;
    for (int c = 1; c < m; ++c) {
      if (x.value().at(r, c) > best) {
        best = x.value().at(r, c);
        best_c = c;
      }
    }
    out.at(r, 0) = best;
    argmax[r] = best_c;
  }
  Node* nx = x.node();
  return make_node("max_over_axis", std::move(out), {x},
                   [nx, n, m, argmax = std::move(argmax)](Node& self) {
                     if (!nx->requires_grad) return;
                     Tensor dx(Shape{n, m});
                     for (int r = 0; r < n; ++r) dx.at(r, argmax[r]) = self.grad.at(r, 0);
                     nx->accumulate(dx);
                   });
}

Var mean_over_axis(const Var& x, int axis) {
  check_matrix("mean_over_axis", x.value());
  check_finite("mean_over_axis", x.value());
  if (axis != 0 && axis != 1) throw ContractError("mean_over_axis: axis must be 0 or 1");
  const int n = x.rows(), m = x.cols();
  Node* nx = x.node();
  if (axis == 0) {
    Tensor out(Shape{1, m});
    for (int c = 0; c < m; ++c) {
      double s = 0.0;
      for (int r = 0; r < n; ++r) s += x.value().at(r, c);
      out.at(0, c) = s / n;
    }
    return make_node("mean_over_axis", std::move(out), {x}, [nx, n, m](Node& self) {
      if (!nx->requires_grad) return;
      Tensor dx(Shape{n, m});
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < m; ++c) dx.at(r, c) = self.grad.at(0, c) / n;
      }
      nx->accumulate(dx);
    });
  }
  Tensor out(Shape{n, 1});
  for (int r = 0; r < n; ++r) {
    double s = 0.0;
    for (int c = 0; c < m; ++c) s += x.value().at(r, c);
    out.at(r, 0) = s / m;
  }
  return make_node("mean_over_axis", std::move(out), {x}, [nx, n, m](Node& self) {
    if (!nx->requires_grad) return;
    Tensor dx(Shape{n, m});
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < m; ++c) dx.at(r, c) = self.grad.at(r, 0) / m;
    }
    nx->accumulate(dx);
  });
}

Var sum_all(const Var& x) {
  check_finite("sum_all", x.value());
  double s = 0.0;
  for (int i = 0; i < x.value().numel(); ++i) s += x.value()[i];
  Node* nx = x.node();
  return make_node("sum_all", Tensor::scalar(s), {x}, [nx](Node& self) {
    if (!nx->requires_grad) return;
    Tensor dx(nx->value.shape());
    const double g = self.grad[0];
    dx.fill(g);
    nx->accumulate(dx);
  });
}

// --- layout ops ------------------------------------------------------------

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: empty part list");
  int total = 0;
  const int m = parts.front().cols();
  for (const Var& p : parts) {
    check_matrix("concat_rows", p.value());
    check_finite("concat_rows", p.value());
    if (p.cols() != m) {
      throw DimensionError("concat_rows: column mismatch " + p.value().shape_str());
    }
    total += p.rows();
  }
  Tensor out(Shape{total, m});
  int offset = 0;
  for (const Var& p : parts) {
    const int pn = p.rows();
    std::copy(p.value().data(), p.value().data() + pn * m, out.data() + offset * m);
    offset += pn;
  }
  std::vector<Node*> nodes;
  std::vector<int> row_counts;
  nodes.reserve(parts.size());
  for (const Var& p : parts) {
    nodes.push_back(p.node());
    row_counts.push_back(p.rows());
  }
  return make_node("concat_rows", std::move(out), parts,
                   [nodes = std::move(nodes), row_counts = std::move(row_counts), m](Node& self) {
                     int offset = 0;
                     for (std::size_t i = 0; i < nodes.size(); ++i) {
                       const int pn = row_counts[i];
                       if (nodes[i]->requires_grad) {
                         Tensor dp(Shape{pn, m});
                         std::copy(self.grad.data() + offset * m,
                                   self.grad.data() + (offset + pn) * m, dp.data());
                         nodes[i]->accumulate(dp);
                       }
                       offset += pn;
                     }
                   });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: empty part list");
  const int n = parts.front().rows();
  int total = 0;
  for (const Var& p : parts) {
    check_matrix("concat_cols", p.value());
    check_finite("concat_cols", p.value());
    if (p.rows() != n) {
      throw DimensionError("concat_cols: row mismatch " + p.value().shape_str());
    }
    total += p.cols();
  }
  Tensor out(Shape{n, total});
  int offset = 0;
  for (const Var& p : parts) {
    const int pm = p.cols();
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < pm; ++c) out.at(r, offset + c) = p.value().at(r, c);
    }
    offset += pm;
  }
  std::vector<Node*> nodes;
  std::vector<int> col_counts;
  for (const Var& p : parts) {
    nodes.push_back(p.node());
    col_counts.push_back(p.cols());
  }
  return make_node("concat_cols", std::move(out), parts,
                   [nodes = std::move(nodes), col_counts = std::move(col_counts), n](Node& self) {
                     int offset = 0;
                     for (std::size_t i = 0; i < nodes.size(); ++i) {
                       const int pm = col_counts[i];
                       if (nodes[i]->requires_grad) {
                         Tensor dp(Shape{n, pm});
                         for (int r = 0; r < n; ++r) {
                           for (int c = 0; c < pm; ++c) dp.at(r, c) = self.grad.at(r, offset + c);
                         }
                         nodes[i]->accumulate(dp);
                       }
                       offset += pm;
                     }
                   });
}

Var slice_rows(const Var& x, int begin, int end) {
  check_matrix("slice_rows", x.value());
  check_finite("slice_rows", x.value());
  const int n = x.rows(), m = x.cols();
  if (begin < 0 || end > n || begin >= end) {
    throw ContractError("slice_rows: invalid range [" + std::to_string(begin) + ", " +
                        std::to_string(end) + ") for " + std::to_string(n) + " rows");
  }
  const int pn = end - begin;
  Tensor out(Shape{pn, m});
  std::copy(x.value().data() + begin * m, x.value().data() + end * m, out.data());
  Node* nx = x.node();
  return make_node("slice_rows", std::move(out), {x}, [nx, n, m, begin, pn](Node& self) {
    if (!nx->requires_grad) return;
    Tensor dx(Shape{n, m});
    std::copy(self.grad.data(), self.grad.data() + pn * m, dx.data() + begin * m);
    nx->accumulate(dx);
  });
}

Var rows_to_image(const Var& x, int height, int width) {
  check_matrix("rows_to_image", x.value());
  check_finite("rows_to_image", x.value());
  const int n = x.rows(), c = x.cols();
  if (n != height * width) {
    throw DimensionError("rows_to_image: " + std::to_string(n) + " rows cannot form " +
                         std::to_string(height) + "x" + std::to_string(width) + " grid");
  }
  Tensor out(Shape{c, height, width});
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < height; ++y) {
      for (int xx = 0; xx < width; ++xx) out.at(ch, y, xx) = x.value().at(y * width + xx, ch);
    }
  }
  Node* nx = x.node();
  return make_node("rows_to_image", std::move(out), {x}, [nx, height, width, c](Node& self) {
    if (!nx->requires_grad) return;
    Tensor dx(Shape{height * width, c});
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < height; ++y) {
        for (int xx = 0; xx < width; ++xx) dx.at(y * width + xx, ch) = self.grad.at(ch, y, xx);
      }
    }
    nx->accumulate(dx);
  });
}

Var image_to_rows(const Var& image) {
  check_finite("image_to_rows", image.value());
  if (image.value().rank() != 3) {
    throw DimensionError("image_to_rows: expected [c,h,w], got " + image.value().shape_str());
  }
  const int c = image.value().channels();
  const int h = image.value().height();
  const int w = image.value().width();
  Tensor out(Shape{h * w, c});
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) out.at(y * w + xx, ch) = image.value().at(ch, y, xx);
    }
  }
  Node* nx = image.node();
  return make_node("image_to_rows", std::move(out), {image}, [nx, c, h, w](Node& self) {
    if (!nx->requires_grad) return;
    Tensor dx(Shape{c, h, w});
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) dx.at(ch, y, xx) = self.grad.at(y * w + xx, ch);
      }
    }
    nx->accumulate(dx);
  });
}

// --- convolution -----------------------------------------------------------

Var conv2d(const Var& image, const Var& kernel, const Var& bias) {
  check_finite("conv2d", image.value());
  check_finite("conv2d", kernel.value());
  check_finite("conv2d", bias.value());
  if (image.value().rank() != 3) {
    throw DimensionError("conv2d: image must be [c,h,w], got " + image.value().shape_str());
  }
  if (kernel.value().rank() != 4) {
    throw DimensionError("conv2d: kernel must be [out,in,kh,kw], got " +
                         kernel.value().shape_str());
  }
  const int in_c = image.value().channels();
  const int h = image.value().height();
  const int w = image.value().width();
  const Shape& ks = kernel.value().shape();
  const int out_c = ks[0], k_in = ks[1], kh = ks[2], kw = ks[3];
  if (k_in != in_c) {
    throw DimensionError("conv2d: kernel input channels " + std::to_string(k_in) +
                         " vs image channels " + std::to_string(in_c));
  }
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw DimensionError("conv2d: kernel extents must be odd for same padding");
  }
  if (bias.value().rank() != 2 || bias.rows() != 1 || bias.cols() != out_c) {
    throw DimensionError("conv2d: bias must be [1x" + std::to_string(out_c) + "]");
  }
  const int ph = kh / 2, pw = kw / 2;

  Tensor out(Shape{out_c, h, w});
  const double* pin = image.value().data();
  const double* pk = kernel.value().data();
  for (int o = 0; o < out_c; ++o) {
    double* oplane = out.data() + static_cast<std::size_t>(o) * h * w;
    const double bo = bias.value()[o];
    for (int i = 0; i < h * w; ++i) oplane[i] = bo;
    for (int c = 0; c < in_c; ++c) {
      const double* iplane = pin + static_cast<std::size_t>(c) * h * w;
      for (int dy = 0; dy < kh; ++dy) {
        for (int dx = 0; dx < kw; ++dx) {
          const double kv = pk[((static_cast<std::size_t>(o) * in_c + c) * kh + dy) * kw + dx];
          if (kv == 0.0) continue;
          const int y_lo = std::max(0, ph - dy), y_hi = std::min(h, h + ph - dy);
          const int x_lo = std::max(0, pw - dx), x_hi = std::min(w, w + pw - dx);
          for (int y = y_lo; y < y_hi; ++y) {
            const double* irow = iplane + static_cast<std::size_t>(y + dy - ph) * w + (x_lo + dx - pw);
            double* orow = oplane + static_cast<std::size_t>(y) * w + x_lo;
            for (int x = 0; x < x_hi - x_lo; ++x) orow[x] += kv * irow[x];
          }
        }
      }
    }
  }

  Node* nimg = image.node();
  Node* nk = kernel.node();
  Node* nb = bias.node();
  return make_node(
      "conv2d", std::move(out), {image, kernel, bias},
      [nimg, nk, nb, in_c, out_c, h, w, kh, kw, ph, pw](Node& self) {
        const double* g = self.grad.data();
        if (nimg->requires_grad) {
          Tensor din(Shape{in_c, h, w});
          const double* pk2 = nk->value.data();
          for (int o = 0; o < out_c; ++o) {
            const double* gplane = g + static_cast<std::size_t>(o) * h * w;
            for (int c = 0; c < in_c; ++c) {
              double* dplane = din.data() + static_cast<std::size_t>(c) * h * w;
              for (int dy = 0; dy < kh; ++dy) {
                for (int dx = 0; dx < kw; ++dx) {
                  const double kv =
                      pk2[((static_cast<std::size_t>(o) * in_c + c) * kh + dy) * kw + dx];
                  if (kv == 0.0) continue;
                  const int y_lo = std::max(0, ph - dy), y_hi = std::min(h, h + ph - dy);
                  const int x_lo = std::max(0, pw - dx), x_hi = std::min(w, w + pw - dx);
                  for (int y = y_lo; y < y_hi; ++y) {
                    double* drow =
                        dplane + static_cast<std::size_t>(y + dy - ph) * w + (x_lo + dx - pw);
                    const double* grow = gplane + static_cast<std::size_t>(y) * w + x_lo;
                    for (int x = 0; x < x_hi - x_lo; ++x) drow[x] += kv * grow[x];
                  }
                }
              }
            }
          }
          nimg->accumulate(din);
        }
        if (nk->requires_grad) {
          Tensor dk(Shape{out_c, in_c, kh, kw});
          const double* pin2 = nimg->value.data();
          for (int o = 0; o < out_c; ++o) {
            const double* gplane = g + static_cast<std::size_t>(o) * h * w;
            for (int c = 0; c < in_c; ++c) {
              const double* iplane = pin2 + static_cast<std::size_t>(c) * h * w;
              for (int dy = 0; dy < kh; ++dy) {
                for (int dx = 0; dx < kw; ++dx) {
                  const int y_lo = std::max(0, ph - dy), y_hi = std::min(h, h + ph - dy);
                  const int x_lo = std::max(0, pw - dx), x_hi = std::min(w, w + pw - dx);
                  double acc = 0.0;
                  for (int y = y_lo; y < y_hi; ++y) {
                    const double* irow =
                        iplane + static_cast<std::size_t>(y + dy - ph) * w + (x_lo + dx - pw);
                    const double* grow = gplane + static_cast<std::size_t>(y) * w + x_lo;
                    for (int x = 0; x < x_hi - x_lo; ++x) acc += irow[x] * grow[x];
                  }
                  dk[((static_cast<std::size_t>(o) * in_c + c) * kh + dy) * kw + dx] = acc;
                }
              }
            }
          }
          nk->accumulate(dk);
        }
        if (nb->requires_grad) {
          Tensor db(Shape{1, out_c});
          for (int o = 0; o < out_c; ++o) {
            const double* gplane = g + static_cast<std::size_t>(o) * h * w;
            double acc = 0.0;
            for (int i = 0; i < h * w; ++i) acc += gplane[i];
            db[o] = acc;
          }
          nb->accumulate(db);
        }
      });
}

// --- backward sweep --------------------------------------------------------

void backward(const Var& loss) {
  if (!loss.defined()) throw ContractError("backward: undefined loss");
  if (loss.value().numel() != 1) {
    throw ContractError("backward: loss must be scalar, got " + loss.value().shape_str());
  }
  Node* root = loss.node();
  root->accumulate(Tensor::full(root->value.shape(), 1.0));
  if (!root->requires_grad) return;  // nothing upstream wants gradients

  // Iterative post-order DFS; nodes finish after all their inputs, so the
  // reversed finish list runs outputs before inputs.
  std::vector<Node*> order;
  std::unordered_map<Node*, int> state;  // 0 unseen, 1 open, 2 done
  std::vector<Node*> stack{root};
  while (!stack.empty()) {
    Node* n = stack.back();
    int& st = state[n];
    if (st == 0) {
      st = 1;
      for (const auto& in : n->inputs) {
        Node* p = in.get();
        if (p->requires_grad && state[p] == 0) stack.push_back(p);
      }
    } else {
      stack.pop_back();
      if (st == 1) {
        st = 2;
        order.push_back(n);
      }
    }
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && n->grad.numel() > 0) n->backprop(*n);
  }
}

}  // namespace tvg
