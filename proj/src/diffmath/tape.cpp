#include "lapace/diffmath/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lapace/error.hpp"

namespace lapace::diffmath {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() +
                     " vs " + b.shape_string());
  }
}

Tensor like(const Tensor& t) { return Tensor::zeros(t.rows(), t.cols()); }

// C += A * B. Each output row depends only on the matching row of A, so a
// row's result is independent of how many rows are batched together.
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = c.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = pc + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      const double* brow = pb + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// C += G * B^T
void gemm_nt(const Tensor& g, const Tensor& b, Tensor& c) {
  const std::size_t n = g.rows(), m = g.cols(), k = b.rows();
  const double* pg = g.data().data();
  const double* pb = b.data().data();
  double* pc = c.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* grow = pg + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = pb + p * m;
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
      pc[i * k + p] += acc;
    }
  }
}

// C += A^T * G
void gemm_tn(const Tensor& a, const Tensor& g, Tensor& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = g.cols();
  const double* pa = a.data().data();
  const double* pg = g.data().data();
  double* pc = c.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* grow = pg + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      double* crow = pc + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * grow[j];
    }
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename F>
Var unary(Var x, F&& f, Tape::Backprop backprop) {
  Tensor out = like(x.value());
  const auto in = x.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = f(in[i]);
  return x.tape().record(std::move(out), {x.id()}, std::move(backprop));
}

}  // namespace

// ---- Var ----------------------------------------------------------------

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

// ---- Tape ---------------------------------------------------------------

Var Tape::leaf(Tensor value) {
  const bool rg = value.requires_grad();
  nodes_.push_back(Node{std::move(value), Tensor{}, {}, nullptr, rg});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  value.set_requires_grad(false);
  return leaf(std::move(value));
}

Var Tape::record(Tensor value, std::vector<NodeId> inputs, Backprop backprop) {
  const NodeId id = nodes_.size();
  bool rg = false;
  for (NodeId in : inputs) {
    if (in >= id) throw Error("tape: input node " + std::to_string(in) +
                              " does not precede node " + std::to_string(id));
    rg = rg || nodes_[in].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Tensor{}, std::move(inputs),
                        rg ? std::move(backprop) : nullptr, rg});
  return Var(this, id);
}

const Tensor& Tape::grad(NodeId id) const {
  const Node& node = nodes_.at(id);
  if (node.grad.size() != node.value.size()) {
    const_cast<Node&>(node).grad = like(node.value);
  }
  return node.grad;
}

Tensor& Tape::grad_mut(NodeId id) {
  Node& node = nodes_.at(id);
  if (node.grad.size() != node.value.size()) node.grad = like(node.value);
  return node.grad;
}

void Tape::accumulate(NodeId id, const Tensor& delta) {
  if (!nodes_.at(id).requires_grad) return;
  Tensor& g = grad_mut(id);
  auto gd = g.data();
  const auto dd = delta.data();
  for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += dd[i];
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw Error("tape: loss belongs to another tape");
  if (value(loss.id()).size() != 1) {
    throw ShapeError("backward: loss must be scalar, got " +
                     value(loss.id()).shape_string());
  }
  for (auto& node : nodes_) node.grad = like(node.value);
  nodes_[loss.id()].grad[0] = 1.0;
  for (NodeId id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (node.backprop) node.backprop(*this, id);
  }
}

// ---- linear algebra -----------------------------------------------------

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: " + av.shape_string() + " x " + bv.shape_string());
  }
  Tensor out = Tensor::zeros(av.rows(), bv.cols());
  gemm_nn(av, bv, out);
  const NodeId ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {ia, ib}, [ia, ib](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) gemm_nt(g, t.value(ib), t.grad_mut(ia));
    if (t.requires_grad(ib)) gemm_tn(t.value(ia), g, t.grad_mut(ib));
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  out.set_requires_grad(false);
  auto o = out.data();
  const auto bd = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
  const NodeId ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {ia, ib}, [ia, ib](Tape& t, NodeId self) {
    const Tensor g = t.grad(self);
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var sub(Var a, Var b) { return add(a, neg(b)); }

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = like(a.value());
  auto o = out.data();
  const auto ad = a.value().data();
  const auto bd = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = ad[i] * bd[i];
  const NodeId ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {ia, ib}, [ia, ib](Tape& t, NodeId self) {
    const auto g = t.grad(self).data();
    const auto av = t.value(ia).data();
    const auto bv = t.value(ib).data();
    if (t.requires_grad(ia)) {
      auto ga = t.grad_mut(ia).data();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(ib)) {
      auto gb = t.grad_mut(ib).data();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var add_row(Var x, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw ShapeError("add_row: " + xv.shape_string() + " + " + bv.shape_string());
  }
  Tensor out = like(xv);
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    for (std::size_t c = 0; c < xv.cols(); ++c) out(r, c) = xv(r, c) + bv[c];
  }
  const NodeId ix = x.id(), ib = bias.id();
  return x.tape().record(std::move(out), {ix, ib}, [ix, ib](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    t.accumulate(ix, g);
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad_mut(ib);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) gb[c] += g(r, c);
      }
    }
  });
}

Var mul_col(Var x, Var col) {
  const Tensor& xv = x.value();
  const Tensor& cv = col.value();
  if (cv.rows() != xv.rows() || cv.cols() != 1) {
    throw ShapeError("mul_col: " + xv.shape_string() + " * " + cv.shape_string());
  }
  Tensor out = like(xv);
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    for (std::size_t c = 0; c < xv.cols(); ++c) out(r, c) = xv(r, c) * cv[r];
  }
  const NodeId ix = x.id(), ic = col.id();
  return x.tape().record(std::move(out), {ix, ic}, [ix, ic](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    const Tensor& xv = t.value(ix);
    const Tensor& cv = t.value(ic);
    if (t.requires_grad(ix)) {
      Tensor& gx = t.grad_mut(ix);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) gx(r, c) += g(r, c) * cv[r];
      }
    }
    if (t.requires_grad(ic)) {
      Tensor& gc = t.grad_mut(ic);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < g.cols(); ++c) acc += g(r, c) * xv(r, c);
        gc[r] += acc;
      }
    }
  });
}

Var scale(Var x, double factor) {
  const NodeId ix = x.id();
  return unary(x, [factor](double v) { return v * factor; },
               [ix, factor](Tape& t, NodeId self) {
                 const auto g = t.grad(self).data();
                 auto gx = t.grad_mut(ix).data();
                 for (std::size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
               });
}

Var add_scalar(Var x, double value) {
  const NodeId ix = x.id();
  return unary(x, [value](double v) { return v + value; },
               [ix](Tape& t, NodeId self) { t.accumulate(ix, t.grad(self)); });
}

Var neg(Var x) { return scale(x, -1.0); }

// ---- elementwise nonlinearities -----------------------------------------

Var relu(Var x) {
  const NodeId ix = x.id();
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
               [ix](Tape& t, NodeId self) {
                 const auto g = t.grad(self).data();
                 const auto xv = t.value(ix).data();
                 auto gx = t.grad_mut(ix).data();
                 for (std::size_t i = 0; i < g.size(); ++i) {
                   if (xv[i] > 0.0) gx[i] += g[i];
                 }
               });
}

Var hinge(Var x) { return relu(x); }

Var sigmoid(Var x) {
  const NodeId ix = x.id();
  return unary(x, stable_sigmoid, [ix](Tape& t, NodeId self) {
    const auto g = t.grad(self).data();
    const auto s = t.value(self).data();
    auto gx = t.grad_mut(ix).data();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * s[i] * (1.0 - s[i]);
  });
}

Var exp(Var x) {
  const NodeId ix = x.id();
  return unary(x, [](double v) { return std::exp(v); }, [ix](Tape& t, NodeId self) {
    const auto g = t.grad(self).data();
    const auto e = t.value(self).data();
    auto gx = t.grad_mut(ix).data();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * e[i];
  });
}

Var log(Var x) {
  const NodeId ix = x.id();
  return unary(x, [](double v) { return std::log(v); }, [ix](Tape& t, NodeId self) {
    const auto g = t.grad(self).data();
    const auto xv = t.value(ix).data();
    auto gx = t.grad_mut(ix).data();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / xv[i];
  });
}

Var square(Var x) {
  const NodeId ix = x.id();
  return unary(x, [](double v) { return v * v; }, [ix](Tape& t, NodeId self) {
    const auto g = t.grad(self).data();
    const auto xv = t.value(ix).data();
    auto gx = t.grad_mut(ix).data();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += 2.0 * xv[i] * g[i];
  });
}

Var xlogx(Var q) {
  const NodeId iq = q.id();
  return unary(q, [](double v) { return v > 0.0 ? v * std::log(v) : 0.0; },
               [iq](Tape& t, NodeId self) {
                 const auto g = t.grad(self).data();
                 const auto qv = t.value(iq).data();
                 auto gq = t.grad_mut(iq).data();
                 for (std::size_t i = 0; i < g.size(); ++i) {
                   if (qv[i] > 0.0) gq[i] += g[i] * (std::log(qv[i]) + 1.0);
                 }
               });
}

Var clamp(Var x, double lo, double hi) {
  const NodeId ix = x.id();
  return unary(x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
               [ix, lo, hi](Tape& t, NodeId self) {
                 const auto g = t.grad(self).data();
                 const auto xv = t.value(ix).data();
                 auto gx = t.grad_mut(ix).data();
                 for (std::size_t i = 0; i < g.size(); ++i) {
                   if (xv[i] > lo && xv[i] < hi) gx[i] += g[i];
                 }
               });
}

Var abs(Var x) {
  const NodeId ix = x.id();
  return unary(x, [](double v) { return std::fabs(v); }, [ix](Tape& t, NodeId self) {
    const auto g = t.grad(self).data();
    const auto xv = t.value(ix).data();
    auto gx = t.grad_mut(ix).data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv[i] > 0.0) gx[i] += g[i];
      else if (xv[i] < 0.0) gx[i] -= g[i];
    }
  });
}

// ---- softmax ------------------------------------------------------------

namespace {

Tensor softmax_forward(const Tensor& logits, const Tensor* mask) {
  Tensor out = like(logits);
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    double top = -INFINITY;
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      if (mask && (*mask)(r, c) == 0.0) continue;
      top = std::max(top, logits(r, c));
    }
    if (!std::isfinite(top)) {
      throw NumericError("softmax: row " + std::to_string(r) +
                         " has no admissible finite logit");
    }
    double total = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      if (mask && (*mask)(r, c) == 0.0) continue;
      out(r, c) = std::exp(logits(r, c) - top);
      total += out(r, c);
    }
    for (std::size_t c = 0; c < logits.cols(); ++c) out(r, c) /= total;
  }
  return out;
}

void softmax_backward(Tape& t, NodeId self, NodeId input) {
  const Tensor& g = t.grad(self);
  const Tensor& s = t.value(self);
  Tensor& gx = t.grad_mut(input);
  for (std::size_t r = 0; r < s.rows(); ++r) {
    double dot = 0.0;
    for (std::size_t c = 0; c < s.cols(); ++c) dot += g(r, c) * s(r, c);
    for (std::size_t c = 0; c < s.cols(); ++c) gx(r, c) += s(r, c) * (g(r, c) - dot);
  }
}

}  // namespace

Var softmax_rows(Var logits) {
  const NodeId il = logits.id();
  return logits.tape().record(softmax_forward(logits.value(), nullptr), {il},
                              [il](Tape& t, NodeId self) { softmax_backward(t, self, il); });
}

Var masked_softmax_rows(Var logits, const Tensor& mask) {
  require_same_shape(logits.value(), mask, "masked_softmax_rows");
  const NodeId il = logits.id();
  return logits.tape().record(softmax_forward(logits.value(), &mask), {il},
                              [il](Tape& t, NodeId self) { softmax_backward(t, self, il); });
}

// ---- reductions and reshaping -------------------------------------------

Var sum(Var x) {
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  const NodeId ix = x.id();
  return x.tape().record(Tensor::scalar(total), {ix}, [ix](Tape& t, NodeId self) {
    const double g = t.grad(self)[0];
    for (double& v : t.grad_mut(ix).data()) v += g;
  });
}

Var mean(Var x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

Var row_sum(Var x) {
  const Tensor& xv = x.value();
  Tensor out = Tensor::zeros(xv.rows(), 1);
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < xv.cols(); ++c) acc += xv(r, c);
    out[r] = acc;
  }
  const NodeId ix = x.id();
  return x.tape().record(std::move(out), {ix}, [ix](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_mut(ix);
    for (std::size_t r = 0; r < gx.rows(); ++r) {
      for (std::size_t c = 0; c < gx.cols(); ++c) gx(r, c) += g[r];
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = parts.front().value().rows();
  std::size_t cols = 0;
  std::vector<NodeId> ids;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    if (p.value().rows() != rows) {
      throw ShapeError("concat_cols: row mismatch " + p.value().shape_string());
    }
    offsets.push_back(cols);
    cols += p.value().cols();
    ids.push_back(p.id());
  }
  Tensor out = Tensor::zeros(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < pv.cols(); ++c) out(r, offsets[k] + c) = pv(r, c);
    }
  }
  return parts.front().tape().record(
      std::move(out), ids, [ids, offsets](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!t.requires_grad(ids[k])) continue;
          Tensor& gp = t.grad_mut(ids[k]);
          for (std::size_t r = 0; r < gp.rows(); ++r) {
            for (std::size_t c = 0; c < gp.cols(); ++c) gp(r, c) += g(r, offsets[k] + c);
          }
        }
      });
}

Var select_cols(Var x, const std::vector<std::size_t>& columns) {
  const Tensor& xv = x.value();
  for (std::size_t c : columns) {
    if (c >= xv.cols()) throw ShapeError("select_cols: column out of range");
  }
  Tensor out = Tensor::zeros(xv.rows(), columns.size());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    for (std::size_t k = 0; k < columns.size(); ++k) out(r, k) = xv(r, columns[k]);
  }
  const NodeId ix = x.id();
  return x.tape().record(std::move(out), {ix}, [ix, columns](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_mut(ix);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t k = 0; k < columns.size(); ++k) gx(r, columns[k]) += g(r, k);
    }
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t end) {
  if (begin > end || end > x.value().cols()) {
    throw ShapeError("slice_cols: bad range for " + x.value().shape_string());
  }
  std::vector<std::size_t> columns;
  for (std::size_t c = begin; c < end; ++c) columns.push_back(c);
  return select_cols(x, columns);
}

// ---- fused losses -------------------------------------------------------

Var gaussian_kl_matrix(Var mu, Var logvar, Var prior_mu, Var prior_logvar) {
  const Tensor& m = mu.value();
  const Tensor& lv = logvar.value();
  const Tensor& pm = prior_mu.value();
  const Tensor& plv = prior_logvar.value();
  require_same_shape(m, lv, "gaussian_kl_matrix(mu, logvar)");
  require_same_shape(pm, plv, "gaussian_kl_matrix(prior)");
  if (m.cols() != pm.cols()) {
    throw ShapeError("gaussian_kl_matrix: latent width " + m.shape_string() +
                     " vs prior " + pm.shape_string());
  }
  const std::size_t n = m.rows(), k = pm.rows(), h = m.cols();
  Tensor out = Tensor::zeros(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < h; ++j) {
        const double d = m(i, j) - pm(c, j);
        acc += plv(c, j) - lv(i, j) + (std::exp(lv(i, j)) + d * d) * std::exp(-plv(c, j)) - 1.0;
      }
      out(i, c) = 0.5 * acc;
    }
  }
  const NodeId im = mu.id(), il = logvar.id(), ipm = prior_mu.id(), ipl = prior_logvar.id();
  return mu.tape().record(
      std::move(out), {im, il, ipm, ipl}, [=](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        const Tensor& m = t.value(im);
        const Tensor& lv = t.value(il);
        const Tensor& pm = t.value(ipm);
        const Tensor& plv = t.value(ipl);
        Tensor gm = like(m), gl = like(lv), gpm = like(pm), gpl = like(plv);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t c = 0; c < k; ++c) {
            const double w = g(i, c);
            if (w == 0.0) continue;
            for (std::size_t j = 0; j < h; ++j) {
              const double inv = std::exp(-plv(c, j));
              const double d = m(i, j) - pm(c, j);
              const double var = std::exp(lv(i, j));
              gm(i, j) += w * d * inv;
              gl(i, j) += w * 0.5 * (var * inv - 1.0);
              gpm(c, j) -= w * d * inv;
              gpl(c, j) += w * 0.5 * (1.0 - (var + d * d) * inv);
            }
          }
        }
        t.accumulate(im, gm);
        t.accumulate(il, gl);
        t.accumulate(ipm, gpm);
        t.accumulate(ipl, gpl);
      });
}

Var mixed_reconstruction(Var raw_output, const Tensor& target,
                         const std::vector<bool>& categorical) {
  const Tensor& r = raw_output.value();
  require_same_shape(r, target, "mixed_reconstruction");
  if (categorical.size() != r.cols()) {
    throw ShapeError("mixed_reconstruction: column kind list has wrong width");
  }
  Tensor out = Tensor::zeros(r.rows(), 1);
  for (std::size_t i = 0; i < r.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < r.cols(); ++j) {
      const double v = r(i, j), y = target(i, j);
      if (categorical[j]) {
        acc += std::max(v, 0.0) - v * y + std::log1p(std::exp(-std::fabs(v)));
      } else {
        acc += (v - y) * (v - y);
      }
    }
    out[i] = acc;
  }
  const NodeId ir = raw_output.id();
  return raw_output.tape().record(
      std::move(out), {ir}, [ir, target, categorical](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        const Tensor& r = t.value(ir);
        Tensor& gr = t.grad_mut(ir);
        for (std::size_t i = 0; i < r.rows(); ++i) {
          for (std::size_t j = 0; j < r.cols(); ++j) {
            const double v = r(i, j), y = target(i, j);
            const double d = categorical[j] ? stable_sigmoid(v) - y : 2.0 * (v - y);
            gr(i, j) += g[i] * d;
          }
        }
      });
}

Var softmax_cross_entropy(Var logits, const std::vector<int>& labels) {
  const Tensor& l = logits.value();
  if (labels.size() != l.rows()) {
    throw ShapeError("softmax_cross_entropy: label count does not match rows");
  }
  const Tensor probs = softmax_forward(l, nullptr);
  double total = 0.0;
  for (std::size_t i = 0; i < l.rows(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    if (labels[i] < 0 || y >= l.cols()) throw ShapeError("softmax_cross_entropy: bad label");
    total -= std::log(std::max(probs(i, y), 1e-300));
  }
  const double n = static_cast<double>(l.rows());
  const NodeId il = logits.id();
  return logits.tape().record(
      Tensor::scalar(total / n), {il}, [il, probs, labels, n](Tape& t, NodeId self) {
        const double g = t.grad(self)[0];
        Tensor& gl = t.grad_mut(il);
        for (std::size_t i = 0; i < probs.rows(); ++i) {
          for (std::size_t c = 0; c < probs.cols(); ++c) {
            const double onehot = static_cast<int>(c) == labels[i] ? 1.0 : 0.0;
            gl(i, c) += g * (probs(i, c) - onehot) / n;
          }
        }
      });
}

}  // namespace lapace::diffmath
