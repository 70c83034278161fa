#include "foresight/ndkernel/ops.hpp"

#include <algorithm>
#include <cmath>

#include "foresight/errors.hpp"

namespace foresight::nd::ops {
namespace {

[[noreturn]] void mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " + to_string(b));
}

void same_tape(const char* op, const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw UsageError(std::string(op) + ": operands recorded on different tapes");
}

template <class F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

}  // namespace

Var add(const Var& a, const Var& b) {
  same_tape("add", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape() != y.shape()) mismatch("add", x.shape(), y.shape());
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return a.tape().record("add", std::move(out), {a, b}, [](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    for (std::size_t k = 0; k < 2; ++k) {
      NodeId in = t.input(self, k);
      if (!t.requires_grad(in)) continue;
      Tensor& gi = t.grad(in);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  same_tape("sub", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape() != y.shape()) mismatch("sub", x.shape(), y.shape());
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return a.tape().record("sub", std::move(out), {a, b}, [](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    NodeId ia = t.input(self, 0);
    NodeId ib = t.input(self, 1);
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  same_tape("mul", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape() != y.shape()) mismatch("mul", x.shape(), y.shape());
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return a.tape().record("mul", std::move(out), {a, b}, [](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    NodeId ia = t.input(self, 0);
    NodeId ib = t.input(self, 1);
    if (t.requires_grad(ia)) {
      const Tensor& yv = t.value(ib);
      Tensor& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * yv[i];
    }
    if (t.requires_grad(ib)) {
      const Tensor& xv = t.value(ia);
      Tensor& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * xv[i];
    }
  });
}

Var scale(const Var& a, double factor) {
  Tensor out = map(a.value(), [factor](double v) { return v * factor; });
  return a.tape().record("scale", std::move(out), {a}, [factor](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(t.input(self, 0));
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

Var add_bias(const Var& a, const Var& bias) {
  same_tape("add_bias", a, bias);
  const Tensor& x = a.value();
  const Tensor& b = bias.value();
  if (b.rank() != 1 || x.rank() == 0 || x.shape().back() != b.dim(0)) mismatch("add_bias", x.shape(), b.shape());
  const std::size_t n = b.size();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + b[i % n];
  return a.tape().record("add_bias", std::move(out), {a, bias}, [n](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    NodeId ia = t.input(self, 0);
    NodeId ib = t.input(self, 1);
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i];
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  same_tape("matmul", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.rank() != 2 || y.rank() != 2 || x.dim(1) != y.dim(0)) mismatch("matmul", x.shape(), y.shape());
  const std::size_t m = x.dim(0), k = x.dim(1), n = y.dim(1);
  Tensor out(Shape{m, n});
  const double* xp = x.raw();
  const double* yp = y.raw();
  double* op = out.raw();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = op + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = xp[i * k + p];
      if (xv == 0.0) continue;
      const double* yrow = yp + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += xv * yrow[j];
    }
  }
  return a.tape().record("matmul", std::move(out), {a, b}, [m, k, n](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    NodeId ia = t.input(self, 0);
    NodeId ib = t.input(self, 1);
    const double* gp = g.raw();
    if (t.requires_grad(ia)) {
      // dA = G * B^T
      const double* yp = t.value(ib).raw();
      double* ga = t.grad(ia).raw();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double* yrow = yp + p * n;
          const double* grow = gp + i * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * yrow[j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (t.requires_grad(ib)) {
      // dB = A^T * G
      const double* xp = t.value(ia).raw();
      double* gb = t.grad(ib).raw();
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = gp + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double xv = xp[i * k + p];
          if (xv == 0.0) continue;
          double* gbrow = gb + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += xv * grow[j];
        }
      }
    }
  });
}

Var relu(const Var& a) {
  Tensor out = map(a.value(), [](double v) { return v > 0.0 ? v : 0.0; });
  return a.tape().record("relu", std::move(out), {a}, [](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    NodeId in = t.input(self, 0);
    const Tensor& x = t.value(in);
    Tensor& gi = t.grad(in);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > 0.0) gi[i] += g[i];
    }
  });
}

Var tanh(const Var& a) {
  Tensor out = map(a.value(), [](double v) { return std::tanh(v); });
  return a.tape().record("tanh", std::move(out), {a}, [](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& gi = t.grad(t.input(self, 0));
    for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var square(const Var& a) {
  Tensor out = map(a.value(), [](double v) { return v * v; });
  return a.tape().record("square", std::move(out), {a}, [](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    NodeId in = t.input(self, 0);
    const Tensor& x = t.value(in);
    Tensor& gi = t.grad(in);
    for (std::size_t i = 0; i < g.size(); ++i) gi[i] += 2.0 * x[i] * g[i];
  });
}

Var sum(const Var& a) {
  double acc = 0.0;
  for (double v : a.value().data()) acc += v;
  return a.tape().record("sum", Tensor::scalar(acc), {a}, [](Tape& t, NodeId self) {
    const double g = t.grad(self)[0];
    Tensor& gi = t.grad(t.input(self, 0));
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g;
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape().record("reshape", std::move(out), {a}, [](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    Tensor& gi = t.grad(t.input(self, 0));
    for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
  });
}

Var conv1d_causal(const Var& input, const Var& kernel, std::size_t dilation) {
  same_tape("conv1d_causal", input, kernel);
  if (dilation < 1) throw ConfigError("conv1d_causal: dilation must be >= 1, got " + std::to_string(dilation));
  const Tensor& x = input.value();
  const Tensor& w = kernel.value();
  if ((x.rank() != 2 && x.rank() != 3) || w.rank() != 3) mismatch("conv1d_causal", x.shape(), w.shape());
  const bool batched = x.rank() == 3;
  const std::size_t B = batched ? x.dim(0) : 1;
  const std::size_t T = x.dim(batched ? 1 : 0);
  const std::size_t cin = x.dim(batched ? 2 : 1);
  const std::size_t k = w.dim(0), cout = w.dim(2);
  if (w.dim(1) != cin || k == 0) mismatch("conv1d_causal", x.shape(), w.shape());

  Shape out_shape = batched ? Shape{B, T, cout} : Shape{T, cout};
  Tensor out(out_shape);
  const double* xp = x.raw();
  const double* wp = w.raw();
  double* op = out.raw();
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T; ++t) {
      double* orow = op + (b * T + t) * cout;
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t lag = (k - 1 - j) * dilation;
        if (lag > t) continue;
        const double* xrow = xp + (b * T + t - lag) * cin;
        const double* wj = wp + j * cin * cout;
        for (std::size_t c = 0; c < cin; ++c) {
          const double xv = xrow[c];
          if (xv == 0.0) continue;
          const double* wrow = wj + c * cout;
          for (std::size_t o = 0; o < cout; ++o) orow[o] += xv * wrow[o];
        }
      }
    }
  }
  return input.tape().record(
      "conv1d_causal", std::move(out), {input, kernel}, [B, T, cin, cout, k, dilation](Tape& t, NodeId self) {
        const double* gp = t.grad(self).raw();
        NodeId ix = t.input(self, 0);
        NodeId iw = t.input(self, 1);
        const double* xp = t.value(ix).raw();
        const double* wp = t.value(iw).raw();
        double* gx = t.requires_grad(ix) ? t.grad(ix).raw() : nullptr;
        double* gw = t.requires_grad(iw) ? t.grad(iw).raw() : nullptr;
        for (std::size_t b = 0; b < B; ++b) {
          for (std::size_t s = 0; s < T; ++s) {
            const double* grow = gp + (b * T + s) * cout;
            for (std::size_t j = 0; j < k; ++j) {
              const std::size_t lag = (k - 1 - j) * dilation;
              if (lag > s) continue;
              const std::size_t src = (b * T + s - lag) * cin;
              const double* wj = wp + j * cin * cout;
              for (std::size_t c = 0; c < cin; ++c) {
                const double* wrow = wj + c * cout;
                if (gx) {
                  double acc = 0.0;
                  for (std::size_t o = 0; o < cout; ++o) acc += grow[o] * wrow[o];
                  gx[src + c] += acc;
                }
                if (gw) {
                  const double xv = xp[src + c];
                  if (xv == 0.0) continue;
                  double* gwrow = gw + (j * cin + c) * cout;
                  for (std::size_t o = 0; o < cout; ++o) gwrow[o] += xv * grow[o];
                }
              }
            }
          }
        }
      });
}

Var last_step(const Var& x) {
  const Tensor& v = x.value();
  if (v.rank() != 3 || v.dim(1) == 0) throw ShapeError("last_step: expected [B,T,C], got " + to_string(v.shape()));
  const std::size_t B = v.dim(0), T = v.dim(1), C = v.dim(2);
  Tensor out(Shape{B, C});
  for (std::size_t b = 0; b < B; ++b) {
    std::copy_n(v.raw() + (b * T + T - 1) * C, C, out.raw() + b * C);
  }
  return x.tape().record("last_step", std::move(out), {x}, [B, T, C](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    Tensor& gi = t.grad(t.input(self, 0));
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t c = 0; c < C; ++c) gi[(b * T + T - 1) * C + c] += g[b * C + c];
    }
  });
}

Var gather_rows(const Var& a, std::span<const std::size_t> rows) {
  const Tensor& v = a.value();
  if (v.rank() == 0) throw ShapeError("gather_rows: scalar input");
  const std::size_t n = v.dim(0);
  const std::size_t stride = n == 0 ? 0 : v.size() / n;
  Shape shape = v.shape();
  shape[0] = rows.size();
  Tensor out(shape);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n) {
      throw ShapeError("gather_rows: row " + std::to_string(rows[r]) + " out of range for " + to_string(v.shape()));
    }
    std::copy_n(v.raw() + rows[r] * stride, stride, out.raw() + r * stride);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return a.tape().record("gather_rows", std::move(out), {a}, [idx = std::move(idx), stride](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    Tensor& gi = t.grad(t.input(self, 0));
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (std::size_t c = 0; c < stride; ++c) gi[idx[r] * stride + c] += g[r * stride + c];
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Shape shape = parts[0].value().shape();
  if (shape.empty()) throw ShapeError("concat_rows: scalar input");
  std::size_t rows = 0;
  for (const Var& p : parts) {
    const Shape& s = p.value().shape();
    if (s.size() != shape.size() || !std::equal(s.begin() + 1, s.end(), shape.begin() + 1)) {
      mismatch("concat_rows", shape, s);
    }
    same_tape("concat_rows", parts[0], p);
    rows += s[0];
  }
  shape[0] = rows;
  Tensor out(shape);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    offsets.push_back(off);
    const Tensor& v = p.value();
    std::copy_n(v.raw(), v.size(), out.raw() + off);
    off += v.size();
  }
  return parts[0].tape().record("concat_rows", std::move(out), parts, [offsets](Tape& t, NodeId self) {
    const Tensor& g = t.grad(self);
    for (std::size_t k = 0; k < offsets.size(); ++k) {
      NodeId in = t.input(self, k);
      if (!t.requires_grad(in)) continue;
      Tensor& gi = t.grad(in);
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[offsets[k] + i];
    }
  });
}

Var sum_squared_error(const Var& pred, const Tensor& target) {
  const Tensor& p = pred.value();
  if (p.size() != target.size() || target.rank() != 1 ||
      !(p.rank() == 1 || (p.rank() == 2 && p.dim(1) == 1))) {
    mismatch("sum_squared_error", p.shape(), target.shape());
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double r = p[i] - target[i];
    acc += r * r;
  }
  return pred.tape().record("sum_squared_error", Tensor::scalar(acc), {pred}, [target](Tape& t, NodeId self) {
    const double g = t.grad(self)[0];
    NodeId in = t.input(self, 0);
    const Tensor& p = t.value(in);
    Tensor& gi = t.grad(in);
    for (std::size_t i = 0; i < p.size(); ++i) gi[i] += 2.0 * (p[i] - target[i]) * g;
  });
}

Var weighted_squared_distance(const Var& theta, const Tensor& anchor, const Tensor& weights) {
  const Tensor& v = theta.value();
  if (v.shape() != anchor.shape()) mismatch("weighted_squared_distance", v.shape(), anchor.shape());
  if (v.shape() != weights.shape()) mismatch("weighted_squared_distance", v.shape(), weights.shape());
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - anchor[i];
    acc += weights[i] * d * d;
  }
  return theta.tape().record("weighted_squared_distance", Tensor::scalar(acc), {theta},
                             [anchor, weights](Tape& t, NodeId self) {
                               const double g = t.grad(self)[0];
                               NodeId in = t.input(self, 0);
                               const Tensor& v = t.value(in);
                               Tensor& gi = t.grad(in);
                               for (std::size_t i = 0; i < v.size(); ++i) {
                                 gi[i] += 2.0 * weights[i] * (v[i] - anchor[i]) * g;
                               }
                             });
}

Var softmax_cross_entropy(const Var& logits, std::span<const std::size_t> labels) {
  const Tensor& z = logits.value();
  if (z.rank() != 2 || z.dim(0) != labels.size()) {
    throw ShapeError("softmax_cross_entropy: logits " + to_string(z.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::size_t B = z.dim(0), C = z.dim(1);
  Tensor probs(Shape{B, C});
  double loss = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    if (labels[b] >= C) throw ShapeError("softmax_cross_entropy: label out of range");
    const double* row = z.raw() + b * C;
    const double mx = *std::max_element(row, row + C);
    double denom = 0.0;
    for (std::size_t c = 0; c < C; ++c) denom += std::exp(row[c] - mx);
    for (std::size_t c = 0; c < C; ++c) probs.at(b, c) = std::exp(row[c] - mx) / denom;
    loss += -(row[labels[b]] - mx - std::log(denom));
  }
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return logits.tape().record("softmax_cross_entropy", Tensor::scalar(loss), {logits},
                              [probs = std::move(probs), lab = std::move(lab), C](Tape& t, NodeId self) {
                                const double g = t.grad(self)[0];
                                Tensor& gi = t.grad(t.input(self, 0));
                                for (std::size_t b = 0; b < lab.size(); ++b) {
                                  for (std::size_t c = 0; c < C; ++c) {
                                    const double y = c == lab[b] ? 1.0 : 0.0;
                                    gi[b * C + c] += (probs[b * C + c] - y) * g;
                                  }
                                }
                              });
}

}  // namespace foresight::nd::ops
