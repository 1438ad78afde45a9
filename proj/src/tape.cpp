#include "graphfit/ad/tape.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>

namespace graphfit::ad {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

// Leading-axis broadcast: returns the output shape, or throws. The smaller
// operand's shape must be a suffix of the larger one's.
Shape broadcast_shape(const char* op, const Shape& a, const Shape& b) {
  const Shape& big = a.size() >= b.size() ? a : b;
  const Shape& small = a.size() >= b.size() ? b : a;
  const std::size_t off = big.size() - small.size();
  for (std::size_t i = 0; i < small.size(); ++i)
    if (small[i] != big[off + i])
      throw ShapeError(std::string(op) + ": shapes " + shape_string(a) +
                       " and " + shape_string(b) + " do not broadcast");
  return big;
}

struct AxisSplit {
  std::int64_t outer, n, inner;
};

AxisSplit split_axis(const Shape& shape, int axis, const char* op) {
  require(axis >= 0 && axis < static_cast<int>(shape.size()),
          std::string(op) + ": axis " + std::to_string(axis) +
              " out of range for shape " + shape_string(shape));
  AxisSplit s{1, shape[static_cast<std::size_t>(axis)], 1};
  for (int i = 0; i < axis; ++i) s.outer *= shape[static_cast<std::size_t>(i)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i)
    s.inner *= shape[i];
  return s;
}

Shape drop_axis(const Shape& shape, int axis) {
  Shape out;
  for (int i = 0; i < static_cast<int>(shape.size()); ++i)
    if (i != axis) out.push_back(shape[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace

Tape::Id Tape::push(const char* op, std::vector<Id> inputs, Tensor value,
                    std::function<void(Tape&, const Tensor&)> backward,
                    Parameter* bound) {
  if (!value.all_finite())
    throw Error(std::string("tape op '") + op + "' produced non-finite values");
  Node node;
  node.op = op;
  node.inputs = std::move(inputs);
  node.value = std::move(value);
  node.backward = std::move(backward);
  node.bound = bound;
  nodes_.push_back(std::move(node));
  return static_cast<Id>(nodes_.size()) - 1;
}

Tensor& Tape::grad_buf(Id id) {
  Node& node = nodes_[static_cast<std::size_t>(id)];
  if (!node.grad_live) {
    node.grad = Tensor::zeros(node.value.shape());
    node.grad_live = true;
  }
  return node.grad;
}

void Tape::add_grad(Id id, const Tensor& g) {
  Tensor& buf = grad_buf(id);
  require(buf.same_shape(g),
          "add_grad: gradient shape " + shape_string(g.shape()) +
              " does not match node shape " + shape_string(buf.shape()));
  for (std::int64_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

void Tape::backward(Id loss) {
  require(loss >= 0 && loss < static_cast<Id>(nodes_.size()),
          "backward: invalid node id");
  if (nodes_[static_cast<std::size_t>(loss)].value.size() != 1)
    throw ShapeError("backward: loss must be a scalar, got shape " +
                     shape_string(nodes_[static_cast<std::size_t>(loss)].value.shape()));
  for (Node& n : nodes_) n.grad_live = false;
  grad_buf(loss)[0] = 1.0;
  for (Id id = loss; id >= 0; --id) {
    Node& node = nodes_[static_cast<std::size_t>(id)];
    if (!node.grad_live || !node.backward) continue;
    node.backward(*this, node.grad);
  }
}

Tape::Id Tape::constant(Tensor value) {
  return push("constant", {}, std::move(value), nullptr);
}

Tape::Id Tape::param(Parameter& p) {
  return push(
      "param", {}, p.value,
      [&p](Tape&, const Tensor& g) {
        for (std::int64_t i = 0; i < g.size(); ++i) p.grad[i] += g[i];
      },
      &p);
}

// ---------------------------------------------------------------------------
// elementwise binaries (leading-axis broadcast)

Tape::Id Tape::add(Id a, Id b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  Tensor out(broadcast_shape("add", ta.shape(), tb.shape()));
  const std::int64_t na = ta.size(), nb = tb.size();
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = ta[i % na] + tb[i % nb];
  return push("add", {a, b}, std::move(out),
              [a, b, na, nb](Tape& t, const Tensor& g) {
                Tensor& ga = t.grad_buf(a);
                Tensor& gb = t.grad_buf(b);
                for (std::int64_t i = 0; i < g.size(); ++i) {
                  ga[i % na] += g[i];
                  gb[i % nb] += g[i];
                }
              });
}

Tape::Id Tape::sub(Id a, Id b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  Tensor out(broadcast_shape("sub", ta.shape(), tb.shape()));
  const std::int64_t na = ta.size(), nb = tb.size();
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = ta[i % na] - tb[i % nb];
  return push("sub", {a, b}, std::move(out),
              [a, b, na, nb](Tape& t, const Tensor& g) {
                Tensor& ga = t.grad_buf(a);
                Tensor& gb = t.grad_buf(b);
                for (std::int64_t i = 0; i < g.size(); ++i) {
                  ga[i % na] += g[i];
                  gb[i % nb] -= g[i];
                }
              });
}

Tape::Id Tape::mul(Id a, Id b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  Tensor out(broadcast_shape("mul", ta.shape(), tb.shape()));
  const std::int64_t na = ta.size(), nb = tb.size();
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = ta[i % na] * tb[i % nb];
  return push("mul", {a, b}, std::move(out),
              [a, b, na, nb](Tape& t, const Tensor& g) {
                const Tensor& ta = t.value(a);
                const Tensor& tb = t.value(b);
                Tensor& ga = t.grad_buf(a);
                Tensor& gb = t.grad_buf(b);
                for (std::int64_t i = 0; i < g.size(); ++i) {
                  ga[i % na] += g[i] * tb[i % nb];
                  gb[i % nb] += g[i] * ta[i % na];
                }
              });
}

Tape::Id Tape::div(Id a, Id b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  Tensor out(broadcast_shape("div", ta.shape(), tb.shape()));
  const std::int64_t na = ta.size(), nb = tb.size();
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = ta[i % na] / tb[i % nb];
  return push("div", {a, b}, std::move(out),
              [a, b, na, nb](Tape& t, const Tensor& g) {
                const Tensor& ta = t.value(a);
                const Tensor& tb = t.value(b);
                Tensor& ga = t.grad_buf(a);
                Tensor& gb = t.grad_buf(b);
                for (std::int64_t i = 0; i < g.size(); ++i) {
                  const double inv = 1.0 / tb[i % nb];
                  ga[i % na] += g[i] * inv;
                  gb[i % nb] -= g[i] * ta[i % na] * inv * inv;
                }
              });
}

Tape::Id Tape::scale(Id a, double c) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = ta[i] * c;
  return push("scale", {a}, std::move(out), [a, c](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buf(a);
    for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
  });
}

Tape::Id Tape::add_scalar(Id a, double c) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = ta[i] + c;
  return push("add_scalar", {a}, std::move(out),
              [a](Tape& t, const Tensor& g) { t.add_grad(a, g); });
}

// ---------------------------------------------------------------------------
// unary

Tape::Id Tape::sigmoid(Id a) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < out.size(); ++i)
    out[i] = 1.0 / (1.0 + std::exp(-ta[i]));
  const Id self = static_cast<Id>(nodes_.size());
  return push("sigmoid", {a}, std::move(out),
              [a, self](Tape& t, const Tensor& g) {
                const Tensor& y = t.value(self);
                Tensor& ga = t.grad_buf(a);
                for (std::int64_t i = 0; i < g.size(); ++i)
                  ga[i] += g[i] * y[i] * (1.0 - y[i]);
              });
}

Tape::Id Tape::tanh(Id a) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::tanh(ta[i]);
  const Id self = static_cast<Id>(nodes_.size());
  return push("tanh", {a}, std::move(out),
              [a, self](Tape& t, const Tensor& g) {
                const Tensor& y = t.value(self);
                Tensor& ga = t.grad_buf(a);
                for (std::int64_t i = 0; i < g.size(); ++i)
                  ga[i] += g[i] * (1.0 - y[i] * y[i]);
              });
}

Tape::Id Tape::log(Id a) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::log(ta[i]);
  return push("log", {a}, std::move(out), [a](Tape& t, const Tensor& g) {
    const Tensor& x = t.value(a);
    Tensor& ga = t.grad_buf(a);
    for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] / x[i];
  });
}

Tape::Id Tape::sqrt(Id a) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(ta[i]);
  const Id self = static_cast<Id>(nodes_.size());
  return push("sqrt", {a}, std::move(out),
              [a, self](Tape& t, const Tensor& g) {
                const Tensor& y = t.value(self);
                Tensor& ga = t.grad_buf(a);
                for (std::int64_t i = 0; i < g.size(); ++i)
                  if (y[i] > 0.0) ga[i] += g[i] * 0.5 / y[i];
              });
}

Tape::Id Tape::leaky_relu(Id a, double slope) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < out.size(); ++i)
    out[i] = ta[i] >= 0.0 ? ta[i] : slope * ta[i];
  return push("leaky_relu", {a}, std::move(out),
              [a, slope](Tape& t, const Tensor& g) {
                const Tensor& x = t.value(a);
                Tensor& ga = t.grad_buf(a);
                for (std::int64_t i = 0; i < g.size(); ++i)
                  ga[i] += g[i] * (x[i] >= 0.0 ? 1.0 : slope);
              });
}

Tape::Id Tape::clamp_min(Id a, double floor) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::max(ta[i], floor);
  return push("clamp_min", {a}, std::move(out),
              [a, floor](Tape& t, const Tensor& g) {
                const Tensor& x = t.value(a);
                Tensor& ga = t.grad_buf(a);
                for (std::int64_t i = 0; i < g.size(); ++i)
                  if (x[i] >= floor) ga[i] += g[i];
              });
}

// ---------------------------------------------------------------------------
// structure

Tape::Id Tape::matmul(Id a, Id b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.rank() == 2 && tb.rank() == 2 && ta.dim(1) == tb.dim(0),
          "matmul: incompatible shapes " + shape_string(ta.shape()) + " x " +
              shape_string(tb.shape()));
  const int m = ta.dim(0), k = ta.dim(1), n = tb.dim(1);
  Tensor out({m, n});
  out.mat(m, n).noalias() = ta.mat(m, k) * tb.mat(k, n);
  return push("matmul", {a, b}, std::move(out),
              [a, b, m, k, n](Tape& t, const Tensor& g) {
                const Tensor& ta = t.value(a);
                const Tensor& tb = t.value(b);
                t.grad_buf(a).mat(m, k).noalias() +=
                    g.mat(m, n) * tb.mat(k, n).transpose();
                t.grad_buf(b).mat(k, n).noalias() +=
                    ta.mat(m, k).transpose() * g.mat(m, n);
              });
}

Tape::Id Tape::transpose(Id a) {
  const Tensor& ta = value(a);
  require(ta.rank() == 2, "transpose: needs rank 2, got " + shape_string(ta.shape()));
  const int m = ta.dim(0), n = ta.dim(1);
  Tensor out({n, m});
  out.mat(n, m) = ta.mat(m, n).transpose();
  return push("transpose", {a}, std::move(out),
              [a, m, n](Tape& t, const Tensor& g) {
                t.grad_buf(a).mat(m, n) += g.mat(n, m).transpose();
              });
}

Tape::Id Tape::reshape(Id a, Shape shape) {
  const Tensor& ta = value(a);
  require(shape_size(shape) == ta.size(),
          "reshape: size mismatch " + shape_string(ta.shape()) + " -> " +
              shape_string(shape));
  Tensor out(shape);
  std::copy(ta.data(), ta.data() + ta.size(), out.data());
  return push("reshape", {a}, std::move(out), [a](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buf(a);
    for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Tape::Id Tape::concat(const std::vector<Id>& parts, int axis) {
  require(!parts.empty(), "concat: no inputs");
  const Shape& first = value(parts[0]).shape();
  Shape out_shape = first;
  require(axis >= 0 && axis < static_cast<int>(first.size()),
          "concat: axis out of range");
  int total = 0;
  for (Id p : parts) {
    const Shape& s = value(p).shape();
    require(s.size() == first.size(), "concat: rank mismatch " +
                                          shape_string(first) + " vs " + shape_string(s));
    for (std::size_t i = 0; i < s.size(); ++i)
      if (static_cast<int>(i) != axis)
        require(s[i] == first[i], "concat: shapes " + shape_string(first) +
                                      " and " + shape_string(s) + " differ off-axis");
    total += s[static_cast<std::size_t>(axis)];
  }
  out_shape[static_cast<std::size_t>(axis)] = total;

  const AxisSplit os = split_axis(out_shape, axis, "concat");
  Tensor out(out_shape);
  std::int64_t offset = 0;  // running offset along the axis
  for (Id p : parts) {
    const Tensor& tp = value(p);
    const std::int64_t len = tp.shape()[static_cast<std::size_t>(axis)];
    for (std::int64_t o = 0; o < os.outer; ++o)
      for (std::int64_t j = 0; j < len; ++j)
        for (std::int64_t in = 0; in < os.inner; ++in)
          out[(o * os.n + offset + j) * os.inner + in] =
              tp[(o * len + j) * os.inner + in];
    offset += len;
  }
  std::vector<Id> inputs = parts;
  return push("concat", std::move(inputs), std::move(out),
              [parts, os, axis](Tape& t, const Tensor& g) {
                std::int64_t offset = 0;
                for (Id p : parts) {
                  Tensor& gp = t.grad_buf(p);
                  const std::int64_t len =
                      t.value(p).shape()[static_cast<std::size_t>(axis)];
                  for (std::int64_t o = 0; o < os.outer; ++o)
                    for (std::int64_t j = 0; j < len; ++j)
                      for (std::int64_t in = 0; in < os.inner; ++in)
                        gp[(o * len + j) * os.inner + in] +=
                            g[(o * os.n + offset + j) * os.inner + in];
                  offset += len;
                }
              });
}

Tape::Id Tape::slice(Id a, int axis, int start, int len) {
  const Tensor& ta = value(a);
  const AxisSplit s = split_axis(ta.shape(), axis, "slice");
  require(start >= 0 && len >= 1 && start + len <= s.n,
          "slice: range [" + std::to_string(start) + "," +
              std::to_string(start + len) + ") out of bounds for axis of " +
              std::to_string(s.n));
  Shape out_shape = ta.shape();
  out_shape[static_cast<std::size_t>(axis)] = len;
  Tensor out(out_shape);
  for (std::int64_t o = 0; o < s.outer; ++o)
    for (std::int64_t j = 0; j < len; ++j)
      for (std::int64_t in = 0; in < s.inner; ++in)
        out[(o * len + j) * s.inner + in] =
            ta[(o * s.n + start + j) * s.inner + in];
  return push("slice", {a}, std::move(out),
              [a, s, start, len](Tape& t, const Tensor& g) {
                Tensor& ga = t.grad_buf(a);
                for (std::int64_t o = 0; o < s.outer; ++o)
                  for (std::int64_t j = 0; j < len; ++j)
                    for (std::int64_t in = 0; in < s.inner; ++in)
                      ga[(o * s.n + start + j) * s.inner + in] +=
                          g[(o * len + j) * s.inner + in];
              });
}

Tape::Id Tape::gather_rows(Id a, std::vector<int> indices) {
  const Tensor& ta = value(a);
  require(ta.rank() >= 1, "gather_rows: input must have rank >= 1");
  const std::int64_t rows = ta.dim(0);
  const std::int64_t stride = ta.size() / rows;
  for (int idx : indices)
    require(idx >= 0 && idx < rows,
            "gather_rows: index " + std::to_string(idx) + " out of range [0," +
                std::to_string(rows) + ")");
  Shape out_shape = ta.shape();
  out_shape[0] = static_cast<int>(indices.size());
  Tensor out(out_shape);
  for (std::size_t r = 0; r < indices.size(); ++r)
    std::copy(ta.data() + indices[r] * stride, ta.data() + (indices[r] + 1) * stride,
              out.data() + static_cast<std::int64_t>(r) * stride);
  return push("gather_rows", {a}, std::move(out),
              [a, indices = std::move(indices), stride](Tape& t, const Tensor& g) {
                Tensor& ga = t.grad_buf(a);
                for (std::size_t r = 0; r < indices.size(); ++r) {
                  const std::int64_t src = static_cast<std::int64_t>(r) * stride;
                  const std::int64_t dst = indices[r] * stride;
                  for (std::int64_t i = 0; i < stride; ++i) ga[dst + i] += g[src + i];
                }
              });
}

Tape::Id Tape::scale_rows(Id a, Id s) {
  const Tensor& ta = value(a);
  const Tensor& ts = value(s);
  require(ta.rank() >= 1 && ts.rank() == 1 && ta.dim(0) == ts.dim(0),
          "scale_rows: shapes " + shape_string(ta.shape()) + " and " +
              shape_string(ts.shape()) + " incompatible");
  const std::int64_t rows = ta.dim(0);
  const std::int64_t stride = ta.size() / rows;
  Tensor out(ta.shape());
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t i = 0; i < stride; ++i)
      out[r * stride + i] = ta[r * stride + i] * ts[r];
  return push("scale_rows", {a, s}, std::move(out),
              [a, s, rows, stride](Tape& t, const Tensor& g) {
                const Tensor& ta = t.value(a);
                const Tensor& ts = t.value(s);
                Tensor& ga = t.grad_buf(a);
                Tensor& gs = t.grad_buf(s);
                for (std::int64_t r = 0; r < rows; ++r) {
                  double acc = 0.0;
                  for (std::int64_t i = 0; i < stride; ++i) {
                    ga[r * stride + i] += g[r * stride + i] * ts[r];
                    acc += g[r * stride + i] * ta[r * stride + i];
                  }
                  gs[r] += acc;
                }
              });
}

Tape::Id Tape::cross_rows(Id a, Id b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.rank() == 2 && ta.dim(1) == 3 && ta.same_shape(tb),
          "cross_rows: need matching (N,3) shapes, got " +
              shape_string(ta.shape()) + " and " + shape_string(tb.shape()));
  const std::int64_t n = ta.dim(0);
  Tensor out(ta.shape());
  auto cross = [](const double* u, const double* v, double* w) {
    w[0] = u[1] * v[2] - u[2] * v[1];
    w[1] = u[2] * v[0] - u[0] * v[2];
    w[2] = u[0] * v[1] - u[1] * v[0];
  };
  for (std::int64_t r = 0; r < n; ++r)
    cross(ta.data() + 3 * r, tb.data() + 3 * r, out.data() + 3 * r);
  return push("cross_rows", {a, b}, std::move(out),
              [a, b, n, cross](Tape& t, const Tensor& g) {
                const Tensor& ta = t.value(a);
                const Tensor& tb = t.value(b);
                Tensor& ga = t.grad_buf(a);
                Tensor& gb = t.grad_buf(b);
                // d<g, a x b> = <b x g, da> + <g x a, db>
                double tmp[3];
                for (std::int64_t r = 0; r < n; ++r) {
                  cross(tb.data() + 3 * r, g.data() + 3 * r, tmp);
                  for (int i = 0; i < 3; ++i) ga[3 * r + i] += tmp[i];
                  cross(g.data() + 3 * r, ta.data() + 3 * r, tmp);
                  for (int i = 0; i < 3; ++i) gb[3 * r + i] += tmp[i];
                }
              });
}

// ---------------------------------------------------------------------------
// reductions

Tape::Id Tape::reduce_max(Id a, int axis) {
  const Tensor& ta = value(a);
  const AxisSplit s = split_axis(ta.shape(), axis, "reduce_max");
  Tensor out(drop_axis(ta.shape(), axis));
  std::vector<std::int64_t> argmax(static_cast<std::size_t>(s.outer * s.inner));
  for (std::int64_t o = 0; o < s.outer; ++o)
    for (std::int64_t in = 0; in < s.inner; ++in) {
      std::int64_t best = 0;
      double best_v = ta[(o * s.n) * s.inner + in];
      for (std::int64_t j = 1; j < s.n; ++j) {
        const double v = ta[(o * s.n + j) * s.inner + in];
        if (v > best_v) {
          best_v = v;
          best = j;
        }
      }
      out[o * s.inner + in] = best_v;
      argmax[static_cast<std::size_t>(o * s.inner + in)] = best;
    }
  return push("reduce_max", {a}, std::move(out),
              [a, s, argmax = std::move(argmax)](Tape& t, const Tensor& g) {
                Tensor& ga = t.grad_buf(a);
                for (std::int64_t o = 0; o < s.outer; ++o)
                  for (std::int64_t in = 0; in < s.inner; ++in) {
                    const std::int64_t j =
                        argmax[static_cast<std::size_t>(o * s.inner + in)];
                    ga[(o * s.n + j) * s.inner + in] += g[o * s.inner + in];
                  }
              });
}

Tape::Id Tape::reduce_sum(Id a, int axis) {
  const Tensor& ta = value(a);
  const AxisSplit s = split_axis(ta.shape(), axis, "reduce_sum");
  Tensor out(drop_axis(ta.shape(), axis));
  for (std::int64_t o = 0; o < s.outer; ++o)
    for (std::int64_t in = 0; in < s.inner; ++in) {
      double acc = 0.0;
      for (std::int64_t j = 0; j < s.n; ++j) acc += ta[(o * s.n + j) * s.inner + in];
      out[o * s.inner + in] = acc;
    }
  return push("reduce_sum", {a}, std::move(out),
              [a, s](Tape& t, const Tensor& g) {
                Tensor& ga = t.grad_buf(a);
                for (std::int64_t o = 0; o < s.outer; ++o)
                  for (std::int64_t in = 0; in < s.inner; ++in)
                    for (std::int64_t j = 0; j < s.n; ++j)
                      ga[(o * s.n + j) * s.inner + in] += g[o * s.inner + in];
              });
}

Tape::Id Tape::reduce_mean(Id a, int axis) {
  const Tensor& ta = value(a);
  const AxisSplit s = split_axis(ta.shape(), axis, "reduce_mean");
  const double inv_n = 1.0 / static_cast<double>(s.n);
  Tensor out(drop_axis(ta.shape(), axis));
  for (std::int64_t o = 0; o < s.outer; ++o)
    for (std::int64_t in = 0; in < s.inner; ++in) {
      double acc = 0.0;
      for (std::int64_t j = 0; j < s.n; ++j) acc += ta[(o * s.n + j) * s.inner + in];
      out[o * s.inner + in] = acc * inv_n;
    }
  return push("reduce_mean", {a}, std::move(out),
              [a, s, inv_n](Tape& t, const Tensor& g) {
                Tensor& ga = t.grad_buf(a);
                for (std::int64_t o = 0; o < s.outer; ++o)
                  for (std::int64_t in = 0; in < s.inner; ++in)
                    for (std::int64_t j = 0; j < s.n; ++j)
                      ga[(o * s.n + j) * s.inner + in] += g[o * s.inner + in] * inv_n;
              });
}

Tape::Id Tape::reduce_sum_all(Id a) {
  const Tensor& ta = value(a);
  double acc = 0.0;
  for (std::int64_t i = 0; i < ta.size(); ++i) acc += ta[i];
  return push("reduce_sum_all", {a}, Tensor::scalar(acc),
              [a](Tape& t, const Tensor& g) {
                Tensor& ga = t.grad_buf(a);
                for (std::int64_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
              });
}

// ---------------------------------------------------------------------------
// batch norm

Tape::Id Tape::batch_norm(Id x, Id gamma, Id beta, BatchNormState& state,
                          bool training) {
  const Tensor& tx = value(x);
  require(tx.rank() == 2, "batch_norm: input must be (N,C), got " +
                              shape_string(tx.shape()));
  const int n = tx.dim(0), c = tx.dim(1);
  require(value(gamma).rank() == 1 && value(gamma).dim(0) == c &&
              value(beta).rank() == 1 && value(beta).dim(0) == c,
          "batch_norm: gamma/beta must be (" + std::to_string(c) + ",)");
  require(state.running_mean.size() == c && state.running_var.size() == c,
          "batch_norm: running stats have wrong width");

  const Tensor& tg = value(gamma);
  const Tensor& tb = value(beta);
  const double eps = state.eps;

  if (!training) {
    // Affine map with frozen statistics.
    Tensor inv_std({c});
    for (int j = 0; j < c; ++j)
      inv_std[j] = 1.0 / std::sqrt(state.running_var[j] + eps);
    Tensor mean = state.running_mean;
    Tensor out({n, c});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < c; ++j)
        out[static_cast<std::int64_t>(i) * c + j] =
            tg[j] * (tx[static_cast<std::int64_t>(i) * c + j] - mean[j]) * inv_std[j] + tb[j];
    return push("batch_norm", {x, gamma, beta}, std::move(out),
                [x, gamma, beta, n, c, mean = std::move(mean),
                 inv_std = std::move(inv_std)](Tape& t, const Tensor& g) {
                  const Tensor& tx = t.value(x);
                  const Tensor& tg = t.value(gamma);
                  Tensor& gx = t.grad_buf(x);
                  Tensor& gg = t.grad_buf(gamma);
                  Tensor& gb = t.grad_buf(beta);
                  for (int i = 0; i < n; ++i)
                    for (int j = 0; j < c; ++j) {
                      const std::int64_t k = static_cast<std::int64_t>(i) * c + j;
                      gx[k] += g[k] * tg[j] * inv_std[j];
                      gg[j] += g[k] * (tx[k] - mean[j]) * inv_std[j];
                      gb[j] += g[k];
                    }
                });
  }

  // Training mode: normalize with this batch's statistics (biased variance)
  // and fold them into the running averages.
  Tensor mean({c}), var({c});
  for (int j = 0; j < c; ++j) {
    double m = 0.0;
    for (int i = 0; i < n; ++i) m += tx[static_cast<std::int64_t>(i) * c + j];
    mean[j] = m / n;
  }
  for (int j = 0; j < c; ++j) {
    double v = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = tx[static_cast<std::int64_t>(i) * c + j] - mean[j];
      v += d * d;
    }
    var[j] = v / n;
  }
  for (int j = 0; j < c; ++j) {
    state.running_mean[j] =
        state.momentum * state.running_mean[j] + (1.0 - state.momentum) * mean[j];
    state.running_var[j] =
        state.momentum * state.running_var[j] + (1.0 - state.momentum) * var[j];
  }

  Tensor inv_std({c});
  for (int j = 0; j < c; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
  Tensor xhat({n, c});
  Tensor out({n, c});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) {
      const std::int64_t k = static_cast<std::int64_t>(i) * c + j;
      xhat[k] = (tx[k] - mean[j]) * inv_std[j];
      out[k] = tg[j] * xhat[k] + tb[j];
    }
  return push(
      "batch_norm", {x, gamma, beta}, std::move(out),
      [x, gamma, beta, n, c, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Tape& t, const Tensor& g) {
        const Tensor& tg = t.value(gamma);
        Tensor& gx = t.grad_buf(x);
        Tensor& gg = t.grad_buf(gamma);
        Tensor& gb = t.grad_buf(beta);
        // Per channel: dx = inv_std/N * (N*dxhat - sum(dxhat) - xhat*sum(dxhat*xhat))
        for (int j = 0; j < c; ++j) {
          double sum_dxh = 0.0, sum_dxh_xh = 0.0;
          for (int i = 0; i < n; ++i) {
            const std::int64_t k = static_cast<std::int64_t>(i) * c + j;
            const double dxh = g[k] * tg[j];
            sum_dxh += dxh;
            sum_dxh_xh += dxh * xhat[k];
            gg[j] += g[k] * xhat[k];
            gb[j] += g[k];
          }
          for (int i = 0; i < n; ++i) {
            const std::int64_t k = static_cast<std::int64_t>(i) * c + j;
            const double dxh = g[k] * tg[j];
            gx[k] += inv_std[j] * (dxh - (sum_dxh + xhat[k] * sum_dxh_xh) / n);
          }
        }
      });
}

// ---------------------------------------------------------------------------
// SPD solve

Tape::Id Tape::solve_spd(Id a, Id b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require(ta.rank() == 2 && ta.dim(0) == ta.dim(1),
          "solve_spd: matrix must be square, got " + shape_string(ta.shape()));
  const int k = ta.dim(0);
  require(tb.rank() == 1 && tb.dim(0) == k,
          "solve_spd: rhs shape " + shape_string(tb.shape()) +
              " does not match matrix " + shape_string(ta.shape()));

  double max_abs = 1.0, max_asym = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      max_abs = std::max(max_abs, std::abs(ta[static_cast<std::int64_t>(i) * k + j]));
      max_asym = std::max(max_asym,
                          std::abs(ta[static_cast<std::int64_t>(i) * k + j] -
                                   ta[static_cast<std::int64_t>(j) * k + i]));
    }
  if (max_asym > 1e-8 * max_abs)
    throw ConditioningError("solve_spd: matrix is not symmetric");

  Eigen::MatrixXd mat = ta.mat(k, k);
  Eigen::LLT<Eigen::MatrixXd> llt(mat);
  if (llt.info() != Eigen::Success)
    throw ConditioningError("solve_spd: matrix is not positive-definite");
  Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(tb.data(), k);
  Eigen::VectorXd x = llt.solve(rhs);

  Tensor out({k});
  Eigen::Map<Eigen::VectorXd>(out.data(), k) = x;
  const Id self = static_cast<Id>(nodes_.size());
  return push("solve_spd", {a, b}, std::move(out),
              [a, b, k, self](Tape& t, const Tensor& g) {
                const Tensor& ta = t.value(a);
                const Tensor& tx = t.value(self);
                Eigen::MatrixXd mat = ta.mat(k, k);
                Eigen::LLT<Eigen::MatrixXd> llt(mat);
                Eigen::VectorXd gv = Eigen::Map<const Eigen::VectorXd>(g.data(), k);
                Eigen::VectorXd s = llt.solve(gv);
                Eigen::Map<const Eigen::VectorXd> x(tx.data(), k);
                Tensor& gb = t.grad_buf(b);
                for (int i = 0; i < k; ++i) gb[i] += s[i];
                Tensor& ga = t.grad_buf(a);
                for (int i = 0; i < k; ++i)
                  for (int j = 0; j < k; ++j)
                    ga[static_cast<std::int64_t>(i) * k + j] -=
                        0.5 * (s[i] * x[j] + x[i] * s[j]);
              });
}

Tape::Id Tape::custom(const char* tag, std::vector<Id> inputs, Tensor value,
                      std::function<void(Tape&, const Tensor&)> backward) {
  return push(tag, std::move(inputs), std::move(value), std::move(backward));
}

}  // namespace graphfit::ad
