// Copyright 2026 The SRGDiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "srgdiff/nn/ops.hpp"

#include <cmath>
#include <complex>
#include <limits>

#include <Eigen/Core>

#include "srgdiff/error.hpp"
#include "srgdiff/spectral.hpp"

namespace srgdiff::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<RowMat>;
using CMapR = Eigen::Map<const RowMat>;

inline Eigen::Index ix(std::size_t v) { return static_cast<Eigen::Index>(v); }

void require_same(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
}

void require_rank(const Var& a, std::size_t rank, const char* op) {
  if (a.shape().size() != rank)
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     to_string(a.shape()));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

Var add(Var a, Var b) {
  require_same(a, b, "add");
  Tensor y = a.value() + b.value();
  return a.tape().record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_sink(a)) *ga += g;
    if (Tensor* gb = t.grad_sink(b)) *gb += g;
  });
}

Var sub(Var a, Var b) {
  require_same(a, b, "sub");
  Tensor y = a.value() - b.value();
  return a.tape().record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_sink(a)) *ga += g;
    if (Tensor* gb = t.grad_sink(b))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
  });
}

Var mul(Var a, Var b) {
  require_same(a, b, "mul");
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] * z[i];
  return a.tape().record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
    const Tensor& x = a.value();
    const Tensor& z = b.value();
    if (Tensor* ga = t.grad_sink(a))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * z[i];
    if (Tensor* gb = t.grad_sink(b))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * x[i];
  });
}

Var scale(Var a, double s) {
  Tensor y = a.value() * s;
  return a.tape().record(std::move(y), {a}, [a, s](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_sink(a))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += s * g[i];
  });
}

Var add_scalar(Var a, double s) {
  Tensor y = a.value();
  for (double& v : y.values()) v += s;
  return a.tape().record(std::move(y), {a}, [a](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_sink(a)) *ga += g;
  });
}

Var mul_scalar(Var a, Var s) {
  if (s.value().size() != 1) throw ShapeError("mul_scalar: scalar operand has shape " + to_string(s.shape()));
  const double k = s.value()[0];
  Tensor y = a.value() * k;
  return a.tape().record(std::move(y), {a, s}, [a, s](Tape& t, const Tensor& g) {
    const double k = s.value()[0];
    const Tensor& x = a.value();
    if (Tensor* ga = t.grad_sink(a))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += k * g[i];
    if (Tensor* gs = t.grad_sink(s)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * x[i];
      (*gs)[0] += acc;
    }
  });
}

Var square(Var a) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] * x[i];
  return a.tape().record(std::move(y), {a}, [a](Tape& t, const Tensor& g) {
    const Tensor& x = a.value();
    if (Tensor* ga = t.grad_sink(a))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += 2.0 * x[i] * g[i];
  });
}

Var exp(Var a) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::exp(x[i]);
  return a.tape().record(std::move(y), {a}, [a](Tape& t, const Tensor& g) {
    const Tensor& x = a.value();
    if (Tensor* ga = t.grad_sink(a))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += std::exp(x[i]) * g[i];
  });
}

Var tanh(Var a) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(x[i]);
  return a.tape().record(std::move(y), {a}, [a](Tape& t, const Tensor& g) {
    const Tensor& x = a.value();
    if (Tensor* ga = t.grad_sink(a))
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double th = std::tanh(x[i]);
        (*ga)[i] += (1.0 - th * th) * g[i];
      }
  });
}

Var silu(Var a) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] * sigmoid(x[i]);
  return a.tape().record(std::move(y), {a}, [a](Tape& t, const Tensor& g) {
    const Tensor& x = a.value();
    if (Tensor* ga = t.grad_sink(a))
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = sigmoid(x[i]);
        (*ga)[i] += s * (1.0 + x[i] * (1.0 - s)) * g[i];
      }
  });
}

Var clamp(Var a, double lo, double hi) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::min(hi, std::max(lo, x[i]));
  return a.tape().record(std::move(y), {a}, [a, lo, hi](Tape& t, const Tensor& g) {
    const Tensor& x = a.value();
    if (Tensor* ga = t.grad_sink(a))
      for (std::size_t i = 0; i < g.size(); ++i)
        if (x[i] >= lo && x[i] <= hi) (*ga)[i] += g[i];
  });
}

// ---------------------------------------------------------------------------
// Reductions

Var sum(Var a) {
  Tensor y = Tensor::scalar(a.value().sum());
  return a.tape().record(std::move(y), {a}, [a](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_sink(a))
      for (double& v : ga->values()) v += g[0];
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean of an empty tensor");
  Tensor y = Tensor::scalar(a.value().sum() / n);
  return a.tape().record(std::move(y), {a}, [a, n](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_sink(a))
      for (double& v : ga->values()) v += g[0] / n;
  });
}

Var mean_square(Var a) {
  const Tensor& x = a.value();
  if (x.empty()) throw ShapeError("mean_square of an empty tensor");
  double acc = 0.0;
  for (double v : x.values()) acc += v * v;
  const double n = static_cast<double>(x.size());
  return a.tape().record(Tensor::scalar(acc / n), {a}, [a, n](Tape& t, const Tensor& g) {
    const Tensor& x = a.value();
    if (Tensor* ga = t.grad_sink(a))
      for (std::size_t i = 0; i < x.size(); ++i) (*ga)[i] += 2.0 * x[i] * g[0] / n;
  });
}

Var mean_abs(Var a) {
  const Tensor& x = a.value();
  if (x.empty()) throw ShapeError("mean_abs of an empty tensor");
  double acc = 0.0;
  for (double v : x.values()) acc += std::abs(v);
  const double n = static_cast<double>(x.size());
  return a.tape().record(Tensor::scalar(acc / n), {a}, [a, n](Tape& t, const Tensor& g) {
    const Tensor& x = a.value();
    if (Tensor* ga = t.grad_sink(a))
      for (std::size_t i = 0; i < x.size(); ++i)
        (*ga)[i] += (x[i] > 0 ? 1.0 : x[i] < 0 ? -1.0 : 0.0) * g[0] / n;
  });
}

// ---------------------------------------------------------------------------
// Dense layers

Var linear(Var x, Var w, Var b) {
  require_rank(x, 2, "linear");
  require_rank(w, 2, "linear");
  const std::size_t n = x.shape()[0], in = x.shape()[1], out = w.shape()[1];
  if (w.shape()[0] != in)
    throw ShapeError("linear: input " + to_string(x.shape()) + " vs weight " + to_string(w.shape()));
  if (b.valid() && b.shape() != Shape{out})
    throw ShapeError("linear: bias " + to_string(b.shape()) + " vs weight " + to_string(w.shape()));
  Tensor y({n, out});
  MapR ym(y.data(), ix(n), ix(out));
  ym.noalias() = CMapR(x.value().data(), ix(n), ix(in)) * CMapR(w.value().data(), ix(in), ix(out));
  if (b.valid())
    ym.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.value().data(), ix(out));
  std::vector<Var> parents{x, w};
  if (b.valid()) parents.push_back(b);
  return x.tape().record(std::move(y), parents, [x, w, b, n, in, out](Tape& t, const Tensor& g) {
    CMapR gm(g.data(), ix(n), ix(out));
    if (Tensor* gx = t.grad_sink(x))
      MapR(gx->data(), ix(n), ix(in)).noalias() += gm * CMapR(w.value().data(), ix(in), ix(out)).transpose();
    if (Tensor* gw = t.grad_sink(w))
      MapR(gw->data(), ix(in), ix(out)).noalias() += CMapR(x.value().data(), ix(n), ix(in)).transpose() * gm;
    if (b.valid())
      if (Tensor* gb = t.grad_sink(b))
        Eigen::Map<Eigen::RowVectorXd>(gb->data(), ix(out)) += gm.colwise().sum();
  });
}

namespace {

struct ConvGeom {
  std::size_t batch, cin, len, cout, k, stride, pad, lout;
};

void im2col(const double* x, const ConvGeom& g, RowMat& cols) {
  cols.resize(ix(g.cin * g.k), ix(g.lout));
  for (std::size_t ci = 0; ci < g.cin; ++ci)
    for (std::size_t kk = 0; kk < g.k; ++kk) {
      double* row = cols.data() + (ci * g.k + kk) * g.lout;
      const double* xr = x + ci * g.len;
      for (std::size_t lo = 0; lo < g.lout; ++lo) {
        const long idx = static_cast<long>(lo * g.stride + kk) - static_cast<long>(g.pad);
        row[lo] = (idx >= 0 && idx < static_cast<long>(g.len)) ? xr[idx] : 0.0;
      }
    }
}

void col2im(const RowMat& cols, const ConvGeom& g, double* gx) {
  for (std::size_t ci = 0; ci < g.cin; ++ci)
    for (std::size_t kk = 0; kk < g.k; ++kk) {
      const double* row = cols.data() + (ci * g.k + kk) * g.lout;
      double* gr = gx + ci * g.len;
      for (std::size_t lo = 0; lo < g.lout; ++lo) {
        const long idx = static_cast<long>(lo * g.stride + kk) - static_cast<long>(g.pad);
        if (idx >= 0 && idx < static_cast<long>(g.len)) gr[idx] += row[lo];
      }
    }
}

}  // namespace

Var conv1d(Var x, Var w, Var b, std::size_t stride, std::size_t padding) {
  require_rank(x, 3, "conv1d");
  require_rank(w, 3, "conv1d");
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (ws[1] != xs[1])
    throw ShapeError("conv1d: input " + to_string(xs) + " vs kernels " + to_string(ws));
  if (stride == 0) throw ShapeError("conv1d: stride must be positive");
  if (b.valid() && b.shape() != Shape{ws[0]})
    throw ShapeError("conv1d: bias " + to_string(b.shape()) + " vs kernels " + to_string(ws));
  const long span = static_cast<long>(xs[2] + 2 * padding) - static_cast<long>(ws[2]);
  if (span < 0)
    throw ShapeError("conv1d: output length < 1 for input " + to_string(xs) + " and kernels " + to_string(ws));
  ConvGeom g{xs[0], xs[1], xs[2], ws[0], ws[2], stride, padding, static_cast<std::size_t>(span) / stride + 1};
  const bool pointwise = g.k == 1 && g.stride == 1 && g.pad == 0;

  Tensor y({g.batch, g.cout, g.lout});
  CMapR wm(w.value().data(), ix(g.cout), ix(g.cin * g.k));
  RowMat cols;
  for (std::size_t bi = 0; bi < g.batch; ++bi) {
    MapR yb(y.data() + bi * g.cout * g.lout, ix(g.cout), ix(g.lout));
    const double* xb = x.value().data() + bi * g.cin * g.len;
    if (pointwise) {
      yb.noalias() = wm * CMapR(xb, ix(g.cin), ix(g.len));
    } else {
      im2col(xb, g, cols);
      yb.noalias() = wm * cols;
    }
    if (b.valid()) yb.colwise() += Eigen::Map<const Eigen::VectorXd>(b.value().data(), ix(g.cout));
  }
  std::vector<Var> parents{x, w};
  if (b.valid()) parents.push_back(b);
  return x.tape().record(std::move(y), parents, [x, w, b, g, pointwise](Tape& t, const Tensor& go) {
    Tensor* gx = t.grad_sink(x);
    Tensor* gw = t.grad_sink(w);
    Tensor* gb = b.valid() ? t.grad_sink(b) : nullptr;
    CMapR wm(w.value().data(), ix(g.cout), ix(g.cin * g.k));
    RowMat cols, gcols;
    for (std::size_t bi = 0; bi < g.batch; ++bi) {
      CMapR gob(go.data() + bi * g.cout * g.lout, ix(g.cout), ix(g.lout));
      const double* xb = x.value().data() + bi * g.cin * g.len;
      if (gw) {
        MapR gwm(gw->data(), ix(g.cout), ix(g.cin * g.k));
        if (pointwise) {
          gwm.noalias() += gob * CMapR(xb, ix(g.cin), ix(g.len)).transpose();
        } else {
          im2col(xb, g, cols);
          gwm.noalias() += gob * cols.transpose();
        }
      }
      if (gx) {
        double* gxb = gx->data() + bi * g.cin * g.len;
        if (pointwise) {
          MapR(gxb, ix(g.cin), ix(g.len)).noalias() += wm.transpose() * gob;
        } else {
          gcols.noalias() = wm.transpose() * gob;
          col2im(gcols, g, gxb);
        }
      }
      if (gb) Eigen::Map<Eigen::VectorXd>(gb->data(), ix(g.cout)) += gob.rowwise().sum();
    }
  });
}

Var upsample2(Var x) {
  require_rank(x, 3, "upsample2");
  const std::size_t rows = x.shape()[0] * x.shape()[1], len = x.shape()[2];
  Tensor y({x.shape()[0], x.shape()[1], 2 * len});
  const Tensor& xv = x.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t l = 0; l < len; ++l) y[r * 2 * len + 2 * l] = y[r * 2 * len + 2 * l + 1] = xv[r * len + l];
  return x.tape().record(std::move(y), {x}, [x, rows, len](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_sink(x))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t l = 0; l < len; ++l)
          (*gx)[r * len + l] += g[r * 2 * len + 2 * l] + g[r * 2 * len + 2 * l + 1];
  });
}

Var avg_pool1d(Var x, std::size_t k) {
  require_rank(x, 3, "avg_pool1d");
  const std::size_t len = x.shape()[2];
  if (k == 0 || len % k != 0)
    throw ShapeError("avg_pool1d: length " + std::to_string(len) + " not divisible by " + std::to_string(k));
  if (k == 1) return x;
  const std::size_t rows = x.shape()[0] * x.shape()[1], lo = len / k;
  Tensor y({x.shape()[0], x.shape()[1], lo});
  const Tensor& xv = x.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < lo; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < k; ++i) acc += xv[r * len + j * k + i];
      y[r * lo + j] = acc / static_cast<double>(k);
    }
  return x.tape().record(std::move(y), {x}, [x, rows, len, lo, k](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_sink(x))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < lo; ++j)
          for (std::size_t i = 0; i < k; ++i) (*gx)[r * len + j * k + i] += g[r * lo + j] / static_cast<double>(k);
  });
}

Var mean_time(Var x) {
  require_rank(x, 3, "mean_time");
  const std::size_t rows = x.shape()[0] * x.shape()[1], len = x.shape()[2];
  Tensor y({x.shape()[0], x.shape()[1]});
  const Tensor& xv = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t l = 0; l < len; ++l) acc += xv[r * len + l];
    y[r] = acc / static_cast<double>(len);
  }
  return x.tape().record(std::move(y), {x}, [x, rows, len](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_sink(x))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t l = 0; l < len; ++l) (*gx)[r * len + l] += g[r] / static_cast<double>(len);
  });
}

// ---------------------------------------------------------------------------
// Normalization

Var group_norm(Var x, std::size_t groups, Var gain, Var bias, double eps) {
  require_rank(x, 3, "group_norm");
  const std::size_t batch = x.shape()[0], c = x.shape()[1], len = x.shape()[2];
  if (groups == 0 || c % groups != 0)
    throw ShapeError("group_norm: " + std::to_string(c) + " channels not divisible into " +
                     std::to_string(groups) + " groups");
  if (gain.shape() != Shape{c} || bias.shape() != Shape{c})
    throw ShapeError("group_norm: affine parameters must have shape [" + std::to_string(c) + "]");
  const std::size_t cpg = c / groups, n = cpg * len;
  const Tensor& xv = x.value();
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  Tensor y(xv.shape());
  Tensor xhat(xv.shape());
  std::vector<double> inv_std(batch * groups);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t gi = 0; gi < groups; ++gi) {
      const std::size_t base = (b * c + gi * cpg) * len;
      double m = 0.0;
      for (std::size_t i = 0; i < n; ++i) m += xv[base + i];
      m /= static_cast<double>(n);
      double v = 0.0;
      for (std::size_t i = 0; i < n; ++i) v += (xv[base + i] - m) * (xv[base + i] - m);
      v /= static_cast<double>(n);
      const double is = 1.0 / std::sqrt(v + eps);
      inv_std[b * groups + gi] = is;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ch = gi * cpg + i / len;
        xhat[base + i] = (xv[base + i] - m) * is;
        y[base + i] = gv[ch] * xhat[base + i] + bv[ch];
      }
    }
  return x.tape().record(
      std::move(y), {x, gain, bias},
      [x, gain, bias, batch, c, len, groups, cpg, n, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Tape& t, const Tensor& g) {
        Tensor* gx = t.grad_sink(x);
        Tensor* gg = t.grad_sink(gain);
        Tensor* gbias = t.grad_sink(bias);
        const Tensor& gv = gain.value();
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t gi = 0; gi < groups; ++gi) {
            const std::size_t base = (b * c + gi * cpg) * len;
            double mean_gh = 0.0, mean_ghx = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
              const std::size_t ch = gi * cpg + i / len;
              const double gh = g[base + i] * gv[ch];
              mean_gh += gh;
              mean_ghx += gh * xhat[base + i];
              if (gg) (*gg)[ch] += g[base + i] * xhat[base + i];
              if (gbias) (*gbias)[ch] += g[base + i];
            }
            if (!gx) continue;
            mean_gh /= static_cast<double>(n);
            mean_ghx /= static_cast<double>(n);
            const double is = inv_std[b * groups + gi];
            for (std::size_t i = 0; i < n; ++i) {
              const std::size_t ch = gi * cpg + i / len;
              const double gh = g[base + i] * gv[ch];
              (*gx)[base + i] += is * (gh - mean_gh - xhat[base + i] * mean_ghx);
            }
          }
      });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Shape& s = x.shape();
  if (s.empty() || s.back() == 0) throw ShapeError("layer_norm: empty feature axis");
  const std::size_t d = s.back(), rows = x.value().size() / d;
  if (gain.valid() && gain.shape() != Shape{d}) throw ShapeError("layer_norm: gain shape " + to_string(gain.shape()));
  if (bias.valid() && bias.shape() != Shape{d}) throw ShapeError("layer_norm: bias shape " + to_string(bias.shape()));
  const Tensor& xv = x.value();
  Tensor y(s), xhat(s);
  std::vector<double> inv_std(rows);
  const std::vector<double> gv = gain.valid() ? gain.value().storage() : std::vector<double>(d, 1.0);
  const std::vector<double> bv = bias.valid() ? bias.value().storage() : std::vector<double>(d, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < d; ++i) m += xv[r * d + i];
    m /= static_cast<double>(d);
    for (std::size_t i = 0; i < d; ++i) v += (xv[r * d + i] - m) * (xv[r * d + i] - m);
    v /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(v + eps);
    for (std::size_t i = 0; i < d; ++i) {
      xhat[r * d + i] = (xv[r * d + i] - m) * inv_std[r];
      y[r * d + i] = gv[i] * xhat[r * d + i] + bv[i];
    }
  }
  std::vector<Var> parents{x};
  if (gain.valid()) parents.push_back(gain);
  if (bias.valid()) parents.push_back(bias);
  return x.tape().record(
      std::move(y), parents,
      [x, gain, bias, rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, const Tensor& g) {
        Tensor* gx = t.grad_sink(x);
        Tensor* gg = gain.valid() ? t.grad_sink(gain) : nullptr;
        Tensor* gb = bias.valid() ? t.grad_sink(bias) : nullptr;
        const std::vector<double> gv = gain.valid() ? gain.value().storage() : std::vector<double>(d, 1.0);
        for (std::size_t r = 0; r < rows; ++r) {
          double mean_gh = 0.0, mean_ghx = 0.0;
          for (std::size_t i = 0; i < d; ++i) {
            const double gh = g[r * d + i] * gv[i];
            mean_gh += gh;
            mean_ghx += gh * xhat[r * d + i];
            if (gg) (*gg)[i] += g[r * d + i] * xhat[r * d + i];
            if (gb) (*gb)[i] += g[r * d + i];
          }
          if (!gx) continue;
          mean_gh /= static_cast<double>(d);
          mean_ghx /= static_cast<double>(d);
          for (std::size_t i = 0; i < d; ++i) {
            const double gh = g[r * d + i] * gv[i];
            (*gx)[r * d + i] += inv_std[r] * (gh - mean_gh - xhat[r * d + i] * mean_ghx);
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Broadcasting

Var add_channel_bias(Var x, Var v) {
  require_rank(x, 3, "add_channel_bias");
  const std::size_t batch = x.shape()[0], c = x.shape()[1], len = x.shape()[2];
  if (v.shape() != Shape{batch, c})
    throw ShapeError("add_channel_bias: " + to_string(x.shape()) + " vs " + to_string(v.shape()));
  Tensor y = x.value();
  const Tensor& vv = v.value();
  for (std::size_t r = 0; r < batch * c; ++r)
    for (std::size_t l = 0; l < len; ++l) y[r * len + l] += vv[r];
  return x.tape().record(std::move(y), {x, v}, [x, v, batch, c, len](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_sink(x)) *gx += g;
    if (Tensor* gv = t.grad_sink(v))
      for (std::size_t r = 0; r < batch * c; ++r)
        for (std::size_t l = 0; l < len; ++l) (*gv)[r] += g[r * len + l];
  });
}

Var channel_affine(Var x, Var gscale, Var beta) {
  require_rank(x, 3, "channel_affine");
  const std::size_t batch = x.shape()[0], c = x.shape()[1], len = x.shape()[2];
  if (gscale.shape() != Shape{batch, c} || beta.shape() != Shape{batch, c})
    throw ShapeError("channel_affine: " + to_string(x.shape()) + " vs scale " + to_string(gscale.shape()) +
                     " and bias " + to_string(beta.shape()));
  Tensor y(x.shape());
  const Tensor& xv = x.value();
  const Tensor& gv = gscale.value();
  const Tensor& bv = beta.value();
  for (std::size_t r = 0; r < batch * c; ++r)
    for (std::size_t l = 0; l < len; ++l) y[r * len + l] = gv[r] * xv[r * len + l] + bv[r];
  return x.tape().record(std::move(y), {x, gscale, beta}, [x, gscale, beta, batch, c, len](Tape& t, const Tensor& g) {
    Tensor* gx = t.grad_sink(x);
    Tensor* gg = t.grad_sink(gscale);
    Tensor* gb = t.grad_sink(beta);
    const Tensor& xv = x.value();
    const Tensor& sv = gscale.value();
    for (std::size_t r = 0; r < batch * c; ++r)
      for (std::size_t l = 0; l < len; ++l) {
        const double go = g[r * len + l];
        if (gx) (*gx)[r * len + l] += sv[r] * go;
        if (gg) (*gg)[r] += xv[r * len + l] * go;
        if (gb) (*gb)[r] += go;
      }
  });
}

Var row_scale(Var x, const std::vector<double>& w) {
  const Shape& s = x.shape();
  if (s.empty() || s[0] != w.size())
    throw ShapeError("row_scale: " + to_string(s) + " vs " + std::to_string(w.size()) + " weights");
  const std::size_t row = x.value().size() / s[0];
  Tensor y = x.value();
  for (std::size_t r = 0; r < s[0]; ++r)
    for (std::size_t i = 0; i < row; ++i) y[r * row + i] *= w[r];
  return x.tape().record(std::move(y), {x}, [x, w, row](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_sink(x))
      for (std::size_t r = 0; r < w.size(); ++r)
        for (std::size_t i = 0; i < row; ++i) (*gx)[r * row + i] += w[r] * g[r * row + i];
  });
}

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat of zero operands");
  const Shape& s0 = parts[0].shape();
  if (s0.size() < 2) throw ShapeError("concat needs rank >= 2, got " + to_string(s0));
  const std::size_t outer = s0[0];
  std::size_t inner = 1;
  for (std::size_t i = 2; i < s0.size(); ++i) inner *= s0[i];
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != s0.size() || s[0] != outer || !std::equal(s.begin() + 2, s.end(), s0.begin() + 2))
      throw ShapeError("concat: " + to_string(s) + " incompatible with " + to_string(s0));
    widths.push_back(s[1]);
    total += s[1];
  }
  Shape os = s0;
  os[1] = total;
  Tensor y(os);
  std::size_t off = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const Tensor& v = parts[pi].value();
    const std::size_t blk = widths[pi] * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(v.data() + o * blk, blk, y.data() + o * total * inner + off * inner);
    off += widths[pi];
  }
  return parts[0].tape().record(std::move(y), parts, [parts, widths, outer, inner, total](Tape& t, const Tensor& g) {
    std::size_t off = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
      const std::size_t blk = widths[pi] * inner;
      if (Tensor* gp = t.grad_sink(parts[pi]))
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t i = 0; i < blk; ++i) (*gp)[o * blk + i] += g[o * total * inner + off * inner + i];
      off += widths[pi];
    }
  });
}

Var reshape(Var x, Shape shape) {
  Tensor y = x.value().reshaped(std::move(shape));
  return x.tape().record(std::move(y), {x}, [x](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_sink(x))
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
  });
}

// ---------------------------------------------------------------------------
// Attention

namespace {

using Mat = Eigen::MatrixXd;

Mat softmax_rows(const Mat& s) {
  Mat a(s.rows(), s.cols());
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double m = s.row(r).maxCoeff();
    a.row(r) = (s.row(r).array() - m).exp();
    a.row(r) /= a.row(r).sum();
  }
  return a;
}

// Token-major view (T x d) of batch element b.
Mat tokens_of(const Tensor& x, std::size_t b, bool channels_first, std::size_t d, std::size_t tokens) {
  const double* p = x.data() + b * d * tokens;
  if (channels_first) return CMapR(p, ix(d), ix(tokens)).transpose();
  return CMapR(p, ix(tokens), ix(d));
}

void add_tokens(Tensor& gx, std::size_t b, bool channels_first, std::size_t d, std::size_t tokens, const Mat& g) {
  double* p = gx.data() + b * d * tokens;
  if (channels_first) MapR(p, ix(d), ix(tokens)) += g.transpose();
  else MapR(p, ix(tokens), ix(d)) += g;
}

}  // namespace

Tensor attention_weights(const Tensor& tokens, const Tensor& wq, const Tensor& wk) {
  if (tokens.rank() != 2) throw ShapeError("attention_weights expects tokens x d");
  const std::size_t n = tokens.dim(0), d = tokens.dim(1);
  Mat x = CMapR(tokens.data(), ix(n), ix(d));
  Mat q = x * CMapR(wq.data(), ix(d), ix(d));
  Mat k = x * CMapR(wk.data(), ix(d), ix(d));
  Mat a = softmax_rows(q * k.transpose() / std::sqrt(static_cast<double>(d)));
  Tensor out({n, n});
  MapR(out.data(), ix(n), ix(n)) = a;
  return out;
}

Var self_attention(Var x, Var wq, Var wk, Var wv, Var wo) {
  const Shape& s = x.shape();
  if (s.size() != 2 && s.size() != 3) throw ShapeError("self_attention: expected rank 2 or 3, got " + to_string(s));
  const bool channels_first = s.size() == 3;
  const std::size_t batch = channels_first ? s[0] : 1;
  const std::size_t d = channels_first ? s[1] : s[1];
  const std::size_t tokens = channels_first ? s[2] : s[0];
  for (const Var* w : {&wq, &wk, &wv, &wo})
    if (w->shape() != Shape{d, d})
      throw ShapeError("self_attention: input " + to_string(s) + " vs weight " + to_string(w->shape()));
  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  auto W = [](const Var& v, std::size_t d) { return Mat(CMapR(v.value().data(), ix(d), ix(d))); };
  const Mat Wq = W(wq, d), Wk = W(wk, d), Wv = W(wv, d), Wo = W(wo, d);

  Tensor y(s);
  for (std::size_t b = 0; b < batch; ++b) {
    const Mat X = tokens_of(x.value(), b, channels_first, d, tokens);
    const Mat A = softmax_rows((X * Wq) * (X * Wk).transpose() * inv);
    const Mat Y = A * (X * Wv) * Wo;
    add_tokens(y, b, channels_first, d, tokens, Y);
  }
  return x.tape().record(
      std::move(y), {x, wq, wk, wv, wo},
      [x, wq, wk, wv, wo, batch, channels_first, d, tokens, inv](Tape& t, const Tensor& g) {
        auto W = [d](const Var& v) { return Mat(CMapR(v.value().data(), ix(d), ix(d))); };
        const Mat Wq = W(wq), Wk = W(wk), Wv = W(wv), Wo = W(wo);
        Tensor* gx = t.grad_sink(x);
        Tensor* gq = t.grad_sink(wq);
        Tensor* gk = t.grad_sink(wk);
        Tensor* gv = t.grad_sink(wv);
        Tensor* go = t.grad_sink(wo);
        for (std::size_t b = 0; b < batch; ++b) {
          const Mat X = tokens_of(x.value(), b, channels_first, d, tokens);
          const Mat Q = X * Wq, K = X * Wk, V = X * Wv;
          const Mat A = softmax_rows(Q * K.transpose() * inv);
          const Mat O = A * V;
          const Mat gY = tokens_of(g, b, channels_first, d, tokens);
          if (go) MapR(go->data(), ix(d), ix(d)) += O.transpose() * gY;
          const Mat gO = gY * Wo.transpose();
          const Mat gA = gO * V.transpose();
          const Mat gV = A.transpose() * gO;
          Mat gS = A.cwiseProduct(gA);
          const Eigen::VectorXd rs = gS.rowwise().sum();
          gS = (gS - A.cwiseProduct(rs.replicate(1, A.cols()))) * inv;
          const Mat gQ = gS * K;
          const Mat gK = gS.transpose() * Q;
          if (gq) MapR(gq->data(), ix(d), ix(d)) += X.transpose() * gQ;
          if (gk) MapR(gk->data(), ix(d), ix(d)) += X.transpose() * gK;
          if (gv) MapR(gv->data(), ix(d), ix(d)) += X.transpose() * gV;
          if (gx) add_tokens(*gx, b, channels_first, d, tokens, gQ * Wq.transpose() + gK * Wk.transpose() + gV * Wv.transpose());
        }
      });
}

// ---------------------------------------------------------------------------
// Spectral

Var stft_magnitude(Var x, std::size_t win_len, std::size_t fft_len, std::size_t hop) {
  require_rank(x, 3, "stft_magnitude");
  if (!spectral::is_power_of_two(fft_len) || win_len == 0 || win_len > fft_len || hop == 0)
    throw ConfigError("stft_magnitude: invalid window " + std::to_string(win_len) + "/" + std::to_string(fft_len));
  const std::size_t rows = x.shape()[0] * x.shape()[1], len = x.shape()[2];
  if (len < win_len) throw ShapeError("stft_magnitude: signal shorter than the window");
  const std::size_t frames = (len - win_len) / hop + 1, bins = fft_len / 2 + 1;
  const auto win = spectral::hann_window(win_len);
  Tensor y({x.shape()[0], x.shape()[1], frames, bins});
  std::vector<spectral::Complex> buf(fft_len);
  const Tensor& xv = x.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t f = 0; f < frames; ++f) {
      std::fill(buf.begin(), buf.end(), spectral::Complex{});
      for (std::size_t j = 0; j < win_len; ++j) buf[j] = win[j] * xv[r * len + f * hop + j];
      spectral::fft_inplace(buf);
      for (std::size_t k = 0; k < bins; ++k) y[(r * frames + f) * bins + k] = std::abs(buf[k]);
    }
  return x.tape().record(std::move(y), {x}, [x, rows, len, frames, bins, win, win_len, fft_len, hop](Tape& t, const Tensor& g) {
    Tensor* gx = t.grad_sink(x);
    if (!gx) return;
    std::vector<spectral::Complex> buf(fft_len);
    const Tensor& xv = x.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t f = 0; f < frames; ++f) {
        std::fill(buf.begin(), buf.end(), spectral::Complex{});
        for (std::size_t j = 0; j < win_len; ++j) buf[j] = win[j] * xv[r * len + f * hop + j];
        spectral::fft_inplace(buf);
        // d|X_k|/dx_j = w_j Re(X_k e^{+i 2 pi j k / n}) / |X_k|
        for (std::size_t k = 0; k < fft_len; ++k) {
          const double mag = std::abs(buf[k]);
          buf[k] = (k < bins && mag > 0) ? buf[k] * (g[(r * frames + f) * bins + k] / mag) : spectral::Complex{};
        }
        spectral::fft_inplace(buf, true);
        for (std::size_t j = 0; j < win_len; ++j) (*gx)[r * len + f * hop + j] += win[j] * buf[j].real();
      }
  });
}

Var softmax_cross_entropy(Var logits, const std::vector<int>& labels) {
  require_rank(logits, 2, "softmax_cross_entropy");
  const std::size_t n = logits.shape()[0], k = logits.shape()[1];
  if (labels.size() != n) throw ShapeError("softmax_cross_entropy: label count does not match batch");
  Tensor prob({n, k});
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) throw RangeError("class label out of range");
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) m = std::max(m, logits.value().at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(logits.value().at(i, j) - m);
    for (std::size_t j = 0; j < k; ++j) prob.at(i, j) = std::exp(logits.value().at(i, j) - m) / z;
    loss -= logits.value().at(i, static_cast<std::size_t>(labels[i])) - m - std::log(z);
  }
  loss /= static_cast<double>(n);
  return logits.tape().record(Tensor::scalar(loss), {logits}, [logits, labels, prob = std::move(prob), n, k](Tape& t, const Tensor& g) {
    if (Tensor* gl = t.grad_sink(logits))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j)
          gl->at(i, j) += g[0] * (prob.at(i, j) - (static_cast<int>(j) == labels[i] ? 1.0 : 0.0)) / static_cast<double>(n);
  });
}

}  // namespace srgdiff::nn
