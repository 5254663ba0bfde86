#include "mhaff/nn/ops.hpp"

#include <algorithm>
#include <cmath>

namespace mhaff::nn {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kShapeMismatch, what);
}

template <typename T>
Graph<T>& graph_of(const Tensor<T>& t) {
  require(t.valid(), "operation on an empty tensor handle");
  return t.graph();
}

template <typename T>
void same_graph(const Tensor<T>& a, const Tensor<T>& b) {
  require(&a.graph() == &b.graph(), "tensors belong to different graphs");
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  auto& g = graph_of(a);
  same_graph(a, b);
  require(a.shape() == b.shape(), "add: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  const auto av = a.value(), bv = b.value();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(a.shape(), std::move(out), {a, b}, [ia, ib](Graph<T>& g, std::size_t self) {
    const auto& dy = g.node(self).grad;
    for (std::size_t p : {ia, ib}) {
      auto& d = g.grad(p);
      if (d.empty()) continue;
      for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  auto& g = graph_of(a);
  same_graph(a, b);
  require(a.shape() == b.shape(), "mul: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  const auto av = a.value(), bv = b.value();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(a.shape(), std::move(out), {a, b}, [ia, ib](Graph<T>& g, std::size_t self) {
    const auto& dy = g.node(self).grad;
    const auto& av = g.node(ia).value;
    const auto& bv = g.node(ib).value;
    if (auto& da = g.grad(ia); !da.empty())
      for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * bv[i];
    if (auto& db = g.grad(ib); !db.empty())
      for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * av[i];
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  auto& g = graph_of(a);
  const auto av = a.value();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  const std::size_t ia = a.id();
  return g.record(a.shape(), std::move(out), {a}, [ia, factor](Graph<T>& g, std::size_t self) {
    const auto& dy = g.node(self).grad;
    auto& d = g.grad(ia);
    for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i] * factor;
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  auto& g = graph_of(a);
  T total = T(0);
  for (T v : a.value()) total += v;
  const std::size_t ia = a.id();
  return g.record(Shape{}, {total}, {a}, [ia](Graph<T>& g, std::size_t self) {
    const T dy = g.node(self).grad[0];
    for (auto& d : g.grad(ia)) d += dy;
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  auto& g = graph_of(a);
  require(numel(shape) == a.value().size(), "reshape " + shape_string(a.shape()) + " to " + shape_string(shape));
  std::vector<T> out(a.value().begin(), a.value().end());
  const std::size_t ia = a.id();
  return g.record(std::move(shape), std::move(out), {a}, [ia](Graph<T>& g, std::size_t self) {
    const auto& dy = g.node(self).grad;
    auto& d = g.grad(ia);
    for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i];
  });
}

template <typename T>
Tensor<T> pick(const Tensor<T>& a, std::size_t index) {
  auto& g = graph_of(a);
  require(index < a.value().size(), "pick index out of range");
  const std::size_t ia = a.id();
  return g.record(Shape{}, {a.value()[index]}, {a}, [ia, index](Graph<T>& g, std::size_t self) {
    g.grad(ia)[index] += g.node(self).grad[0];
  });
}

template <typename T>
Tensor<T> row(const Tensor<T>& a, std::size_t index) {
  auto& g = graph_of(a);
  require(a.shape().size() == 2 && index < a.shape()[0], "row: bad index or rank");
  const std::size_t d = a.shape()[1];
  const auto av = a.value();
  std::vector<T> out(av.begin() + index * d, av.begin() + (index + 1) * d);
  const std::size_t ia = a.id();
  return g.record(Shape{d}, std::move(out), {a}, [ia, index, d](Graph<T>& g, std::size_t self) {
    const auto& dy = g.node(self).grad;
    auto& da = g.grad(ia);
    for (std::size_t i = 0; i < d; ++i) da[index * d + i] += dy[i];
  });
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  require(!parts.empty(), "concat_rows of nothing");
  auto& g = graph_of(parts.front());
  const std::size_t width = parts.front().shape().back();
  std::size_t rows = 0;
  std::vector<T> out;
  std::vector<std::size_t> ids, offsets;
  for (const auto& p : parts) {
    same_graph(parts.front(), p);
    const auto& s = p.shape();
    require((s.size() == 1 || s.size() == 2) && s.back() == width, "concat_rows: incompatible " + shape_string(s));
    ids.push_back(p.id());
    offsets.push_back(out.size());
    out.insert(out.end(), p.value().begin(), p.value().end());
    rows += s.size() == 1 ? 1 : s[0];
  }
  return g.record(Shape{rows, width}, std::move(out), parts, [ids, offsets](Graph<T>& g, std::size_t self) {
    const auto& dy = g.node(self).grad;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      auto& d = g.grad(ids[k]);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[offsets[k] + i];
    }
  });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  auto& g = graph_of(a);
  same_graph(a, b);
  require(a.shape().size() == 2 && b.shape().size() == 2 && a.shape()[1] == b.shape()[0],
          "matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  const auto av = a.value(), bv = b.value();
  std::vector<T> out(m * n, T(0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = av[i * k + p];
      const T* brow = bv.data() + p * n;
      T* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  const std::size_t ia = a.id(), ib = b.id();
  return g.record(Shape{m, n}, std::move(out), {a, b}, [ia, ib, m, k, n](Graph<T>& g, std::size_t self) {
    const auto& dy = g.node(self).grad;
    const auto& av = g.node(ia).value;
    const auto& bv = g.node(ib).value;
    if (auto& da = g.grad(ia); !da.empty())
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          T acc = T(0);
          for (std::size_t j = 0; j < n; ++j) acc += dy[i * n + j] * bv[p * n + j];
          da[i * k + p] += acc;
        }
    if (auto& db = g.grad(ib); !db.empty())
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const T aip = av[i * k + p];
          for (std::size_t j = 0; j < n; ++j) db[p * n + j] += aip * dy[i * n + j];
        }
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  auto& g = graph_of(x);
  same_graph(x, w);
  same_graph(x, b);
  const auto& xs = x.shape();
  require(w.shape().size() == 2 && b.shape().size() == 1 && b.shape()[0] == w.shape()[1],
          "linear: weight " + shape_string(w.shape()) + " bias " + shape_string(b.shape()));
  require((xs.size() == 1 || xs.size() == 2) && xs.back() == w.shape()[0],
          "linear: input " + shape_string(xs) + " vs weight " + shape_string(w.shape()));
  const std::size_t batch = xs.size() == 1 ? 1 : xs[0];
  const std::size_t din = w.shape()[0], dout = w.shape()[1];
  const auto xv = x.value(), wv = w.value(), bv = b.value();
  std::vector<T> out(batch * dout);
  for (std::size_t r = 0; r < batch; ++r) {
    T* o = out.data() + r * dout;
    for (std::size_t j = 0; j < dout; ++j) o[j] = bv[j];
    for (std::size_t p = 0; p < din; ++p) {
      const T xp = xv[r * din + p];
      const T* wr = wv.data() + p * dout;
      for (std::size_t j = 0; j < dout; ++j) o[j] += xp * wr[j];
    }
  }
  Shape shape = xs.size() == 1 ? Shape{dout} : Shape{batch, dout};
  const std::size_t ix = x.id(), iw = w.id(), ib = b.id();
  return g.record(std::move(shape), std::move(out), {x, w, b},
                  [ix, iw, ib, batch, din, dout](Graph<T>& g, std::size_t self) {
                    const auto& dy = g.node(self).grad;
                    const auto& xv = g.node(ix).value;
                    const auto& wv = g.node(iw).value;
                    if (auto& dx = g.grad(ix); !dx.empty())
                      for (std::size_t r = 0; r < batch; ++r)
                        for (std::size_t p = 0; p < din; ++p) {
                          T acc = T(0);
                          for (std::size_t j = 0; j < dout; ++j) acc += dy[r * dout + j] * wv[p * dout + j];
                          dx[r * din + p] += acc;
                        }
                    if (auto& dw = g.grad(iw); !dw.empty())
                      for (std::size_t r = 0; r < batch; ++r)
                        for (std::size_t p = 0; p < din; ++p) {
                          const T xp = xv[r * din + p];
                          for (std::size_t j = 0; j < dout; ++j) dw[p * dout + j] += xp * dy[r * dout + j];
                        }
                    if (auto& db = g.grad(ib); !db.empty())
                      for (std::size_t r = 0; r < batch; ++r)
                        for (std::size_t j = 0; j < dout; ++j) db[j] += dy[r * dout + j];
                  });
}

template <typename T>
Tensor<T> weighted_rows(const Tensor<T>& w, const Tensor<T>& x) {
  require(w.shape().size() == 1 && x.shape().size() == 2 && w.shape()[0] == x.shape()[0],
          "weighted_rows: " + shape_string(w.shape()) + " over " + shape_string(x.shape()));
  const std::size_t t = w.shape()[0], d = x.shape()[1];
  return reshape(matmul(reshape(w, Shape{1, t}), x), Shape{d});
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  auto& g = graph_of(a);
  const auto av = a.value();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] > T(0) ? av[i] : T(0);
  const std::size_t ia = a.id();
  return g.record(a.shape(), std::move(out), {a}, [ia](Graph<T>& g, std::size_t self) {
    const auto& dy = g.node(self).grad;
    const auto& av = g.node(ia).value;
    auto& d = g.grad(ia);
    for (std::size_t i = 0; i < dy.size(); ++i)
      if (av[i] > T(0)) d[i] += dy[i];
  });
}

template <typename T>
Tensor<T> tanh_act(const Tensor<T>& a) {
  auto& g = graph_of(a);
  const auto av = a.value();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(av[i]);
  const std::size_t ia = a.id();
  return g.record(a.shape(), std::move(out), {a}, [ia](Graph<T>& g, std::size_t self) {
    const auto& node = g.node(self);
    auto& d = g.grad(ia);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += node.grad[i] * (T(1) - node.value[i] * node.value[i]);
  });
}

namespace {

struct ConvDims {
  std::size_t batch, cin, cout, h, w;
};

ConvDims conv_dims(const Shape& xs, const Shape& ks) {
  require(ks.size() == 4 && ks[2] == 3 && ks[3] == 3, "conv2d: kernels must be (C_out, C_in, 3, 3), got " + shape_string(ks));
  require(xs.size() == 3 || xs.size() == 4, "conv2d: input must be rank 3 or 4, got " + shape_string(xs));
  const std::size_t off = xs.size() == 4 ? 1 : 0;
  const ConvDims d{off ? xs[0] : 1, xs[off], ks[0], xs[off + 1], xs[off + 2]};
  require(d.cin == ks[1], "conv2d: input channels " + shape_string(xs) + " vs kernels " + shape_string(ks));
  return d;
}

// col (C_in*9, H*W): row (c*9 + ky*3 + kx) holds input channel c shifted by (ky-1, kx-1), zero padded.
template <typename T>
void im2col(const T* __restrict in, T* __restrict col, std::size_t cin, std::size_t h, std::size_t w) {
  const std::size_t plane = h * w;
  std::fill(col, col + cin * 9 * plane, T(0));
  for (std::size_t c = 0; c < cin; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = col + (c * 9 + ky * 3 + kx) * plane;
        const T* src = in + c * plane;
        const int dy = ky - 1, dx = kx - 1;
        const std::size_t y0 = dy < 0 ? 1 : 0, y1 = dy > 0 ? h - 1 : h;
        const std::size_t x0 = dx < 0 ? 1 : 0, x1 = dx > 0 ? w - 1 : w;
        for (std::size_t y = y0; y < y1; ++y) {
          T* o = dst + y * w;
          const T* sr = src + (y + dy) * w + dx;
          for (std::size_t x = x0; x < x1; ++x) o[x] = sr[x];
        }
      }
}

template <typename T>
void col2im_add(const T* __restrict col, T* __restrict in, std::size_t cin, std::size_t h, std::size_t w) {
  const std::size_t plane = h * w;
  for (std::size_t c = 0; c < cin; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = col + (c * 9 + ky * 3 + kx) * plane;
        T* dst = in + c * plane;
        const int dy = ky - 1, dx = kx - 1;
        const std::size_t y0 = dy < 0 ? 1 : 0, y1 = dy > 0 ? h - 1 : h;
        const std::size_t x0 = dx < 0 ? 1 : 0, x1 = dx > 0 ? w - 1 : w;
        for (std::size_t y = y0; y < y1; ++y) {
          const T* o = src + y * w;
          T* d = dst + (y + dy) * w + dx;
          for (std::size_t x = x0; x < x1; ++x) d[x] += o[x];
        }
      }
}

// c (m, n) += a (m, k) * b (k, n)
template <typename T>
void gemm_nn(const T* __restrict a, const T* __restrict b, T* __restrict c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = a[i * k + p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// c (k, n) += a^T b, with a (m, k) and b (m, n)
template <typename T>
void gemm_tn(const T* __restrict a, const T* __restrict b, T* __restrict c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = a[i * k + p];
      const T* brow = b + i * n;
      T* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
}

// c (m, k) += a (m, n) * b^T, with b (k, n). b is transposed into scratch first.
template <typename T>
void gemm_nt(const T* __restrict a, const T* __restrict b, T* __restrict c, std::size_t m, std::size_t k, std::size_t n,
             std::vector<T>& scratch) {
  scratch.resize(n * k);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t j = 0; j < n; ++j) scratch[j * k + p] = b[p * n + j];
  gemm_nn(a, scratch.data(), c, m, n, k);
}

template <typename T>
Tensor<T> conv2d_impl(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>* bias) {
  auto& g = graph_of(x);
  same_graph(x, k);
  const ConvDims d = conv_dims(x.shape(), k.shape());
  if (bias) {
    same_graph(x, *bias);
    require(bias->shape() == Shape{d.cout}, "conv2d: bias must be (C_out)");
  }
  const std::size_t plane = d.h * d.w, rows = d.cin * 9;
  const auto xv = x.value(), kv = k.value();
  std::vector<T> out(d.batch * d.cout * plane, T(0));
  std::vector<T> col(rows * plane);
  for (std::size_t n = 0; n < d.batch; ++n) {
    T* o = out.data() + n * d.cout * plane;
    if (bias)
      for (std::size_t co = 0; co < d.cout; ++co) std::fill(o + co * plane, o + (co + 1) * plane, bias->value()[co]);
    im2col(xv.data() + n * d.cin * plane, col.data(), d.cin, d.h, d.w);
    gemm_nn(kv.data(), col.data(), o, d.cout, rows, plane);
  }
  Shape shape = x.shape().size() == 4 ? Shape{d.batch, d.cout, d.h, d.w} : Shape{d.cout, d.h, d.w};
  const std::size_t ix = x.id(), ik = k.id();
  const std::size_t ib = bias ? bias->id() : ix;
  const bool has_bias = bias != nullptr;
  auto fn = [ix, ik, ib, has_bias, d, plane, rows](Graph<T>& g, std::size_t self) {
    const auto& dy = g.node(self).grad;
    const auto& xv = g.node(ix).value;
    const auto& kv = g.node(ik).value;
    auto& dx = g.grad(ix);
    auto& dk = g.grad(ik);
    std::vector<T> col(rows * plane), scratch;
    for (std::size_t n = 0; n < d.batch; ++n) {
      const T* go = dy.data() + n * d.cout * plane;
      if (has_bias) {
        auto& db = g.grad(ib);
        if (!db.empty())
          for (std::size_t co = 0; co < d.cout; ++co) {
            T acc = T(0);
            for (std::size_t i = 0; i < plane; ++i) acc += go[co * plane + i];
            db[co] += acc;
          }
      }
      if (!dk.empty()) {
        im2col(xv.data() + n * d.cin * plane, col.data(), d.cin, d.h, d.w);
        gemm_nt(go, col.data(), dk.data(), d.cout, rows, plane, scratch);
      }
      if (!dx.empty()) {
        std::fill(col.begin(), col.end(), T(0));
        gemm_tn(kv.data(), go, col.data(), d.cout, rows, plane);
        col2im_add(col.data(), dx.data() + n * d.cin * plane, d.cin, d.h, d.w);
      }
    }
  };
  if (bias) return g.record(std::move(shape), std::move(out), {x, k, *bias}, std::move(fn));
  return g.record(std::move(shape), std::move(out), {x, k}, std::move(fn));
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernels) {
  return conv2d_impl<T>(x, kernels, nullptr);
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& bias) {
  return conv2d_impl<T>(x, kernels, &bias);
}

template <typename T>
Tensor<T> maxpool2(const Tensor<T>& x) {
  auto& g = graph_of(x);
  const auto& xs = x.shape();
  require(xs.size() >= 2, "maxpool2: rank must be >= 2");
  const std::size_t h = xs[xs.size() - 2], w = xs[xs.size() - 1];
  if (h % 2 || w % 2) throw Error(ErrorCode::kOddSpatialDims, "maxpool2 on " + shape_string(xs));
  const std::size_t planes = x.value().size() / (h * w);
  const std::size_t oh = h / 2, ow = w / 2;
  const auto xv = x.value();
  std::vector<T> out(planes * oh * ow);
  std::vector<std::size_t> arg(out.size());
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx) {
        const std::size_t base = p * h * w + 2 * y * w + 2 * xx;
        std::size_t best = base;
        for (std::size_t cand : {base + 1, base + w, base + w + 1})
          if (xv[cand] > xv[best]) best = cand;
        const std::size_t o = (p * oh + y) * ow + xx;
        out[o] = xv[best];
        arg[o] = best;
      }
  Shape shape = xs;
  shape[shape.size() - 2] = oh;
  shape[shape.size() - 1] = ow;
  const std::size_t ix = x.id();
  return g.record(std::move(shape), std::move(out), {x}, [ix, arg = std::move(arg)](Graph<T>& g, std::size_t self) {
    const auto& dy = g.node(self).grad;
    auto& d = g.grad(ix);
    for (std::size_t o = 0; o < dy.size(); ++o) d[arg[o]] += dy[o];
  });
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  auto& g = graph_of(x);
  const auto& xs = x.shape();
  require(xs.size() == 3 || xs.size() == 4, "global_avg_pool: rank must be 3 or 4, got " + shape_string(xs));
  const std::size_t area = xs[xs.size() - 2] * xs[xs.size() - 1];
  const std::size_t planes = x.value().size() / area;
  const auto xv = x.value();
  std::vector<T> out(planes);
  for (std::size_t p = 0; p < planes; ++p) {
    T acc = T(0);
    for (std::size_t i = 0; i < area; ++i) acc += xv[p * area + i];
    out[p] = acc / static_cast<T>(area);
  }
  Shape shape(xs.begin(), xs.end() - 2);
  const std::size_t ix = x.id();
  return g.record(std::move(shape), std::move(out), {x}, [ix, area, planes](Graph<T>& g, std::size_t self) {
    const auto& dy = g.node(self).grad;
    auto& d = g.grad(ix);
    for (std::size_t p = 0; p < planes; ++p) {
      const T v = dy[p] / static_cast<T>(area);
      for (std::size_t i = 0; i < area; ++i) d[p * area + i] += v;
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias) {
  auto& g = graph_of(x);
  same_graph(x, gain);
  same_graph(x, bias);
  const auto& xs = x.shape();
  require((xs.size() == 1 || xs.size() == 2) && xs.back() >= 1, "layer_norm: input must be (d) or (B, d)");
  const std::size_t d = xs.back(), rows = x.value().size() / d;
  require(gain.shape() == Shape{d} && bias.shape() == Shape{d}, "layer_norm: gain/bias must be (d)");
  const auto xv = x.value(), gv = gain.value(), bv = bias.value();
  std::vector<T> out(xv.size()), xhat(xv.size()), inv_sd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = xv.data() + r * d;
    T mean = T(0);
    for (std::size_t i = 0; i < d; ++i) mean += xr[i];
    mean /= static_cast<T>(d);
    T var = T(0);
    for (std::size_t i = 0; i < d; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= static_cast<T>(d);
    inv_sd[r] = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    for (std::size_t i = 0; i < d; ++i) {
      xhat[r * d + i] = (xr[i] - mean) * inv_sd[r];
      out[r * d + i] = xhat[r * d + i] * gv[i] + bv[i];
    }
  }
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return g.record(xs, std::move(out), {x, gain, bias},
                  [ix, ig, ib, d, rows, xhat = std::move(xhat), inv_sd = std::move(inv_sd)](Graph<T>& g, std::size_t self) {
                    const auto& dy = g.node(self).grad;
                    const auto& gv = g.node(ig).value;
                    auto& dx = g.grad(ix);
                    auto& dg = g.grad(ig);
                    auto& dbias = g.grad(ib);
                    for (std::size_t r = 0; r < rows; ++r) {
                      const T* gy = dy.data() + r * d;
                      const T* xh = xhat.data() + r * d;
                      if (!dg.empty())
                        for (std::size_t i = 0; i < d; ++i) dg[i] += gy[i] * xh[i];
                      if (!dbias.empty())
                        for (std::size_t i = 0; i < d; ++i) dbias[i] += gy[i];
                      if (dx.empty()) continue;
                      T mean_dxh = T(0), mean_dxh_xh = T(0);
                      for (std::size_t i = 0; i < d; ++i) {
                        const T dxh = gy[i] * gv[i];
                        mean_dxh += dxh;
                        mean_dxh_xh += dxh * xh[i];
                      }
                      mean_dxh /= static_cast<T>(d);
                      mean_dxh_xh /= static_cast<T>(d);
                      for (std::size_t i = 0; i < d; ++i)
                        dx[r * d + i] += inv_sd[r] * (gy[i] * gv[i] - mean_dxh - xh[i] * mean_dxh_xh);
                    }
                  });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
  auto& g = graph_of(x);
  require(x.shape().size() == 1 && x.shape()[0] >= 1, "softmax: input must be a non-empty vector");
  const auto xv = x.value();
  const T mx = *std::max_element(xv.begin(), xv.end());
  std::vector<T> out(xv.size());
  T total = T(0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(xv[i] - mx);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  const std::size_t ix = x.id();
  return g.record(x.shape(), std::move(out), {x}, [ix](Graph<T>& g, std::size_t self) {
    const auto& node = g.node(self);
    T inner = T(0);
    for (std::size_t i = 0; i < node.value.size(); ++i) inner += node.grad[i] * node.value[i];
    auto& d = g.grad(ix);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += node.value[i] * (node.grad[i] - inner);
  });
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::size_t target) {
  auto& g = graph_of(logits);
  require(logits.shape().size() == 1, "cross_entropy: logits must be a vector");
  const auto xv = logits.value();
  if (target >= xv.size()) {
    throw Error(ErrorCode::kLabelOutOfRange, "class " + std::to_string(target) + " with " + std::to_string(xv.size()) + " logits");
  }
  const T mx = *std::max_element(xv.begin(), xv.end());
  T total = T(0);
  std::vector<T> prob(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    prob[i] = std::exp(xv[i] - mx);
    total += prob[i];
  }
  for (auto& p : prob) p /= total;
  const T loss = std::log(total) + mx - xv[target];
  const std::size_t ix = logits.id();
  return g.record(Shape{}, {loss}, {logits}, [ix, target, prob = std::move(prob)](Graph<T>& g, std::size_t self) {
    const T dy = g.node(self).grad[0];
    auto& d = g.grad(ix);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy * (prob[i] - (i == target ? T(1) : T(0)));
  });
}

#define MHAFF_INSTANTIATE_OPS(T)                                                               \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> scale(const Tensor<T>&, T);                                               \
  template Tensor<T> sum(const Tensor<T>&);                                                    \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                         \
  template Tensor<T> pick(const Tensor<T>&, std::size_t);                                      \
  template Tensor<T> row(const Tensor<T>&, std::size_t);                                       \
  template Tensor<T> concat_rows(const std::vector<Tensor<T>>&);                               \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> weighted_rows(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> relu(const Tensor<T>&);                                                   \
  template Tensor<T> tanh_act(const Tensor<T>&);                                               \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> maxpool2(const Tensor<T>&);                                               \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                        \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> softmax(const Tensor<T>&);                                                \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::size_t);

MHAFF_INSTANTIATE_OPS(float)
MHAFF_INSTANTIATE_OPS(double)

#undef MHAFF_INSTANTIATE_OPS

}  // namespace mhaff::nn
