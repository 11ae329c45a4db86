#include "sprx/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>

namespace sprx {
inline namespace SPRX_PRECISION_NS {

namespace {

using RowMatrix = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

template <class F, class GA, class GB>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, F f, GA da, GB db) {
  require_same_shape(name, a, b);
  const auto x = a.data();
  const auto y = b.data();
  std::vector<real> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i], y[i]);
  return make_op_result(a.shape(), std::move(out), {a, b},
                        [a, b, da, db](std::span<const real> g, std::span<const real>) {
                          const auto x = a.data();
                          const auto y = b.data();
                          if (auto ga = grad_sink(a); !ga.empty())
                            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * da(x[i], y[i]);
                          if (auto gb = grad_sink(b); !gb.empty())
                            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * db(x[i], y[i]);
                        });
}

// Splits a shape around `axis` into (outer, extent, inner) strides.
struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
  if (axis >= s.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + to_string(s));
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.n = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

struct ImageDims {
  std::size_t batch, channels, height, width;
  bool batched;
};

ImageDims image_dims(const char* op, const Tensor& t) {
  const auto& s = t.shape();
  if (s.size() == 4) return {s[0], s[1], s[2], s[3], true};
  if (s.size() == 3) return {1, s[0], s[1], s[2], false};
  throw ShapeError(std::string(op) + ": expected [B,C,H,W] or [C,H,W], got " + to_string(s));
}

void im2col(const real* img, std::size_t channels, std::size_t h, std::size_t w, std::size_t k, real* cols) {
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto hw = h * w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        real* row = cols + ((c * k + ky) * k + kx) * hw;
        const auto dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const auto dx = static_cast<std::ptrdiff_t>(kx) - pad;
        const auto x_lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -dx));
        const auto x_hi = static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(w), static_cast<std::ptrdiff_t>(w) - dx));
        for (std::size_t y = 0; y < h; ++y) {
          real* dst = row + y * w;
          const auto iy = static_cast<std::ptrdiff_t>(y) + dy;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h) || x_lo >= x_hi) {
            std::fill(dst, dst + w, real(0));
            continue;
          }
          const real* src = img + (c * h + static_cast<std::size_t>(iy)) * w;
          std::fill(dst, dst + x_lo, real(0));
          for (std::size_t x = x_lo; x < x_hi; ++x) dst[x] = src[static_cast<std::ptrdiff_t>(x) + dx];
          std::fill(dst + x_hi, dst + w, real(0));
        }
      }
    }
  }
}

void col2im_add(const real* cols, std::size_t channels, std::size_t h, std::size_t w, std::size_t k, real* img) {
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto hw = h * w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const real* row = cols + ((c * k + ky) * k + kx) * hw;
        const auto dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const auto dx = static_cast<std::ptrdiff_t>(kx) - pad;
        const auto x_lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -dx));
        const auto x_hi = static_cast<std::size_t>(
            std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(w), static_cast<std::ptrdiff_t>(w) - dx));
        for (std::size_t y = 0; y < h; ++y) {
          const auto iy = static_cast<std::ptrdiff_t>(y) + dy;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          const real* src = row + y * w;
          real* dst = img + (c * h + static_cast<std::size_t>(iy)) * w;
          for (std::size_t x = x_lo; x < x_hi; ++x) dst[static_cast<std::ptrdiff_t>(x) + dx] += src[x];
        }
      }
    }
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](real x, real y) { return x + y; }, [](real, real) { return real(1); },
      [](real, real) { return real(1); });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](real x, real y) { return x - y; }, [](real, real) { return real(1); },
      [](real, real) { return real(-1); });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](real x, real y) { return x * y; }, [](real, real y) { return y; },
      [](real x, real) { return x; });
}

Tensor logical_and(const Tensor& a, const Tensor& b) {
  return binary(
      "logical_and", a, b, [](real x, real y) { return x * y; }, [](real, real y) { return y; },
      [](real x, real) { return x; });
}

Tensor logical_iand(const Tensor& a, const Tensor& b) {
  return binary(
      "logical_iand", a, b, [](real x, real y) { return (real(1) - x) * y; }, [](real, real y) { return -y; },
      [](real x, real) { return real(1) - x; });
}

Tensor scale(const Tensor& x, real factor) {
  std::vector<real> out(x.data().begin(), x.data().end());
  for (auto& v : out) v *= factor;
  return make_op_result(x.shape(), std::move(out), {x}, [x, factor](std::span<const real> g, std::span<const real>) {
    if (auto gx = grad_sink(x); !gx.empty())
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
  });
}

Tensor add_scalar(const Tensor& x, real value) {
  std::vector<real> out(x.data().begin(), x.data().end());
  for (auto& v : out) v += value;
  return make_op_result(x.shape(), std::move(out), {x}, [x](std::span<const real> g, std::span<const real>) {
    if (auto gx = grad_sink(x); !gx.empty())
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Tensor relu(const Tensor& x) {
  std::vector<real> out(x.data().begin(), x.data().end());
  for (auto& v : out) v = v > real(0) ? v : real(0);
  return make_op_result(x.shape(), std::move(out), {x}, [x](std::span<const real> g, std::span<const real> y) {
    if (auto gx = grad_sink(x); !gx.empty())
      for (std::size_t i = 0; i < g.size(); ++i)
        if (y[i] > real(0)) gx[i] += g[i];
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<real> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = real(1) / (real(1) + std::exp(-in[i]));
  return make_op_result(x.shape(), std::move(out), {x}, [x](std::span<const real> g, std::span<const real> y) {
    if (auto gx = grad_sink(x); !gx.empty())
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (real(1) - y[i]);
  });
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
  const auto d = image_dims("conv2d", input);
  const auto& ks = kernel.shape();
  if (ks.size() != 4 || ks[2] != ks[3] || ks[2] % 2 == 0 || ks[1] != d.channels) {
    throw ShapeError("conv2d: input " + to_string(input.shape()) + " incompatible with kernel " + to_string(ks));
  }
  const std::size_t cout = ks[0];
  const std::size_t k = ks[2];
  if (bias.shape() != Shape{cout}) {
    throw ShapeError("conv2d: bias " + to_string(bias.shape()) + " incompatible with kernel " + to_string(ks));
  }
  const std::size_t hw = d.height * d.width;
  const std::size_t ckk = d.channels * k * k;

  // 1x1 kernels read the input directly; larger kernels keep their im2col
  // buffers for the backward pass.
  auto cols = std::make_shared<std::vector<real>>();
  if (k > 1) {
    cols->resize(d.batch * ckk * hw);
    for (std::size_t b = 0; b < d.batch; ++b)
      im2col(input.data().data() + b * d.channels * hw, d.channels, d.height, d.width, k,
             cols->data() + b * ckk * hw);
  }

  std::vector<real> out(d.batch * cout * hw);
  ConstMatMap weights(kernel.data().data(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(ckk));
  const auto bias_v = bias.data();
  for (std::size_t b = 0; b < d.batch; ++b) {
    const real* col_ptr = k > 1 ? cols->data() + b * ckk * hw : input.data().data() + b * ckk * hw;
    ConstMatMap col(col_ptr, static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(hw));
    MatMap o(out.data() + b * cout * hw, static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(hw));
    o.noalias() = weights * col;
    for (std::size_t c = 0; c < cout; ++c) o.row(static_cast<Eigen::Index>(c)).array() += bias_v[c];
  }

  Shape out_shape = d.batched ? Shape{d.batch, cout, d.height, d.width} : Shape{cout, d.height, d.width};
  return make_op_result(
      std::move(out_shape), std::move(out), {input, kernel, bias},
      [input, kernel, bias, cols, d, cout, k, hw, ckk](std::span<const real> g, std::span<const real>) {
        const auto e_cout = static_cast<Eigen::Index>(cout);
        const auto e_ckk = static_cast<Eigen::Index>(ckk);
        const auto e_hw = static_cast<Eigen::Index>(hw);
        auto gk = grad_sink(kernel);
        auto gb = grad_sink(bias);
        auto gi = grad_sink(input);
        std::vector<real> dcols(gi.empty() || k == 1 ? 0 : ckk * hw);
        ConstMatMap weights(kernel.data().data(), e_cout, e_ckk);
        for (std::size_t b = 0; b < d.batch; ++b) {
          ConstMatMap go(g.data() + b * cout * hw, e_cout, e_hw);
          const real* col_ptr = k > 1 ? cols->data() + b * ckk * hw : input.data().data() + b * ckk * hw;
          if (!gk.empty()) {
            MatMap dk(gk.data(), e_cout, e_ckk);
            ConstMatMap col(col_ptr, e_ckk, e_hw);
            dk.noalias() += go * col.transpose();
          }
          if (!gb.empty()) {
            // Plain loop: Eigen's vectorised sum depends on buffer alignment.
            const real* row = g.data() + b * cout * hw;
            for (std::size_t c = 0; c < cout; ++c, row += hw) {
              real acc = 0;
              for (std::size_t i = 0; i < hw; ++i) acc += row[i];
              gb[c] += acc;
            }
          }
          if (!gi.empty()) {
            real* dst = gi.data() + b * d.channels * hw;
            if (k == 1) {
              MatMap di(dst, e_ckk, e_hw);
              di.noalias() += weights.transpose() * go;
            } else {
              MatMap dc(dcols.data(), e_ckk, e_hw);
              dc.noalias() = weights.transpose() * go;
              col2im_add(dcols.data(), d.channels, d.height, d.width, k, dst);
            }
          }
        }
      });
}

Tensor layer_norm(const Tensor& input, const Tensor& gamma, const Tensor& shift, real eps) {
  const auto d = image_dims("layer_norm", input);
  if (gamma.shape() != Shape{d.channels} || shift.shape() != Shape{d.channels}) {
    throw ShapeError("layer_norm: input " + to_string(input.shape()) + " incompatible with affine " +
                     to_string(gamma.shape()) + "/" + to_string(shift.shape()));
  }
  if (!(eps > real(0))) throw std::invalid_argument("layer_norm: eps must be positive");
  const auto x = input.data();
  for (auto v : x)
    if (!std::isfinite(v)) throw NumericalError("layer_norm: non-finite input");

  const std::size_t c_n = d.channels;
  const std::size_t hw = d.height * d.width;
  auto xhat = std::make_shared<std::vector<real>>(x.size());
  auto rstd = std::make_shared<std::vector<real>>(d.batch * hw);
  std::vector<real> out(x.size());
  std::vector<real> mu(hw), var(hw);
  const auto gm = gamma.data();
  const auto sh = shift.data();
  const real inv_c = real(1) / static_cast<real>(c_n);
  for (std::size_t b = 0; b < d.batch; ++b) {
    const real* xb = x.data() + b * c_n * hw;
    std::fill(mu.begin(), mu.end(), real(0));
    std::fill(var.begin(), var.end(), real(0));
    for (std::size_t c = 0; c < c_n; ++c)
      for (std::size_t p = 0; p < hw; ++p) mu[p] += xb[c * hw + p];
    for (auto& m : mu) m *= inv_c;
    for (std::size_t c = 0; c < c_n; ++c)
      for (std::size_t p = 0; p < hw; ++p) {
        const real t = xb[c * hw + p] - mu[p];
        var[p] += t * t;
      }
    real* rs = rstd->data() + b * hw;
    for (std::size_t p = 0; p < hw; ++p) rs[p] = real(1) / std::sqrt(var[p] * inv_c + eps);
    real* xh = xhat->data() + b * c_n * hw;
    real* ob = out.data() + b * c_n * hw;
    for (std::size_t c = 0; c < c_n; ++c)
      for (std::size_t p = 0; p < hw; ++p) {
        const real v = (xb[c * hw + p] - mu[p]) * rs[p];
        xh[c * hw + p] = v;
        ob[c * hw + p] = gm[c] * v + sh[c];
      }
  }

  return make_op_result(
      input.shape(), std::move(out), {input, gamma, shift},
      [input, gamma, shift, xhat, rstd, d, c_n, hw, inv_c](std::span<const real> g, std::span<const real>) {
        auto gi = grad_sink(input);
        auto gg = grad_sink(gamma);
        auto gs = grad_sink(shift);
        const auto gm = gamma.data();
        std::vector<real> m1(hw), m2(hw);
        for (std::size_t b = 0; b < d.batch; ++b) {
          const real* gb = g.data() + b * c_n * hw;
          const real* xh = xhat->data() + b * c_n * hw;
          for (std::size_t c = 0; c < c_n; ++c) {
            real sg = 0, sgx = 0;
            for (std::size_t p = 0; p < hw; ++p) {
              sg += gb[c * hw + p];
              sgx += gb[c * hw + p] * xh[c * hw + p];
            }
            if (!gg.empty()) gg[c] += sgx;
            if (!gs.empty()) gs[c] += sg;
          }
          if (gi.empty()) continue;
          std::fill(m1.begin(), m1.end(), real(0));
          std::fill(m2.begin(), m2.end(), real(0));
          for (std::size_t c = 0; c < c_n; ++c)
            for (std::size_t p = 0; p < hw; ++p) {
              const real dxh = gb[c * hw + p] * gm[c];
              m1[p] += dxh;
              m2[p] += dxh * xh[c * hw + p];
            }
          const real* rs = rstd->data() + b * hw;
          real* dst = gi.data() + b * c_n * hw;
          for (std::size_t c = 0; c < c_n; ++c)
            for (std::size_t p = 0; p < hw; ++p) {
              const real dxh = gb[c * hw + p] * gm[c];
              dst[c * hw + p] += rs[p] * (dxh - m1[p] * inv_c - xh[c * hw + p] * m2[p] * inv_c);
            }
        }
      });
}

Tensor mean(const Tensor& x, std::size_t axis) {
  const auto s = split_axis(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (out_shape.empty()) out_shape = {1};
  std::vector<real> out(s.outer * s.inner, real(0));
  const auto in = x.data();
  const real inv = real(1) / static_cast<real>(s.n);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.n; ++i)
      for (std::size_t j = 0; j < s.inner; ++j) out[o * s.inner + j] += in[(o * s.n + i) * s.inner + j];
  for (auto& v : out) v *= inv;
  return make_op_result(std::move(out_shape), std::move(out), {x}, [x, s, inv](std::span<const real> g, std::span<const real>) {
    auto gx = grad_sink(x);
    if (gx.empty()) return;
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.n; ++i)
        for (std::size_t j = 0; j < s.inner; ++j) gx[(o * s.n + i) * s.inner + j] += g[o * s.inner + j] * inv;
  });
}

Tensor sum_all(const Tensor& x) {
  double acc = 0;
  for (auto v : x.data()) acc += v;
  return make_op_result(Shape{1}, {static_cast<real>(acc)}, {x}, [x](std::span<const real> g, std::span<const real>) {
    if (auto gx = grad_sink(x); !gx.empty())
      for (auto& v : gx) v += g[0];
  });
}

Tensor mean_all(const Tensor& x) { return scale(sum_all(x), real(1) / static_cast<real>(x.numel())); }

Tensor stack(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("stack: no inputs");
  const Shape& s = parts.front().shape();
  const std::size_t n = parts.front().numel();
  std::vector<real> out;
  out.reserve(n * parts.size());
  for (const auto& p : parts) {
    require_same_shape("stack", parts.front(), p);
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  Shape out_shape{parts.size()};
  out_shape.insert(out_shape.end(), s.begin(), s.end());
  return make_op_result(std::move(out_shape), std::move(out), parts, [parts, n](std::span<const real> g, std::span<const real>) {
    for (std::size_t k = 0; k < parts.size(); ++k)
      if (auto gp = grad_sink(parts[k]); !gp.empty())
        for (std::size_t i = 0; i < n; ++i) gp[i] += g[k * n + i];
  });
}

Tensor select(const Tensor& x, std::size_t axis, std::span<const std::size_t> indices) {
  const auto s = split_axis(x.shape(), axis);
  for (auto i : indices)
    if (i >= s.n) throw ShapeError("select: index " + std::to_string(i) + " out of range for " + to_string(x.shape()));
  Shape out_shape = x.shape();
  out_shape[axis] = indices.size();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  std::vector<real> out(s.outer * idx.size() * s.inner);
  const auto in = x.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t k = 0; k < idx.size(); ++k)
      std::copy_n(in.data() + (o * s.n + idx[k]) * s.inner, s.inner, out.data() + (o * idx.size() + k) * s.inner);
  return make_op_result(std::move(out_shape), std::move(out), {x}, [x, s, idx](std::span<const real> g, std::span<const real>) {
    auto gx = grad_sink(x);
    if (gx.empty()) return;
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t k = 0; k < idx.size(); ++k)
        for (std::size_t j = 0; j < s.inner; ++j)
          gx[(o * s.n + idx[k]) * s.inner + j] += g[(o * idx.size() + k) * s.inner + j];
  });
}

Tensor bce_loss(const Tensor& probs, const Tensor& labels) {
  require_same_shape("bce_loss", probs, labels);
  const auto p = probs.data();
  const auto l = labels.data();
  double acc = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (l[i] != real(0) && l[i] != real(1)) throw std::invalid_argument("bce_loss: label outside {0,1}");
    const double q = std::clamp<double>(p[i], kProbClamp, 1.0 - kProbClamp);
    acc -= l[i] == real(1) ? std::log(q) : std::log1p(-q);
  }
  const double n = static_cast<double>(p.size());
  return make_op_result(Shape{1}, {static_cast<real>(acc / n)}, {probs, labels},
                        [probs, labels, n](std::span<const real> g, std::span<const real>) {
                          auto gp = grad_sink(probs);
                          if (gp.empty()) return;
                          const auto p = probs.data();
                          const auto l = labels.data();
                          const real lo = kProbClamp;
                          const real hi = real(1) - kProbClamp;
                          const real scale = g[0] / static_cast<real>(n);
                          for (std::size_t i = 0; i < p.size(); ++i) {
                            if (p[i] < lo || p[i] > hi) continue;
                            gp[i] += scale * (l[i] == real(1) ? -real(1) / p[i] : real(1) / (real(1) - p[i]));
                          }
                        });
}

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
