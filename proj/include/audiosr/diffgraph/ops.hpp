#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "audiosr/diffgraph/tensor.hpp"
#include "audiosr/rng.hpp"

namespace audiosr::dg {

// Activations are (batch, channels, length). Backward bodies call the public
// ops below, so they are recorded whenever a backward pass runs with
// create_graph enabled.

namespace detail {

inline void check_rank3(const Tensor& x, const char* op) {
  require(x.defined() && x.rank() == 3,
          std::string(op) + ": expected a (batch, channels, length) tensor, got " +
              (x.defined() ? to_string(x.shape()) : std::string("undefined")));
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(),
          std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
}

/// Index geometry shared by a convolution and its two adjoints.
struct ConvGeom {
  std::size_t in_len = 0;
  std::size_t out_len = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  long pad_left = 0;

  // valid output range [lo, hi) for kernel tap kk
  std::pair<std::size_t, std::size_t> t_range(std::size_t kk) const {
    const long off = static_cast<long>(kk) - pad_left;  // input index = t*stride + off
    const long s = static_cast<long>(stride);
    long lo = off >= 0 ? 0 : (-off + s - 1) / s;
    long hi = (static_cast<long>(in_len) - 1 - off);
    hi = hi < 0 ? 0 : hi / s + 1;
    hi = std::min<long>(hi, static_cast<long>(out_len));
    lo = std::min(lo, hi);
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
  }
};

// y[b,co,t] = sum_{ci,kk} w[co,ci,kk] x[b,ci,t*s+kk-p]
inline std::vector<double> conv_kernel(std::span<const double> x, std::span<const double> w, std::size_t batch,
                                       std::size_t c_in, std::size_t c_out, const ConvGeom& g) {
  std::vector<double> y(batch * c_out * g.out_len, 0.0);
  const std::size_t s = g.stride;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t co = 0; co < c_out; ++co) {
      double* yr = y.data() + (b * c_out + co) * g.out_len;
      for (std::size_t ci = 0; ci < c_in; ++ci) {
        const double* xr = x.data() + (b * c_in + ci) * g.in_len;
        const double* wr = w.data() + (co * c_in + ci) * g.kernel;
        for (std::size_t kk = 0; kk < g.kernel; ++kk) {
          const double wv = wr[kk];
          const auto [lo, hi] = g.t_range(kk);
          const long off = static_cast<long>(kk) - g.pad_left;
          if (s == 1) {
            const double* xs = xr + (static_cast<long>(lo) + off);
            double* ys = yr + lo;
            for (std::size_t t = 0; t < hi - lo; ++t) ys[t] += wv * xs[t];
          } else {
            for (std::size_t t = lo; t < hi; ++t) yr[t] += wv * xr[static_cast<long>(t * s) + off];
          }
        }
      }
    }
  }
  return y;
}

// gx[b,ci,t*s+kk-p] += w[co,ci,kk] g[b,co,t]
inline std::vector<double> conv_input_adjoint(std::span<const double> grad, std::span<const double> w,
                                              std::size_t batch, std::size_t c_in, std::size_t c_out,
                                              const ConvGeom& g) {
  std::vector<double> gx(batch * c_in * g.in_len, 0.0);
  const std::size_t s = g.stride;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t co = 0; co < c_out; ++co) {
      const double* gr = grad.data() + (b * c_out + co) * g.out_len;
      for (std::size_t ci = 0; ci < c_in; ++ci) {
        double* xr = gx.data() + (b * c_in + ci) * g.in_len;
        const double* wr = w.data() + (co * c_in + ci) * g.kernel;
        for (std::size_t kk = 0; kk < g.kernel; ++kk) {
          const double wv = wr[kk];
          const auto [lo, hi] = g.t_range(kk);
          const long off = static_cast<long>(kk) - g.pad_left;
          if (s == 1) {
            double* xs = xr + (static_cast<long>(lo) + off);
            const double* gs = gr + lo;
            for (std::size_t t = 0; t < hi - lo; ++t) xs[t] += wv * gs[t];
          } else {
            for (std::size_t t = lo; t < hi; ++t) xr[static_cast<long>(t * s) + off] += wv * gr[t];
          }
        }
      }
    }
  }
  return gx;
}

// gw[co,ci,kk] = sum_{b,t} g[b,co,t] x[b,ci,t*s+kk-p]
inline std::vector<double> conv_weight_adjoint(std::span<const double> grad, std::span<const double> x,
                                               std::size_t batch, std::size_t c_in, std::size_t c_out,
                                               const ConvGeom& g) {
  std::vector<double> gw(c_out * c_in * g.kernel, 0.0);
  const std::size_t s = g.stride;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t co = 0; co < c_out; ++co) {
      const double* gr = grad.data() + (b * c_out + co) * g.out_len;
      for (std::size_t ci = 0; ci < c_in; ++ci) {
        const double* xr = x.data() + (b * c_in + ci) * g.in_len;
        double* wr = gw.data() + (co * c_in + ci) * g.kernel;
        for (std::size_t kk = 0; kk < g.kernel; ++kk) {
          const auto [lo, hi] = g.t_range(kk);
          const long off = static_cast<long>(kk) - g.pad_left;
          // four partial sums so the reduction vectorizes without fast-math
          double acc[4] = {0.0, 0.0, 0.0, 0.0};
          if (s == 1) {
            const double* xs = xr + (static_cast<long>(lo) + off);
            const double* gs = gr + lo;
            const std::size_t n = hi - lo;
            std::size_t t = 0;
            for (; t + 4 <= n; t += 4) {
              acc[0] += gs[t] * xs[t];
              acc[1] += gs[t + 1] * xs[t + 1];
              acc[2] += gs[t + 2] * xs[t + 2];
              acc[3] += gs[t + 3] * xs[t + 3];
            }
            for (; t < n; ++t) acc[0] += gs[t] * xs[t];
          } else {
            for (std::size_t t = lo; t < hi; ++t) acc[0] += gr[t] * xr[static_cast<long>(t * s) + off];
          }
          wr[kk] += (acc[0] + acc[1]) + (acc[2] + acc[3]);
        }
      }
    }
  }
  return gw;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise

inline Tensor add(const Tensor& a, const Tensor& b);
inline Tensor sub(const Tensor& a, const Tensor& b);
inline Tensor mul(const Tensor& a, const Tensor& b);
inline Tensor scale(const Tensor& x, double c);
inline Tensor add_scalar(const Tensor& x, double c);
inline Tensor mask_mul(const Tensor& x, std::shared_ptr<const std::vector<double>> mask, std::string op_name);

namespace detail {

struct AddFn : Function {
  std::string name() const override { return "add"; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>&) override { return {g, g}; }
};

struct SubFn : Function {
  std::string name() const override { return "sub"; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>& needs) override {
    return {g, needs[1] ? scale(g, -1.0) : Tensor()};
  }
};

struct MulFn : Function {
  std::string name() const override { return "mul"; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>& needs) override {
    const auto& in = inputs();
    return {needs[0] ? mul(g, in[1]) : Tensor(), needs[1] ? mul(g, in[0]) : Tensor()};
  }
};

struct ScaleFn : Function {
  double c;
  explicit ScaleFn(double c_) : c(c_) {}
  std::string name() const override { return "scale"; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>&) override { return {scale(g, c)}; }
};

struct AddScalarFn : Function {
  std::string name() const override { return "add_scalar"; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>&) override { return {g}; }
};

/// Multiplication by a constant elementwise mask; realizes relu, leaky_relu
/// and dropout along with their derivatives.
struct MaskMulFn : Function {
  std::shared_ptr<const std::vector<double>> mask;
  std::string op;
  MaskMulFn(std::shared_ptr<const std::vector<double>> m, std::string n) : mask(std::move(m)), op(std::move(n)) {}
  std::string name() const override { return op; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>&) override {
    return {mask_mul(g, mask, op)};
  }
};

struct SqrtFn : Function {
  Tensor out;
  std::string name() const override { return "sqrt"; }
  bool double_differentiable() const override { return false; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>&) override {
    std::vector<double> v(g.numel());
    const auto y = out.data();
    const auto gd = g.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = y[i] > 0.0 ? gd[i] / (2.0 * y[i]) : 0.0;
    return {Tensor(g.shape(), std::move(v))};
  }
};

template <typename F>
inline Tensor binary(const Tensor& a, const Tensor& b, const char* op, F f, std::shared_ptr<Function> fn) {
  check_same_shape(a, b, op);
  std::vector<double> v(a.numel());
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(ad[i], bd[i]);
  return make_result(a.shape(), std::move(v), std::move(fn), {a, b});
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary(a, b, "add", [](double x, double y) { return x + y; }, std::make_shared<detail::AddFn>());
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary(a, b, "sub", [](double x, double y) { return x - y; }, std::make_shared<detail::SubFn>());
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary(a, b, "mul", [](double x, double y) { return x * y; }, std::make_shared<detail::MulFn>());
}

inline Tensor scale(const Tensor& x, double c) {
  std::vector<double> v(x.values());
  for (double& e : v) e *= c;
  return make_result(x.shape(), std::move(v), std::make_shared<detail::ScaleFn>(c), {x});
}

inline Tensor add_scalar(const Tensor& x, double c) {
  std::vector<double> v(x.values());
  for (double& e : v) e += c;
  return make_result(x.shape(), std::move(v), std::make_shared<detail::AddScalarFn>(), {x});
}

inline Tensor square(const Tensor& x) { return mul(x, x); }

/// Elementwise square root; its derivative is not recorded.
inline Tensor sqrt(const Tensor& x) {
  std::vector<double> v(x.values());
  for (double& e : v) {
    require(e >= 0.0, "sqrt: negative input");
    e = std::sqrt(e);
  }
  auto fn = std::make_shared<detail::SqrtFn>();
  auto out = make_result(x.shape(), std::move(v), fn, {x});
  fn->out = out.detach();
  return out;
}

inline Tensor mask_mul(const Tensor& x, std::shared_ptr<const std::vector<double>> mask, std::string op_name) {
  require(mask->size() == x.numel(), op_name + ": mask size mismatch");
  std::vector<double> v(x.numel());
  const auto xd = x.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = xd[i] * (*mask)[i];
  return make_result(x.shape(), std::move(v), std::make_shared<detail::MaskMulFn>(std::move(mask), std::move(op_name)),
                     {x});
}

/// relu'(0) is taken as 0.
inline Tensor relu(const Tensor& x) {
  auto m = std::make_shared<std::vector<double>>(x.numel());
  const auto xd = x.data();
  for (std::size_t i = 0; i < m->size(); ++i) (*m)[i] = xd[i] > 0.0 ? 1.0 : 0.0;
  return mask_mul(x, std::move(m), "relu");
}

/// leaky_relu'(0) is taken as the slope.
inline Tensor leaky_relu(const Tensor& x, double slope) {
  auto m = std::make_shared<std::vector<double>>(x.numel());
  const auto xd = x.data();
  for (std::size_t i = 0; i < m->size(); ++i) (*m)[i] = xd[i] > 0.0 ? 1.0 : slope;
  return mask_mul(x, std::move(m), "leaky_relu");
}

/// Inverted dropout: in training mode each element is zeroed with
/// probability `rate` and survivors are scaled by 1/(1-rate).
inline Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  auto m = std::make_shared<std::vector<double>>(x.numel());
  const double keep = 1.0 / (1.0 - rate);
  for (double& e : *m) e = rng.uniform() < rate ? 0.0 : keep;
  return mask_mul(x, std::move(m), "dropout");
}

// ---------------------------------------------------------------------------
// reductions and broadcasts

inline Tensor sum_all(const Tensor& x);
inline Tensor expand_all(const Tensor& g, const Shape& shape);
inline Tensor sum_time(const Tensor& x);
inline Tensor expand_time(const Tensor& g, std::size_t length);
inline Tensor sum_item(const Tensor& x);
inline Tensor expand_item(const Tensor& g, std::size_t channels, std::size_t length);
inline Tensor sum_batch_time(const Tensor& x);
inline Tensor expand_batch_time(const Tensor& g, std::size_t batch, std::size_t length);

namespace detail {

struct SumAllFn : Function {
  Shape in_shape;
  std::string name() const override { return "sum"; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>&) override {
    return {expand_all(g, in_shape)};
  }
};

struct ExpandAllFn : Function {
  std::string name() const override { return "expand"; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>&) override { return {sum_all(g)}; }
};

struct SumTimeFn : Function {
  std::size_t length;
  explicit SumTimeFn(std::size_t l) : length(l) {}
  std::string name() const override { return "sum_time"; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>&) override {
    return {expand_time(g, length)};
  }
};

struct ExpandTimeFn : Function {
  std::string name() const override { return "expand_time"; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>&) override { return {sum_time(g)}; }
};

struct SumItemFn : Function {
  std::size_t channels, length;
  SumItemFn(std::size_t c, std::size_t l) : channels(c), length(l) {}
  std::string name() const override { return "sum_item"; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>&) override {
    return {expand_item(g, channels, length)};
  }
};

struct ExpandItemFn : Function {
  std::string name() const override { return "expand_item"; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>&) override { return {sum_item(g)}; }
};

struct SumBatchTimeFn : Function {
  std::size_t batch, length;
  SumBatchTimeFn(std::size_t b, std::size_t l) : batch(b), length(l) {}
  std::string name() const override { return "sum_batch_time"; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>&) override {
    return {expand_batch_time(g, batch, length)};
  }
};

struct ExpandBatchTimeFn : Function {
  std::string name() const override { return "expand_batch_time"; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>&) override {
    return {sum_batch_time(g)};
  }
};

}  // namespace detail

inline Tensor sum_all(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  auto fn = std::make_shared<detail::SumAllFn>();
  fn->in_shape = x.shape();
  return make_result({1}, {s}, fn, {x});
}

inline Tensor expand_all(const Tensor& g, const Shape& shape) {
  require(g.numel() == 1, "expand: source must be a scalar");
  return make_result(shape, std::vector<double>(numel(shape), g.item()), std::make_shared<detail::ExpandAllFn>(), {g});
}

inline Tensor mean_all(const Tensor& x) { return scale(sum_all(x), 1.0 / static_cast<double>(x.numel())); }

/// (b, c, L) -> (b, c, 1)
inline Tensor sum_time(const Tensor& x) {
  detail::check_rank3(x, "sum_time");
  const std::size_t rows = x.dim(0) * x.dim(1), len = x.dim(2);
  std::vector<double> v(rows, 0.0);
  const auto xd = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t t = 0; t < len; ++t) s += xd[r * len + t];
    v[r] = s;
  }
  return make_result({x.dim(0), x.dim(1), 1}, std::move(v), std::make_shared<detail::SumTimeFn>(len), {x});
}

inline Tensor expand_time(const Tensor& g, std::size_t length) {
  detail::check_rank3(g, "expand_time");
  require(g.dim(2) == 1, "expand_time: source length must be 1");
  const std::size_t rows = g.dim(0) * g.dim(1);
  std::vector<double> v(rows * length);
  const auto gd = g.data();
  for (std::size_t r = 0; r < rows; ++r) std::fill_n(v.begin() + r * length, length, gd[r]);
  return make_result({g.dim(0), g.dim(1), length}, std::move(v), std::make_shared<detail::ExpandTimeFn>(), {g});
}

/// Global average over time: (b, c, L) -> (b, c, 1).
inline Tensor mean_time(const Tensor& x) {
  detail::check_rank3(x, "mean_time");
  return scale(sum_time(x), 1.0 / static_cast<double>(x.dim(2)));
}

/// (b, c, L) -> (b, 1, 1)
inline Tensor sum_item(const Tensor& x) {
  detail::check_rank3(x, "sum_item");
  const std::size_t per = x.dim(1) * x.dim(2);
  std::vector<double> v(x.dim(0), 0.0);
  const auto xd = x.data();
  for (std::size_t b = 0; b < x.dim(0); ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < per; ++i) s += xd[b * per + i];
    v[b] = s;
  }
  return make_result({x.dim(0), 1, 1}, std::move(v), std::make_shared<detail::SumItemFn>(x.dim(1), x.dim(2)), {x});
}

inline Tensor expand_item(const Tensor& g, std::size_t channels, std::size_t length) {
  detail::check_rank3(g, "expand_item");
  const std::size_t per = channels * length;
  std::vector<double> v(g.dim(0) * per);
  const auto gd = g.data();
  for (std::size_t b = 0; b < g.dim(0); ++b) std::fill_n(v.begin() + b * per, per, gd[b]);
  return make_result({g.dim(0), channels, length}, std::move(v), std::make_shared<detail::ExpandItemFn>(), {g});
}

/// (b, c, L) -> (c)
inline Tensor sum_batch_time(const Tensor& x) {
  detail::check_rank3(x, "sum_batch_time");
  const std::size_t bs = x.dim(0), ch = x.dim(1), len = x.dim(2);
  std::vector<double> v(ch, 0.0);
  const auto xd = x.data();
  for (std::size_t b = 0; b < bs; ++b) {
    for (std::size_t c = 0; c < ch; ++c) {
      double s = 0.0;
      for (std::size_t t = 0; t < len; ++t) s += xd[(b * ch + c) * len + t];
      v[c] += s;
    }
  }
  return make_result({ch}, std::move(v), std::make_shared<detail::SumBatchTimeFn>(bs, len), {x});
}

inline Tensor expand_batch_time(const Tensor& g, std::size_t batch, std::size_t length) {
  require(g.rank() == 1, "expand_batch_time: source must be rank 1");
  const std::size_t ch = g.dim(0);
  std::vector<double> v(batch * ch * length);
  const auto gd = g.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < ch; ++c) std::fill_n(v.begin() + (b * ch + c) * length, length, gd[c]);
  }
  return make_result({batch, ch, length}, std::move(v), std::make_shared<detail::ExpandBatchTimeFn>(), {g});
}

// ---------------------------------------------------------------------------
// convolution

enum class Padding { same, valid };

inline Tensor conv_raw(const Tensor& x, const Tensor& w, const detail::ConvGeom& g);
inline Tensor conv_transpose_raw(const Tensor& grad, const Tensor& w, const detail::ConvGeom& g);
inline Tensor conv_weight_raw(const Tensor& grad, const Tensor& x, const detail::ConvGeom& g);
inline Tensor bias_add(const Tensor& y, const Tensor& bias);

namespace detail {

struct ConvFn : Function {
  ConvGeom geom;
  explicit ConvFn(ConvGeom g) : geom(g) {}
  std::string name() const override { return "conv1d"; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>& needs) override {
    const auto& x = inputs()[0];
    const auto& w = inputs()[1];
    return {needs[0] ? conv_transpose_raw(g, w, geom) : Tensor(), needs[1] ? conv_weight_raw(g, x, geom) : Tensor()};
  }
};

// inputs: (grad_out, weight) -> grad_in
struct ConvTransposeFn : Function {
  ConvGeom geom;
  explicit ConvTransposeFn(ConvGeom g) : geom(g) {}
  std::string name() const override { return "conv1d_input_grad"; }
  std::vector<Tensor> backward(const Tensor& gg, const std::vector<bool>& needs) override {
    const auto& g = inputs()[0];
    const auto& w = inputs()[1];
    return {needs[0] ? conv_raw(gg, w, geom) : Tensor(), needs[1] ? conv_weight_raw(g, gg, geom) : Tensor()};
  }
};

// inputs: (grad_out, x) -> grad_weight
struct ConvWeightFn : Function {
  ConvGeom geom;
  explicit ConvWeightFn(ConvGeom g) : geom(g) {}
  std::string name() const override { return "conv1d_weight_grad"; }
  std::vector<Tensor> backward(const Tensor& gg, const std::vector<bool>& needs) override {
    const auto& g = inputs()[0];
    const auto& x = inputs()[1];
    return {needs[0] ? conv_raw(x, gg, geom) : Tensor(), needs[1] ? conv_transpose_raw(g, gg, geom) : Tensor()};
  }
};

struct BiasAddFn : Function {
  std::string name() const override { return "bias_add"; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>& needs) override {
    return {g, needs[1] ? sum_batch_time(g) : Tensor()};
  }
};

}  // namespace detail

inline Tensor conv_raw(const Tensor& x, const Tensor& w, const detail::ConvGeom& g) {
  const std::size_t batch = x.dim(0), c_in = x.dim(1), c_out = w.dim(0);
  auto y = detail::conv_kernel(x.data(), w.data(), batch, c_in, c_out, g);
  return make_result({batch, c_out, g.out_len}, std::move(y), std::make_shared<detail::ConvFn>(g), {x, w});
}

inline Tensor conv_transpose_raw(const Tensor& grad, const Tensor& w, const detail::ConvGeom& g) {
  const std::size_t batch = grad.dim(0), c_out = w.dim(0), c_in = w.dim(1);
  auto gx = detail::conv_input_adjoint(grad.data(), w.data(), batch, c_in, c_out, g);
  return make_result({batch, c_in, g.in_len}, std::move(gx), std::make_shared<detail::ConvTransposeFn>(g), {grad, w});
}

inline Tensor conv_weight_raw(const Tensor& grad, const Tensor& x, const detail::ConvGeom& g) {
  const std::size_t batch = x.dim(0), c_in = x.dim(1), c_out = grad.dim(1);
  auto gw = detail::conv_weight_adjoint(grad.data(), x.data(), batch, c_in, c_out, g);
  return make_result({c_out, c_in, g.kernel}, std::move(gw), std::make_shared<detail::ConvWeightFn>(g), {grad, x});
}

/// Adds bias[c] to every (b, c, t).
inline Tensor bias_add(const Tensor& y, const Tensor& bias) {
  detail::check_rank3(y, "bias_add");
  require(bias.rank() == 1 && bias.dim(0) == y.dim(1), "bias_add: bias shape " + to_string(bias.shape()) +
                                                           " does not match channels of " + to_string(y.shape()));
  std::vector<double> v(y.values());
  const std::size_t ch = y.dim(1), len = y.dim(2);
  const auto bd = bias.data();
  for (std::size_t r = 0; r < y.dim(0) * ch; ++r) {
    const double bv = bd[r % ch];
    for (std::size_t t = 0; t < len; ++t) v[r * len + t] += bv;
  }
  return make_result(y.shape(), std::move(v), std::make_shared<detail::BiasAddFn>(), {y, bias});
}

/// Output length for a convolution of an input of length `len`.
inline std::size_t conv_out_length(std::size_t len, std::size_t kernel, std::size_t stride, Padding padding) {
  if (padding == Padding::same) return (len + stride - 1) / stride;
  return len < kernel ? 0 : (len - kernel) / stride + 1;
}

/// Cross-correlation with weight (c_out, c_in, k) and optional bias (c_out).
/// Same padding zero-pads symmetrically, extra sample on the right, giving
/// ceil(L / stride) outputs.
inline Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride = 1,
                     Padding padding = Padding::same) {
  detail::check_rank3(x, "conv1d");
  require(weight.defined() && weight.rank() == 3, "conv1d: weight must be (c_out, c_in, k)");
  require(stride >= 1, "conv1d: stride must be >= 1");
  require(x.dim(1) == weight.dim(1), "conv1d: input has " + std::to_string(x.dim(1)) +
                                         " channels, weight expects " + std::to_string(weight.dim(1)));
  detail::ConvGeom g;
  g.in_len = x.dim(2);
  g.kernel = weight.dim(2);
  g.stride = stride;
  g.out_len = conv_out_length(g.in_len, g.kernel, stride, padding);
  require(g.out_len > 0, "conv1d: input of length " + std::to_string(g.in_len) + " shorter than kernel " +
                             std::to_string(g.kernel));
  if (padding == Padding::same) {
    require(g.kernel % 2 == 1, "conv1d: same padding needs an odd kernel");
    const long needed = static_cast<long>((g.out_len - 1) * stride + g.kernel) - static_cast<long>(g.in_len);
    g.pad_left = std::max(needed, 0L) / 2;
  }
  auto y = conv_raw(x, weight, g);
  return bias.defined() ? bias_add(y, bias) : y;
}

// ---------------------------------------------------------------------------
// layout

inline Tensor subpixel_shuffle1d(const Tensor& x, std::size_t r);
inline Tensor subpixel_unshuffle1d(const Tensor& x, std::size_t r);
inline Tensor slice_channels(const Tensor& x, std::size_t start, std::size_t count);
inline Tensor pad_channels(const Tensor& x, std::size_t start, std::size_t total);
inline Tensor slice_time(const Tensor& x, std::size_t start, std::size_t count);
inline Tensor pad_time(const Tensor& x, std::size_t start, std::size_t total);
inline Tensor gather_time(const Tensor& x, std::shared_ptr<const std::vector<std::size_t>> index, std::size_t out_len);
inline Tensor scatter_time(const Tensor& g, std::shared_ptr<const std::vector<std::size_t>> index, std::size_t in_len);

namespace detail {

struct ShuffleFn : Function {
  std::size_t r;
  explicit ShuffleFn(std::size_t r_) : r(r_) {}
  std::string name() const override { return "subpixel_shuffle1d"; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>&) override {
    return {subpixel_unshuffle1d(g, r)};
  }
};

struct UnshuffleFn : Function {
  std::size_t r;
  explicit UnshuffleFn(std::size_t r_) : r(r_) {}
  std::string name() const override { return "subpixel_unshuffle1d"; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>&) override {
    return {subpixel_shuffle1d(g, r)};
  }
};

struct ConcatFn : Function {
  std::size_t c_first, c_second;
  ConcatFn(std::size_t a, std::size_t b) : c_first(a), c_second(b) {}
  std::string name() const override { return "concat_channels"; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>& needs) override {
    return {needs[0] ? slice_channels(g, 0, c_first) : Tensor(),
            needs[1] ? slice_channels(g, c_first, c_second) : Tensor()};
  }
};

struct SliceChannelsFn : Function {
  std::size_t start, total;
  SliceChannelsFn(std::size_t s, std::size_t t) : start(s), total(t) {}
  std::string name() const override { return "slice_channels"; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>&) override {
    return {pad_channels(g, start, total)};
  }
};

struct PadChannelsFn : Function {
  std::size_t start, count;
  PadChannelsFn(std::size_t s, std::size_t c) : start(s), count(c) {}
  std::string name() const override { return "pad_channels"; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>&) override {
    return {slice_channels(g, start, count)};
  }
};

struct SliceTimeFn : Function {
  std::size_t start, total;
  SliceTimeFn(std::size_t s, std::size_t t) : start(s), total(t) {}
  std::string name() const override { return "slice_time"; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>&) override {
    return {pad_time(g, start, total)};
  }
};

struct PadTimeFn : Function {
  std::size_t start, count;
  PadTimeFn(std::size_t s, std::size_t c) : start(s), count(c) {}
  std::string name() const override { return "pad_time"; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>&) override {
    return {slice_time(g, start, count)};
  }
};

struct GatherTimeFn : Function {
  std::shared_ptr<const std::vector<std::size_t>> index;
  std::size_t in_len;
  GatherTimeFn(std::shared_ptr<const std::vector<std::size_t>> i, std::size_t l) : index(std::move(i)), in_len(l) {}
  std::string name() const override { return "gather_time"; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>&) override {
    return {scatter_time(g, index, in_len)};
  }
};

struct ScatterTimeFn : Function {
  std::shared_ptr<const std::vector<std::size_t>> index;
  std::size_t out_len;
  ScatterTimeFn(std::shared_ptr<const std::vector<std::size_t>> i, std::size_t l) : index(std::move(i)), out_len(l) {}
  std::string name() const override { return "scatter_time"; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>&) override {
    return {gather_time(g, index, out_len)};
  }
};

}  // namespace detail

/// (b, r*c, L) -> (b, c, r*L) with out[b, ch, t*r + s] = in[b, ch*r + s, t].
inline Tensor subpixel_shuffle1d(const Tensor& x, std::size_t r) {
  detail::check_rank3(x, "subpixel_shuffle1d");
  require(r >= 2, "subpixel_shuffle1d: factor must be >= 2");
  require(x.dim(1) % r == 0, "subpixel_shuffle1d: " + std::to_string(x.dim(1)) +
                                 " channels not divisible by factor " + std::to_string(r));
  const std::size_t bs = x.dim(0), c = x.dim(1) / r, len = x.dim(2);
  std::vector<double> v(x.numel());
  const auto xd = x.data();
  for (std::size_t b = 0; b < bs; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t s = 0; s < r; ++s) {
        const double* src = xd.data() + ((b * c + ch) * r + s) * len;
        double* dst = v.data() + (b * c + ch) * len * r + s;
        for (std::size_t t = 0; t < len; ++t) dst[t * r] = src[t];
      }
  return make_result({bs, c, len * r}, std::move(v), std::make_shared<detail::ShuffleFn>(r), {x});
}

/// Inverse of subpixel_shuffle1d: (b, c, r*L) -> (b, r*c, L).
inline Tensor subpixel_unshuffle1d(const Tensor& x, std::size_t r) {
  detail::check_rank3(x, "subpixel_unshuffle1d");
  require(r >= 2, "subpixel_unshuffle1d: factor must be >= 2");
  require(x.dim(2) % r == 0, "subpixel_unshuffle1d: length not divisible by factor");
  const std::size_t bs = x.dim(0), c = x.dim(1), len = x.dim(2) / r;
  std::vector<double> v(x.numel());
  const auto xd = x.data();
  for (std::size_t b = 0; b < bs; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t s = 0; s < r; ++s) {
        const double* src = xd.data() + (b * c + ch) * len * r + s;
        double* dst = v.data() + ((b * c + ch) * r + s) * len;
        for (std::size_t t = 0; t < len; ++t) dst[t] = src[t * r];
      }
  return make_result({bs, c * r, len}, std::move(v), std::make_shared<detail::UnshuffleFn>(r), {x});
}

/// Channel concatenation, x's channels first.
inline Tensor concat_channels(const Tensor& x, const Tensor& y) {
  detail::check_rank3(x, "concat_channels");
  detail::check_rank3(y, "concat_channels");
  require(x.dim(0) == y.dim(0) && x.dim(2) == y.dim(2), "concat_channels: batch/length mismatch " +
                                                            to_string(x.shape()) + " vs " + to_string(y.shape()));
  const std::size_t bs = x.dim(0), cx = x.dim(1), cy = y.dim(1), len = x.dim(2);
  std::vector<double> v;
  v.reserve(bs * (cx + cy) * len);
  for (std::size_t b = 0; b < bs; ++b) {
    auto xs = x.data().subspan(b * cx * len, cx * len);
    auto ys = y.data().subspan(b * cy * len, cy * len);
    v.insert(v.end(), xs.begin(), xs.end());
    v.insert(v.end(), ys.begin(), ys.end());
  }
  return make_result({bs, cx + cy, len}, std::move(v), std::make_shared<detail::ConcatFn>(cx, cy), {x, y});
}

inline Tensor slice_channels(const Tensor& x, std::size_t start, std::size_t count) {
  detail::check_rank3(x, "slice_channels");
  require(start + count <= x.dim(1) && count > 0, "slice_channels: range out of bounds");
  const std::size_t bs = x.dim(0), c = x.dim(1), len = x.dim(2);
  std::vector<double> v;
  v.reserve(bs * count * len);
  for (std::size_t b = 0; b < bs; ++b) {
    auto s = x.data().subspan((b * c + start) * len, count * len);
    v.insert(v.end(), s.begin(), s.end());
  }
  return make_result({bs, count, len}, std::move(v), std::make_shared<detail::SliceChannelsFn>(start, c), {x});
}

/// Embeds x at channel offset `start` of a zero tensor with `total` channels.
inline Tensor pad_channels(const Tensor& x, std::size_t start, std::size_t total) {
  detail::check_rank3(x, "pad_channels");
  const std::size_t bs = x.dim(0), c = x.dim(1), len = x.dim(2);
  require(start + c <= total, "pad_channels: range out of bounds");
  std::vector<double> v(bs * total * len, 0.0);
  for (std::size_t b = 0; b < bs; ++b) {
    auto s = x.data().subspan(b * c * len, c * len);
    std::copy(s.begin(), s.end(), v.begin() + static_cast<long>((b * total + start) * len));
  }
  return make_result({bs, total, len}, std::move(v), std::make_shared<detail::PadChannelsFn>(start, c), {x});
}

inline Tensor slice_time(const Tensor& x, std::size_t start, std::size_t count) {
  detail::check_rank3(x, "slice_time");
  require(start + count <= x.dim(2) && count > 0, "slice_time: range out of bounds");
  const std::size_t rows = x.dim(0) * x.dim(1), len = x.dim(2);
  if (start == 0 && count == len) return x;
  std::vector<double> v(rows * count);
  const auto xd = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(xd.begin() + static_cast<long>(r * len + start), count, v.begin() + static_cast<long>(r * count));
  }
  return make_result({x.dim(0), x.dim(1), count}, std::move(v), std::make_shared<detail::SliceTimeFn>(start, len), {x});
}

inline Tensor pad_time(const Tensor& x, std::size_t start, std::size_t total) {
  detail::check_rank3(x, "pad_time");
  const std::size_t rows = x.dim(0) * x.dim(1), len = x.dim(2);
  require(start + len <= total, "pad_time: range out of bounds");
  std::vector<double> v(rows * total, 0.0);
  const auto xd = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(xd.begin() + static_cast<long>(r * len), len, v.begin() + static_cast<long>(r * total + start));
  }
  return make_result({x.dim(0), x.dim(1), total}, std::move(v), std::make_shared<detail::PadTimeFn>(start, len), {x});
}

/// out[b, c, t] = x[b, c, index[b * out_len + t]]
inline Tensor gather_time(const Tensor& x, std::shared_ptr<const std::vector<std::size_t>> index, std::size_t out_len) {
  detail::check_rank3(x, "gather_time");
  const std::size_t bs = x.dim(0), ch = x.dim(1), len = x.dim(2);
  require(index->size() == bs * out_len, "gather_time: index size mismatch");
  std::vector<double> v(bs * ch * out_len);
  const auto xd = x.data();
  for (std::size_t b = 0; b < bs; ++b) {
    const std::size_t* idx = index->data() + b * out_len;
    for (std::size_t c = 0; c < ch; ++c) {
      const double* src = xd.data() + (b * ch + c) * len;
      double* dst = v.data() + (b * ch + c) * out_len;
      for (std::size_t t = 0; t < out_len; ++t) dst[t] = src[idx[t]];
    }
  }
  return make_result({bs, ch, out_len}, std::move(v), std::make_shared<detail::GatherTimeFn>(index, len), {x});
}

/// Adjoint of gather_time: out[b, c, index[b * L + t]] += g[b, c, t].
inline Tensor scatter_time(const Tensor& g, std::shared_ptr<const std::vector<std::size_t>> index, std::size_t in_len) {
  detail::check_rank3(g, "scatter_time");
  const std::size_t bs = g.dim(0), ch = g.dim(1), len = g.dim(2);
  require(index->size() == bs * len, "scatter_time: index size mismatch");
  std::vector<double> v(bs * ch * in_len, 0.0);
  const auto gd = g.data();
  for (std::size_t b = 0; b < bs; ++b) {
    const std::size_t* idx = index->data() + b * len;
    for (std::size_t c = 0; c < ch; ++c) {
      const double* src = gd.data() + (b * ch + c) * len;
      double* dst = v.data() + (b * ch + c) * in_len;
      for (std::size_t t = 0; t < len; ++t) dst[idx[t]] += src[t];
    }
  }
  return make_result({bs, ch, in_len}, std::move(v), std::make_shared<detail::ScatterTimeFn>(index, len), {g});
}

/// Shifts each batch item in time by an integer drawn uniformly from
/// [-n, n]; samples shifted in from outside are filled by reflection.
inline Tensor phase_shuffle(const Tensor& x, long n, Rng& rng) {
  detail::check_rank3(x, "phase_shuffle");
  require(n >= 0, "phase_shuffle: n must be >= 0");
  const std::size_t bs = x.dim(0), len = x.dim(2);
  require(static_cast<std::size_t>(n) < len, "phase_shuffle: n must be smaller than the length");
  if (n == 0) return x;
  auto index = std::make_shared<std::vector<std::size_t>>(bs * len);
  const long l = static_cast<long>(len);
  for (std::size_t b = 0; b < bs; ++b) {
    const long shift = rng.uniform_int(-n, n);
    for (long t = 0; t < l; ++t) {
      long src = t - shift;
      if (src < 0) src = -src;
      if (src >= l) src = 2 * (l - 1) - src;
      (*index)[b * len + static_cast<std::size_t>(t)] = static_cast<std::size_t>(src);
    }
  }
  return gather_time(x, std::move(index), len);
}

// ---------------------------------------------------------------------------
// losses

namespace detail {

struct LossFn : Function {
  bool absolute;
  explicit LossFn(bool abs) : absolute(abs) {}
  std::string name() const override { return absolute ? "l1_loss" : "l2_loss"; }
  bool double_differentiable() const override { return false; }
  std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>& needs) override {
    const auto& p = inputs()[0];
    const auto& t = inputs()[1];
    const double gs = g.item() / static_cast<double>(p.numel());
    std::vector<double> d(p.numel());
    const auto pd = p.data();
    const auto td = t.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double diff = pd[i] - td[i];
      d[i] = absolute ? gs * static_cast<double>((diff > 0.0) - (diff < 0.0)) : gs * 2.0 * diff;
    }
    Tensor gp = needs[0] ? Tensor(p.shape(), d) : Tensor();
    Tensor gt;
    if (needs[1]) {
      for (double& e : d) e = -e;
      gt = Tensor(t.shape(), std::move(d));
    }
    return {gp, gt};
  }
};

inline Tensor loss_impl(const Tensor& pred, const Tensor& target, bool absolute) {
  check_same_shape(pred, target, absolute ? "l1_loss" : "l2_loss");
  double acc = 0.0;
  const auto pd = pred.data();
  const auto td = target.data();
  for (std::size_t i = 0; i < pd.size(); ++i) {
    const double diff = pd[i] - td[i];
    acc += absolute ? std::abs(diff) : diff * diff;
  }
  return make_result({1}, {acc / static_cast<double>(pd.size())}, std::make_shared<LossFn>(absolute),
                     {pred, target});
}

}  // namespace detail

/// Mean absolute error over all elements.
inline Tensor l1_loss(const Tensor& pred, const Tensor& target) { return detail::loss_impl(pred, target, true); }

/// Mean squared error over all elements.
inline Tensor l2_loss(const Tensor& pred, const Tensor& target) { return detail::loss_impl(pred, target, false); }

}  // namespace audiosr::dg
