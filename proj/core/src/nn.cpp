#include "irisnet/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "irisnet/error.hpp"
#include "irisnet/gemm.hpp"

namespace irisnet {

std::size_t window_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding) {
  if (kernel == 0 || stride == 0) raise(ErrorCode::kInvalidGeometry, "kernel and stride must be >= 1");
  if (in + 2 * padding < kernel) {
    raise(ErrorCode::kInvalidGeometry, "window " + std::to_string(kernel) + " exceeds padded input " +
                                           std::to_string(in + 2 * padding));
  }
  return (in + 2 * padding - kernel) / stride + 1;
}

namespace {

struct ConvGeometry {
  std::size_t batch, in_ch, in_h, in_w;
  std::size_t out_ch, kh, kw;
  std::size_t stride, padding;
  std::size_t out_h, out_w;

  std::size_t patch() const { return in_ch * kh * kw; }
  std::size_t plane() const { return out_h * out_w; }
  std::size_t columns() const { return batch * plane(); }
};

// col[(c*kh + ki)*kw + kj][b*plane + oh*out_w + ow]
template <std::floating_point T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
  const std::size_t cols = g.columns();
  for (std::size_t c = 0; c < g.in_ch; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        T* row = col + ((c * g.kh + ki) * g.kw + kj) * cols;
        for (std::size_t b = 0; b < g.batch; ++b) {
          const T* plane = x + (b * g.in_ch + c) * g.in_h * g.in_w;
          for (std::size_t oh = 0; oh < g.out_h; ++oh) {
            T* dst = row + b * g.plane() + oh * g.out_w;
            const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) - static_cast<std::ptrdiff_t>(g.padding);
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h)) {
              std::fill(dst, dst + g.out_w, T(0));
              continue;
            }
            const T* src = plane + static_cast<std::size_t>(ih) * g.in_w;
            for (std::size_t ow = 0; ow < g.out_w; ++ow) {
              const auto iw =
                  static_cast<std::ptrdiff_t>(ow * g.stride + kj) - static_cast<std::ptrdiff_t>(g.padding);
              dst[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.in_w)) ? T(0) : src[iw];
            }
          }
        }
      }
    }
  }
}

template <std::floating_point T>
void col2im_accumulate(const T* col, const ConvGeometry& g, T* dx) {
  const std::size_t cols = g.columns();
  for (std::size_t c = 0; c < g.in_ch; ++c) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const T* row = col + ((c * g.kh + ki) * g.kw + kj) * cols;
        for (std::size_t b = 0; b < g.batch; ++b) {
          T* plane = dx + (b * g.in_ch + c) * g.in_h * g.in_w;
          for (std::size_t oh = 0; oh < g.out_h; ++oh) {
            const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) - static_cast<std::ptrdiff_t>(g.padding);
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
            const T* src = row + b * g.plane() + oh * g.out_w;
            T* dst = plane + static_cast<std::size_t>(ih) * g.in_w;
            for (std::size_t ow = 0; ow < g.out_w; ++ow) {
              const auto iw =
                  static_cast<std::ptrdiff_t>(ow * g.stride + kj) - static_cast<std::ptrdiff_t>(g.padding);
              if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(g.in_w)) dst[iw] += src[ow];
            }
          }
        }
      }
    }
  }
}

void require_rank4(const Shape& s, const char* op) {
  if (s.size() != 4) raise(ErrorCode::kShapeMismatch, std::string(op) + " expects [b,c,h,w], got " + shape_str(s));
}

}  // namespace

template <std::floating_point T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicConv2dParams<T>& p) {
  require_rank4(x.shape(), "conv2d");
  if (p.weight.rank() != 4) raise(ErrorCode::kShapeMismatch, "conv2d weight must be [out,in,kh,kw]");
  ConvGeometry g{};
  g.batch = x.dim(0);
  g.in_ch = x.dim(1);
  g.in_h = x.dim(2);
  g.in_w = x.dim(3);
  g.out_ch = p.weight.dim(0);
  g.kh = p.weight.dim(2);
  g.kw = p.weight.dim(3);
  g.stride = p.stride;
  g.padding = p.padding;
  if (p.weight.dim(1) != g.in_ch) {
    raise(ErrorCode::kShapeMismatch, "conv2d: input has " + std::to_string(g.in_ch) + " channels, weight expects " +
                                         std::to_string(p.weight.dim(1)));
  }
  if (p.bias.defined() && p.bias.numel() != g.out_ch) raise(ErrorCode::kShapeMismatch, "conv2d: bias size");
  g.out_h = window_output_extent(g.in_h, g.kh, g.stride, g.padding);
  g.out_w = window_output_extent(g.in_w, g.kw, g.stride, g.padding);

  std::vector<T> col(g.patch() * g.columns());
  im2col(x.data().data(), g, col.data());
  std::vector<T> y2(g.out_ch * g.columns());
  detail::gemm(false, false, g.out_ch, g.columns(), g.patch(), p.weight.data().data(), col.data(), y2.data(), false);

  std::vector<T> out(g.batch * g.out_ch * g.plane());
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t o = 0; o < g.out_ch; ++o) {
      const T bias = p.bias.defined() ? p.bias.data()[o] : T(0);
      const T* src = y2.data() + o * g.columns() + b * g.plane();
      T* dst = out.data() + (b * g.out_ch + o) * g.plane();
      for (std::size_t i = 0; i < g.plane(); ++i) dst[i] = src[i] + bias;
    }
  }
  col.clear();
  col.shrink_to_fit();

  const bool has_bias = p.bias.defined();
  Shape shape{g.batch, g.out_ch, g.out_h, g.out_w};
  auto backward = [g, has_bias](const detail::TensorImpl<T>& o, const std::vector<detail::ImplPtr<T>>& in) {
    const auto& xi = *in[0];
    const auto& wi = *in[1];
    std::vector<T> g2(g.out_ch * g.columns());
    for (std::size_t b = 0; b < g.batch; ++b) {
      for (std::size_t oc = 0; oc < g.out_ch; ++oc) {
        const T* src = o.grad.data() + (b * g.out_ch + oc) * g.plane();
        std::copy(src, src + g.plane(), g2.data() + oc * g.columns() + b * g.plane());
      }
    }
    if (has_bias && in[2]->requires_grad) {
      auto gb = in[2]->grad_buffer();
      for (std::size_t oc = 0; oc < g.out_ch; ++oc) {
        double acc = 0.0;
        const T* row = g2.data() + oc * g.columns();
        for (std::size_t i = 0; i < g.columns(); ++i) acc += static_cast<double>(row[i]);
        gb[oc] += static_cast<T>(acc);
      }
    }
    if (wi.requires_grad) {
      std::vector<T> col(g.patch() * g.columns());
      im2col(xi.data.data(), g, col.data());
      detail::gemm(false, true, g.out_ch, g.patch(), g.columns(), g2.data(), col.data(),
                   in[1]->grad_buffer().data(), true);
    }
    if (xi.requires_grad) {
      std::vector<T> dcol(g.patch() * g.columns());
      detail::gemm(true, false, g.patch(), g.columns(), g.out_ch, wi.data.data(), g2.data(), dcol.data(), false);
      col2im_accumulate(dcol.data(), g, in[0]->grad_buffer().data());
    }
  };
  if (has_bias) return BasicTensor<T>::from_op(std::move(shape), std::move(out), {x, p.weight, p.bias}, backward);
  return BasicTensor<T>::from_op(std::move(shape), std::move(out), {x, p.weight}, backward);
}

template <std::floating_point T>
ChannelMoments batch_moments(const BasicTensor<T>& x) {
  require_rank4(x.shape(), "batch_moments");
  const std::size_t b = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  const double count = static_cast<double>(b * plane);
  ChannelMoments m;
  m.mean.assign(c, 0.0);
  m.variance.assign(c, 0.0);
  const auto xd = x.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    for (std::size_t n = 0; n < b; ++n) {
      const T* p = xd.data() + (n * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) acc += static_cast<double>(p[i]);
    }
    const double mu = acc / count;
    double sq = 0.0;
    for (std::size_t n = 0; n < b; ++n) {
      const T* p = xd.data() + (n * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = static_cast<double>(p[i]) - mu;
        sq += d * d;
      }
    }
    m.mean[ch] = mu;
    m.variance[ch] = sq / count;
  }
  return m;
}

template <std::floating_point T>
BasicTensor<T> batchnorm(const BasicTensor<T>& x, BasicBatchNormParams<T>& p) {
  require_rank4(x.shape(), "batchnorm");
  const std::size_t b = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (p.gamma.numel() != c || p.beta.numel() != c || p.running_mean.numel() != c || p.running_var.numel() != c) {
    raise(ErrorCode::kShapeMismatch, "batchnorm: parameter size does not match " + std::to_string(c) + " channels");
  }
  if (!(p.eps > T(0))) raise(ErrorCode::kInvalidArgument, "batchnorm: eps must be positive");
  if (p.training_mode && b < 2) {
    raise(ErrorCode::kDegenerateBatch, "batchnorm in training mode needs batch >= 2, got " + std::to_string(b));
  }

  std::vector<T> mean(c), invstd(c);
  if (p.training_mode) {
    const ChannelMoments m = batch_moments(x);
    const double count = static_cast<double>(b * plane);
    auto rm = p.running_mean.mutable_data();
    auto rv = p.running_var.mutable_data();
    const double mom = static_cast<double>(p.momentum);
    for (std::size_t ch = 0; ch < c; ++ch) {
      mean[ch] = static_cast<T>(m.mean[ch]);
      invstd[ch] = static_cast<T>(1.0 / std::sqrt(m.variance[ch] + static_cast<double>(p.eps)));
      const double unbiased = m.variance[ch] * count / (count - 1.0);
      rm[ch] = static_cast<T>((1.0 - mom) * static_cast<double>(rm[ch]) + mom * m.mean[ch]);
      rv[ch] = static_cast<T>((1.0 - mom) * static_cast<double>(rv[ch]) + mom * unbiased);
    }
  } else {
    const auto rm = p.running_mean.data();
    const auto rv = p.running_var.data();
    for (std::size_t ch = 0; ch < c; ++ch) {
      mean[ch] = rm[ch];
      invstd[ch] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(rv[ch]) + static_cast<double>(p.eps)));
    }
  }

  const auto xd = x.data();
  const auto gamma = p.gamma.data();
  const auto beta = p.beta.data();
  std::vector<T> xhat(x.numel());
  std::vector<T> out(x.numel());
  for (std::size_t n = 0; n < b; ++n) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = (n * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const T h = (xd[off + i] - mean[ch]) * invstd[ch];
        xhat[off + i] = h;
        out[off + i] = gamma[ch] * h + beta[ch];
      }
    }
  }

  const bool training = p.training_mode;
  return BasicTensor<T>::from_op(
      x.shape(), std::move(out), {x, p.gamma, p.beta},
      [b, c, plane, training, xhat = std::move(xhat), invstd = std::move(invstd)](
          const detail::TensorImpl<T>& o, const std::vector<detail::ImplPtr<T>>& in) {
        const auto& gamma = in[1]->data;
        std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
        for (std::size_t n = 0; n < b; ++n) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (n * c + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              const double gv = static_cast<double>(o.grad[off + i]);
              sum_g[ch] += gv;
              sum_gx[ch] += gv * static_cast<double>(xhat[off + i]);
            }
          }
        }
        if (in[1]->requires_grad) {
          auto gg = in[1]->grad_buffer();
          for (std::size_t ch = 0; ch < c; ++ch) gg[ch] += static_cast<T>(sum_gx[ch]);
        }
        if (in[2]->requires_grad) {
          auto gb = in[2]->grad_buffer();
          for (std::size_t ch = 0; ch < c; ++ch) gb[ch] += static_cast<T>(sum_g[ch]);
        }
        if (!in[0]->requires_grad) return;
        auto gx = in[0]->grad_buffer();
        const double count = static_cast<double>(b * plane);
        for (std::size_t n = 0; n < b; ++n) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (n * c + ch) * plane;
            const double k = static_cast<double>(gamma[ch]) * static_cast<double>(invstd[ch]);
            if (training) {
              const double mg = sum_g[ch] / count;
              const double mgx = sum_gx[ch] / count;
              for (std::size_t i = 0; i < plane; ++i) {
                const double d = static_cast<double>(o.grad[off + i]) - mg -
                                 static_cast<double>(xhat[off + i]) * mgx;
                gx[off + i] += static_cast<T>(k * d);
              }
            } else {
              for (std::size_t i = 0; i < plane; ++i) gx[off + i] += static_cast<T>(k * o.grad[off + i]);
            }
          }
        }
      });
}

template <std::floating_point T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  std::vector<T> out(x.numel());
  const auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] > T(0) ? xd[i] : T(0);
  return BasicTensor<T>::from_op(x.shape(), std::move(out), {x},
                                 [](const detail::TensorImpl<T>& o, const std::vector<detail::ImplPtr<T>>& in) {
                                   auto gx = in[0]->grad_buffer();
                                   const auto& xv = in[0]->data;
                                   for (std::size_t i = 0; i < gx.size(); ++i) {
                                     if (xv[i] > T(0)) gx[i] += o.grad[i];
                                   }
                                 });
}

template <std::floating_point T>
BasicTensor<T> maxpool2d(const BasicTensor<T>& x, std::size_t kernel, std::size_t stride, std::size_t padding) {
  require_rank4(x.shape(), "maxpool2d");
  if (padding * 2 > kernel) raise(ErrorCode::kInvalidGeometry, "maxpool2d: padding exceeds half the kernel");
  const std::size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = window_output_extent(h, kernel, stride, padding);
  const std::size_t ow = window_output_extent(w, kernel, stride, padding);
  std::vector<T> out(b * c * oh * ow);
  std::vector<std::size_t> argmax(out.size());
  const auto xd = x.data();
  for (std::size_t plane = 0; plane < b * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t s = 0; s < ow; ++s) {
        T best = -std::numeric_limits<T>::infinity();
        std::size_t best_idx = std::numeric_limits<std::size_t>::max();
        for (std::size_t ki = 0; ki < kernel; ++ki) {
          const auto ih = static_cast<std::ptrdiff_t>(r * stride + ki) - static_cast<std::ptrdiff_t>(padding);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kj = 0; kj < kernel; ++kj) {
            const auto iw = static_cast<std::ptrdiff_t>(s * stride + kj) - static_cast<std::ptrdiff_t>(padding);
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(w)) continue;
            const std::size_t idx = base + static_cast<std::size_t>(ih) * w + static_cast<std::size_t>(iw);
            // Row-major scan: the first maximum seen has the lowest flat index.
            if (best_idx == std::numeric_limits<std::size_t>::max() || xd[idx] > best) {
              best = xd[idx];
              best_idx = idx;
            }
          }
        }
        const std::size_t o = (plane * oh + r) * ow + s;
        out[o] = best;
        argmax[o] = best_idx;
      }
    }
  }
  return BasicTensor<T>::from_op(
      Shape{b, c, oh, ow}, std::move(out), {x},
      [argmax = std::move(argmax)](const detail::TensorImpl<T>& o, const std::vector<detail::ImplPtr<T>>& in) {
        auto gx = in[0]->grad_buffer();
        for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += o.grad[i];
      });
}

template <std::floating_point T>
BasicTensor<T> global_avgpool(const BasicTensor<T>& x) {
  require_rank4(x.shape(), "global_avgpool");
  const std::size_t b = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  std::vector<T> out(b * c);
  const auto xd = x.data();
  for (std::size_t i = 0; i < b * c; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < plane; ++j) acc += static_cast<double>(xd[i * plane + j]);
    out[i] = static_cast<T>(acc / static_cast<double>(plane));
  }
  return BasicTensor<T>::from_op(Shape{b, c}, std::move(out), {x},
                                 [plane](const detail::TensorImpl<T>& o, const std::vector<detail::ImplPtr<T>>& in) {
                                   auto gx = in[0]->grad_buffer();
                                   const double inv = 1.0 / static_cast<double>(plane);
                                   for (std::size_t i = 0; i < o.grad.size(); ++i) {
                                     const T g = static_cast<T>(static_cast<double>(o.grad[i]) * inv);
                                     for (std::size_t j = 0; j < plane; ++j) gx[i * plane + j] += g;
                                   }
                                 });
}

template <std::floating_point T>
BasicTensor<T> dense(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& bias) {
  if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(0) || bias.numel() != weight.dim(1)) {
    raise(ErrorCode::kShapeMismatch, "dense: x " + shape_str(x.shape()) + ", weight " + shape_str(weight.shape()) +
                                         ", bias " + shape_str(bias.shape()));
  }
  const std::size_t m = x.dim(0), k = x.dim(1), n = weight.dim(1);
  std::vector<T> out(m * n);
  detail::gemm(false, false, m, n, k, x.data().data(), weight.data().data(), out.data(), false);
  const auto bd = bias.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bd[j];
  }
  return BasicTensor<T>::from_op(
      Shape{m, n}, std::move(out), {x, weight, bias},
      [m, n, k](const detail::TensorImpl<T>& o, const std::vector<detail::ImplPtr<T>>& in) {
        if (in[0]->requires_grad) {
          detail::gemm(false, true, m, k, n, o.grad.data(), in[1]->data.data(), in[0]->grad_buffer().data(), true);
        }
        if (in[1]->requires_grad) {
          detail::gemm(true, false, k, n, m, in[0]->data.data(), o.grad.data(), in[1]->grad_buffer().data(), true);
        }
        if (in[2]->requires_grad) {
          auto gb = in[2]->grad_buffer();
          for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < m; ++i) acc += static_cast<double>(o.grad[i * n + j]);
            gb[j] += static_cast<T>(acc);
          }
        }
      });
}

template <std::floating_point T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  if (logits.rank() != 2) raise(ErrorCode::kShapeMismatch, "softmax expects [b,n]");
  const std::size_t b = logits.dim(0), n = logits.dim(1);
  const auto z = logits.data();
  std::vector<T> out(b * n);
  for (std::size_t i = 0; i < b; ++i) {
    const T* row = z.data() + i * n;
    const double mx = static_cast<double>(*std::max_element(row, row + n));
    double total = 0.0;
    std::vector<double> e(n);
    for (std::size_t j = 0; j < n; ++j) {
      e[j] = std::exp(static_cast<double>(row[j]) - mx);
      total += e[j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = static_cast<T>(e[j] / total);
  }
  return BasicTensor<T>::from_op(Shape{b, n}, std::move(out), {logits},
                                 [b, n](const detail::TensorImpl<T>& o, const std::vector<detail::ImplPtr<T>>& in) {
                                   auto gx = in[0]->grad_buffer();
                                   for (std::size_t i = 0; i < b; ++i) {
                                     const std::size_t off = i * n;
                                     double dot = 0.0;
                                     for (std::size_t j = 0; j < n; ++j) {
                                       dot += static_cast<double>(o.grad[off + j]) * static_cast<double>(o.data[off + j]);
                                     }
                                     for (std::size_t j = 0; j < n; ++j) {
                                       gx[off + j] += static_cast<T>(static_cast<double>(o.data[off + j]) *
                                                                     (static_cast<double>(o.grad[off + j]) - dot));
                                     }
                                   }
                                 });
}

#define IRISNET_INSTANTIATE_NN(T)                                                                   \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicConv2dParams<T>&);               \
  template BasicTensor<T> batchnorm(const BasicTensor<T>&, BasicBatchNormParams<T>&);               \
  template ChannelMoments batch_moments(const BasicTensor<T>&);                                     \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                              \
  template BasicTensor<T> maxpool2d(const BasicTensor<T>&, std::size_t, std::size_t, std::size_t);  \
  template BasicTensor<T> global_avgpool(const BasicTensor<T>&);                                    \
  template BasicTensor<T> dense(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> softmax(const BasicTensor<T>&);

IRISNET_INSTANTIATE_NN(float)
IRISNET_INSTANTIATE_NN(double)

}  // namespace irisnet
