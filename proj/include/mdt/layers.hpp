// Forward/backward layer operations: 2-D convolution (strided, dilated),
// max pooling with argmax routing, ReLU and affine layers.
//
// Convolution accumulates strictly in tap order per output element (zero taps
// are skipped), so a dilated kernel and its zero-inflated dense equivalent
// produce bit-identical outputs.
#pragma once

#include <vector>

#include "mdt/tensor.hpp"

namespace mdt {

/// Gradient bundle of one layer application.
template <typename Scalar>
struct LayerGradT {
  Tensor<Scalar> d_input;
  std::vector<Tensor<Scalar>> d_params;
};
using LayerGrad = LayerGradT<double>;

namespace detail {

/// out[M,N] += A[M,K] * B[K,N], all row-major. K is walked sequentially per
/// output row; zero multipliers are skipped. The inner loop has no reduction,
/// so vectorization cannot reassociate the sum.
template <typename Scalar>
void gemm_acc(const Scalar* A, const Scalar* B, Scalar* out, int M, int K, int N) {
  for (int m = 0; m < M; ++m) {
    Scalar* o = out + static_cast<std::size_t>(m) * N;
    const Scalar* a = A + static_cast<std::size_t>(m) * K;
    for (int k = 0; k < K; ++k) {
      const Scalar w = a[k];
      if (w == Scalar(0)) continue;
      const Scalar* b = B + static_cast<std::size_t>(k) * N;
      for (int n = 0; n < N; ++n) o[n] += w * b[n];
    }
  }
}

inline int conv_out_extent(int in, int kernel, int stride, int dilation, int pad) {
  const int eff = kernel + (kernel - 1) * (dilation - 1);
  return (in + 2 * pad - eff) / stride + 1;
}

/// Gather input patches into col[K=C*kH*kW, N=Ho*Wo]; out-of-range taps are 0.
template <typename Scalar>
void im2col(const Tensor<Scalar>& input, int kh, int kw, int stride, int dilation, int pad,
            Tensor<Scalar>& col, int ho, int wo) {
  const int C = input.shape[0], H = input.shape[1], W = input.shape[2];
  const Scalar* src = input.ptr();
  Scalar* dst = col.ptr();
  const int N = ho * wo;
  int k = 0;
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj, ++k) {
        Scalar* row = dst + static_cast<std::size_t>(k) * N;
        const Scalar* plane = src + static_cast<std::size_t>(c) * H * W;
        const int di = ki * dilation - pad;
        const int dj = kj * dilation - pad;
        int n = 0;
        for (int i = 0; i < ho; ++i) {
          const int y = i * stride + di;
          for (int j = 0; j < wo; ++j, ++n) {
            const int x = j * stride + dj;
            row[n] = (y >= 0 && y < H && x >= 0 && x < W) ? plane[static_cast<std::size_t>(y) * W + x] : Scalar(0);
          }
        }
      }
    }
  }
}

/// Scatter-add of a col matrix back onto the input layout (adjoint of im2col).
template <typename Scalar>
void col2im_acc(const Tensor<Scalar>& col, int C, int H, int W, int kh, int kw, int stride, int dilation,
                int pad, int ho, int wo, Tensor<Scalar>& input_grad) {
  const Scalar* src = col.ptr();
  Scalar* dst = input_grad.ptr();
  const int N = ho * wo;
  int k = 0;
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj, ++k) {
        const Scalar* row = src + static_cast<std::size_t>(k) * N;
        Scalar* plane = dst + static_cast<std::size_t>(c) * H * W;
        const int di = ki * dilation - pad;
        const int dj = kj * dilation - pad;
        int n = 0;
        for (int i = 0; i < ho; ++i) {
          const int y = i * stride + di;
          for (int j = 0; j < wo; ++j, ++n) {
            const int x = j * stride + dj;
            if (y >= 0 && y < H && x >= 0 && x < W) plane[static_cast<std::size_t>(y) * W + x] += row[n];
          }
        }
      }
    }
  }
}

template <typename Scalar>
void check_conv_args(const Tensor<Scalar>& input, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias,
                     int stride, int dilation, int pad) {
  if (stride < 1 || dilation < 1) throw ArgumentError("conv2d stride and dilation must be >= 1");
  if (pad < 0) throw ArgumentError("conv2d padding must be >= 0");
  if (input.rank() != 3 || weight.rank() != 4 || bias.rank() != 1)
    throw DimensionError("conv2d expects input [C,H,W], weight [Co,Ci,kH,kW], bias [Co]");
  if (weight.shape[1] != input.shape[0]) throw DimensionError("conv2d channel mismatch");
  if (bias.shape[0] != weight.shape[0]) throw DimensionError("conv2d bias/weight mismatch");
  const int kh = weight.shape[2], kw = weight.shape[3];
  const int effh = kh + (kh - 1) * (dilation - 1);
  const int effw = kw + (kw - 1) * (dilation - 1);
  if (input.shape[1] + 2 * pad < effh || input.shape[2] + 2 * pad < effw)
    throw DimensionError("conv2d input smaller than effective kernel extent");
}

}  // namespace detail

/// Cross-correlation of input [C,H,W] with weight [Co,C,kH,kW].
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias,
                      int stride = 1, int dilation = 1, int pad = 0) {
  detail::check_conv_args(input, weight, bias, stride, dilation, pad);
  const int co = weight.shape[0], kh = weight.shape[2], kw = weight.shape[3];
  const int ho = detail::conv_out_extent(input.shape[1], kh, stride, dilation, pad);
  const int wo = detail::conv_out_extent(input.shape[2], kw, stride, dilation, pad);
  const int K = weight.shape[1] * kh * kw;
  const int N = ho * wo;

  Tensor<Scalar> col({K, N});
  detail::im2col(input, kh, kw, stride, dilation, pad, col, ho, wo);

  Tensor<Scalar> out({co, ho, wo});
  for (int m = 0; m < co; ++m) {
    Scalar* o = out.ptr() + static_cast<std::size_t>(m) * N;
    std::fill(o, o + N, bias[static_cast<std::size_t>(m)]);
  }
  detail::gemm_acc(weight.ptr(), col.ptr(), out.ptr(), co, K, N);
  return out;
}

/// Analytic gradients of conv2d w.r.t. input, weight and bias.
/// d_params order: {d_weight, d_bias}.
template <typename Scalar>
LayerGradT<Scalar> conv2d_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& weight,
                                   const Tensor<Scalar>& bias, int stride, int dilation, int pad,
                                   const Tensor<Scalar>& d_out) {
  detail::check_conv_args(input, weight, bias, stride, dilation, pad);
  const int co = weight.shape[0], kh = weight.shape[2], kw = weight.shape[3];
  const int ho = detail::conv_out_extent(input.shape[1], kh, stride, dilation, pad);
  const int wo = detail::conv_out_extent(input.shape[2], kw, stride, dilation, pad);
  if (d_out.rank() != 3 || d_out.shape[0] != co || d_out.shape[1] != ho || d_out.shape[2] != wo)
    throw DimensionError("conv2d_backward upstream gradient shape mismatch");
  const int K = weight.shape[1] * kh * kw;
  const int N = ho * wo;

  Tensor<Scalar> col({K, N});
  detail::im2col(input, kh, kw, stride, dilation, pad, col, ho, wo);

  LayerGradT<Scalar> g;
  g.d_params.resize(2);
  auto& d_weight = g.d_params[0];
  auto& d_bias = g.d_params[1];
  d_weight = Tensor<Scalar>(weight.shape);
  d_bias = Tensor<Scalar>(bias.shape);

  auto dy = d_out.mat(co, N);
  d_weight.mat(co, K).noalias() = dy * col.mat(K, N).transpose();
  d_bias.vec().noalias() = dy.rowwise().sum();

  Tensor<Scalar> d_col({K, N});
  d_col.mat(K, N).noalias() = weight.mat(co, K).transpose() * dy;
  g.d_input = Tensor<Scalar>(input.shape);
  detail::col2im_acc(d_col, input.shape[0], input.shape[1], input.shape[2], kh, kw, stride, dilation, pad,
                     ho, wo, g.d_input);
  return g;
}

/// Windowed max with recorded argmax positions (flat per-channel index).
/// Ties go to the lowest flat index.
template <typename Scalar>
struct MaxPoolResult {
  Tensor<Scalar> values;
  std::vector<int> argmax;  // per output element, flat H*W index within its channel
};

template <typename Scalar>
MaxPoolResult<Scalar> maxpool2d(const Tensor<Scalar>& input, int kernel, int stride) {
  if (kernel < 1 || stride < 1) throw ArgumentError("maxpool2d kernel and stride must be >= 1");
  if (input.rank() != 3) throw DimensionError("maxpool2d expects input [C,H,W]");
  const int C = input.shape[0], H = input.shape[1], W = input.shape[2];
  if (kernel > H || kernel > W) throw DimensionError("maxpool2d kernel exceeds input extent");
  const int ho = (H - kernel) / stride + 1;
  const int wo = (W - kernel) / stride + 1;

  MaxPoolResult<Scalar> r;
  r.values = Tensor<Scalar>({C, ho, wo});
  r.argmax.resize(static_cast<std::size_t>(C) * ho * wo);
  for (int c = 0; c < C; ++c) {
    const Scalar* plane = input.ptr() + static_cast<std::size_t>(c) * H * W;
    for (int i = 0; i < ho; ++i) {
      for (int j = 0; j < wo; ++j) {
        int best = (i * stride) * W + (j * stride);
        Scalar bv = plane[best];
        for (int di = 0; di < kernel; ++di) {
          const int y = i * stride + di;
          for (int dj = 0; dj < kernel; ++dj) {
            const int idx = y * W + (j * stride + dj);
            if (plane[idx] > bv) {
              bv = plane[idx];
              best = idx;
            }
          }
        }
        r.values(c, i, j) = bv;
        r.argmax[(static_cast<std::size_t>(c) * ho + i) * wo + j] = best;
      }
    }
  }
  return r;
}

template <typename Scalar>
Tensor<Scalar> maxpool2d_backward(const MaxPoolResult<Scalar>& fwd, const std::vector<int>& input_shape,
                                  const Tensor<Scalar>& d_out) {
  if (!(d_out.shape == fwd.values.shape)) throw DimensionError("maxpool2d_backward gradient shape mismatch");
  Tensor<Scalar> d_in(input_shape);
  const int C = input_shape[0], H = input_shape[1], W = input_shape[2];
  const int per = fwd.values.shape[1] * fwd.values.shape[2];
  for (int c = 0; c < C; ++c) {
    Scalar* plane = d_in.ptr() + static_cast<std::size_t>(c) * H * W;
    const Scalar* dy = d_out.ptr() + static_cast<std::size_t>(c) * per;
    const int* am = fwd.argmax.data() + static_cast<std::size_t>(c) * per;
    for (int n = 0; n < per; ++n) plane[am[n]] += dy[n];
  }
  return d_in;
}

/// Elementwise max(0, x). Gradient is 0 at x == 0.
template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& input) {
  Tensor<Scalar> out = input;
  for (auto& v : out.data) v = v > Scalar(0) ? v : Scalar(0);
  return out;
}

template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& d_out) {
  if (!input.same_shape(d_out)) throw DimensionError("relu_backward gradient shape mismatch");
  Tensor<Scalar> d_in = d_out;
  for (std::size_t i = 0; i < d_in.data.size(); ++i)
    if (input.data[i] <= Scalar(0)) d_in.data[i] = Scalar(0);
  return d_in;
}

/// Affine map per row: out[N,Fo] = in[N,Fi] * W[Fo,Fi]^T + b.
template <typename Scalar>
Tensor<Scalar> linear(const Tensor<Scalar>& input, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias) {
  if (input.rank() != 2 || weight.rank() != 2 || bias.rank() != 1)
    throw DimensionError("linear expects input [N,Fi], weight [Fo,Fi], bias [Fo]");
  if (input.shape[1] != weight.shape[1] || weight.shape[0] != bias.shape[0])
    throw DimensionError("linear shape mismatch");
  const int N = input.shape[0], fi = input.shape[1], fo = weight.shape[0];
  Tensor<Scalar> out({N, fo});
  out.mat(N, fo).noalias() = input.mat(N, fi) * weight.mat(fo, fi).transpose();
  out.mat(N, fo).rowwise() += bias.vec().transpose();
  return out;
}

template <typename Scalar>
LayerGradT<Scalar> linear_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& weight,
                                   const Tensor<Scalar>& d_out) {
  const int N = input.shape[0], fi = input.shape[1], fo = weight.shape[0];
  if (d_out.rank() != 2 || d_out.shape[0] != N || d_out.shape[1] != fo)
    throw DimensionError("linear_backward gradient shape mismatch");
  LayerGradT<Scalar> g;
  g.d_input = Tensor<Scalar>({N, fi});
  g.d_input.mat(N, fi).noalias() = d_out.mat(N, fo) * weight.mat(fo, fi);
  g.d_params.resize(2);
  g.d_params[0] = Tensor<Scalar>(weight.shape);
  g.d_params[0].mat(fo, fi).noalias() = d_out.mat(N, fo).transpose() * input.mat(N, fi);
  g.d_params[1] = Tensor<Scalar>({fo});
  g.d_params[1].vec().noalias() = d_out.mat(N, fo).colwise().sum().transpose();
  return g;
}

}  // namespace mdt
