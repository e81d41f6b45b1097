#pragma once

#include <algorithm>
#include <cstring>
#include <string>
#include <vector>

#include "normscape/parallel.hpp"
#include "normscape/tensor.hpp"

namespace normscape {

// Convolution here is cross-correlation (no kernel flip), stride 1, zero
// padding chosen so the output spatial size equals the input's. Bias terms do
// not exist anywhere in this project.
struct ConvSpec {
    int64_t in_channels = 0;
    int64_t out_channels = 0;
    int kernel_size = 3;  // 1 or 3
    int padding = 1;      // (kernel_size - 1) / 2

    static ConvSpec make(int64_t in_ch, int64_t out_ch, int k) {
        ConvSpec s;
        s.in_channels = in_ch;
        s.out_channels = out_ch;
        s.kernel_size = k;
        s.padding = (k - 1) / 2;
        s.validate();
        return s;
    }

    void validate() const {
        if (in_channels <= 0 || out_channels <= 0) {
            throw std::invalid_argument("conv spec: channel counts must be positive, got in=" +
                                        std::to_string(in_channels) +
                                        " out=" + std::to_string(out_channels));
        }
        if (kernel_size != 1 && kernel_size != 3) {
            throw std::invalid_argument("conv spec: kernel_size must be 1 or 3, got " +
                                        std::to_string(kernel_size));
        }
        if (padding != (kernel_size - 1) / 2) {
            throw std::invalid_argument("conv spec: padding must be (kernel_size-1)/2 for "
                                        "same-size output, got " + std::to_string(padding));
        }
    }
};

namespace detail {

template <std::floating_point T>
void check_conv_args(const Tensor<T>& input, const Tensor<T>& weights, const ConvSpec& spec) {
    spec.validate();
    if (input.rank() != 4) {
        throw std::invalid_argument("conv input must be rank-4 [N,C,H,W], got shape " +
                                    shape_str(input.shape()));
    }
    if (weights.rank() != 4) {
        throw std::invalid_argument("conv weights must be rank-4 [O,C,k,k], got shape " +
                                    shape_str(weights.shape()));
    }
    if (input.dim(1) != spec.in_channels) {
        throw std::invalid_argument("conv input axis 1 (channels) = " +
                                    std::to_string(input.dim(1)) + " does not match spec in_channels = " +
                                    std::to_string(spec.in_channels));
    }
    if (weights.dim(0) != spec.out_channels) {
        throw std::invalid_argument("conv weights axis 0 (out channels) = " +
                                    std::to_string(weights.dim(0)) + " does not match spec out_channels = " +
                                    std::to_string(spec.out_channels));
    }
    if (weights.dim(1) != spec.in_channels) {
        throw std::invalid_argument("conv weights axis 1 (in channels) = " +
                                    std::to_string(weights.dim(1)) + " does not match spec in_channels = " +
                                    std::to_string(spec.in_channels));
    }
    if (weights.dim(2) != spec.kernel_size || weights.dim(3) != spec.kernel_size) {
        throw std::invalid_argument("conv weights axes 2,3 (kernel) = " +
                                    std::to_string(weights.dim(2)) + "x" + std::to_string(weights.dim(3)) +
                                    " do not match spec kernel_size = " + std::to_string(spec.kernel_size));
    }
}

// C[M,N] += A[M,K] * B[K,N], all row-major. The k reduction is a single
// ascending chain per output element, so the result does not depend on the
// blocking parameters or on how work is spread over threads.
template <std::floating_point T>
void gemm_accumulate(int64_t M, int64_t N, int64_t K,
                     const T* A, int64_t lda,
                     const T* B, int64_t ldb,
                     T* C, int64_t ldc) {
    constexpr int64_t MR = 4;    // rows per register block
    constexpr int64_t KC = 256;  // k panel kept hot in L2
    constexpr int64_t NC = 768;  // output columns per tile

    for (int64_t jc = 0; jc < N; jc += NC) {
        const int64_t nc = std::min(NC, N - jc);
        for (int64_t kc = 0; kc < K; kc += KC) {
            const int64_t kk = std::min(KC, K - kc);
            int64_t i = 0;
            for (; i + MR <= M; i += MR) {
                const T* a0 = A + (i + 0) * lda + kc;
                const T* a1 = A + (i + 1) * lda + kc;
                const T* a2 = A + (i + 2) * lda + kc;
                const T* a3 = A + (i + 3) * lda + kc;
                T* c0 = C + (i + 0) * ldc + jc;
                T* c1 = C + (i + 1) * ldc + jc;
                T* c2 = C + (i + 2) * ldc + jc;
                T* c3 = C + (i + 3) * ldc + jc;
                for (int64_t k = 0; k < kk; ++k) {
                    const T* b = B + (kc + k) * ldb + jc;
                    const T av0 = a0[k];
                    const T av1 = a1[k];
                    const T av2 = a2[k];
                    const T av3 = a3[k];
                    for (int64_t j = 0; j < nc; ++j) {
                        c0[j] += av0 * b[j];
                        c1[j] += av1 * b[j];
                        c2[j] += av2 * b[j];
                        c3[j] += av3 * b[j];
                    }
                }
            }
            for (; i < M; ++i) {
                const T* a0 = A + i * lda + kc;
                T* c0 = C + i * ldc + jc;
                for (int64_t k = 0; k < kk; ++k) {
                    const T* b = B + (kc + k) * ldb + jc;
                    const T av0 = a0[k];
                    for (int64_t j = 0; j < nc; ++j) c0[j] += av0 * b[j];
                }
            }
        }
    }
}

template <std::floating_point T>
void transpose(int64_t rows, int64_t cols, const T* src, T* dst) {
    constexpr int64_t BLK = 32;
    for (int64_t r0 = 0; r0 < rows; r0 += BLK) {
        const int64_t r1 = std::min(rows, r0 + BLK);
        for (int64_t c0 = 0; c0 < cols; c0 += BLK) {
            const int64_t c1 = std::min(cols, c0 + BLK);
            for (int64_t r = r0; r < r1; ++r) {
                for (int64_t c = c0; c < c1; ++c) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

// im2col for one image: col is [C*k*k, H*W], row (c*k+ky)*k+kx holds the
// input plane shifted by (ky-pad, kx-pad) with zero fill outside.
template <std::floating_point T>
void im2col(const T* img, int64_t C, int64_t H, int64_t W, int k, int pad, T* col) {
    const int64_t plane = H * W;
    int64_t row = 0;
    for (int64_t c = 0; c < C; ++c) {
        const T* src_plane = img + c * plane;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx, ++row) {
                T* dst = col + row * plane;
                const int dy = ky - pad;
                const int dx = kx - pad;
                for (int64_t y = 0; y < H; ++y) {
                    const int64_t sy = y + dy;
                    T* drow = dst + y * W;
                    if (sy < 0 || sy >= H) {
                        std::memset(drow, 0, sizeof(T) * static_cast<size_t>(W));
                        continue;
                    }
                    const T* srow = src_plane + sy * W;
                    const int64_t x_lo = std::max<int64_t>(0, -dx);
                    const int64_t x_hi = std::min<int64_t>(W, W - dx);
                    if (x_lo > 0) std::memset(drow, 0, sizeof(T) * static_cast<size_t>(x_lo));
                    if (x_hi > x_lo) {
                        std::memcpy(drow + x_lo, srow + x_lo + dx,
                                    sizeof(T) * static_cast<size_t>(x_hi - x_lo));
                    }
                    if (x_hi < W) {
                        std::memset(drow + x_hi, 0, sizeof(T) * static_cast<size_t>(W - x_hi));
                    }
                }
            }
        }
    }
}

// Scatter-add inverse of im2col.
template <std::floating_point T>
void col2im_add(const T* col, int64_t C, int64_t H, int64_t W, int k, int pad, T* img) {
    const int64_t plane = H * W;
    int64_t row = 0;
    for (int64_t c = 0; c < C; ++c) {
        T* dst_plane = img + c * plane;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx, ++row) {
                const T* src = col + row * plane;
                const int dy = ky - pad;
                const int dx = kx - pad;
                for (int64_t y = 0; y < H; ++y) {
                    const int64_t sy = y + dy;
                    if (sy < 0 || sy >= H) continue;
                    const T* srow = src + y * W;
                    T* drow = dst_plane + sy * W;
                    const int64_t x_lo = std::max<int64_t>(0, -dx);
                    const int64_t x_hi = std::min<int64_t>(W, W - dx);
                    for (int64_t x = x_lo; x < x_hi; ++x) drow[x + dx] += srow[x];
                }
            }
        }
    }
}

// Fixed image-chunk size for batched kernels. Gradient partials are reduced
// in chunk order, so results are independent of the thread count.
constexpr int64_t kBatchChunk = 8;

}  // namespace detail

// Direct six-loop reference convolution; the oracle the optimized path is
// tested against. Accumulation runs in T with c, ky, kx ascending.
template <std::floating_point T>
Tensor<T> conv2d_forward_naive(const Tensor<T>& input, const Tensor<T>& weights,
                               const ConvSpec& spec) {
    detail::check_conv_args(input, weights, spec);
    const int64_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int64_t O = spec.out_channels;
    const int k = spec.kernel_size;
    const int pad = spec.padding;

    Tensor<T> out({N, O, H, W});
    const T* in = input.data();
    const T* wt = weights.data();
    T* ot = out.data();
    for (int64_t n = 0; n < N; ++n) {
        for (int64_t o = 0; o < O; ++o) {
            for (int64_t y = 0; y < H; ++y) {
                for (int64_t x = 0; x < W; ++x) {
                    T acc = 0;
                    for (int64_t c = 0; c < C; ++c) {
                        for (int ky = 0; ky < k; ++ky) {
                            const int64_t sy = y + ky - pad;
                            if (sy < 0 || sy >= H) continue;
                            for (int kx = 0; kx < k; ++kx) {
                                const int64_t sx = x + kx - pad;
                                if (sx < 0 || sx >= W) continue;
                                acc += in[((n * C + c) * H + sy) * W + sx] *
                                       wt[((o * C + c) * k + ky) * k + kx];
                            }
                        }
                    }
                    ot[((n * O + o) * H + y) * W + x] = acc;
                }
            }
        }
    }
    return out;
}

// Optimized path: per-image im2col followed by a blocked GEMM. Images are
// processed in fixed chunks in parallel; each output element is one ascending
// k chain, so results match across thread counts within a build.
template <std::floating_point T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weights, const ConvSpec& spec) {
    detail::check_conv_args(input, weights, spec);
    const int64_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int64_t O = spec.out_channels;
    const int k = spec.kernel_size;
    const int64_t K = C * k * k;
    const int64_t P = H * W;

    Tensor<T> out({N, O, H, W});
    const T* in = input.data();
    const T* wt = weights.data();
    T* ot = out.data();

    if (k == 1) {
        // 1x1 convolution is a plain channel-mixing GEMM; no col buffer needed.
        parallel_chunks(N, detail::kBatchChunk, [&](int64_t n0, int64_t n1) {
            for (int64_t n = n0; n < n1; ++n) {
                detail::gemm_accumulate(O, P, K, wt, K, in + n * C * P, P, ot + n * O * P, P);
            }
        });
        return out;
    }

    parallel_chunks(N, detail::kBatchChunk, [&](int64_t n0, int64_t n1) {
        std::vector<T> col(static_cast<size_t>(K * P));
        for (int64_t n = n0; n < n1; ++n) {
            detail::im2col(in + n * C * P, C, H, W, k, spec.padding, col.data());
            detail::gemm_accumulate(O, P, K, wt, K, col.data(), P, ot + n * O * P, P);
        }
    });
    return out;
}

template <std::floating_point T>
struct ConvGrads {
    Tensor<T> input;
    Tensor<T> weights;
};

// Exact gradients of conv2d_forward under sum-of-products semantics.
//   grad_input   = correlate(grad_output, W^T)   (via GEMM + col2im)
//   grad_weights = sum_n grad_output_n * col_n^T (chunk partials, fixed order)
template <std::floating_point T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weights,
                             const Tensor<T>& grad_output, const ConvSpec& spec) {
    detail::check_conv_args(input, weights, spec);
    const int64_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int64_t O = spec.out_channels;
    const int k = spec.kernel_size;
    const int64_t K = C * k * k;
    const int64_t P = H * W;
    if (grad_output.rank() != 4 || grad_output.dim(0) != N || grad_output.dim(1) != O ||
        grad_output.dim(2) != H || grad_output.dim(3) != W) {
        throw std::invalid_argument("conv backward: grad_output shape " +
                                    shape_str(grad_output.shape()) + " does not match forward output [" +
                                    std::to_string(N) + "," + std::to_string(O) + "," +
                                    std::to_string(H) + "," + std::to_string(W) + "]");
    }

    ConvGrads<T> grads{Tensor<T>(input.shape()), Tensor<T>(weights.shape())};
    const T* in = input.data();
    const T* go = grad_output.data();

    // W^T once per call: [K, O].
    std::vector<T> wt_t(static_cast<size_t>(K * O));
    detail::transpose(O, K, weights.data(), wt_t.data());

    const int64_t nchunks = (N + detail::kBatchChunk - 1) / detail::kBatchChunk;
    std::vector<std::vector<T>> gw_partials(static_cast<size_t>(nchunks));

    parallel_chunks(N, detail::kBatchChunk, [&](int64_t n0, int64_t n1) {
        const int64_t chunk = n0 / detail::kBatchChunk;
        std::vector<T>& gw = gw_partials[static_cast<size_t>(chunk)];
        gw.assign(static_cast<size_t>(K * O), T(0));  // [K, O] transposed layout
        std::vector<T> col(static_cast<size_t>(K * P));
        std::vector<T> gcol(static_cast<size_t>(K * P));
        std::vector<T> go_t(static_cast<size_t>(P * O));
        for (int64_t n = n0; n < n1; ++n) {
            // grad wrt input
            std::fill(gcol.begin(), gcol.end(), T(0));
            detail::gemm_accumulate(K, P, O, wt_t.data(), O, go + n * O * P, P, gcol.data(), P);
            if (k == 1) {
                std::memcpy(grads.input.data() + n * C * P, gcol.data(),
                            sizeof(T) * static_cast<size_t>(K * P));
            } else {
                detail::col2im_add(gcol.data(), C, H, W, k, spec.padding,
                                   grads.input.data() + n * C * P);
            }
            // grad wrt weights, accumulated transposed: gw[K,O] += col[K,P] * go_n^T[P,O]
            const T* colp;
            if (k == 1) {
                colp = in + n * C * P;
            } else {
                detail::im2col(in + n * C * P, C, H, W, k, spec.padding, col.data());
                colp = col.data();
            }
            detail::transpose(O, P, go + n * O * P, go_t.data());
            detail::gemm_accumulate(K, O, P, colp, P, go_t.data(), O, gw.data(), O);
        }
    });

    // Reduce chunk partials in chunk order, then untranspose.
    std::vector<T> gw_total(static_cast<size_t>(K * O), T(0));
    for (const auto& partial : gw_partials) {
        for (int64_t i = 0; i < K * O; ++i) gw_total[static_cast<size_t>(i)] += partial[static_cast<size_t>(i)];
    }
    detail::transpose(K, O, gw_total.data(), grads.weights.data());
    return grads;
}

template <std::floating_point T>
Tensor<T> relu_forward(const Tensor<T>& x) {
    Tensor<T> out(x.shape());
    const T* xd = x.data();
    T* od = out.data();
    const int64_t n = x.size();
    for (int64_t i = 0; i < n; ++i) od[i] = xd[i] > T(0) ? xd[i] : T(0);
    return out;
}

// Subgradient at exactly 0 is 0, keeping masks idempotent: the mask computed
// from the pre-activation equals the mask computed from the activation.
template <std::floating_point T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
    check_same_shape(x, grad_out, "relu_backward");
    Tensor<T> out(x.shape());
    const T* xd = x.data();
    const T* gd = grad_out.data();
    T* od = out.data();
    const int64_t n = x.size();
    for (int64_t i = 0; i < n; ++i) od[i] = xd[i] > T(0) ? gd[i] : T(0);
    return out;
}

}  // namespace normscape
