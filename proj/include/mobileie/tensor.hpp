#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mobileie/errors.hpp"

namespace mobileie {

// Worker threads used by the heavy kernels (conv2d and friends). Parallel
// runs produce bit-identical results to serial ones: work splits over
// disjoint output planes and the per-element reduction order never changes.
void set_threads(int n);
int threads();

namespace detail {
inline int& thread_slot() {
    static int n = 1;
    return n;
}
}  // namespace detail

inline void set_threads(int n) { detail::thread_slot() = n < 1 ? 1 : n; }
inline int threads() { return detail::thread_slot(); }

// Dense NCHW activation tensor, w fastest. The float instantiation is the
// lingua franca of the engine; the double one backs the 64-bit gradient
// check mode.
template <typename T>
struct Tensor4T {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor4T() = default;
    Tensor4T(int n_, int c_, int h_, int w_, T fill = T(0))
        : n(n_), c(c_), h(h_), w(w_) {
        if (n < 1 || c < 1 || h < 1 || w < 1)
            throw ShapeError("Tensor4: all dims must be >= 1");
        data.assign(static_cast<std::size_t>(n) * c * h * w, fill);
    }

    std::size_t size() const { return data.size(); }
    std::size_t plane_size() const { return static_cast<std::size_t>(h) * w; }

    bool same_shape(const Tensor4T& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    std::string shape_str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }

    T* plane(int in, int ic) {
        return data.data() + (static_cast<std::size_t>(in) * c + ic) * plane_size();
    }
    const T* plane(int in, int ic) const {
        return data.data() + (static_cast<std::size_t>(in) * c + ic) * plane_size();
    }

    T& at(int in, int ic, int iy, int ix) {
        return data[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
    }
    T at(int in, int ic, int iy, int ix) const {
        return data[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
    }
};

// Convolution weights, shape (c_out, c_in, kh, kw); kh == kw, odd.
template <typename T>
struct KernelT {
    int c_out = 0, c_in = 0, kh = 0, kw = 0;
    std::vector<T> data;

    KernelT() = default;
    KernelT(int co, int ci, int k_h, int k_w, T fill = T(0))
        : c_out(co), c_in(ci), kh(k_h), kw(k_w) {
        if (co < 1 || ci < 1 || k_h < 1 || k_w < 1)
            throw ShapeError("KernelTensor: all dims must be >= 1");
        data.assign(static_cast<std::size_t>(co) * ci * k_h * k_w, fill);
    }

    std::size_t size() const { return data.size(); }
    bool same_shape(const KernelT& o) const {
        return c_out == o.c_out && c_in == o.c_in && kh == o.kh && kw == o.kw;
    }

    T& at(int o, int i, int y, int x) {
        return data[((static_cast<std::size_t>(o) * c_in + i) * kh + y) * kw + x];
    }
    T at(int o, int i, int y, int x) const {
        return data[((static_cast<std::size_t>(o) * c_in + i) * kh + y) * kw + x];
    }
};

using Tensor4 = Tensor4T<float>;
using KernelTensor = KernelT<float>;
using BiasVector = std::vector<float>;

namespace detail {

template <typename T>
void check_conv_args(const Tensor4T<T>& x, const KernelT<T>& k,
                     const std::vector<T>& bias, int pad) {
    if (k.kh != k.kw)
        throw ArgumentError("conv2d: only square kernels are supported");
    if (k.kh % 2 == 0)
        throw ArgumentError("conv2d: even kernel size " + std::to_string(k.kh) +
                            " unsupported");
    if (x.c != k.c_in)
        throw ShapeError("conv2d: input channels " + std::to_string(x.c) +
                         " != kernel c_in " + std::to_string(k.c_in));
    if (static_cast<int>(bias.size()) != k.c_out)
        throw ShapeError("conv2d: bias length " + std::to_string(bias.size()) +
                         " != c_out " + std::to_string(k.c_out));
    if (pad != (k.kh - 1) / 2)
        throw ArgumentError("conv2d: same-padding requires pad == (k-1)/2");
}

// Row-axpy convolution core. Acc is double in production mode (tightens the
// fusion-equivalence algebra) and plain T where the caller opts for speed.
// Summation order per output element is (c_in, ky, kx), independent of the
// threading split, so results are bit-stable across thread counts.
template <typename T, typename Acc>
void conv2d_core(const Tensor4T<T>& x, const KernelT<T>& k,
                 const std::vector<T>& bias, int pad, Tensor4T<T>& out) {
    const int h = x.h, w = x.w, K = k.kh;
    const long jobs = static_cast<long>(x.n) * k.c_out;
    const int nt = threads();
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1 && jobs > 1)
    for (long job = 0; job < jobs; ++job) {
        const int in = static_cast<int>(job / k.c_out);
        const int o = static_cast<int>(job % k.c_out);
        static thread_local std::vector<Acc> acc;
        acc.assign(static_cast<std::size_t>(h) * w, static_cast<Acc>(bias[o]));
        for (int i = 0; i < k.c_in; ++i) {
            const T* src_plane = x.plane(in, i);
            for (int ky = 0; ky < K; ++ky) {
                const int dy = ky - pad;
                const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
                for (int kx = 0; kx < K; ++kx) {
                    const Acc wgt = static_cast<Acc>(k.at(o, i, ky, kx));
                    if (wgt == Acc(0)) continue;
                    const int dx = kx - pad;
                    const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
                    for (int y = y0; y < y1; ++y) {
                        const T* src = src_plane + static_cast<std::size_t>(y + dy) * w + dx;
                        Acc* dst = acc.data() + static_cast<std::size_t>(y) * w;
                        for (int ix = x0; ix < x1; ++ix)
                            dst[ix] += wgt * static_cast<Acc>(src[ix]);
                    }
                }
            }
        }
        T* dst = out.plane(in, o);
        for (std::size_t p = 0; p < acc.size(); ++p) dst[p] = static_cast<T>(acc[p]);
    }
}

}  // namespace detail

// Same-padding stride-1 convolution with zero borders. Accumulates in
// 64-bit and stores back in T.
template <typename T>
Tensor4T<T> conv2d(const Tensor4T<T>& x, const KernelT<T>& k,
                   const std::vector<T>& bias, int pad) {
    detail::check_conv_args(x, k, bias, pad);
    Tensor4T<T> out(x.n, k.c_out, x.h, x.w);
    detail::conv2d_core<T, double>(x, k, bias, pad, out);
    return out;
}

// Deployment-path convolution: identical contract, accumulates in T.
template <typename T>
Tensor4T<T> conv2d_fast(const Tensor4T<T>& x, const KernelT<T>& k,
                        const std::vector<T>& bias, int pad) {
    detail::check_conv_args(x, k, bias, pad);
    Tensor4T<T> out(x.n, k.c_out, x.h, x.w);
    detail::conv2d_core<T, T>(x, k, bias, pad, out);
    return out;
}

// Embed a kernel in the spatial center of a larger (odd) kernel, zeros
// elsewhere. conv2d with the padded kernel under matching same-padding is
// the identical map.
template <typename T>
KernelT<T> pad_kernel_center(const KernelT<T>& k, int target) {
    if (target % 2 == 0)
        throw ArgumentError("pad_kernel_center: target size must be odd");
    if (target < k.kh)
        throw ArgumentError("pad_kernel_center: target " + std::to_string(target) +
                            " smaller than kernel " + std::to_string(k.kh));
    if (target == k.kh) return k;
    KernelT<T> out(k.c_out, k.c_in, target, target);
    const int off = (target - k.kh) / 2;
    for (int o = 0; o < k.c_out; ++o)
        for (int i = 0; i < k.c_in; ++i)
            for (int y = 0; y < k.kh; ++y)
                for (int x = 0; x < k.kw; ++x)
                    out.at(o, i, y + off, x + off) = k.at(o, i, y, x);
    return out;
}

template <typename T>
Tensor4T<T> global_avg_pool(const Tensor4T<T>& x) {
    Tensor4T<T> out(x.n, x.c, 1, 1);
    const std::size_t hw = x.plane_size();
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic) {
            const T* p = x.plane(in, ic);
            double s = 0.0;
            for (std::size_t i = 0; i < hw; ++i) s += p[i];
            out.at(in, ic, 0, 0) = static_cast<T>(s / static_cast<double>(hw));
        }
    return out;
}

template <typename T>
Tensor4T<T> global_max_pool(const Tensor4T<T>& x) {
    Tensor4T<T> out(x.n, x.c, 1, 1);
    const std::size_t hw = x.plane_size();
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic) {
            const T* p = x.plane(in, ic);
            T m = p[0];
            for (std::size_t i = 1; i < hw; ++i) m = std::max(m, p[i]);
            out.at(in, ic, 0, 0) = m;
        }
    return out;
}

template <typename T>
Tensor4T<T> prelu(const Tensor4T<T>& x, const std::vector<T>& slope) {
    if (static_cast<int>(slope.size()) != x.c)
        throw ShapeError("prelu: slope length " + std::to_string(slope.size()) +
                         " != channels " + std::to_string(x.c));
    Tensor4T<T> out(x.n, x.c, x.h, x.w);
    const std::size_t hw = x.plane_size();
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic) {
            const T* src = x.plane(in, ic);
            T* dst = out.plane(in, ic);
            const T a = slope[ic];
            for (std::size_t i = 0; i < hw; ++i)
                dst[i] = src[i] >= T(0) ? src[i] : a * src[i];
        }
    return out;
}

template <typename T>
Tensor4T<T> sigmoid(const Tensor4T<T>& x) {
    Tensor4T<T> out(x.n, x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.size(); ++i)
        out.data[i] = T(1) / (T(1) + std::exp(-x.data[i]));
    return out;
}

template <typename T>
Tensor4T<T> tanh_map(const Tensor4T<T>& x) {
    Tensor4T<T> out(x.n, x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = std::tanh(x.data[i]);
    return out;
}

namespace detail {

// Broadcast classifier for mul/add: equal shapes, or one side is a
// per-channel (n|1, c, 1, 1) vector expanded over the other.
enum class Bcast { Equal, BLeft, BRight, Invalid };

template <typename T>
Bcast classify(const Tensor4T<T>& a, const Tensor4T<T>& b) {
    if (a.same_shape(b)) return Bcast::Equal;
    auto vec_over = [](const Tensor4T<T>& v, const Tensor4T<T>& full) {
        return v.h == 1 && v.w == 1 && v.c == full.c && (v.n == full.n || v.n == 1);
    };
    if (vec_over(b, a)) return Bcast::BRight;
    if (vec_over(a, b)) return Bcast::BLeft;
    return Bcast::Invalid;
}

template <typename T, typename Op>
Tensor4T<T> broadcast_binary(const Tensor4T<T>& a, const Tensor4T<T>& b, Op op,
                             const char* name) {
    const Bcast kind = classify(a, b);
    if (kind == Bcast::Invalid)
        throw ShapeError(std::string(name) + ": incompatible shapes " + a.shape_str() +
                         " vs " + b.shape_str());
    if (kind == Bcast::Equal) {
        Tensor4T<T> out(a.n, a.c, a.h, a.w);
        for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = op(a.data[i], b.data[i]);
        return out;
    }
    const Tensor4T<T>& full = (kind == Bcast::BRight) ? a : b;
    const Tensor4T<T>& vec = (kind == Bcast::BRight) ? b : a;
    Tensor4T<T> out(full.n, full.c, full.h, full.w);
    const std::size_t hw = full.plane_size();
    for (int in = 0; in < full.n; ++in)
        for (int ic = 0; ic < full.c; ++ic) {
            const T v = vec.at(vec.n == 1 ? 0 : in, ic, 0, 0);
            const T* src = full.plane(in, ic);
            T* dst = out.plane(in, ic);
            if (kind == Bcast::BRight)
                for (std::size_t i = 0; i < hw; ++i) dst[i] = op(src[i], v);
            else
                for (std::size_t i = 0; i < hw; ++i) dst[i] = op(v, src[i]);
        }
    return out;
}

}  // namespace detail

template <typename T>
Tensor4T<T> mul(const Tensor4T<T>& a, const Tensor4T<T>& b) {
    return detail::broadcast_binary(a, b, [](T x, T y) { return x * y; }, "mul");
}

template <typename T>
Tensor4T<T> add(const Tensor4T<T>& a, const Tensor4T<T>& b) {
    return detail::broadcast_binary(a, b, [](T x, T y) { return x + y; }, "add");
}

// Depth-to-space: (n, c, h, w) -> (n, c/r^2, h*r, w*r) with
// out(n, c', y*r+dy, x*r+dx) = in(n, c'*r^2 + dy*r + dx, y, x).
template <typename T>
Tensor4T<T> pixel_shuffle(const Tensor4T<T>& x, int r) {
    if (r < 1) throw ArgumentError("pixel_shuffle: r must be >= 1");
    if (r == 1) return x;
    if (x.c % (r * r) != 0)
        throw ShapeError("pixel_shuffle: channels " + std::to_string(x.c) +
                         " not divisible by r^2 = " + std::to_string(r * r));
    Tensor4T<T> out(x.n, x.c / (r * r), x.h * r, x.w * r);
    for (int in = 0; in < x.n; ++in)
        for (int oc = 0; oc < out.c; ++oc)
            for (int dy = 0; dy < r; ++dy)
                for (int dx = 0; dx < r; ++dx) {
                    const int ic = oc * r * r + dy * r + dx;
                    const T* src = x.plane(in, ic);
                    for (int y = 0; y < x.h; ++y) {
                        T* dst = out.plane(in, oc) +
                                 static_cast<std::size_t>(y * r + dy) * out.w + dx;
                        for (int ix = 0; ix < x.w; ++ix) dst[ix * r] = src[y * x.w + ix];
                    }
                }
    return out;
}

template <typename T>
Tensor4T<T> clamp01(const Tensor4T<T>& x) {
    Tensor4T<T> out(x.n, x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.size(); ++i)
        out.data[i] = std::clamp(x.data[i], T(0), T(1));
    return out;
}

template <typename T>
T max_abs_diff(const Tensor4T<T>& a, const Tensor4T<T>& b) {
    if (!a.same_shape(b))
        throw ShapeError("max_abs_diff: shapes " + a.shape_str() + " vs " + b.shape_str());
    T m = T(0);
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace mobileie
