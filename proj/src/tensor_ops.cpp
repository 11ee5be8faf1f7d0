#include "ganad/tensor_ops.hpp"

#include <Eigen/Core>

#include <sstream>

namespace ganad {

std::string shape_str(const Shape& shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i)
        os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

namespace kernels {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

void require_rank(const Shape& s, std::size_t rank, const char* what)
{
    if (s.size() != rank)
        throw std::invalid_argument(std::string(what) + ": expected rank " + std::to_string(rank) +
                                    ", got " + shape_str(s));
}

// cols[(ci*K + ky)*K + kx][n*HW + y*W + x] = x[n][ci][y+ky-p][x+kx-p] (zero outside).
template <typename T>
std::vector<T> im2col(const Tensor<T>& x, int k)
{
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int pad = k / 2;
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    const std::size_t ncols = static_cast<std::size_t>(n) * hw;
    std::vector<T> cols(static_cast<std::size_t>(c) * k * k * ncols, T(0));
    for (int ci = 0; ci < c; ++ci)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                T* row = cols.data() + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * ncols;
                for (int b = 0; b < n; ++b) {
                    const T* src = x.data.data() + (static_cast<std::size_t>(b) * c + ci) * hw;
                    T* dst = row + b * hw;
                    for (int y = 0; y < h; ++y) {
                        const int sy = y + ky - pad;
                        if (sy < 0 || sy >= h)
                            continue;
                        for (int xx = 0; xx < w; ++xx) {
                            const int sx = xx + kx - pad;
                            if (sx >= 0 && sx < w)
                                dst[y * w + xx] = src[sy * w + sx];
                        }
                    }
                }
            }
    return cols;
}

template <typename T>
Tensor<T> col2im(const std::vector<T>& cols, const Shape& xshape, int k)
{
    const int n = xshape[0], c = xshape[1], h = xshape[2], w = xshape[3];
    const int pad = k / 2;
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    const std::size_t ncols = static_cast<std::size_t>(n) * hw;
    Tensor<T> x(xshape);
    for (int ci = 0; ci < c; ++ci)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                const T* row = cols.data() + ((static_cast<std::size_t>(ci) * k + ky) * k + kx) * ncols;
                for (int b = 0; b < n; ++b) {
                    T* dst = x.data.data() + (static_cast<std::size_t>(b) * c + ci) * hw;
                    const T* src = row + b * hw;
                    for (int y = 0; y < h; ++y) {
                        const int sy = y + ky - pad;
                        if (sy < 0 || sy >= h)
                            continue;
                        for (int xx = 0; xx < w; ++xx) {
                            const int sx = xx + kx - pad;
                            if (sx >= 0 && sx < w)
                                dst[sy * w + sx] += src[y * w + xx];
                        }
                    }
                }
            }
    return x;
}

// [N, C, HW] <-> [C, N*HW]
template <typename T>
std::vector<T> batch_to_channel_major(const Tensor<T>& t)
{
    const int n = t.dim(0), c = t.dim(1);
    const std::size_t hw = t.size() / (static_cast<std::size_t>(n) * c);
    std::vector<T> out(t.size());
    for (int b = 0; b < n; ++b)
        for (int ci = 0; ci < c; ++ci) {
            const T* src = t.data.data() + (static_cast<std::size_t>(b) * c + ci) * hw;
            std::copy(src, src + hw, out.data() + (static_cast<std::size_t>(ci) * n + b) * hw);
        }
    return out;
}

template <typename T>
Tensor<T> channel_major_to_batch(const std::vector<T>& v, const Shape& shape)
{
    const int n = shape[0], c = shape[1];
    Tensor<T> out(shape);
    const std::size_t hw = out.size() / (static_cast<std::size_t>(n) * c);
    for (int b = 0; b < n; ++b)
        for (int ci = 0; ci < c; ++ci) {
            const T* src = v.data() + (static_cast<std::size_t>(ci) * n + b) * hw;
            std::copy(src, src + hw, out.data.data() + (static_cast<std::size_t>(b) * c + ci) * hw);
        }
    return out;
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w)
{
    require_rank(x.shape, 4, "conv2d input");
    require_rank(w.shape, 4, "conv2d weight");
    const int k = w.dim(2);
    if (w.dim(1) != x.dim(1) || w.dim(3) != k || k % 2 == 0)
        throw std::invalid_argument("conv2d: incompatible shapes " + shape_str(x.shape) + " and " +
                                    shape_str(w.shape));
    const int n = x.dim(0), co = w.dim(0), h = x.dim(2), wd = x.dim(3);
    const std::size_t ncols = static_cast<std::size_t>(n) * h * wd;
    const int inner = w.dim(1) * k * k;
    std::vector<T> cols = (k == 1) ? batch_to_channel_major(x) : im2col(x, k);
    std::vector<T> out(static_cast<std::size_t>(co) * ncols);
    MapMat<T>(out.data(), co, ncols).noalias() =
        CMapMat<T>(w.data.data(), co, inner) * CMapMat<T>(cols.data(), inner, ncols);
    return channel_major_to_batch(out, Shape{n, co, h, wd});
}

template <typename T>
Tensor<T> conv2d_input_grad(const Tensor<T>& g, const Tensor<T>& w)
{
    require_rank(g.shape, 4, "conv2d_input_grad grad");
    require_rank(w.shape, 4, "conv2d_input_grad weight");
    if (g.dim(1) != w.dim(0))
        throw std::invalid_argument("conv2d_input_grad: channel mismatch");
    const int k = w.dim(2);
    const int n = g.dim(0), co = w.dim(0), ci = w.dim(1), h = g.dim(2), wd = g.dim(3);
    const std::size_t ncols = static_cast<std::size_t>(n) * h * wd;
    const int inner = ci * k * k;
    std::vector<T> gm = batch_to_channel_major(g);
    std::vector<T> cols(static_cast<std::size_t>(inner) * ncols);
    MapMat<T>(cols.data(), inner, ncols).noalias() =
        CMapMat<T>(w.data.data(), co, inner).transpose() * CMapMat<T>(gm.data(), co, ncols);
    const Shape xshape{n, ci, h, wd};
    if (k == 1)
        return channel_major_to_batch(cols, xshape);
    return col2im(cols, xshape, k);
}

template <typename T>
Tensor<T> conv2d_weight_grad(const Tensor<T>& x, const Tensor<T>& g, int k)
{
    require_rank(x.shape, 4, "conv2d_weight_grad input");
    require_rank(g.shape, 4, "conv2d_weight_grad grad");
    if (x.dim(0) != g.dim(0) || x.dim(2) != g.dim(2) || x.dim(3) != g.dim(3))
        throw std::invalid_argument("conv2d_weight_grad: incompatible shapes");
    const int n = x.dim(0), ci = x.dim(1), co = g.dim(1), h = x.dim(2), wd = x.dim(3);
    const std::size_t ncols = static_cast<std::size_t>(n) * h * wd;
    const int inner = ci * k * k;
    std::vector<T> cols = (k == 1) ? batch_to_channel_major(x) : im2col(x, k);
    std::vector<T> gm = batch_to_channel_major(g);
    Tensor<T> out(Shape{co, ci, k, k});
    MapMat<T>(out.data.data(), co, inner).noalias() =
        CMapMat<T>(gm.data(), co, ncols) * CMapMat<T>(cols.data(), inner, ncols).transpose();
    return out;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool ta, bool tb)
{
    require_rank(a.shape, 2, "matmul lhs");
    require_rank(b.shape, 2, "matmul rhs");
    CMapMat<T> am(a.data.data(), a.dim(0), a.dim(1));
    CMapMat<T> bm(b.data.data(), b.dim(0), b.dim(1));
    const int m = ta ? a.dim(1) : a.dim(0);
    const int ka = ta ? a.dim(0) : a.dim(1);
    const int kb = tb ? b.dim(1) : b.dim(0);
    const int n = tb ? b.dim(0) : b.dim(1);
    if (ka != kb)
        throw std::invalid_argument("matmul: inner dimension mismatch " + shape_str(a.shape) + " x " +
                                    shape_str(b.shape));
    Tensor<T> out(Shape{m, n});
    MapMat<T> om(out.data.data(), m, n);
    if (!ta && !tb)
        om.noalias() = am * bm;
    else if (ta && !tb)
        om.noalias() = am.transpose() * bm;
    else if (!ta && tb)
        om.noalias() = am * bm.transpose();
    else
        om.noalias() = am.transpose() * bm.transpose();
    return out;
}

template <typename T>
Tensor<T> upsample2(const Tensor<T>& a)
{
    require_rank(a.shape, 4, "upsample2");
    const int n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
    Tensor<T> out(Shape{n, c, 2 * h, 2 * w});
    for (std::size_t plane = 0; plane < static_cast<std::size_t>(n) * c; ++plane) {
        const T* src = a.data.data() + plane * h * w;
        T* dst = out.data.data() + plane * 4 * h * w;
        for (int y = 0; y < 2 * h; ++y)
            for (int x = 0; x < 2 * w; ++x)
                dst[y * 2 * w + x] = src[(y / 2) * w + x / 2];
    }
    return out;
}

template <typename T>
Tensor<T> avgpool2(const Tensor<T>& a)
{
    require_rank(a.shape, 4, "avgpool2");
    const int n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
    if (h % 2 || w % 2)
        throw std::invalid_argument("avgpool2: odd spatial size " + shape_str(a.shape));
    const int oh = h / 2, ow = w / 2;
    Tensor<T> out(Shape{n, c, oh, ow});
    for (std::size_t plane = 0; plane < static_cast<std::size_t>(n) * c; ++plane) {
        const T* src = a.data.data() + plane * h * w;
        T* dst = out.data.data() + plane * oh * ow;
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                const T* p = src + 2 * y * w + 2 * x;
                dst[y * ow + x] = (p[0] + p[1] + p[w] + p[w + 1]) * T(0.25);
            }
    }
    return out;
}

#define GANAD_INSTANTIATE_KERNELS(T)                                                     \
    template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&);                   \
    template Tensor<T> conv2d_input_grad<T>(const Tensor<T>&, const Tensor<T>&);        \
    template Tensor<T> conv2d_weight_grad<T>(const Tensor<T>&, const Tensor<T>&, int);  \
    template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&, bool, bool);       \
    template Tensor<T> upsample2<T>(const Tensor<T>&);                                  \
    template Tensor<T> avgpool2<T>(const Tensor<T>&);

GANAD_INSTANTIATE_KERNELS(float)
GANAD_INSTANTIATE_KERNELS(double)

}  // namespace kernels
}  // namespace ganad
