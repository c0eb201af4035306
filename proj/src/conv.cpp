#include <algorithm>
#include <vector>

#include "plrlab/error.hpp"
#include "plrlab/layers.hpp"
#include "plrlab/numerics.hpp"

namespace plr {

namespace {

struct ConvGeometry {
    std::size_t batch, in_c, in_h, in_w;
    std::size_t out_c, kh, kw;
    std::size_t out_h, out_w;
    std::size_t stride, pad;

    std::size_t patch() const { return in_c * kh * kw; }
    std::size_t out_area() const { return out_h * out_w; }
    bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

ConvGeometry geometry(const Tensor& x, const ConvParams& p) {
    if (x.rank() != 4 || p.kernels.rank() != 4) {
        throw DimensionError("conv2d: expected rank-4 input and kernels, got " +
                             shape_string(x.shape()) + " and " + shape_string(p.kernels.shape()));
    }
    if (p.stride == 0) throw DimensionError("conv2d: stride must be positive");
    if (x.dim(1) != p.kernels.dim(1)) {
        throw DimensionError("conv2d: input has " + std::to_string(x.dim(1)) +
                             " channels, kernels expect " + std::to_string(p.kernels.dim(1)));
    }
    if (p.bias.size() != p.kernels.dim(0)) {
        throw DimensionError("conv2d: bias length does not match kernel count");
    }
    ConvGeometry g{};
    g.batch = x.dim(0);
    g.in_c = x.dim(1);
    g.in_h = x.dim(2);
    g.in_w = x.dim(3);
    g.out_c = p.kernels.dim(0);
    g.kh = p.kernels.dim(2);
    g.kw = p.kernels.dim(3);
    g.stride = p.stride;
    g.pad = p.pad;
    g.out_h = conv_output_extent(g.in_h, g.kh, g.stride, g.pad);
    g.out_w = conv_output_extent(g.in_w, g.kw, g.stride, g.pad);
    return g;
}

// cols is patch x out_area for one image.
void im2col(const ConvGeometry& g, const double* img, double* cols) {
    const std::size_t area = g.out_area();
    const long in_h = static_cast<long>(g.in_h);
    const long in_w = static_cast<long>(g.in_w);
    const long pad = static_cast<long>(g.pad);
    const long stride = static_cast<long>(g.stride);
    for (std::size_t c = 0; c < g.in_c; ++c) {
        const double* plane = img + c * g.in_h * g.in_w;
        for (std::size_t i = 0; i < g.kh; ++i) {
            for (std::size_t j = 0; j < g.kw; ++j) {
                double* row = cols + ((c * g.kh + i) * g.kw + j) * area;
                // Output columns [lo, hi) read inside the image.
                const long shift = static_cast<long>(j) - pad;
                long lo = shift >= 0 ? 0 : (-shift + stride - 1) / stride;
                long hi = (in_w - shift + stride - 1) / stride;
                lo = std::min<long>(lo, static_cast<long>(g.out_w));
                hi = std::clamp<long>(hi, lo, static_cast<long>(g.out_w));
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    double* dst = row + oy * g.out_w;
                    const long y = static_cast<long>(oy) * stride + static_cast<long>(i) - pad;
                    if (y < 0 || y >= in_h) {
                        std::fill(dst, dst + g.out_w, 0.0);
                        continue;
                    }
                    const long base = y * in_w + shift;
                    std::fill(dst, dst + lo, 0.0);
                    if (stride == 1) {
                        std::copy(plane + base + lo, plane + base + hi, dst + lo);
                    } else {
                        for (long ox = lo; ox < hi; ++ox) dst[ox] = plane[base + ox * stride];
                    }
                    std::fill(dst + hi, dst + g.out_w, 0.0);
                }
            }
        }
    }
}

void col2im_add(const ConvGeometry& g, const double* cols, double* img) {
    const std::size_t area = g.out_area();
    for (std::size_t c = 0; c < g.in_c; ++c) {
        for (std::size_t i = 0; i < g.kh; ++i) {
            for (std::size_t j = 0; j < g.kw; ++j) {
                const double* row = cols + ((c * g.kh + i) * g.kw + j) * area;
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const long y = static_cast<long>(oy * g.stride + i) - static_cast<long>(g.pad);
                    if (y < 0 || y >= static_cast<long>(g.in_h)) continue;
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        const long xx =
                            static_cast<long>(ox * g.stride + j) - static_cast<long>(g.pad);
                        if (xx < 0 || xx >= static_cast<long>(g.in_w)) continue;
                        img[(c * g.in_h + static_cast<std::size_t>(y)) * g.in_w +
                            static_cast<std::size_t>(xx)] += row[oy * g.out_w + ox];
                    }
                }
            }
        }
    }
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t pad) {
    if (stride == 0) throw DimensionError("stride must be positive");
    if (in + 2 * pad < kernel) {
        throw DimensionError("padded extent " + std::to_string(in + 2 * pad) +
                             " is smaller than kernel " + std::to_string(kernel));
    }
    return (in + 2 * pad - kernel) / stride + 1;
}

Tensor conv2d_forward(const Tensor& x, const ConvParams& p) {
    const ConvGeometry g = geometry(x, p);
    Tensor y({g.batch, g.out_c, g.out_h, g.out_w});
    const std::size_t area = g.out_area();
    const std::size_t in_size = g.in_c * g.in_h * g.in_w;
    std::vector<double> cols(g.pointwise() ? 0 : g.patch() * area);
    for (std::size_t n = 0; n < g.batch; ++n) {
        const double* img = x.data() + n * in_size;
        double* out = y.data() + n * g.out_c * area;
        for (std::size_t o = 0; o < g.out_c; ++o) {
            for (std::size_t a = 0; a < area; ++a) out[o * area + a] = p.bias[o];
        }
        const double* src = img;
        if (!g.pointwise()) {
            im2col(g, img, cols.data());
            src = cols.data();
        }
        gemm(Transpose::No, Transpose::No, g.out_c, area, g.patch(), 1.0, p.kernels.data(), src,
             1.0, out);
    }
    return y;
}

ConvGrads conv2d_backward(const Tensor& x, const ConvParams& p, const Tensor& dy) {
    const ConvGeometry g = geometry(x, p);
    if (dy.shape() != Shape{g.batch, g.out_c, g.out_h, g.out_w}) {
        throw DimensionError("conv2d_backward: upstream gradient has shape " +
                             shape_string(dy.shape()));
    }
    ConvGrads grads{Tensor(x.shape()), Tensor(p.kernels.shape()), Tensor(p.bias.shape())};
    const std::size_t area = g.out_area();
    const std::size_t in_size = g.in_c * g.in_h * g.in_w;
    std::vector<double> cols(g.pointwise() ? 0 : g.patch() * area);
    std::vector<double> dcols(g.pointwise() ? 0 : g.patch() * area);
    for (std::size_t n = 0; n < g.batch; ++n) {
        const double* img = x.data() + n * in_size;
        const double* d = dy.data() + n * g.out_c * area;
        for (std::size_t o = 0; o < g.out_c; ++o) {
            double s = 0.0;
            for (std::size_t a = 0; a < area; ++a) s += d[o * area + a];
            grads.bias[o] += s;
        }
        double* dimg = grads.input.data() + n * in_size;
        if (g.pointwise()) {
            gemm(Transpose::No, Transpose::Yes, g.out_c, g.patch(), area, 1.0, d, img, 1.0,
                 grads.kernels.data());
            gemm(Transpose::Yes, Transpose::No, g.patch(), area, g.out_c, 1.0, p.kernels.data(), d,
                 0.0, dimg);
        } else {
            im2col(g, img, cols.data());
            gemm(Transpose::No, Transpose::Yes, g.out_c, g.patch(), area, 1.0, d, cols.data(), 1.0,
                 grads.kernels.data());
            gemm(Transpose::Yes, Transpose::No, g.patch(), area, g.out_c, 1.0, p.kernels.data(), d,
                 0.0, dcols.data());
            col2im_add(g, dcols.data(), dimg);
        }
    }
    return grads;
}

}  // namespace plr
