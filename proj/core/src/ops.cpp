#include "wzjscc/ops.hpp"

#include <cmath>
#include <memory>
#include <numeric>

#include <Eigen/Core>
#include <fmt/core.h>

#include "wzjscc/channel.hpp"
#include "wzjscc/errors.hpp"

namespace wzjscc::nn {

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

using detail::Node;

Node& input(Node& self, std::size_t i) { return *self.inputs[i]; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw InvalidArgument(fmt::format("{}: shape mismatch {} vs {}", op, a.shape().str(), b.shape().str()));
    }
}

void im2col(const double* x, int channels, int height, int width, int k, int stride, int pad, int out_h, int out_w,
            double* col) {
    const int plane = out_h * out_w;
    for (int c = 0; c < channels; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                double* row = col + static_cast<std::ptrdiff_t>((c * k + ki) * k + kj) * plane;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ki;
                    double* dst = row + oy * out_w;
                    if (iy < 0 || iy >= height) {
                        std::fill(dst, dst + out_w, 0.0);
                        continue;
                    }
                    const double* src = x + (static_cast<std::ptrdiff_t>(c) * height + iy) * width;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kj;
                        dst[ox] = (ix >= 0 && ix < width) ? src[ix] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_add(const double* col, int channels, int height, int width, int k, int stride, int pad, int out_h,
                int out_w, double* x) {
    const int plane = out_h * out_w;
    for (int c = 0; c < channels; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const double* row = col + static_cast<std::ptrdiff_t>((c * k + ki) * k + kj) * plane;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ki;
                    if (iy < 0 || iy >= height) {
                        continue;
                    }
                    double* dst = x + (static_cast<std::ptrdiff_t>(c) * height + iy) * width;
                    const double* src = row + oy * out_w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kj;
                        if (ix >= 0 && ix < width) {
                            dst[ix] += src[ox];
                        }
                    }
                }
            }
        }
    }
}

template <class Fn>
Tensor unary(const Tensor& x, Fn&& forward, std::function<void(Node&)> backward) {
    const auto in = x.data();
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        out[i] = forward(in[i]);
    }
    return Tensor::make_result(x.shape(), std::move(out), {x}, std::move(backward));
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) {
        out[i] = av[i] + bv[i];
    }
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        for (std::size_t j = 0; j < 2; ++j) {
            Node& in = input(self, j);
            if (!in.requires_grad) {
                continue;
            }
            auto& g = in.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i];
            }
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) {
        out[i] = av[i] - bv[i];
    }
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        for (std::size_t j = 0; j < 2; ++j) {
            Node& in = input(self, j);
            if (!in.requires_grad) {
                continue;
            }
            const double sign = j == 0 ? 1.0 : -1.0;
            auto& g = in.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += sign * self.grad[i];
            }
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) {
        out[i] = av[i] * bv[i];
    }
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        Node& a_in = input(self, 0);
        Node& b_in = input(self, 1);
        if (a_in.requires_grad) {
            auto& g = a_in.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i] * b_in.value[i];
            }
        }
        if (b_in.requires_grad) {
            auto& g = b_in.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i] * a_in.value[i];
            }
        }
    });
}

Tensor scale(const Tensor& a, double factor) {
    return unary(
        a, [factor](double v) { return v * factor; },
        [factor](Node& self) {
            auto& g = input(self, 0).ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += factor * self.grad[i];
            }
        });
}

Tensor add_constant(const Tensor& a, std::span<const double> c) {
    if (c.size() != a.numel()) {
        throw InvalidArgument(fmt::format("add_constant: {} values for shape {}", c.size(), a.shape().str()));
    }
    const auto av = a.data();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) {
        out[i] = av[i] + c[i];
    }
    return Tensor::make_result(a.shape(), std::move(out), {a}, [](Node& self) {
        auto& g = input(self, 0).ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i];
        }
    });
}

Tensor leaky_relu(const Tensor& x, double slope) {
    return unary(
        x, [slope](double v) { return v > 0.0 ? v : slope * v; },
        [slope](Node& self) {
            Node& in = input(self, 0);
            auto& g = in.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += in.value[i] > 0.0 ? self.grad[i] : slope * self.grad[i];
            }
        });
}

Tensor relu(const Tensor& x) { return leaky_relu(x, 0.0); }

Tensor sigmoid(const Tensor& x) {
    return unary(
        x,
        [](double v) {
            if (v >= 0.0) {
                return 1.0 / (1.0 + std::exp(-v));
            }
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](Node& self) {
            auto& g = input(self, 0).ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double y = self.value[i];
                g[i] += self.grad[i] * y * (1.0 - y);
            }
        });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding) {
    const Shape xs = x.shape();
    const Shape ws = w.shape();
    if (ws.c != xs.c || ws.h != ws.w) {
        throw InvalidArgument(fmt::format("conv2d: weight {} incompatible with input {}", ws.str(), xs.str()));
    }
    const int k = ws.h;
    const int out_h = (xs.h + 2 * padding - k) / stride + 1;
    const int out_w = (xs.w + 2 * padding - k) / stride + 1;
    if (out_h <= 0 || out_w <= 0 || stride <= 0) {
        throw InvalidArgument(fmt::format("conv2d: input {} too small for kernel {}", xs.str(), k));
    }
    const bool has_bias = bias.defined();
    if (has_bias && bias.numel() != static_cast<std::size_t>(ws.n)) {
        throw InvalidArgument("conv2d: bias length does not match output channels");
    }
    const int n_batch = xs.n;
    const int out_c = ws.n;
    const int patch = xs.c * k * k;
    const int plane = out_h * out_w;
    const bool direct = k == 1 && stride == 1 && padding == 0;

    auto cols = std::make_shared<std::vector<double>>();
    if (!direct) {
        cols->resize(static_cast<std::size_t>(n_batch) * patch * plane);
    }
    const auto xv = x.data();
    CMapR weight(w.data().data(), out_c, patch);
    std::vector<double> out(static_cast<std::size_t>(n_batch) * out_c * plane);
    for (int n = 0; n < n_batch; ++n) {
        const double* x_n = xv.data() + static_cast<std::ptrdiff_t>(n) * xs.item_size();
        const double* col = x_n;
        if (!direct) {
            double* buf = cols->data() + static_cast<std::ptrdiff_t>(n) * patch * plane;
            im2col(x_n, xs.c, xs.h, xs.w, k, stride, padding, out_h, out_w, buf);
            col = buf;
        }
        MapR out_n(out.data() + static_cast<std::ptrdiff_t>(n) * out_c * plane, out_c, plane);
        out_n.noalias() = weight * CMapR(col, patch, plane);
        if (has_bias) {
            const auto bv = bias.data();
            for (int o = 0; o < out_c; ++o) {
                out_n.row(o).array() += bv[static_cast<std::size_t>(o)];
            }
        }
    }

    std::vector<Tensor> inputs{x, w};
    if (has_bias) {
        inputs.push_back(bias);
    }
    const Shape out_shape{n_batch, out_c, out_h, out_w};
    return Tensor::make_result(
        out_shape, std::move(out), std::move(inputs),
        [=, cols = std::move(cols)](Node& self) {
            Node& x_in = input(self, 0);
            Node& w_in = input(self, 1);
            CMapR weight_b(w_in.value.data(), out_c, patch);
            std::vector<double> gcol;
            if (x_in.requires_grad) {
                gcol.resize(static_cast<std::size_t>(patch) * plane);
            }
            for (int n = 0; n < n_batch; ++n) {
                CMapR g_out(self.grad.data() + static_cast<std::ptrdiff_t>(n) * out_c * plane, out_c, plane);
                const double* col = direct ? x_in.value.data() + static_cast<std::ptrdiff_t>(n) * xs.item_size()
                                           : cols->data() + static_cast<std::ptrdiff_t>(n) * patch * plane;
                if (w_in.requires_grad) {
                    MapR g_w(w_in.ensure_grad().data(), out_c, patch);
                    g_w.noalias() += g_out * CMapR(col, patch, plane).transpose();
                }
                if (has_bias && input(self, 2).requires_grad) {
                    auto& g_b = input(self, 2).ensure_grad();
                    for (int o = 0; o < out_c; ++o) {
                        // Plain loop: Eigen's vectorized sum peels by address, which
                        // would make the result depend on buffer alignment.
                        const double* row = g_out.data() + static_cast<std::ptrdiff_t>(o) * plane;
                        g_b[static_cast<std::size_t>(o)] += std::accumulate(row, row + plane, 0.0);
                    }
                }
                if (x_in.requires_grad) {
                    double* g_x = x_in.ensure_grad().data() + static_cast<std::ptrdiff_t>(n) * xs.item_size();
                    if (direct) {
                        MapR(g_x, patch, plane).noalias() += weight_b.transpose() * g_out;
                    } else {
                        MapR(gcol.data(), patch, plane).noalias() = weight_b.transpose() * g_out;
                        col2im_add(gcol.data(), xs.c, xs.h, xs.w, k, stride, padding, out_h, out_w, g_x);
                    }
                }
            }
        });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
    const Shape xs = x.shape();
    const Shape ws = w.shape();
    const int features = static_cast<int>(xs.item_size());
    if (static_cast<int>(ws.item_size()) != features) {
        throw InvalidArgument(fmt::format("linear: weight {} incompatible with input {}", ws.str(), xs.str()));
    }
    const int out_f = ws.n;
    const int n_batch = xs.n;
    std::vector<double> out(static_cast<std::size_t>(n_batch) * out_f);
    MapR y(out.data(), n_batch, out_f);
    y.noalias() = CMapR(x.data().data(), n_batch, features) * CMapR(w.data().data(), out_f, features).transpose();
    const auto bv = bias.data();
    for (int n = 0; n < n_batch; ++n) {
        for (int o = 0; o < out_f; ++o) {
            y(n, o) += bv[static_cast<std::size_t>(o)];
        }
    }
    return Tensor::make_result(Shape{n_batch, out_f, 1, 1}, std::move(out), {x, w, bias},
                               [=](Node& self) {
                                   Node& x_in = input(self, 0);
                                   Node& w_in = input(self, 1);
                                   Node& b_in = input(self, 2);
                                   CMapR g(self.grad.data(), n_batch, out_f);
                                   if (x_in.requires_grad) {
                                       MapR(x_in.ensure_grad().data(), n_batch, features).noalias() +=
                                           g * CMapR(w_in.value.data(), out_f, features);
                                   }
                                   if (w_in.requires_grad) {
                                       MapR(w_in.ensure_grad().data(), out_f, features).noalias() +=
                                           g.transpose() * CMapR(x_in.value.data(), n_batch, features);
                                   }
                                   if (b_in.requires_grad) {
                                       auto& gb = b_in.ensure_grad();
                                       for (int o = 0; o < out_f; ++o) {
                                           double acc = 0.0;
                                           for (int r = 0; r < n_batch; ++r) {
                                               acc += g(r, o);
                                           }
                                           gb[static_cast<std::size_t>(o)] += acc;
                                       }
                                   }
                               });
}

Tensor concat_channels(std::span<const Tensor> parts) {
    if (parts.empty()) {
        throw InvalidArgument("concat_channels: no inputs");
    }
    const Shape first = parts.front().shape();
    int total_c = 0;
    for (const auto& p : parts) {
        const Shape s = p.shape();
        if (s.n != first.n || s.h != first.h || s.w != first.w) {
            throw InvalidArgument(
                fmt::format("concat_channels: {} does not match {}", s.str(), first.str()));
        }
        total_c += s.c;
    }
    const std::size_t plane = static_cast<std::size_t>(first.h) * first.w;
    const Shape out_shape{first.n, total_c, first.h, first.w};
    std::vector<double> out(out_shape.numel());
    std::vector<std::size_t> offsets;
    std::size_t offset = 0;
    for (const auto& p : parts) {
        offsets.push_back(offset);
        const std::size_t block = static_cast<std::size_t>(p.shape().c) * plane;
        const auto v = p.data();
        for (int n = 0; n < first.n; ++n) {
            std::copy_n(v.data() + n * block, block, out.data() + n * out_shape.item_size() + offset);
        }
        offset += block;
    }
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    return Tensor::make_result(out_shape, std::move(out), std::move(inputs), [=](Node& self) {
        for (std::size_t j = 0; j < self.inputs.size(); ++j) {
            Node& in = input(self, j);
            if (!in.requires_grad) {
                continue;
            }
            auto& g = in.ensure_grad();
            const std::size_t block = static_cast<std::size_t>(in.shape.c) * plane;
            for (int n = 0; n < out_shape.n; ++n) {
                const double* src = self.grad.data() + n * out_shape.item_size() + offsets[j];
                double* dst = g.data() + n * block;
                for (std::size_t i = 0; i < block; ++i) {
                    dst[i] += src[i];
                }
            }
        }
    });
}

Tensor global_avg_pool(const Tensor& x) {
    const Shape s = x.shape();
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    const auto v = x.data();
    std::vector<double> out(static_cast<std::size_t>(s.n) * s.c);
    for (std::size_t i = 0; i < out.size(); ++i) {
        double acc = 0.0;
        for (std::size_t p = 0; p < plane; ++p) {
            acc += v[i * plane + p];
        }
        out[i] = acc / static_cast<double>(plane);
    }
    return Tensor::make_result(Shape{s.n, s.c, 1, 1}, std::move(out), {x}, [plane](Node& self) {
        auto& g = input(self, 0).ensure_grad();
        const double inv = 1.0 / static_cast<double>(plane);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double gi = self.grad[i] * inv;
            for (std::size_t p = 0; p < plane; ++p) {
                g[i * plane + p] += gi;
            }
        }
    });
}

Tensor channel_gate(const Tensor& x, const Tensor& gate) {
    const Shape s = x.shape();
    const Shape gs = gate.shape();
    if (gs.n != s.n || gs.c != s.c || gs.h != 1 || gs.w != 1) {
        throw InvalidArgument(fmt::format("channel_gate: gate {} incompatible with {}", gs.str(), s.str()));
    }
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    const auto xv = x.data();
    const auto gv = gate.data();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < gv.size(); ++i) {
        for (std::size_t p = 0; p < plane; ++p) {
            out[i * plane + p] = xv[i * plane + p] * gv[i];
        }
    }
    return Tensor::make_result(s, std::move(out), {x, gate}, [plane](Node& self) {
        Node& x_in = input(self, 0);
        Node& g_in = input(self, 1);
        const std::size_t groups = g_in.value.size();
        if (x_in.requires_grad) {
            auto& g = x_in.ensure_grad();
            for (std::size_t i = 0; i < groups; ++i) {
                for (std::size_t p = 0; p < plane; ++p) {
                    g[i * plane + p] += self.grad[i * plane + p] * g_in.value[i];
                }
            }
        }
        if (g_in.requires_grad) {
            auto& g = g_in.ensure_grad();
            for (std::size_t i = 0; i < groups; ++i) {
                double acc = 0.0;
                for (std::size_t p = 0; p < plane; ++p) {
                    acc += self.grad[i * plane + p] * x_in.value[i * plane + p];
                }
                g[i] += acc;
            }
        }
    });
}

Tensor upsample_nearest2x(const Tensor& x) {
    const Shape s = x.shape();
    const Shape os{s.n, s.c, 2 * s.h, 2 * s.w};
    const auto v = x.data();
    std::vector<double> out(os.numel());
    const std::size_t maps = static_cast<std::size_t>(s.n) * s.c;
    for (std::size_t m = 0; m < maps; ++m) {
        const double* src = v.data() + m * s.h * s.w;
        double* dst = out.data() + m * os.h * os.w;
        for (int y = 0; y < os.h; ++y) {
            for (int xx = 0; xx < os.w; ++xx) {
                dst[y * os.w + xx] = src[(y / 2) * s.w + xx / 2];
            }
        }
    }
    return Tensor::make_result(os, std::move(out), {x}, [s, os, maps](Node& self) {
        auto& g = input(self, 0).ensure_grad();
        for (std::size_t m = 0; m < maps; ++m) {
            const double* src = self.grad.data() + m * os.h * os.w;
            double* dst = g.data() + m * s.h * s.w;
            for (int y = 0; y < os.h; ++y) {
                for (int xx = 0; xx < os.w; ++xx) {
                    dst[(y / 2) * s.w + xx / 2] += src[y * os.w + xx];
                }
            }
        }
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape.numel() != x.numel()) {
        throw InvalidArgument(fmt::format("reshape: {} -> {} changes element count", x.shape().str(), shape.str()));
    }
    const auto v = x.data();
    return Tensor::make_result(shape, std::vector<double>(v.begin(), v.end()), {x}, [](Node& self) {
        auto& g = input(self, 0).ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i];
        }
    });
}

Tensor power_normalize(const Tensor& x, double p_avg) {
    const Shape s = x.shape();
    const std::size_t item = s.item_size();
    if (s.c % 2 != 0) {
        throw InvalidArgument(fmt::format("power_normalize: latent channel count {} is odd", s.c));
    }
    const double k = static_cast<double>(item / 2);
    const auto v = x.data();
    std::vector<double> out(v.size());
    auto norms = std::make_shared<std::vector<double>>(static_cast<std::size_t>(s.n));
    for (int n = 0; n < s.n; ++n) {
        const std::span<const double> real = v.subspan(n * item, item);
        const auto packed = channel::pack_complex(real, static_cast<std::size_t>(s.c), static_cast<std::size_t>(s.h),
                                                  static_cast<std::size_t>(s.w));
        const auto symbols = channel::power_normalize(packed, p_avg);
        const auto unpacked = channel::unpack_complex(symbols.values);
        std::copy(unpacked.begin(), unpacked.end(), out.begin() + n * item);
        double energy = 0.0;
        for (double r : real) {
            energy += r * r;
        }
        (*norms)[static_cast<std::size_t>(n)] = std::sqrt(energy);
    }
    return Tensor::make_result(s, std::move(out), {x}, [=, norms = std::move(norms)](Node& self) {
        Node& in = input(self, 0);
        auto& g = in.ensure_grad();
        for (int n = 0; n < s.n; ++n) {
            const double norm = (*norms)[static_cast<std::size_t>(n)];
            const double factor = std::sqrt(k * p_avg) / norm;
            const double* vin = in.value.data() + n * item;
            const double* gout = self.grad.data() + n * item;
            double dot = 0.0;
            for (std::size_t i = 0; i < item; ++i) {
                dot += vin[i] * gout[i];
            }
            const double proj = dot / (norm * norm);
            double* gin = g.data() + n * item;
            for (std::size_t i = 0; i < item; ++i) {
                gin[i] += factor * (gout[i] - vin[i] * proj);
            }
        }
    });
}

Tensor unit_normalize_channels(const Tensor& x, double eps) {
    const Shape s = x.shape();
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    const auto v = x.data();
    std::vector<double> out(v.size());
    auto radius = std::make_shared<std::vector<double>>(static_cast<std::size_t>(s.n) * plane);
    for (int n = 0; n < s.n; ++n) {
        const std::size_t base = n * s.item_size();
        for (std::size_t p = 0; p < plane; ++p) {
            double acc = eps;
            for (int c = 0; c < s.c; ++c) {
                const double e = v[base + c * plane + p];
                acc += e * e;
            }
            const double r = std::sqrt(acc);
            (*radius)[n * plane + p] = r;
            for (int c = 0; c < s.c; ++c) {
                out[base + c * plane + p] = v[base + c * plane + p] / r;
            }
        }
    }
    return Tensor::make_result(s, std::move(out), {x}, [=, radius = std::move(radius)](Node& self) {
        Node& in = input(self, 0);
        auto& g = in.ensure_grad();
        for (int n = 0; n < s.n; ++n) {
            const std::size_t base = n * s.item_size();
            for (std::size_t p = 0; p < plane; ++p) {
                const double r = (*radius)[n * plane + p];
                double dot = 0.0;
                for (int c = 0; c < s.c; ++c) {
                    dot += self.grad[base + c * plane + p] * in.value[base + c * plane + p];
                }
                const double r3 = r * r * r;
                for (int c = 0; c < s.c; ++c) {
                    const std::size_t i = base + c * plane + p;
                    g[i] += self.grad[i] / r - in.value[i] * dot / r3;
                }
            }
        }
    });
}

Tensor mean(const Tensor& x) {
    const auto v = x.data();
    double acc = 0.0;
    for (double e : v) {
        acc += e;
    }
    const double count = static_cast<double>(v.size());
    return Tensor::make_result(Shape{}, {acc / count}, {x}, [count](Node& self) {
        auto& g = input(self, 0).ensure_grad();
        const double gi = self.grad[0] / count;
        for (double& e : g) {
            e += gi;
        }
    });
}

Tensor mean_per_item(const Tensor& x) {
    const Shape s = x.shape();
    const std::size_t item = s.item_size();
    const auto v = x.data();
    std::vector<double> out(static_cast<std::size_t>(s.n));
    for (int n = 0; n < s.n; ++n) {
        double acc = 0.0;
        for (std::size_t i = 0; i < item; ++i) {
            acc += v[n * item + i];
        }
        out[static_cast<std::size_t>(n)] = acc / static_cast<double>(item);
    }
    return Tensor::make_result(Shape{s.n, 1, 1, 1}, std::move(out), {x}, [item](Node& self) {
        auto& g = input(self, 0).ensure_grad();
        for (std::size_t n = 0; n < self.grad.size(); ++n) {
            const double gi = self.grad[n] / static_cast<double>(item);
            for (std::size_t i = 0; i < item; ++i) {
                g[n * item + i] += gi;
            }
        }
    });
}

Tensor mse(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mse");
    const auto av = a.data();
    const auto bv = b.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        const double d = av[i] - bv[i];
        acc += d * d;
    }
    const double count = static_cast<double>(av.size());
    return Tensor::make_result(Shape{}, {acc / count}, {a, b}, [count](Node& self) {
        Node& a_in = input(self, 0);
        Node& b_in = input(self, 1);
        const double factor = 2.0 * self.grad[0] / count;
        if (a_in.requires_grad) {
            auto& g = a_in.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += factor * (a_in.value[i] - b_in.value[i]);
            }
        }
        if (b_in.requires_grad) {
            auto& g = b_in.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] -= factor * (a_in.value[i] - b_in.value[i]);
            }
        }
    });
}

} // namespace wzjscc::nn
