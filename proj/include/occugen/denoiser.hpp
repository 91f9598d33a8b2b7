#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "occugen/diffusion.hpp"
#include "occugen/grid.hpp"
#include "occugen/io.hpp"
#include "occugen/rng.hpp"
#include "occugen/schedule.hpp"
#include "occugen/tensor.hpp"

namespace occugen {

/// Architecture descriptor for the noise-prediction network: a 3D
/// convolutional encoder-decoder with two stride-2 downsampling stages,
/// residual blocks at every level, skip connections across matching
/// resolutions and a sinusoidal timestep embedding injected per block.
struct ModelConfig {
    int base_channels = 8;  // full-resolution width
    int mid_channels = 16;  // half/quarter-resolution width
    int time_embed_dim = 32;
    int time_hidden = 64;

    void validate() const {
        if (base_channels < 1 || mid_channels < 1) throw std::invalid_argument("channel widths must be positive");
        if (time_embed_dim < 2 || time_embed_dim % 2 != 0)
            throw std::invalid_argument("time_embed_dim must be even and >= 2");
        if (time_hidden < 1) throw std::invalid_argument("time_hidden must be positive");
    }
};

namespace detail {

struct ParamSpan {
    size_t off = 0;
    size_t n = 0;
};

} // namespace detail

/// Noise predictor. Real = float for production, double for gradient tests.
/// Grid dims must be divisible by 4 (two exact downsampling stages).
template <typename Real>
class DenoiserModelT {
public:
    using T3 = Tensor<Real>;

    explicit DenoiserModelT(ModelConfig cfg = {}) : cfg_(cfg) {
        cfg_.validate();
        allocate();
    }

    const ModelConfig& config() const { return cfg_; }
    size_t param_count() const { return params_.size(); }
    std::vector<Real>& params() { return params_; }
    const std::vector<Real>& params() const { return params_; }

    /// He-style init; the closing conv of every residual block, the output
    /// head and the time projections start at zero so the untrained model
    /// predicts a zero noise field.
    void init_weights(uint64_t seed) {
        Rng rng(seed);
        std::fill(params_.begin(), params_.end(), Real(0));
        const auto randn_fill = [&](const detail::ParamSpan& w, int fan_in) {
            const double std = std::sqrt(2.0 / fan_in);
            for (size_t i = 0; i < w.n; ++i) params_[w.off + i] = Real(std * rng.normal());
        };
        const int c1 = cfg_.base_channels, c2 = cfg_.mid_channels;
        randn_fill(time_l1_w_, cfg_.time_embed_dim);
        randn_fill(time_l2_w_, cfg_.time_hidden);
        randn_fill(conv_in_w_, 1 * 27);
        randn_fill(rb_[0].a_w, c1 * 27);
        randn_fill(down1_w_, c1 * 27);
        randn_fill(rb_[1].a_w, c2 * 27);
        randn_fill(down2_w_, c2 * 27);
        randn_fill(rb_[2].a_w, c2 * 27);
        randn_fill(up1_w_, c2 * 27);
        randn_fill(rb_[3].a_w, c2 * 27);
        randn_fill(up2_w_, c2 * 27);
        randn_fill(rb_[4].a_w, c1 * 27);
        // rb_[i].b_w, proj, conv_out stay zero.
    }

    struct ResBlockWs {
        T3 s1, h1, s2, out;
    };

    /// Per-sample activations retained for backward.
    struct Workspace {
        int t = 0;
        T3 x, a0, d1, d2, r3up, u1, r4up, u2, out;
        ResBlockWs rb[5];
        std::vector<Real> t0, t1, t1a, t2, temb;
        std::array<std::vector<Real>, 5> tb;
    };

    /// eps prediction for a grid already in signal space. Thread-safe.
    std::vector<float> operator()(const LocalGrid& x_signal, int t) const {
        std::vector<Real> x(x_signal.size());
        for (size_t i = 0; i < x.size(); ++i) x[i] = Real(x_signal.values()[i]);
        Workspace ws;
        forward(x, x_signal.dim_x(), x_signal.dim_y(), x_signal.dim_z(), t, ws);
        std::vector<float> out(ws.out.size());
        for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(ws.out.v[i]);
        return out;
    }

    /// Forward pass; x is x-fastest with dims (X, Y, Z), single channel.
    void forward(const std::vector<Real>& x, int X, int Y, int Z, int t, Workspace& ws) const {
        if (x.size() != static_cast<size_t>(X) * Y * Z)
            throw std::invalid_argument("denoiser input shape mismatch");
        if (X % 4 || Y % 4 || Z % 4)
            throw std::invalid_argument("denoiser grid dims must be divisible by 4");
        const int c1 = cfg_.base_channels, c2 = cfg_.mid_channels;
        ws.t = t;

        // Time path.
        sinusoidal_embed(t, ws.t0);
        nn::linear_forward(ws.t0, p(time_l1_w_), p(time_l1_b_), cfg_.time_hidden, ws.t1);
        silu_vec(ws.t1, ws.t1a);
        nn::linear_forward(ws.t1a, p(time_l2_w_), p(time_l2_b_), cfg_.time_hidden, ws.t2);
        silu_vec(ws.t2, ws.temb);
        const int proj_out[5] = {c1, c2, c2, c2, c1};
        for (int i = 0; i < 5; ++i)
            nn::linear_forward(ws.temb, p(proj_w_[i]), p(proj_b_[i]), proj_out[i], ws.tb[i]);

        // Encoder.
        ws.x = T3(1, Z, Y, X);
        std::copy(x.begin(), x.end(), ws.x.v.begin());
        ws.a0 = T3(c1, Z, Y, X);
        nn::conv3_forward(ws.x, p(conv_in_w_), p(conv_in_b_), ws.a0);
        resblock_forward(0, ws.a0, ws.tb[0], ws.rb[0]);

        const int X2 = nn::conv3s2_out_dim(X), Y2 = nn::conv3s2_out_dim(Y), Z2 = nn::conv3s2_out_dim(Z);
        ws.d1 = T3(c2, Z2, Y2, X2);
        nn::conv3s2_forward(ws.rb[0].out, p(down1_w_), p(down1_b_), ws.d1);
        resblock_forward(1, ws.d1, ws.tb[1], ws.rb[1]);

        const int X4 = nn::conv3s2_out_dim(X2), Y4 = nn::conv3s2_out_dim(Y2), Z4 = nn::conv3s2_out_dim(Z2);
        ws.d2 = T3(c2, Z4, Y4, X4);
        nn::conv3s2_forward(ws.rb[1].out, p(down2_w_), p(down2_b_), ws.d2);
        resblock_forward(2, ws.d2, ws.tb[2], ws.rb[2]);

        // Decoder with additive skips.
        ws.r3up = T3(c2, Z2, Y2, X2);
        nn::upsample2_forward(ws.rb[2].out, ws.r3up);
        ws.u1 = T3(c2, Z2, Y2, X2);
        nn::conv3_forward(ws.r3up, p(up1_w_), p(up1_b_), ws.u1);
        for (size_t i = 0; i < ws.u1.size(); ++i) ws.u1.v[i] += ws.rb[1].out.v[i];
        resblock_forward(3, ws.u1, ws.tb[3], ws.rb[3]);

        ws.r4up = T3(c2, Z, Y, X);
        nn::upsample2_forward(ws.rb[3].out, ws.r4up);
        ws.u2 = T3(c1, Z, Y, X);
        nn::conv3_forward(ws.r4up, p(up2_w_), p(up2_b_), ws.u2);
        for (size_t i = 0; i < ws.u2.size(); ++i) ws.u2.v[i] += ws.rb[0].out.v[i];
        resblock_forward(4, ws.u2, ws.tb[4], ws.rb[4]);

        ws.out = T3(1, Z, Y, X);
        nn::conv3_forward(ws.rb[4].out, p(conv_out_w_), p(conv_out_b_), ws.out);
    }

    /// Accumulates parameter gradients for one sample given dL/d(output).
    /// `grads` must have param_count() entries. Thread-safe across samples
    /// when each call gets its own buffer.
    void backward(const Workspace& ws, const std::vector<Real>& g_out_flat,
                  std::vector<Real>& grads) const {
        if (grads.size() != params_.size()) throw std::invalid_argument("gradient buffer size mismatch");
        const int c1 = cfg_.base_channels, c2 = cfg_.mid_channels;
        const int X = ws.x.xd, Y = ws.x.yd, Z = ws.x.zd;
        const int X2 = ws.d1.xd, Y2 = ws.d1.yd, Z2 = ws.d1.zd;
        const auto g = [&grads](const Span& s) { return grads.data() + s.off; };

        std::vector<Real> g_temb(cfg_.time_hidden, Real(0));

        T3 g_out(1, Z, Y, X);
        std::copy(g_out_flat.begin(), g_out_flat.end(), g_out.v.begin());

        T3 g_rb5out(c1, Z, Y, X);
        nn::conv3_backward(ws.rb[4].out, p(conv_out_w_), g_out, g_rb5out, g(conv_out_w_), g(conv_out_b_));

        T3 g_u2(c1, Z, Y, X);
        resblock_backward(4, ws.u2, ws.rb[4], ws.temb, g_rb5out, g_u2, g_temb, grads);

        // u2 = conv_up2(r4up) + rb1.out
        T3 g_r4up(c2, Z, Y, X);
        nn::conv3_backward(ws.r4up, p(up2_w_), g_u2, g_r4up, g(up2_w_), g(up2_b_));
        T3 g_rb4out(c2, ws.rb[3].out.zd, ws.rb[3].out.yd, ws.rb[3].out.xd);
        nn::upsample2_backward(g_r4up, g_rb4out);

        T3 g_u1(c2, Z2, Y2, X2);
        resblock_backward(3, ws.u1, ws.rb[3], ws.temb, g_rb4out, g_u1, g_temb, grads);

        // u1 = conv_up1(r3up) + rb2.out
        T3 g_r3up(c2, Z2, Y2, X2);
        nn::conv3_backward(ws.r3up, p(up1_w_), g_u1, g_r3up, g(up1_w_), g(up1_b_));
        T3 g_rb3out(c2, ws.rb[2].out.zd, ws.rb[2].out.yd, ws.rb[2].out.xd);
        nn::upsample2_backward(g_r3up, g_rb3out);

        T3 g_d2(c2, ws.d2.zd, ws.d2.yd, ws.d2.xd);
        resblock_backward(2, ws.d2, ws.rb[2], ws.temb, g_rb3out, g_d2, g_temb, grads);

        T3 g_rb2out(c2, Z2, Y2, X2);
        nn::conv3s2_backward(ws.rb[1].out, p(down2_w_), g_d2, g_rb2out, g(down2_w_), g(down2_b_));
        for (size_t i = 0; i < g_rb2out.size(); ++i) g_rb2out.v[i] += g_u1.v[i]; // skip into u1

        T3 g_d1(c2, Z2, Y2, X2);
        resblock_backward(1, ws.d1, ws.rb[1], ws.temb, g_rb2out, g_d1, g_temb, grads);

        T3 g_rb1out(c1, Z, Y, X);
        nn::conv3s2_backward(ws.rb[0].out, p(down1_w_), g_d1, g_rb1out, g(down1_w_), g(down1_b_));
        for (size_t i = 0; i < g_rb1out.size(); ++i) g_rb1out.v[i] += g_u2.v[i]; // skip into u2

        T3 g_a0(c1, Z, Y, X);
        resblock_backward(0, ws.a0, ws.rb[0], ws.temb, g_rb1out, g_a0, g_temb, grads);

        T3 g_x(1, Z, Y, X);
        nn::conv3_backward(ws.x, p(conv_in_w_), g_a0, g_x, g(conv_in_w_), g(conv_in_b_));

        // Time path backward.
        std::vector<Real> g_t2(cfg_.time_hidden), g_t1a(cfg_.time_hidden), g_t1, g_t0;
        for (int i = 0; i < cfg_.time_hidden; ++i) {
            const Real s = nn::sigmoid(ws.t2[i]);
            g_t2[i] = g_temb[i] * s * (Real(1) + ws.t2[i] * (Real(1) - s));
        }
        nn::linear_backward(ws.t1a, p(time_l2_w_), g_t2, g_t1a, g(time_l2_w_), g(time_l2_b_));
        g_t1.resize(cfg_.time_hidden);
        for (int i = 0; i < cfg_.time_hidden; ++i) {
            const Real s = nn::sigmoid(ws.t1[i]);
            g_t1[i] = g_t1a[i] * s * (Real(1) + ws.t1[i] * (Real(1) - s));
        }
        nn::linear_backward(ws.t0, p(time_l1_w_), g_t1, g_t0, g(time_l1_w_), g(time_l1_b_));
    }

    /// The gradient buffer backward() fills; allocate one per concurrent call.
    std::vector<Real> make_grad_buffer() const { return std::vector<Real>(params_.size(), Real(0)); }

private:
    using Span = detail::ParamSpan;

    struct ResBlockParams {
        Span a_w, a_b, b_w, b_b;
        int channels = 0;
    };

    void allocate() {
        const int c1 = cfg_.base_channels, c2 = cfg_.mid_channels;
        const int E = cfg_.time_embed_dim, H = cfg_.time_hidden;
        size_t off = 0;
        const auto span = [&off](size_t n) {
            Span s{off, n};
            off += n;
            return s;
        };
        time_l1_w_ = span(static_cast<size_t>(H) * E);
        time_l1_b_ = span(H);
        time_l2_w_ = span(static_cast<size_t>(H) * H);
        time_l2_b_ = span(H);
        const int proj_out[5] = {c1, c2, c2, c2, c1};
        for (int i = 0; i < 5; ++i) {
            proj_w_[i] = span(static_cast<size_t>(proj_out[i]) * H);
            proj_b_[i] = span(proj_out[i]);
        }
        conv_in_w_ = span(nn::conv3_weight_count(c1, 1));
        conv_in_b_ = span(c1);
        const int rb_ch[5] = {c1, c2, c2, c2, c1};
        for (int i = 0; i < 5; ++i) {
            rb_[i].channels = rb_ch[i];
            rb_[i].a_w = span(nn::conv3_weight_count(rb_ch[i], rb_ch[i]));
            rb_[i].a_b = span(rb_ch[i]);
            rb_[i].b_w = span(nn::conv3_weight_count(rb_ch[i], rb_ch[i]));
            rb_[i].b_b = span(rb_ch[i]);
        }
        down1_w_ = span(nn::conv3_weight_count(c2, c1));
        down1_b_ = span(c2);
        down2_w_ = span(nn::conv3_weight_count(c2, c2));
        down2_b_ = span(c2);
        up1_w_ = span(nn::conv3_weight_count(c2, c2));
        up1_b_ = span(c2);
        up2_w_ = span(nn::conv3_weight_count(c1, c2));
        up2_b_ = span(c1);
        conv_out_w_ = span(nn::conv3_weight_count(1, c1));
        conv_out_b_ = span(1);
        params_.assign(off, Real(0));
    }

    const Real* p(const Span& s) const { return params_.data() + s.off; }

    void sinusoidal_embed(int t, std::vector<Real>& out) const {
        const int half = cfg_.time_embed_dim / 2;
        out.resize(cfg_.time_embed_dim);
        for (int i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(10000.0) * (half == 1 ? 0.0 : double(i) / (half - 1)));
            out[2 * i] = Real(std::sin(t * freq));
            out[2 * i + 1] = Real(std::cos(t * freq));
        }
    }

    static void silu_vec(const std::vector<Real>& in, std::vector<Real>& out) {
        out.resize(in.size());
        for (size_t i = 0; i < in.size(); ++i) out[i] = in[i] * nn::sigmoid(in[i]);
    }

    // out = x + conv_b(silu(conv_a(silu(x)) + time_bias))
    void resblock_forward(int i, const T3& x, const std::vector<Real>& tb, ResBlockWs& ws) const {
        const ResBlockParams& rp = rb_[i];
        ws.s1 = T3(x.c, x.zd, x.yd, x.xd);
        nn::silu_forward(x, ws.s1);
        ws.h1 = T3(x.c, x.zd, x.yd, x.xd);
        nn::conv3_forward(ws.s1, p(rp.a_w), p(rp.a_b), ws.h1);
        const size_t plane = ws.h1.plane();
        for (int ch = 0; ch < x.c; ++ch) {
            Real* base = ws.h1.v.data() + ch * plane;
            for (size_t k = 0; k < plane; ++k) base[k] += tb[ch];
        }
        ws.s2 = T3(x.c, x.zd, x.yd, x.xd);
        nn::silu_forward(ws.h1, ws.s2);
        ws.out = T3(x.c, x.zd, x.yd, x.xd);
        nn::conv3_forward(ws.s2, p(rp.b_w), p(rp.b_b), ws.out);
        for (size_t k = 0; k < ws.out.size(); ++k) ws.out.v[k] += x.v[k];
    }

    void resblock_backward(int i, const T3& x, const ResBlockWs& ws, const std::vector<Real>& temb,
                           const T3& g_out, T3& g_x, std::vector<Real>& g_temb,
                           std::vector<Real>& grads) const {
        const ResBlockParams& rp = rb_[i];
        const auto g = [&grads](const Span& s) { return grads.data() + s.off; };

        T3 g_s2(x.c, x.zd, x.yd, x.xd);
        nn::conv3_backward(ws.s2, p(rp.b_w), g_out, g_s2, g(rp.b_w), g(rp.b_b));

        T3 g_h1(x.c, x.zd, x.yd, x.xd);
        nn::silu_backward(ws.h1, g_s2, g_h1);

        // time bias gradient, then through the block's projection layer
        const size_t plane = g_h1.plane();
        std::vector<Real> g_tb(x.c, Real(0));
        for (int ch = 0; ch < x.c; ++ch) {
            const Real* base = g_h1.v.data() + ch * plane;
            Real acc = 0;
            for (size_t k = 0; k < plane; ++k) acc += base[k];
            g_tb[ch] = acc;
        }
        std::vector<Real> g_temb_local;
        nn::linear_backward(temb, p(proj_w_[i]), g_tb, g_temb_local, g(proj_w_[i]), g(proj_b_[i]));
        for (size_t k = 0; k < g_temb.size(); ++k) g_temb[k] += g_temb_local[k];

        T3 g_s1(x.c, x.zd, x.yd, x.xd);
        nn::conv3_backward(ws.s1, p(rp.a_w), g_h1, g_s1, g(rp.a_w), g(rp.a_b));

        nn::silu_backward(x, g_s1, g_x);
        for (size_t k = 0; k < g_x.size(); ++k) g_x.v[k] += g_out.v[k]; // residual branch
    }

    ModelConfig cfg_;
    std::vector<Real> params_;

    Span time_l1_w_, time_l1_b_, time_l2_w_, time_l2_b_;
    std::array<Span, 5> proj_w_, proj_b_;
    Span conv_in_w_, conv_in_b_;
    std::array<ResBlockParams, 5> rb_;
    Span down1_w_, down1_b_, down2_w_, down2_b_;
    Span up1_w_, up1_b_, up2_w_, up2_b_;
    Span conv_out_w_, conv_out_b_;
};

using DenoiserModel = DenoiserModelT<float>;

/// Analytic test denoiser: inverts the closed-form corruption for a known
/// target grid, so reverse rollouts must reconstruct that target. The target
/// is given in occupancy space [0,1]. Rejects t = 0 (alpha_bar = 1 leaves no
/// noise to recover).
inline auto oracle_denoiser(const LocalGrid& target_occupancy, const NoiseSchedule& schedule) {
    std::vector<float> target_signal(target_occupancy.size());
    for (size_t i = 0; i < target_signal.size(); ++i)
        target_signal[i] = occupancy_to_signal(target_occupancy.values()[i]);
    return [target_signal, &schedule](const LocalGrid& x_t, int t) {
        if (t <= 0 || schedule.alpha_bar(t) >= 1.0)
            throw std::invalid_argument("oracle denoiser undefined at alpha_bar = 1");
        if (x_t.size() != target_signal.size())
            throw std::invalid_argument("oracle denoiser shape mismatch");
        const float a = static_cast<float>(std::sqrt(schedule.alpha_bar(t)));
        const float b = static_cast<float>(std::sqrt(1.0 - schedule.alpha_bar(t)));
        std::vector<float> eps(x_t.size());
        for (size_t i = 0; i < eps.size(); ++i)
            eps[i] = (x_t.values()[i] - a * target_signal[i]) / b;
        return eps;
    };
}

/// A trained noise predictor plus the schedule it was trained against.
struct TrainedDenoiser {
    DenoiserModel model;
    int train_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;

    NoiseSchedule make_schedule() const { return linear_schedule(train_steps, beta_start, beta_end); }
};

// ---------------------------------------------------------------------------
// OCCN1 checkpoint: ASCII header with the architecture descriptor and
// schedule, then the flat little-endian float32 parameter array.
// ---------------------------------------------------------------------------

inline void save_denoiser(const TrainedDenoiser& d, const std::filesystem::path& path) {
    detail::atomic_write(path, [&](std::ofstream& out) {
        const ModelConfig& c = d.model.config();
        out << "OCCN1 " << c.base_channels << ' ' << c.mid_channels << ' ' << c.time_embed_dim
            << ' ' << c.time_hidden << ' ' << d.train_steps << ' '
            << detail::format_double(d.beta_start) << ' ' << detail::format_double(d.beta_end)
            << ' ' << d.model.param_count() << '\n';
        out.write(reinterpret_cast<const char*>(d.model.params().data()),
                  static_cast<std::streamsize>(d.model.param_count() * sizeof(float)));
    });
}

inline TrainedDenoiser load_denoiser(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error(IoErrorKind::kOpenFailed, "cannot open: " + path.string());
    std::string header;
    if (!std::getline(in, header)) throw io_error(IoErrorKind::kBadHeader, "missing header line");
    std::istringstream hs(header);
    std::string magic;
    hs >> magic;
    detail::check_magic(magic, "OCCN1", "OCCN");

    ModelConfig cfg;
    TrainedDenoiser d;
    size_t n_params = 0;
    if (!(hs >> cfg.base_channels >> cfg.mid_channels >> cfg.time_embed_dim >> cfg.time_hidden >>
          d.train_steps >> d.beta_start >> d.beta_end >> n_params))
        throw io_error(IoErrorKind::kBadHeader, "malformed OCCN1 header: " + header);

    d.model = DenoiserModel(cfg);
    if (d.model.param_count() != n_params)
        throw io_error(IoErrorKind::kBadHeader, "OCCN1 parameter count does not match architecture");
    in.read(reinterpret_cast<char*>(d.model.params().data()),
            static_cast<std::streamsize>(n_params * sizeof(float)));
    if (static_cast<size_t>(in.gcount()) != n_params * sizeof(float))
        throw io_error(IoErrorKind::kTruncated, "truncated OCCN1 payload: " + path.string());
    return d;
}

} // namespace occugen
