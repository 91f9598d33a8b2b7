#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace occugen {

/// Dense channel-major activation block, x fastest:
/// index = ((c * Z + z) * Y + y) * X + x.
template <typename Real>
struct Tensor {
    int c = 0, zd = 0, yd = 0, xd = 0;
    std::vector<Real> v;

    Tensor() = default;
    Tensor(int c_, int z_, int y_, int x_)
        : c(c_), zd(z_), yd(y_), xd(x_), v(static_cast<size_t>(c_) * z_ * y_ * x_, Real(0)) {}

    size_t size() const { return v.size(); }
    size_t plane() const { return static_cast<size_t>(zd) * yd * xd; }

    Real* row(int ch, int z, int y) { return v.data() + ((static_cast<size_t>(ch) * zd + z) * yd + y) * xd; }
    const Real* row(int ch, int z, int y) const {
        return v.data() + ((static_cast<size_t>(ch) * zd + z) * yd + y) * xd;
    }

    void zero() { std::fill(v.begin(), v.end(), Real(0)); }
};

namespace nn {

// Weight layout for 3x3x3 kernels: W[oc][ic][kz][ky][kx], all flat.
inline size_t conv3_weight_count(int co, int ci) { return static_cast<size_t>(co) * ci * 27; }

template <typename Real>
inline Real sigmoid(Real x) {
    return Real(1) / (Real(1) + std::exp(-x));
}

// --------------------------------------------------------------------------
// 3x3x3 convolution, stride 1, zero padding 1 (same spatial dims).
// --------------------------------------------------------------------------

template <typename Real>
void conv3_forward(const Tensor<Real>& in, const Real* W, const Real* b, Tensor<Real>& out) {
    const int X = in.xd, Y = in.yd, Z = in.zd, Ci = in.c, Co = out.c;
    for (int oc = 0; oc < Co; ++oc)
        for (int z = 0; z < Z; ++z)
            for (int y = 0; y < Y; ++y) {
                Real* orow = out.row(oc, z, y);
                for (int x = 0; x < X; ++x) orow[x] = b[oc];
            }

    for (int oc = 0; oc < Co; ++oc) {
        for (int ic = 0; ic < Ci; ++ic) {
            const Real* wk = W + (static_cast<size_t>(oc) * Ci + ic) * 27;
            for (int z = 0; z < Z; ++z) {
                for (int kz = 0; kz < 3; ++kz) {
                    const int zi = z + kz - 1;
                    if (zi < 0 || zi >= Z) continue;
                    for (int y = 0; y < Y; ++y) {
                        Real* orow = out.row(oc, z, y);
                        for (int ky = 0; ky < 3; ++ky) {
                            const int yi = y + ky - 1;
                            if (yi < 0 || yi >= Y) continue;
                            const Real* irow = in.row(ic, zi, yi);
                            const Real w0 = wk[(kz * 3 + ky) * 3 + 0];
                            const Real w1 = wk[(kz * 3 + ky) * 3 + 1];
                            const Real w2 = wk[(kz * 3 + ky) * 3 + 2];
                            if (X == 1) {
                                orow[0] += w1 * irow[0];
                                continue;
                            }
                            orow[0] += w1 * irow[0] + w2 * irow[1];
                            for (int x = 1; x < X - 1; ++x)
                                orow[x] += w0 * irow[x - 1] + w1 * irow[x] + w2 * irow[x + 1];
                            orow[X - 1] += w0 * irow[X - 2] + w1 * irow[X - 1];
                        }
                    }
                }
            }
        }
    }
}

/// Gradients for conv3_forward. gin is assigned (zeroed first); gW/gb are
/// accumulated so multi-sample batches can share one buffer.
template <typename Real>
void conv3_backward(const Tensor<Real>& in, const Real* W, const Tensor<Real>& gout,
                    Tensor<Real>& gin, Real* gW, Real* gb) {
    const int X = in.xd, Y = in.yd, Z = in.zd, Ci = in.c, Co = gout.c;
    gin.zero();

    for (int oc = 0; oc < Co; ++oc) {
        Real acc = 0;
        const Real* base = gout.row(oc, 0, 0);
        for (size_t i = 0; i < gout.plane(); ++i) acc += base[i];
        gb[oc] += acc;
    }

    // dL/din: correlate gout with the flipped kernel.
    for (int ic = 0; ic < Ci; ++ic) {
        for (int oc = 0; oc < Co; ++oc) {
            const Real* wk = W + (static_cast<size_t>(oc) * Ci + ic) * 27;
            for (int z = 0; z < Z; ++z) {
                for (int kz = 0; kz < 3; ++kz) {
                    const int zo = z + kz - 1; // gout position whose tap touches z
                    if (zo < 0 || zo >= Z) continue;
                    for (int y = 0; y < Y; ++y) {
                        Real* grow = gin.row(ic, z, y);
                        for (int ky = 0; ky < 3; ++ky) {
                            const int yo = y + ky - 1;
                            if (yo < 0 || yo >= Y) continue;
                            const Real* gorow = gout.row(oc, zo, yo);
                            // flipped taps: weight index (2-kz, 2-ky, 2-kx)
                            const Real w0 = wk[((2 - kz) * 3 + (2 - ky)) * 3 + 2];
                            const Real w1 = wk[((2 - kz) * 3 + (2 - ky)) * 3 + 1];
                            const Real w2 = wk[((2 - kz) * 3 + (2 - ky)) * 3 + 0];
                            if (X == 1) {
                                grow[0] += w1 * gorow[0];
                                continue;
                            }
                            grow[0] += w1 * gorow[0] + w2 * gorow[1];
                            for (int x = 1; x < X - 1; ++x)
                                grow[x] += w0 * gorow[x - 1] + w1 * gorow[x] + w2 * gorow[x + 1];
                            grow[X - 1] += w0 * gorow[X - 2] + w1 * gorow[X - 1];
                        }
                    }
                }
            }
        }
    }

    // dL/dW: per-tap dot products of gout rows against shifted input rows.
    for (int oc = 0; oc < Co; ++oc) {
        for (int ic = 0; ic < Ci; ++ic) {
            Real* gwk = gW + (static_cast<size_t>(oc) * Ci + ic) * 27;
            for (int kz = 0; kz < 3; ++kz) {
                for (int ky = 0; ky < 3; ++ky) {
                    Real a0 = 0, a1 = 0, a2 = 0;
                    for (int z = 0; z < Z; ++z) {
                        const int zi = z + kz - 1;
                        if (zi < 0 || zi >= Z) continue;
                        for (int y = 0; y < Y; ++y) {
                            const int yi = y + ky - 1;
                            if (yi < 0 || yi >= Y) continue;
                            const Real* gorow = gout.row(oc, z, y);
                            const Real* irow = in.row(ic, zi, yi);
                            if (X == 1) {
                                a1 += gorow[0] * irow[0];
                                continue;
                            }
                            for (int x = 1; x < X; ++x) a0 += gorow[x] * irow[x - 1];
                            for (int x = 0; x < X; ++x) a1 += gorow[x] * irow[x];
                            for (int x = 0; x < X - 1; ++x) a2 += gorow[x] * irow[x + 1];
                        }
                    }
                    gwk[(kz * 3 + ky) * 3 + 0] += a0;
                    gwk[(kz * 3 + ky) * 3 + 1] += a1;
                    gwk[(kz * 3 + ky) * 3 + 2] += a2;
                }
            }
        }
    }
}

// --------------------------------------------------------------------------
// 3x3x3 convolution, stride 2, zero padding 1 (output dims = ceil(D/2)).
// --------------------------------------------------------------------------

inline int conv3s2_out_dim(int d) { return (d - 1) / 2 + 1; }

template <typename Real>
void conv3s2_forward(const Tensor<Real>& in, const Real* W, const Real* b, Tensor<Real>& out) {
    const int Xi = in.xd, Yi = in.yd, Zi = in.zd, Ci = in.c, Co = out.c;
    const int Xo = out.xd, Yo = out.yd, Zo = out.zd;
    for (int oc = 0; oc < Co; ++oc) {
        for (int zo = 0; zo < Zo; ++zo)
            for (int yo = 0; yo < Yo; ++yo) {
                Real* orow = out.row(oc, zo, yo);
                for (int xo = 0; xo < Xo; ++xo) {
                    Real acc = b[oc];
                    for (int ic = 0; ic < Ci; ++ic) {
                        const Real* wk = W + (static_cast<size_t>(oc) * Ci + ic) * 27;
                        for (int kz = 0; kz < 3; ++kz) {
                            const int zi = 2 * zo - 1 + kz;
                            if (zi < 0 || zi >= Zi) continue;
                            for (int ky = 0; ky < 3; ++ky) {
                                const int yi = 2 * yo - 1 + ky;
                                if (yi < 0 || yi >= Yi) continue;
                                const Real* irow = in.row(ic, zi, yi);
                                for (int kx = 0; kx < 3; ++kx) {
                                    const int xi = 2 * xo - 1 + kx;
                                    if (xi < 0 || xi >= Xi) continue;
                                    acc += wk[(kz * 3 + ky) * 3 + kx] * irow[xi];
                                }
                            }
                        }
                    }
                    orow[xo] = acc;
                }
            }
    }
}

template <typename Real>
void conv3s2_backward(const Tensor<Real>& in, const Real* W, const Tensor<Real>& gout,
                      Tensor<Real>& gin, Real* gW, Real* gb) {
    const int Xi = in.xd, Yi = in.yd, Zi = in.zd, Ci = in.c, Co = gout.c;
    const int Xo = gout.xd, Yo = gout.yd, Zo = gout.zd;
    gin.zero();

    for (int oc = 0; oc < Co; ++oc) {
        Real acc = 0;
        const Real* base = gout.row(oc, 0, 0);
        for (size_t i = 0; i < gout.plane(); ++i) acc += base[i];
        gb[oc] += acc;

        for (int ic = 0; ic < Ci; ++ic) {
            const Real* wk = W + (static_cast<size_t>(oc) * Ci + ic) * 27;
            Real* gwk = gW + (static_cast<size_t>(oc) * Ci + ic) * 27;
            for (int zo = 0; zo < Zo; ++zo)
                for (int yo = 0; yo < Yo; ++yo) {
                    const Real* gorow = gout.row(oc, zo, yo);
                    for (int xo = 0; xo < Xo; ++xo) {
                        const Real g = gorow[xo];
                        for (int kz = 0; kz < 3; ++kz) {
                            const int zi = 2 * zo - 1 + kz;
                            if (zi < 0 || zi >= Zi) continue;
                            for (int ky = 0; ky < 3; ++ky) {
                                const int yi = 2 * yo - 1 + ky;
                                if (yi < 0 || yi >= Yi) continue;
                                Real* girow = gin.row(ic, zi, yi);
                                const Real* irow = in.row(ic, zi, yi);
                                for (int kx = 0; kx < 3; ++kx) {
                                    const int xi = 2 * xo - 1 + kx;
                                    if (xi < 0 || xi >= Xi) continue;
                                    girow[xi] += wk[(kz * 3 + ky) * 3 + kx] * g;
                                    gwk[(kz * 3 + ky) * 3 + kx] += irow[xi] * g;
                                }
                            }
                        }
                    }
                }
        }
    }
}

// --------------------------------------------------------------------------
// Nearest-neighbor 2x upsampling (out dims must be exactly double).
// --------------------------------------------------------------------------

template <typename Real>
void upsample2_forward(const Tensor<Real>& in, Tensor<Real>& out) {
    for (int ch = 0; ch < in.c; ++ch)
        for (int z = 0; z < out.zd; ++z)
            for (int y = 0; y < out.yd; ++y) {
                Real* orow = out.row(ch, z, y);
                const Real* irow = in.row(ch, z / 2, y / 2);
                for (int x = 0; x < out.xd; ++x) orow[x] = irow[x / 2];
            }
}

template <typename Real>
void upsample2_backward(const Tensor<Real>& gout, Tensor<Real>& gin) {
    gin.zero();
    for (int ch = 0; ch < gin.c; ++ch)
        for (int z = 0; z < gout.zd; ++z)
            for (int y = 0; y < gout.yd; ++y) {
                const Real* gorow = gout.row(ch, z, y);
                Real* girow = gin.row(ch, z / 2, y / 2);
                for (int x = 0; x < gout.xd; ++x) girow[x / 2] += gorow[x];
            }
}

// --------------------------------------------------------------------------
// SiLU activation x * sigmoid(x).
// --------------------------------------------------------------------------

template <typename Real>
void silu_forward(const Tensor<Real>& in, Tensor<Real>& out) {
    for (size_t i = 0; i < in.size(); ++i) out.v[i] = in.v[i] * sigmoid(in.v[i]);
}

template <typename Real>
void silu_backward(const Tensor<Real>& in, const Tensor<Real>& gout, Tensor<Real>& gin) {
    for (size_t i = 0; i < in.size(); ++i) {
        const Real s = sigmoid(in.v[i]);
        gin.v[i] = gout.v[i] * s * (Real(1) + in.v[i] * (Real(1) - s));
    }
}

// --------------------------------------------------------------------------
// Dense layer on small vectors (time embedding path).
// --------------------------------------------------------------------------

template <typename Real>
void linear_forward(const std::vector<Real>& in, const Real* W, const Real* b, int n_out,
                    std::vector<Real>& out) {
    const int n_in = static_cast<int>(in.size());
    out.assign(n_out, Real(0));
    for (int o = 0; o < n_out; ++o) {
        Real acc = b[o];
        const Real* wrow = W + static_cast<size_t>(o) * n_in;
        for (int i = 0; i < n_in; ++i) acc += wrow[i] * in[i];
        out[o] = acc;
    }
}

template <typename Real>
void linear_backward(const std::vector<Real>& in, const Real* W, const std::vector<Real>& gout,
                     std::vector<Real>& gin, Real* gW, Real* gb) {
    const int n_in = static_cast<int>(in.size());
    const int n_out = static_cast<int>(gout.size());
    gin.assign(n_in, Real(0));
    for (int o = 0; o < n_out; ++o) {
        const Real g = gout[o];
        gb[o] += g;
        const Real* wrow = W + static_cast<size_t>(o) * n_in;
        Real* gwrow = gW + static_cast<size_t>(o) * n_in;
        for (int i = 0; i < n_in; ++i) {
            gin[i] += wrow[i] * g;
            gwrow[i] += in[i] * g;
        }
    }
}

} // namespace nn
} // namespace occugen
