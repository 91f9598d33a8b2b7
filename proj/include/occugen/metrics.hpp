#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "occugen/grid.hpp"
#include "occugen/rng.hpp"
#include "occugen/tensor.hpp"

namespace occugen {

/// Intersection-over-union of two occupied-voxel sets; IoU of two empty sets
/// is defined as 1.
inline double iou(const VoxelKeySet& a, const VoxelKeySet& b) {
    if (a.empty() && b.empty()) return 1.0;
    size_t inter = 0;
    const VoxelKeySet& small = a.size() <= b.size() ? a : b;
    const VoxelKeySet& large = a.size() <= b.size() ? b : a;
    for (const VoxelKey& k : small)
        if (large.count(k)) ++inter;
    const size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Fixed random 3D convolution bank + pooling descriptor. The paper-grade
/// inception features are out of reach here; one seeded embedder shared by
/// every arm of an experiment preserves ordinal comparisons.
class FeatureEmbedder {
public:
    static constexpr int kC1 = 8;
    static constexpr int kC2 = 16;
    static constexpr int kDim = 2 * kC2; // per-channel mean and max

    explicit FeatureEmbedder(uint64_t seed) : seed_(seed) {
        Rng rng(Rng::derive(seed, 0xFEA7));
        w1_.resize(nn::conv3_weight_count(kC1, 1));
        b1_.assign(kC1, 0.0f);
        w2_.resize(nn::conv3_weight_count(kC2, kC1));
        b2_.assign(kC2, 0.0f);
        const double s1 = 1.0 / std::sqrt(27.0);
        const double s2 = 1.0 / std::sqrt(27.0 * kC1);
        for (float& w : w1_) w = static_cast<float>(s1 * rng.normal());
        for (float& w : w2_) w = static_cast<float>(s2 * rng.normal());
    }

    uint64_t seed() const { return seed_; }

    std::vector<double> embed(const LocalGrid& grid) const {
        Tensor<float> x(1, grid.dim_z(), grid.dim_y(), grid.dim_x());
        std::copy(grid.values().begin(), grid.values().end(), x.v.begin());

        Tensor<float> h1(kC1, nn::conv3s2_out_dim(x.zd), nn::conv3s2_out_dim(x.yd),
                         nn::conv3s2_out_dim(x.xd));
        nn::conv3s2_forward(x, w1_.data(), b1_.data(), h1);
        for (float& v : h1.v) v = std::max(0.0f, v);

        Tensor<float> h2(kC2, nn::conv3s2_out_dim(h1.zd), nn::conv3s2_out_dim(h1.yd),
                         nn::conv3s2_out_dim(h1.xd));
        nn::conv3s2_forward(h1, w2_.data(), b2_.data(), h2);
        for (float& v : h2.v) v = std::max(0.0f, v);

        std::vector<double> feat(kDim, 0.0);
        const size_t plane = h2.plane();
        for (int c = 0; c < kC2; ++c) {
            const float* base = h2.v.data() + c * plane;
            double mean = 0.0, mx = 0.0;
            for (size_t i = 0; i < plane; ++i) {
                mean += base[i];
                mx = std::max(mx, double(base[i]));
            }
            feat[2 * c] = mean / double(plane);
            feat[2 * c + 1] = mx;
        }
        return feat;
    }

private:
    uint64_t seed_;
    std::vector<float> w1_, b1_, w2_, b2_;
};

namespace detail {

inline Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& feats) {
    if (feats.size() < 2) throw std::invalid_argument("need at least 2 feature samples");
    const int n = static_cast<int>(feats.size());
    const int d = static_cast<int>(feats.front().size());
    Eigen::MatrixXd m(n, d);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(feats[i].size()) != d)
            throw std::invalid_argument("feature dimension mismatch");
        for (int j = 0; j < d; ++j) m(i, j) = feats[i][j];
    }
    return m;
}

/// Symmetric PSD square root via eigendecomposition with an eigenvalue floor
/// at zero.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& s, const char* what) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (s + s.transpose()));
    if (es.info() != Eigen::Success)
        throw std::runtime_error(std::string("fid: eigendecomposition failed for ") + what);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

} // namespace detail

/// Frechet distance between Gaussian fits of two feature sets:
/// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^{1/2}).
inline double fid(const std::vector<std::vector<double>>& feats_a,
                  const std::vector<std::vector<double>>& feats_b) {
    const Eigen::MatrixXd a = detail::to_matrix(feats_a);
    const Eigen::MatrixXd b = detail::to_matrix(feats_b);
    if (a.cols() != b.cols()) throw std::invalid_argument("fid feature dimension mismatch");

    const Eigen::VectorXd mu_a = a.colwise().mean();
    const Eigen::VectorXd mu_b = b.colwise().mean();
    const Eigen::MatrixXd ca = a.rowwise() - mu_a.transpose();
    const Eigen::MatrixXd cb = b.rowwise() - mu_b.transpose();
    const Eigen::MatrixXd sa = ca.transpose() * ca / double(a.rows() - 1);
    const Eigen::MatrixXd sb = cb.transpose() * cb / double(b.rows() - 1);

    const Eigen::MatrixXd sqrt_a = detail::psd_sqrt(sa, "cov(a)");
    Eigen::MatrixXd inner = sqrt_a * sb * sqrt_a;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()));
    if (es.info() != Eigen::Success)
        throw std::runtime_error("fid: eigendecomposition failed for sqrt(Sa Sb Sa)");
    const double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

    const double value =
        (mu_a - mu_b).squaredNorm() + sa.trace() + sb.trace() - 2.0 * tr_sqrt;
    return std::max(0.0, value);
}

/// Unbiased squared MMD with the polynomial kernel (x.y/d + 1)^3, reported
/// x1000 (the KID convention).
inline double kid(const std::vector<std::vector<double>>& feats_a,
                  const std::vector<std::vector<double>>& feats_b) {
    if (feats_a.size() < 2 || feats_b.size() < 2)
        throw std::invalid_argument("kid needs at least 2 samples per side");
    const size_t d = feats_a.front().size();
    for (const auto& f : feats_a)
        if (f.size() != d) throw std::invalid_argument("kid feature dimension mismatch");
    for (const auto& f : feats_b)
        if (f.size() != d) throw std::invalid_argument("kid feature dimension mismatch");

    const auto kernel = [d](const std::vector<double>& x, const std::vector<double>& y) {
        double dot = 0.0;
        for (size_t i = 0; i < d; ++i) dot += x[i] * y[i];
        const double base = dot / double(d) + 1.0;
        return base * base * base;
    };

    const size_t m = feats_a.size(), n = feats_b.size();
    double term_aa = 0.0, term_bb = 0.0, term_ab = 0.0;
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < m; ++j)
            if (i != j) term_aa += kernel(feats_a[i], feats_a[j]);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j)
            if (i != j) term_bb += kernel(feats_b[i], feats_b[j]);
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) term_ab += kernel(feats_a[i], feats_b[j]);

    const double mmd2 = term_aa / double(m * (m - 1)) + term_bb / double(n * (n - 1)) -
                        2.0 * term_ab / double(m * n);
    return 1000.0 * mmd2;
}

/// One evaluation window: the map as the robot believes it (with masks), the
/// fully observed ground truth at the same pose, and the raw predictions
/// sampled there (empty for baseline runs).
struct EvalWindow {
    MaskedSubmap observed;
    LocalGrid ground_truth;
    std::vector<LocalGrid> predictions;
};

struct RunMetrics {
    double fid = 0.0;
    double kid_x1000 = 0.0;
    double unknown_pct = 0.0;       // mean unknown fraction of the map windows
    std::vector<double> iou_values; // pairwise prediction IoU samples
    double iou_mean = 0.0;

    /// 10-bin PMF of the pairwise IoU values over [0,1].
    std::vector<double> iou_pmf() const {
        std::vector<double> pmf(10, 0.0);
        if (iou_values.empty()) return pmf;
        for (double v : iou_values) {
            int bin = static_cast<int>(v * 10.0);
            if (bin > 9) bin = 9;
            pmf[bin] += 1.0;
        }
        for (double& p : pmf) p /= double(iou_values.size());
        return pmf;
    }
};

/// Embeds map windows against ground-truth windows under one embedder and
/// aggregates FID, KID, the prediction-similarity PMF and the unknown-voxel
/// fraction.
inline RunMetrics evaluate_run(const std::vector<EvalWindow>& windows,
                               const FeatureEmbedder& embedder, double binarize_threshold = 0.5) {
    if (windows.empty()) throw std::invalid_argument("evaluate_run needs at least one window");

    std::vector<std::vector<double>> feats_map, feats_gt;
    feats_map.reserve(windows.size());
    feats_gt.reserve(windows.size());

    RunMetrics out;
    for (const EvalWindow& w : windows) {
        feats_map.push_back(embedder.embed(w.observed.grid));
        feats_gt.push_back(embedder.embed(w.ground_truth));
        out.unknown_pct += w.observed.unknown_fraction();

        if (w.predictions.size() >= 2) {
            std::vector<VoxelKeySet> occ;
            occ.reserve(w.predictions.size());
            for (const LocalGrid& p : w.predictions) occ.push_back(binarize(p, binarize_threshold));
            for (size_t i = 0; i < occ.size(); ++i)
                for (size_t j = i + 1; j < occ.size(); ++j)
                    out.iou_values.push_back(iou(occ[i], occ[j]));
        }
    }
    out.unknown_pct /= double(windows.size());
    out.fid = fid(feats_map, feats_gt);
    out.kid_x1000 = kid(feats_map, feats_gt);
    if (!out.iou_values.empty()) {
        double s = 0.0;
        for (double v : out.iou_values) s += v;
        out.iou_mean = s / double(out.iou_values.size());
    }
    return out;
}

} // namespace occugen
