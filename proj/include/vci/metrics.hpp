#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vci/errors.hpp"
#include "vci/gmm.hpp"
#include "vci/rng.hpp"
#include "vci/sample.hpp"

namespace vci {

// Pearson correlation, single-pass Welford co-moments. Exact ±1.0 on
// perfectly (anti-)correlated inputs.
inline double pearson_cc(const Vec& a, const Vec& b) {
    require_same_dim(a, b, "pearson_cc");
    if (a.size() < 2) throw config_error("pearson_cc: need length >= 2");

    double mean_a = 0.0, mean_b = 0.0, m2a = 0.0, m2b = 0.0, cab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double n = static_cast<double>(i + 1);
        const double da = a[i] - mean_a;
        const double db = b[i] - mean_b;
        mean_a += da / n;
        mean_b += db / n;
        const double db2 = b[i] - mean_b;
        m2a += da * (a[i] - mean_a);
        m2b += db * db2;
        cab += da * db2;
    }
    if (m2a == 0.0 || m2b == 0.0)
        throw numeric_error("pearson_cc: zero variance input");
    if (cab * cab == m2a * m2b) return cab > 0.0 ? 1.0 : -1.0;
    const double r = cab / std::sqrt(m2a * m2b);
    return std::min(1.0, std::max(-1.0, r));
}

// A set of embedding vectors with fitted Gaussian moments (unbiased covariance).
struct EmbeddingSet {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;

    std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }

    static EmbeddingSet fit(const std::vector<Vec>& vectors) {
        if (vectors.size() < 2) throw config_error("EmbeddingSet: need >= 2 vectors to fit");
        const std::size_t d = vectors.front().size();
        const std::size_t n = vectors.size();
        Eigen::MatrixXd X(n, d);
        for (std::size_t i = 0; i < n; ++i) {
            if (vectors[i].size() != d) throw config_error("EmbeddingSet: ragged vectors");
            for (std::size_t j = 0; j < d; ++j) X(i, j) = vectors[i][j];
        }
        EmbeddingSet set;
        set.mean = X.colwise().mean();
        Eigen::MatrixXd centered = X.rowwise() - set.mean.transpose();
        set.cov = centered.transpose() * centered / static_cast<double>(n - 1);
        set.cov = 0.5 * (set.cov + set.cov.transpose().eval());
        return set;
    }

    static EmbeddingSet from_moments(const Vec& mean, const std::vector<Vec>& cov) {
        EmbeddingSet set;
        const std::size_t d = mean.size();
        set.mean = Eigen::VectorXd(d);
        set.cov = Eigen::MatrixXd(d, d);
        for (std::size_t i = 0; i < d; ++i) {
            set.mean(i) = mean[i];
            if (cov[i].size() != d) throw config_error("EmbeddingSet: covariance not square");
            for (std::size_t j = 0; j < d; ++j) set.cov(i, j) = cov[i][j];
        }
        return set;
    }
};

namespace detail {

// Symmetric PSD square root via eigendecomposition, clipping eigenvalues
// below 1e-12 to zero.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) throw numeric_error("psd_sqrt: eigendecomposition failed");
    Eigen::VectorXd ev = es.eigenvalues();
    const double scale = std::max(1.0, std::fabs(ev.maxCoeff()));
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) < -1e-8 * scale)
            throw numeric_error("psd_sqrt: matrix not PSD (eigenvalue " + std::to_string(ev(i)) + ")");
        ev(i) = ev(i) < 1e-12 ? 0.0 : std::sqrt(ev(i));
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

} // namespace detail

// Squared 2-Wasserstein distance between Gaussians fitted to the two sets:
//   ||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a S_b)^{1/2}),
// with the trace term evaluated on the symmetrized product
// (S_b^{1/2} S_a S_b^{1/2})^{1/2}.
inline double frechet_distance(const EmbeddingSet& a, const EmbeddingSet& b) {
    if (a.dim() != b.dim()) throw config_error("frechet_distance: dimension mismatch");
    const Eigen::MatrixXd sqrt_b = detail::psd_sqrt(b.cov);
    Eigen::MatrixXd inner = sqrt_b * a.cov * sqrt_b;
    inner = 0.5 * (inner + inner.transpose().eval());
    const Eigen::MatrixXd cross = detail::psd_sqrt(inner);
    const double mean_term = (a.mean - b.mean).squaredNorm();
    const double trace_term = a.cov.trace() + b.cov.trace() - 2.0 * cross.trace();
    return std::max(0.0, mean_term + trace_term);
}

// Seed-fixed random-projection embedder: depth layers of x -> act(W x) with
// W entries ~ N(0, 1/fan_in). Deterministic for a fixed seed; the first
// layer is injective whenever its width >= the input dimension.
class FeatureEmbedder {
public:
    enum class Activation { tanh, linear };

    FeatureEmbedder(std::uint64_t seed, std::size_t input_dim, std::vector<std::size_t> layer_dims,
                    Activation act = Activation::tanh)
        : act_(act) {
        if (layer_dims.empty()) throw config_error("FeatureEmbedder: need >= 1 layer");
        std::size_t fan_in = input_dim;
        for (std::size_t l = 0; l < layer_dims.size(); ++l) {
            RngStream rng(RngStream::derive_seed(seed, l));
            const std::size_t fan_out = layer_dims[l];
            Eigen::MatrixXd w(fan_out, fan_in);
            const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (std::size_t r = 0; r < fan_out; ++r)
                for (std::size_t c = 0; c < fan_in; ++c) w(r, c) = scale * rng.gaussian();
            weights_.push_back(std::move(w));
            fan_in = fan_out;
        }
    }

    // Convenience: depth layers of width width_factor * input_dim.
    static FeatureEmbedder make_default(std::uint64_t seed, std::size_t input_dim,
                                        std::size_t depth = 3, std::size_t width_factor = 2) {
        std::vector<std::size_t> dims(depth, std::max<std::size_t>(width_factor * input_dim, 4));
        return FeatureEmbedder(seed, input_dim, std::move(dims));
    }

    std::size_t input_dim() const { return static_cast<std::size_t>(weights_.front().cols()); }
    std::size_t depth() const { return weights_.size(); }

    std::vector<Eigen::VectorXd> activations(const Vec& x) const {
        if (x.size() != input_dim()) throw config_error("FeatureEmbedder: input dim mismatch");
        Eigen::VectorXd h = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
        std::vector<Eigen::VectorXd> out;
        out.reserve(weights_.size());
        for (const auto& w : weights_) {
            h = w * h;
            if (act_ == Activation::tanh) h = h.array().tanh().matrix();
            out.push_back(h);
        }
        return out;
    }

private:
    std::vector<Eigen::MatrixXd> weights_;
    Activation act_;
};

// LPAPS-style point-to-point distance: sum over layers of the mean squared
// activation difference. Zero iff a == b for an injective first layer.
inline double feature_distance(const FeatureEmbedder& embedder, const Sample& a, const Sample& b) {
    require_same_dim(a, b, "feature_distance");
    const auto fa = embedder.activations(a.data);
    const auto fb = embedder.activations(b.data);
    double d = 0.0;
    for (std::size_t l = 0; l < fa.size(); ++l)
        d += (fa[l] - fb[l]).squaredNorm() / static_cast<double>(fa[l].size());
    return d;
}

// Target-alignment surrogate: log posterior probability of class c under the
// known mixture. Higher means the sample sits deeper in the target class.
inline double alignment_score(const GmmSpec& gmm, const Sample& x, const Condition& c) {
    if (c.is_null()) throw config_error("alignment_score: condition must name a class");
    if (x.dim() != gmm.dim) throw config_error("alignment_score: dimension mismatch");
    return gmm_log_class_posterior(gmm, x.data, *c.label);
}

} // namespace vci
