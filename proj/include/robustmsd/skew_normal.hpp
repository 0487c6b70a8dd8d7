#pragma once

#include <cmath>
#include <numbers>
#include <utility>

#include "errors.hpp"
#include "numerics.hpp"

namespace robustmsd {

/// Multivariate skew-normal SN_d(loc, scale, skew) in the parametrization
///
///     Y = loc + scale^{1/2} (skew |Z0| + (I - skew skew^T)^{1/2} Z),
///
/// with Z0 ~ N(0, 1), Z ~ N_d(0, I) independent and scale^{1/2} the symmetric
/// root. Requires skew^T skew < 1.
class SkewNormalParams {
public:
    SkewNormalParams(Vector loc, Matrix scale, Vector skew)
        : loc_(std::move(loc)), scale_(std::move(scale)), skew_(std::move(skew)) {
        detail::require(loc_.size() == scale_.rows() && scale_.rows() == scale_.cols() && skew_.size() == loc_.size(),
                        ErrorKind::DimensionMismatch, "skew-normal parameter dimensions differ");
        detail::require(loc_.allFinite() && skew_.allFinite(), ErrorKind::NonFinite,
                        "skew-normal parameters have non-finite entries");
        detail::require(skew_.squaredNorm() < 1.0, ErrorKind::InvalidArgument, "skewness must satisfy xi^T xi < 1");
        log_det_ = numerics::cholesky(scale_).log_det();
        root_ = numerics::symmetric_sqrt(scale_);
    }

    /// Gaussian N(loc, scale) as the zero-skew member of the family.
    static SkewNormalParams gaussian(Vector loc, Matrix scale) {
        const auto d = loc.size();
        return SkewNormalParams(std::move(loc), std::move(scale), Vector::Zero(d));
    }

    const Vector& loc() const noexcept { return loc_; }
    const Matrix& scale() const noexcept { return scale_; }
    const Vector& skew() const noexcept { return skew_; }
    const Matrix& scale_root() const noexcept { return root_.root; }
    const Matrix& scale_inverse_root() const noexcept { return root_.inverse_root; }
    Eigen::Index dim() const noexcept { return loc_.size(); }

    /// loc + sqrt(2/pi) scale^{1/2} skew
    Vector mean() const { return loc_ + std::sqrt(2.0 / std::numbers::pi) * (root_.root * skew_); }

    /// scale - (2/pi) scale^{1/2} skew skew^T scale^{1/2}
    Matrix covariance() const {
        const Vector s = root_.root * skew_;
        return scale_ - (2.0 / std::numbers::pi) * s * s.transpose();
    }

    /// (I - skew skew^T)^{1/2} from its rank-one structure.
    Matrix orthogonal_root() const {
        const auto d = dim();
        const double s2 = skew_.squaredNorm();
        Matrix a = Matrix::Identity(d, d);
        if (s2 > 0.0) a -= skew_ * skew_.transpose() * ((1.0 - std::sqrt(1.0 - s2)) / s2);
        return a;
    }

    /// Same law shifted by c in every coordinate (net -> gross returns with c = 1).
    SkewNormalParams shifted(double c) const {
        return SkewNormalParams(loc_.array() + c, scale_, skew_);
    }

    /// log density, using
    /// f(y) = 2 |scale|^{-1/2} phi_d(scale^{-1/2}(y - loc)) Phi(skew^T scale^{-1/2}(y - loc) | 1 - skew^T skew).
    double log_density(const Vector& y) const {
        const auto d = static_cast<double>(dim());
        const Vector z = root_.inverse_root * (y - loc_);
        const double gauss = -0.5 * (d * std::log(2.0 * std::numbers::pi) + log_det_ + z.squaredNorm());
        const double resid_sd = std::sqrt(1.0 - skew_.squaredNorm());
        return gauss + std::numbers::ln2 + numerics::log_normal_cdf(skew_.dot(z) / resid_sd);
    }

private:
    Vector loc_;
    Matrix scale_;
    Vector skew_;
    numerics::SymmetricRoot root_;
    double log_det_ = 0.0;
};

/// One-dimensional SN_1(location, omega^2, delta): location + omega (delta |Z0| + sqrt(1 - delta^2) Z1).
struct SkewNormal1D {
    double location = 0.0;
    double omega = 0.0;
    double delta = 0.0;

    template <class Normal>
    double draw(Normal& normal) const {
        const double z0 = std::abs(normal());
        const double z1 = normal();
        return location + omega * (delta * z0 + std::sqrt(std::max(0.0, 1.0 - delta * delta)) * z1);
    }
};

} // namespace robustmsd
