#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "yieldcast/core/feature_matrix.hpp"
#include "yieldcast/models/regressor.hpp"

namespace yieldcast::models {

/// Column means and population standard deviations from the training set.
/// Constant columns keep scale 1 and standardize to zero.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardizer fit(const FeatureMatrix& X) {
        Standardizer s;
        const std::size_t n = X.rows(), m = X.cols();
        s.mean.assign(m, 0.0);
        s.scale.assign(m, 1.0);
        for (std::size_t j = 0; j < m; ++j) {
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) sum += X(i, j);
            const double mu = sum / static_cast<double>(n);
            double ss = 0.0;
            for (std::size_t i = 0; i < n; ++i) ss += (X(i, j) - mu) * (X(i, j) - mu);
            const double sd = std::sqrt(ss / static_cast<double>(n));
            s.mean[j] = mu;
            s.scale[j] = sd > 0 ? sd : 1.0;
        }
        return s;
    }

    bool is_constant(std::size_t j, const FeatureMatrix& X) const {
        for (std::size_t i = 0; i < X.rows(); ++i)
            if (X(i, j) != X(0, j)) return false;
        return true;
    }

    double apply(std::size_t j, double v) const { return (v - mean[j]) / scale[j]; }

    Eigen::MatrixXd transform(const FeatureMatrix& X) const {
        Eigen::MatrixXd Z(X.rows(), X.cols());
        for (std::size_t i = 0; i < X.rows(); ++i)
            for (std::size_t j = 0; j < X.cols(); ++j)
                Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = apply(j, X(i, j));
        return Z;
    }

    void save(std::ostream& out) const {
        out << "standardizer " << mean.size() << '\n';
        io::write_numbers(out, mean);
        io::write_numbers(out, scale);
    }

    static Standardizer load(io::Reader& in) {
        in.expect("standardizer");
        const auto m = in.count();
        Standardizer s;
        s.mean = in.numbers(m);
        s.scale = in.numbers(m);
        return s;
    }
};

class MeanRegressor final : public Regressor {
public:
    explicit MeanRegressor(double mean) : mean_(mean) {}

    static MeanRegressor fit(std::span<const double> y) {
        double s = 0.0;
        for (double v : y) s += v;
        return MeanRegressor(s / static_cast<double>(y.size()));
    }

    Family family() const override { return Family::dummy; }
    double predict_row(std::span<const double>) const override { return mean_; }
    double mean() const noexcept { return mean_; }

    void save(std::ostream& out) const override { out << "mean " << format_double(mean_) << '\n'; }
    static MeanRegressor load(io::Reader& in) {
        in.expect("mean");
        return MeanRegressor(in.number());
    }

private:
    double mean_;
};

/// y ≈ ȳ + Σ w_j · z_j on standardized inputs z. Shared by the linear, ridge and
/// omp families, which differ only in how w is chosen.
class LinearRegressor final : public Regressor {
public:
    LinearRegressor(Family family, Standardizer st, double y_mean, std::vector<double> w)
        : family_(family), st_(std::move(st)), y_mean_(y_mean), w_(std::move(w)) {}

    Family family() const override { return family_; }

    double predict_row(std::span<const double> x) const override {
        double s = y_mean_;
        for (std::size_t j = 0; j < w_.size(); ++j)
            if (w_[j] != 0.0) s += w_[j] * st_.apply(j, x[j]);
        return s;
    }

    /// Coefficients on the raw feature scale.
    std::vector<double> coefficients() const {
        std::vector<double> c(w_.size());
        for (std::size_t j = 0; j < w_.size(); ++j) c[j] = w_[j] / st_.scale[j];
        return c;
    }

    double intercept() const {
        double b = y_mean_;
        const auto c = coefficients();
        for (std::size_t j = 0; j < c.size(); ++j) b -= c[j] * st_.mean[j];
        return b;
    }

    const std::vector<double>& standardized_weights() const noexcept { return w_; }

    std::vector<std::size_t> nonzero() const {
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < w_.size(); ++j)
            if (w_[j] != 0.0) out.push_back(j);
        return out;
    }

    void save(std::ostream& out) const override {
        st_.save(out);
        out << "intercept " << format_double(y_mean_) << '\n';
        out << "weights ";
        io::write_numbers(out, w_);
    }

    static LinearRegressor load(Family f, io::Reader& in) {
        auto st = Standardizer::load(in);
        in.expect("intercept");
        const double b = in.number();
        in.expect("weights");
        auto w = in.numbers(st.mean.size());
        return LinearRegressor(f, std::move(st), b, std::move(w));
    }

private:
    Family family_;
    Standardizer st_;
    double y_mean_;
    std::vector<double> w_;
};

namespace detail {

inline std::pair<Eigen::VectorXd, double> centered_target(std::span<const double> y) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(y.size()));
    double s = 0.0;
    for (double t : y) s += t;
    const double mean = s / static_cast<double>(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) v(static_cast<Eigen::Index>(i)) = y[i] - mean;
    return {v, mean};
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

} // namespace detail

/// Penalized least squares (Z'Z + λI) w = Z'(y − ȳ); the intercept is not penalized.
inline LinearRegressor fit_penalized_least_squares(Family family, const FeatureMatrix& X, std::span<const double> y,
                                                   double lambda) {
    auto st = Standardizer::fit(X);
    const Eigen::MatrixXd Z = st.transform(X);
    auto [yc, y_mean] = detail::centered_target(y);
    Eigen::MatrixXd A = Z.transpose() * Z;
    A.diagonal().array() += lambda;
    const Eigen::VectorXd w = A.ldlt().solve(Z.transpose() * yc);
    return LinearRegressor(family, std::move(st), y_mean, detail::to_std(w));
}

/// Ordinary least squares through the normal equations; a ridge jitter of
/// 1e-10·n keeps the system solvable when columns are collinear or constant.
inline LinearRegressor fit_linear(const FeatureMatrix& X, std::span<const double> y) {
    return fit_penalized_least_squares(Family::linear, X, y, 1e-10 * static_cast<double>(X.rows()));
}

inline LinearRegressor fit_ridge(const FeatureMatrix& X, std::span<const double> y, double alpha) {
    return fit_penalized_least_squares(Family::ridge, X, y, alpha);
}

/// Orthogonal matching pursuit on standardized features: at each step add the
/// column most correlated with the residual (lowest index on ties; constant
/// columns are never eligible), then refit least squares on the whole active
/// set. Stops after n_nonzero columns or once the residual vanishes.
inline LinearRegressor fit_omp(const FeatureMatrix& X, std::span<const double> y, std::size_t n_nonzero) {
    auto st = Standardizer::fit(X);
    const Eigen::MatrixXd Z = st.transform(X);
    auto [yc, y_mean] = detail::centered_target(y);
    const std::size_t m = X.cols();
    std::vector<bool> eligible(m);
    for (std::size_t j = 0; j < m; ++j) eligible[j] = !st.is_constant(j, X);

    std::vector<Eigen::Index> active;
    Eigen::VectorXd residual = yc;
    Eigen::VectorXd coef;
    const double y_norm2 = yc.squaredNorm();
    while (active.size() < std::min(n_nonzero, m)) {
        if (residual.squaredNorm() <= 1e-24 * std::max(y_norm2, 1e-300)) break;
        const Eigen::VectorXd corr = Z.transpose() * residual;
        Eigen::Index best = -1;
        double best_abs = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            if (!eligible[j]) continue;
            const double a = std::abs(corr(static_cast<Eigen::Index>(j)));
            if (a > best_abs) {
                best_abs = a;
                best = static_cast<Eigen::Index>(j);
            }
        }
        if (best < 0) break;
        eligible[static_cast<std::size_t>(best)] = false;
        active.push_back(best);

        Eigen::MatrixXd Za(Z.rows(), static_cast<Eigen::Index>(active.size()));
        for (std::size_t k = 0; k < active.size(); ++k) Za.col(static_cast<Eigen::Index>(k)) = Z.col(active[k]);
        coef = Za.colPivHouseholderQr().solve(yc);
        residual = yc - Za * coef;
    }
    std::vector<double> w(m, 0.0);
    for (std::size_t k = 0; k < active.size(); ++k) w[static_cast<std::size_t>(active[k])] = coef(static_cast<Eigen::Index>(k));
    return LinearRegressor(Family::omp, std::move(st), y_mean, std::move(w));
}

} // namespace yieldcast::models
