#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "yieldcast/core/feature_matrix.hpp"
#include "yieldcast/models/linear.hpp"
#include "yieldcast/models/regressor.hpp"

namespace yieldcast::models {

/// Mean target of the k nearest standardized training rows (Euclidean).
/// Distance ties resolve to the lower training index.
class KnnRegressor final : public Regressor {
public:
    KnnRegressor(Standardizer st, std::size_t k, std::vector<double> z, std::vector<double> y)
        : st_(std::move(st)), k_(k), z_(std::move(z)), y_(std::move(y)) {}

    static KnnRegressor fit(const FeatureMatrix& X, std::span<const double> y, std::size_t k) {
        if (y.size() < k) throw InvariantError("knn needs at least k=" + std::to_string(k) + " training rows");
        auto st = Standardizer::fit(X);
        std::vector<double> z(X.rows() * X.cols());
        for (std::size_t i = 0; i < X.rows(); ++i)
            for (std::size_t j = 0; j < X.cols(); ++j) z[i * X.cols() + j] = st.apply(j, X(i, j));
        return KnnRegressor(std::move(st), k, std::move(z), {y.begin(), y.end()});
    }

    Family family() const override { return Family::knn; }

    double predict_row(std::span<const double> x) const override {
        const std::size_t m = st_.mean.size();
        std::vector<double> q(m);
        for (std::size_t j = 0; j < m; ++j) q[j] = st_.apply(j, x[j]);
        std::vector<std::pair<double, std::size_t>> d(y_.size());
        for (std::size_t i = 0; i < y_.size(); ++i) {
            const double* row = z_.data() + i * m;
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) s += (row[j] - q[j]) * (row[j] - q[j]);
            d[i] = {s, i};
        }
        std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k_ - 1), d.end());
        std::sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k_));
        double sum = 0.0;
        for (std::size_t i = 0; i < k_; ++i) sum += y_[d[i].second];
        return sum / static_cast<double>(k_);
    }

    void save(std::ostream& out) const override {
        st_.save(out);
        out << "k " << k_ << "\ntrain " << y_.size() << '\n';
        const std::size_t m = st_.mean.size();
        for (std::size_t i = 0; i < y_.size(); ++i) {
            out << format_double(y_[i]) << ' ';
            io::write_numbers(out, std::span<const double>(z_.data() + i * m, m));
        }
    }

    static KnnRegressor load(io::Reader& in) {
        auto st = Standardizer::load(in);
        in.expect("k");
        const auto k = in.count();
        in.expect("train");
        const auto n = in.count();
        const std::size_t m = st.mean.size();
        std::vector<double> y(n), z(n * m);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = in.number();
            for (std::size_t j = 0; j < m; ++j) z[i * m + j] = in.number();
        }
        return KnnRegressor(std::move(st), k, std::move(z), std::move(y));
    }

private:
    Standardizer st_;
    std::size_t k_;
    std::vector<double> z_; ///< row-major standardized training inputs
    std::vector<double> y_;
};

} // namespace yieldcast::models
