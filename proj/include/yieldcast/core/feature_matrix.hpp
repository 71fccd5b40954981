#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "yieldcast/core/error.hpp"
#include "yieldcast/core/text.hpp"

namespace yieldcast {

/// Fingerprint of an ordered column list.
inline std::uint64_t schema_hash(const std::vector<std::string>& names) {
    std::uint64_t h = fnv1a64("yieldcast-schema");
    for (const auto& n : names) {
        h = fnv1a64(n, h);
        h = fnv1a64(std::string_view("\x1f", 1), h);
    }
    return h;
}

/// Dense row-major design matrix with named columns.
class FeatureMatrix {
public:
    FeatureMatrix() = default;

    FeatureMatrix(std::vector<std::string> names, std::size_t rows)
        : names_(std::move(names)), rows_(rows), data_(rows * names_.size(), 0.0), hash_(schema_hash(names_)) {}

    FeatureMatrix(std::vector<std::string> names, std::size_t rows, std::vector<double> data)
        : names_(std::move(names)), rows_(rows), data_(std::move(data)), hash_(schema_hash(names_)) {
        if (data_.size() != rows_ * names_.size()) throw InvariantError("feature matrix data size mismatch");
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return names_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    std::uint64_t schema() const noexcept { return hash_; }

    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }

    std::vector<double> column(std::size_t c) const {
        std::vector<double> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
        return out;
    }

    const std::vector<double>& data() const noexcept { return data_; }

    /// Index of a column by name, or cols() when absent.
    std::size_t find(std::string_view name) const {
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == name) return i;
        return names_.size();
    }

    /// Rows selected by index, same schema.
    FeatureMatrix select_rows(std::span<const std::size_t> idx) const {
        FeatureMatrix out(names_, idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const auto src = row(idx[i]);
            std::copy(src.begin(), src.end(), out.row(i).begin());
        }
        return out;
    }

    friend bool operator==(const FeatureMatrix& a, const FeatureMatrix& b) {
        return a.names_ == b.names_ && a.rows_ == b.rows_ && a.data_ == b.data_;
    }

private:
    std::vector<std::string> names_;
    std::size_t rows_ = 0;
    std::vector<double> data_;
    std::uint64_t hash_ = schema_hash({});
};

} // namespace yieldcast
