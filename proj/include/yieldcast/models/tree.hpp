#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "yieldcast/core/feature_matrix.hpp"
#include "yieldcast/core/rng.hpp"
#include "yieldcast/models/regressor.hpp"

namespace yieldcast::models {

/// Internal node when feature >= 0: rows with x[feature] <= threshold go left.
struct TreeNode {
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0; ///< mean target of the training samples reaching the node
    std::uint32_t samples = 0;

    bool is_leaf() const noexcept { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class RegressionTree {
public:
    RegressionTree() = default;
    explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

    double predict(std::span<const double> x) const {
        std::size_t i = 0;
        while (!nodes_[i].is_leaf()) {
            const auto& n = nodes_[i];
            i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
        }
        return nodes_[i].value;
    }

    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

    std::size_t leaf_count() const {
        return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
    }

    std::size_t depth() const { return nodes_.empty() ? 0 : depth_from(0); }

    bool uses_feature(std::size_t f) const {
        return std::any_of(nodes_.begin(), nodes_.end(),
                           [&](const TreeNode& n) { return n.feature == static_cast<std::int32_t>(f); });
    }

    void save(std::ostream& out) const {
        out << "tree " << nodes_.size() << '\n';
        for (const auto& n : nodes_)
            out << n.feature << ' ' << format_double(n.threshold) << ' ' << n.left << ' ' << n.right << ' '
                << format_double(n.value) << ' ' << n.samples << '\n';
    }

    static RegressionTree load(io::Reader& in) {
        in.expect("tree");
        const auto count = in.count();
        std::vector<TreeNode> nodes(count);
        for (auto& n : nodes) {
            n.feature = static_cast<std::int32_t>(in.integer());
            n.threshold = in.number();
            n.left = static_cast<std::int32_t>(in.integer());
            n.right = static_cast<std::int32_t>(in.integer());
            n.value = in.number();
            n.samples = static_cast<std::uint32_t>(in.count());
            const auto bad = [&](std::int32_t c) { return c < 0 || static_cast<std::size_t>(c) >= count; };
            if (!n.is_leaf() && (bad(n.left) || bad(n.right))) throw ParseError("model file: tree child out of range");
        }
        if (nodes.empty()) throw ParseError("model file: empty tree");
        return RegressionTree(std::move(nodes));
    }

    friend bool operator==(const RegressionTree&, const RegressionTree&) = default;

private:
    std::size_t depth_from(std::size_t i) const {
        const auto& n = nodes_[i];
        if (n.is_leaf()) return 0;
        return 1 + std::max(depth_from(static_cast<std::size_t>(n.left)), depth_from(static_cast<std::size_t>(n.right)));
    }

    std::vector<TreeNode> nodes_;
};

struct TreeParams {
    std::size_t max_depth = 0;        ///< 0 = unlimited
    std::size_t min_samples_leaf = 1;
    std::size_t max_features = 0;     ///< features tried per split; 0 = all
    bool random_thresholds = false;   ///< extremely randomized: one uniform threshold per tried feature
};

/// Column-major copy of the inputs plus, per feature, the row indices sorted by
/// value (ties by row index). Built once per fit and shared by every tree.
class TrainingData {
public:
    explicit TrainingData(const FeatureMatrix& X) : rows_(X.rows()), cols_(X.cols()), x_(rows_ * cols_), order_(rows_ * cols_) {
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) x_[j * rows_ + i] = X(i, j);
        for (std::size_t j = 0; j < cols_; ++j) {
            auto* ord = order_.data() + j * rows_;
            std::iota(ord, ord + rows_, 0u);
            const double* col = x_.data() + j * rows_;
            std::stable_sort(ord, ord + rows_, [col](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
        }
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    const double* column(std::size_t f) const noexcept { return x_.data() + f * rows_; }
    const std::uint32_t* order(std::size_t f) const noexcept { return order_.data() + f * rows_; }

private:
    std::size_t rows_, cols_;
    std::vector<double> x_;
    std::vector<std::uint32_t> order_;
};

/// Grow one CART regression tree on squared error.
///
/// `samples` lists the training row of each sample (repeats allowed, which is how
/// bootstrap weights enter); `target` is indexed by row. Every node keeps its
/// samples as the same contiguous range in each feature's sorted order, so split
/// search is a linear scan and no sorting happens below the root.
///
/// Splits maximize the reduction of the sum of squared errors. Exact splits put
/// the threshold at the midpoint of consecutive distinct values. Among equal
/// gains the lowest feature index wins, then the lowest threshold. A node is a
/// leaf when its targets are constant, the depth cap is reached, it cannot give
/// both children min_samples_leaf samples, or no split has positive gain.
inline RegressionTree grow_tree(const TrainingData& data, std::span<const double> target,
                                std::span<const std::uint32_t> samples, const TreeParams& params, Rng& rng) {
    const std::size_t n = samples.size();
    const std::size_t m = data.cols();
    const std::size_t min_leaf = std::max<std::size_t>(1, params.min_samples_leaf);
    if (n == 0) throw InvariantError("cannot grow a tree on zero samples");

    // Bucket sample positions by row, then lay them out in each feature's row order.
    std::vector<std::uint32_t> row_start(data.rows() + 1, 0);
    for (auto r : samples) ++row_start[r + 1];
    for (std::size_t r = 0; r < data.rows(); ++r) row_start[r + 1] += row_start[r];
    std::vector<std::uint32_t> by_row(n);
    {
        std::vector<std::uint32_t> fill(row_start.begin(), row_start.end() - 1);
        for (std::uint32_t p = 0; p < n; ++p) by_row[fill[samples[p]]++] = p;
    }
    std::vector<std::uint32_t> ord(n * m);
    for (std::size_t f = 0; f < m; ++f) {
        const auto* rows = data.order(f);
        std::uint32_t* out = ord.data() + f * n;
        for (std::size_t i = 0; i < data.rows(); ++i) {
            const auto r = rows[i];
            for (auto k = row_start[r]; k < row_start[r + 1]; ++k) *out++ = by_row[k];
        }
    }
    std::vector<double> y(n);
    for (std::size_t p = 0; p < n; ++p) y[p] = target[samples[p]];

    auto xval = [&](std::size_t f, std::uint32_t p) { return data.column(f)[samples[p]]; };

    std::vector<std::size_t> feature_pool(m);
    std::iota(feature_pool.begin(), feature_pool.end(), 0);
    const std::size_t tried = (params.max_features == 0 || params.max_features >= m) ? m : params.max_features;
    std::vector<std::size_t> candidates;
    std::vector<std::uint8_t> left_flag(n);
    std::vector<std::uint32_t> scratch(n);

    struct Work {
        std::size_t node, begin, end, depth;
    };
    std::vector<TreeNode> nodes(1);
    std::vector<Work> stack{{0, 0, n, 0}};

    while (!stack.empty()) {
        const Work w = stack.back();
        stack.pop_back();
        const std::size_t count = w.end - w.begin;
        const std::uint32_t* base = ord.data() + w.begin; // feature 0 segment
        double sum = 0.0, lo = y[base[0]], hi = lo;
        for (std::size_t i = 0; i < count; ++i) {
            const double v = y[base[i]];
            sum += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        TreeNode& node = nodes[w.node];
        node.value = sum / static_cast<double>(count);
        node.samples = static_cast<std::uint32_t>(count);
        if (lo == hi || (params.max_depth && w.depth >= params.max_depth) || count < 2 * min_leaf) continue;

        candidates.clear();
        if (tried == m) {
            candidates = feature_pool;
        } else {
            for (std::size_t i = 0; i < tried; ++i) {
                const std::size_t j = i + rng.below(m - i);
                std::swap(feature_pool[i], feature_pool[j]);
                candidates.push_back(feature_pool[i]);
            }
            std::sort(candidates.begin(), candidates.end());
        }

        const double parent = sum * sum / static_cast<double>(count);
        double best_gain = 0.0;
        std::size_t best_feature = m;
        double best_threshold = 0.0;
        for (const std::size_t f : candidates) {
            const std::uint32_t* seg = ord.data() + f * n + w.begin;
            if (params.random_thresholds) {
                const double xmin = xval(f, seg[0]), xmax = xval(f, seg[count - 1]);
                if (!(xmin < xmax)) continue;
                double thr = rng.uniform(xmin, xmax);
                if (thr >= xmax) thr = xmin;
                double sl = 0.0;
                std::size_t nl = 0;
                while (nl < count && xval(f, seg[nl]) <= thr) sl += y[seg[nl++]];
                const std::size_t nr = count - nl;
                if (nl < min_leaf || nr < min_leaf) continue;
                const double sr = sum - sl;
                const double gain = sl * sl / static_cast<double>(nl) + sr * sr / static_cast<double>(nr) - parent;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = f;
                    best_threshold = thr;
                }
                continue;
            }
            double sl = 0.0;
            for (std::size_t i = 0; i + 1 < count; ++i) {
                sl += y[seg[i]];
                const std::size_t nl = i + 1, nr = count - nl;
                if (nr < min_leaf) break;
                if (nl < min_leaf) continue;
                const double a = xval(f, seg[i]), b = xval(f, seg[i + 1]);
                if (a == b) continue;
                const double sr = sum - sl;
                const double gain = sl * sl / static_cast<double>(nl) + sr * sr / static_cast<double>(nr) - parent;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = f;
                    double mid = a + (b - a) / 2;
                    if (!(mid < b)) mid = a;
                    best_threshold = mid;
                }
            }
        }
        if (best_feature == m) continue;

        // Partition every feature's segment stably by the chosen split.
        const std::uint32_t* seg_best = ord.data() + best_feature * n + w.begin;
        std::size_t n_left = 0;
        for (std::size_t i = 0; i < count; ++i) {
            const bool l = xval(best_feature, seg_best[i]) <= best_threshold;
            left_flag[seg_best[i]] = l;
            n_left += l;
        }
        for (std::size_t f = 0; f < m; ++f) {
            std::uint32_t* seg = ord.data() + f * n + w.begin;
            std::size_t li = 0, ri = n_left;
            for (std::size_t i = 0; i < count; ++i) scratch[left_flag[seg[i]] ? li++ : ri++] = seg[i];
            std::copy(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(count), seg);
        }

        const auto left = static_cast<std::int32_t>(nodes.size());
        nodes.emplace_back();
        nodes.emplace_back();
        TreeNode& parent_node = nodes[w.node];
        parent_node.feature = static_cast<std::int32_t>(best_feature);
        parent_node.threshold = best_threshold;
        parent_node.left = left;
        parent_node.right = left + 1;
        stack.push_back({static_cast<std::size_t>(left + 1), w.begin + n_left, w.end, w.depth + 1});
        stack.push_back({static_cast<std::size_t>(left), w.begin, w.begin + n_left, w.depth + 1});
    }
    return RegressionTree(std::move(nodes));
}

/// Identity sample list 0..n-1.
inline std::vector<std::uint32_t> all_samples(std::size_t n) {
    std::vector<std::uint32_t> s(n);
    std::iota(s.begin(), s.end(), 0u);
    return s;
}

/// A single CART tree as a model family.
class TreeRegressor final : public Regressor {
public:
    explicit TreeRegressor(RegressionTree tree) : tree_(std::move(tree)) {}

    Family family() const override { return Family::tree; }
    double predict_row(std::span<const double> x) const override { return tree_.predict(x); }
    const RegressionTree& tree() const noexcept { return tree_; }

    void save(std::ostream& out) const override { tree_.save(out); }
    static TreeRegressor load(io::Reader& in) { return TreeRegressor(RegressionTree::load(in)); }

private:
    RegressionTree tree_;
};

} // namespace yieldcast::models
