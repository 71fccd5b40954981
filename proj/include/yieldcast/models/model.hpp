#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "yieldcast/core/error.hpp"
#include "yieldcast/core/feature_matrix.hpp"
#include "yieldcast/core/rng.hpp"
#include "yieldcast/models/ensemble.hpp"
#include "yieldcast/models/knn.hpp"
#include "yieldcast/models/linear.hpp"
#include "yieldcast/models/regressor.hpp"
#include "yieldcast/models/spec.hpp"
#include "yieldcast/models/tree.hpp"

namespace yieldcast::models {

/// A trained regressor bound to the schema it was trained on. Cheap to copy
/// (the learned state is shared and immutable) and safe to use from several
/// threads at once.
class FittedModel {
public:
    FittedModel(ModelSpec spec, std::vector<std::string> feature_names, std::shared_ptr<const Regressor> impl)
        : spec_(std::move(spec)), names_(std::move(feature_names)), schema_(schema_hash(names_)), impl_(std::move(impl)) {}

    const ModelSpec& spec() const noexcept { return spec_; }
    Family family() const noexcept { return impl_->family(); }
    const std::vector<std::string>& feature_names() const noexcept { return names_; }
    std::size_t feature_count() const noexcept { return names_.size(); }
    std::uint64_t schema() const noexcept { return schema_; }
    const Regressor& regressor() const noexcept { return *impl_; }

    /// Learned state as its concrete type, or nullptr.
    template <class T>
    const T* as() const noexcept {
        return dynamic_cast<const T*>(impl_.get());
    }

    /// No schema check; `x` must follow feature_names().
    double predict_row(std::span<const double> x) const { return impl_->predict_row(x); }

    std::vector<double> predict(const FeatureMatrix& X) const {
        if (X.schema() != schema_)
            throw SchemaError("feature schema " + to_hex(X.schema()) + " does not match training schema " + to_hex(schema_));
        std::vector<double> out(X.rows());
        for (std::size_t i = 0; i < X.rows(); ++i) out[i] = impl_->predict_row(X.row(i));
        return out;
    }

private:
    ModelSpec spec_;
    std::vector<std::string> names_;
    std::uint64_t schema_;
    std::shared_ptr<const Regressor> impl_;
};

inline FittedModel fit(const ModelSpec& spec_in, const FeatureMatrix& X, std::span<const double> y) {
    spec_in.validate();
    if (X.rows() != y.size()) throw InvariantError("X has " + std::to_string(X.rows()) + " rows but y has " + std::to_string(y.size()));
    if (X.rows() == 0) throw InvariantError("cannot fit on zero rows");
    for (double v : X.data())
        if (!std::isfinite(v)) throw InvariantError("training inputs contain a missing or non-finite value");
    for (double v : y)
        if (!std::isfinite(v)) throw InvariantError("training target contains a non-finite value");

    const ModelSpec spec = spec_in.resolved(X.cols());
    const TreeParams tp{*spec.max_depth, *spec.min_samples_leaf, *spec.max_features,
                        spec.family == Family::extra_trees};
    std::shared_ptr<const Regressor> impl;
    switch (spec.family) {
    case Family::dummy: impl = std::make_shared<MeanRegressor>(MeanRegressor::fit(y)); break;
    case Family::linear: impl = std::make_shared<LinearRegressor>(fit_linear(X, y)); break;
    case Family::ridge: impl = std::make_shared<LinearRegressor>(fit_ridge(X, y, spec.alpha)); break;
    case Family::omp: impl = std::make_shared<LinearRegressor>(fit_omp(X, y, spec.n_nonzero)); break;
    case Family::knn: impl = std::make_shared<KnnRegressor>(KnnRegressor::fit(X, y, spec.k)); break;
    case Family::tree: {
        const TrainingData data(X);
        Rng rng(derive_seed(spec.seed, seed_stream::tree, 0));
        impl = std::make_shared<TreeRegressor>(grow_tree(data, y, all_samples(X.rows()), tp, rng));
        break;
    }
    case Family::forest:
    case Family::extra_trees:
        impl = std::make_shared<ForestRegressor>(
            ForestRegressor::fit(spec.family, X, y, *spec.n_trees, tp, *spec.bootstrap, spec.seed, spec.threads));
        break;
    case Family::gbm:
        impl = std::make_shared<GbmRegressor>(GbmRegressor::fit(X, y, *spec.n_trees, tp, spec.learning_rate, spec.seed));
        break;
    }
    return FittedModel(spec, X.names(), std::move(impl));
}

// Model file layout (text, version 1):
//
//   yieldcast-model 1
//   family <family>
//   name <label, rest of line>
//   seed <u64>
//   schema <16 hex digits>
//   features <M>
//   <one feature name per line, M lines>
//   params alpha <v> n_nonzero <n> k <n> n_trees <n> max_depth <n> min_samples_leaf <n> max_features <n> bootstrap <0|1> learning_rate <v>
//   body
//   <family body>
//   end
//
// Family bodies:
//   dummy                 mean <v>
//   linear, ridge, omp    standardizer <M> / <M means> / <M scales> / intercept <ȳ> / weights <M standardized weights>
//   knn                   standardizer ... / k <k> / train <n> / n lines "<y> <M standardized inputs>"
//   tree                  tree <count> / count lines "<feature> <threshold> <left> <right> <value> <samples>"
//   forest, extra_trees   trees <T> / T tree blocks
//   gbm                   base <v> / learning_rate <v> / trees <T> / T tree blocks
//
// Numbers are written in shortest round-trip form, so a reloaded model predicts
// bit-identically.
inline void save_model(const FittedModel& model, std::ostream& out) {
    const auto& s = model.spec();
    out << "yieldcast-model 1\n";
    out << "family " << family_name(model.family()) << '\n';
    out << "name " << s.label() << '\n';
    out << "seed " << s.seed << '\n';
    out << "schema " << to_hex(model.schema()) << '\n';
    out << "features " << model.feature_count() << '\n';
    for (const auto& n : model.feature_names()) out << n << '\n';
    out << "params " << s.params_line() << '\n';
    out << "body\n";
    model.regressor().save(out);
    out << "end\n";
}

inline std::string save_model(const FittedModel& model) {
    std::ostringstream os;
    save_model(model, os);
    return os.str();
}

inline FittedModel load_model(std::istream& in) {
    io::Reader r(in);
    r.expect("yieldcast-model");
    if (r.integer() != 1) throw ParseError("unsupported model file version");
    r.expect("family");
    const Family family = parse_family(r.token());
    r.expect("name");
    std::string name;
    std::getline(in, name);
    ModelSpec spec;
    spec.family = family;
    spec.name = std::string(trim(name));
    r.expect("seed");
    spec.seed = static_cast<std::uint64_t>(std::stoull(r.token()));
    r.expect("schema");
    const std::string schema = r.token();
    r.expect("features");
    const auto m = r.count();
    std::vector<std::string> names(m);
    for (auto& n : names) n = r.token();
    if (to_hex(schema_hash(names)) != schema) throw ParseError("model file: schema hash does not match feature names");
    r.expect("params");
    r.expect("alpha");
    spec.alpha = r.number();
    r.expect("n_nonzero");
    spec.n_nonzero = r.count();
    r.expect("k");
    spec.k = r.count();
    r.expect("n_trees");
    spec.n_trees = r.count();
    r.expect("max_depth");
    spec.max_depth = r.count();
    r.expect("min_samples_leaf");
    spec.min_samples_leaf = r.count();
    r.expect("max_features");
    spec.max_features = r.count();
    r.expect("bootstrap");
    spec.bootstrap = r.integer() != 0;
    r.expect("learning_rate");
    spec.learning_rate = r.number();
    r.expect("body");

    std::shared_ptr<const Regressor> impl;
    switch (family) {
    case Family::dummy: impl = std::make_shared<MeanRegressor>(MeanRegressor::load(r)); break;
    case Family::linear:
    case Family::ridge:
    case Family::omp: impl = std::make_shared<LinearRegressor>(LinearRegressor::load(family, r)); break;
    case Family::knn: impl = std::make_shared<KnnRegressor>(KnnRegressor::load(r)); break;
    case Family::tree: impl = std::make_shared<TreeRegressor>(TreeRegressor::load(r)); break;
    case Family::forest:
    case Family::extra_trees: impl = std::make_shared<ForestRegressor>(ForestRegressor::load(family, r)); break;
    case Family::gbm: impl = std::make_shared<GbmRegressor>(GbmRegressor::load(r)); break;
    }
    r.expect("end");
    return FittedModel(spec, std::move(names), std::move(impl));
}

inline FittedModel load_model(const std::string& text) {
    std::istringstream is(text);
    return load_model(is);
}

} // namespace yieldcast::models
