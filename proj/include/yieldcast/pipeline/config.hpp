#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <toml.hpp>

#include "yieldcast/core/error.hpp"
#include "yieldcast/core/text.hpp"
#include "yieldcast/dataset/feature_table.hpp"
#include "yieldcast/dataset/synth.hpp"
#include "yieldcast/dataset/yield_records.hpp"
#include "yieldcast/geodata/districts.hpp"
#include "yieldcast/matching/fuzzy_join.hpp"
#include "yieldcast/models/spec.hpp"

namespace yieldcast::pipeline {

namespace fs = std::filesystem;

inline constexpr const char* env_prefix = "YIELDCAST_";

enum class ExperimentMode { all_features, eo_only, both };

inline std::string_view mode_name(ExperimentMode m) {
    switch (m) {
    case ExperimentMode::all_features: return "all_features";
    case ExperimentMode::eo_only: return "eo_only";
    case ExperimentMode::both: return "both";
    }
    return "?";
}

struct Paths {
    fs::path rasters;   ///< directory with <var>/<year>/<MM>.asc
    fs::path crop_mask; ///< empty = no masking
    fs::path districts;
    fs::path yields;
    fs::path aliases;   ///< optional two-column CSV
    fs::path output = "out";
};

struct ExplainConfig {
    bool enabled = true;
    std::size_t rows = 0; ///< test rows to explain, evenly spaced; 0 = all
    std::size_t background = 64;
    std::size_t permutations = 256;
    std::string dependence_feature = "t2m_aug";
    std::string color_feature = "lai_aug";
};

struct RunConfig {
    Paths paths;
    data::YieldParseOptions yields;
    data::EoSchema schema;
    std::vector<std::string> masked_variables{"ndvi"};
    double mask_min_area = 0.0;
    int sowing_year_offset = 0;
    double outlier_k = 3.0;
    data::OutlierScope outlier_scope = data::OutlierScope::global;
    geo::GeoJsonKeys geojson;
    int match_threshold = match::default_threshold;
    int last_train_year = 2018;
    ExperimentMode mode = ExperimentMode::both;
    ExplainConfig explain;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    std::vector<models::ModelSpec> models;

    /// Referenced files exist and values are in range. Throws ConfigError.
    void validate() const {
        auto need = [](const fs::path& p, const char* key, bool dir) {
            if (p.empty()) throw ConfigError(std::string("paths.") + key + " is not set");
            if (dir ? !fs::is_directory(p) : !fs::is_regular_file(p))
                throw ConfigError(std::string("paths.") + key + " does not exist: " + p.string());
        };
        need(paths.rasters, "rasters", true);
        need(paths.districts, "districts", false);
        need(paths.yields, "yields", false);
        if (!paths.crop_mask.empty()) need(paths.crop_mask, "crop_mask", false);
        if (!paths.aliases.empty()) need(paths.aliases, "aliases", false);
        if (paths.output.empty()) throw ConfigError("paths.output is not set");
        if (schema.variables.empty()) throw ConfigError("data.variables is empty");
        if (schema.months.empty()) throw ConfigError("data.months is empty");
        for (int m : schema.months)
            if (m < 1 || m > 12) throw ConfigError("data.months contains " + std::to_string(m) + ", expected 1-12");
        std::set<std::string> vars(schema.variables.begin(), schema.variables.end());
        if (vars.size() != schema.variables.size()) throw ConfigError("data.variables has duplicates");
        for (const auto& v : masked_variables)
            if (!vars.count(v)) throw ConfigError("data.masked_variables names unknown variable '" + v + "'");
        if (!masked_variables.empty() && paths.crop_mask.empty())
            throw ConfigError("data.masked_variables is set but paths.crop_mask is not");
        if (!(outlier_k > 0.0)) throw ConfigError("data.outlier_k must be positive");
        if (yields.min_year > yields.max_year) throw ConfigError("data.min_year is after data.max_year");
        if (match_threshold < 0 || match_threshold > 100) throw ConfigError("match.threshold must be within 0-100");
        if (models.empty()) throw ConfigError("at least one [[models]] entry is required");
        std::set<std::string> labels;
        for (const auto& m : models) {
            try {
                m.validate();
            } catch (const std::exception& e) {
                throw ConfigError("model '" + m.label() + "': " + e.what());
            }
            if (!labels.insert(m.label()).second) throw ConfigError("duplicate model name '" + m.label() + "'");
        }
        if (explain.enabled && (explain.background == 0 || explain.permutations == 0))
            throw ConfigError("explain.background and explain.permutations must be at least 1");
    }
};

namespace config_detail {

inline std::vector<std::string> split_key(std::string_view key) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = key.find("__", start);
        out.push_back(to_lower(key.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 2;
    }
    return out;
}

/// Env values are read as TOML values when they parse as one, else as strings.
inline toml::table parse_env_value(const std::string& text) {
    try {
        return toml::parse("v = " + text);
    } catch (const toml::parse_error&) {
        toml::table t;
        t.insert("v", text);
        return t;
    }
}

inline void set_path(toml::table& root, const std::vector<std::string>& path, const std::string& raw, const std::string& var) {
    toml::node* cur = &root;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        const auto& seg = path[i];
        if (auto* t = cur->as_table()) {
            if (!t->contains(seg)) t->insert(seg, toml::table{});
            cur = t->get(seg);
        } else if (auto* a = cur->as_array()) {
            const auto idx = parse_int(seg);
            if (!idx || *idx < 0 || static_cast<std::size_t>(*idx) >= a->size())
                throw ConfigError(var + ": index '" + seg + "' out of range");
            cur = a->get(static_cast<std::size_t>(*idx));
        } else {
            throw ConfigError(var + ": '" + seg + "' is not a table");
        }
    }
    auto value = parse_env_value(raw);
    auto* node = value.get("v");
    const auto& last = path.back();
    if (auto* t = cur->as_table()) {
        t->insert_or_assign(last, *node);
    } else if (auto* a = cur->as_array()) {
        const auto idx = parse_int(last);
        if (!idx || *idx < 0 || static_cast<std::size_t>(*idx) >= a->size())
            throw ConfigError(var + ": index '" + last + "' out of range");
        a->replace(a->begin() + *idx, *node);
    } else {
        throw ConfigError(var + ": parent of '" + last + "' is not a table");
    }
}

class Reader {
public:
    Reader(const toml::table& t, std::string where) : t_(t), where_(std::move(where)) {}

    template <class T>
    std::optional<T> get(const char* key) {
        seen_.insert(key);
        const auto* n = t_.get(key);
        if (!n) return std::nullopt;
        if constexpr (std::is_same_v<T, double>) {
            if (auto v = n->value<double>()) return *v;
        } else if constexpr (std::is_same_v<T, bool>) {
            if (auto v = n->value<bool>()) return *v;
        } else if constexpr (std::is_integral_v<T>) {
            if (auto v = n->value<std::int64_t>()) {
                if constexpr (std::is_unsigned_v<T>)
                    if (*v < 0) throw ConfigError(name(key) + " must not be negative");
                return static_cast<T>(*v);
            }
        } else {
            if (auto v = n->value<std::string>()) return *v;
        }
        throw ConfigError(name(key) + " has the wrong type");
    }

    template <class T>
    void read(const char* key, T& out) {
        if (auto v = get<T>(key)) out = *v;
    }

    template <class T>
    void read_list(const char* key, std::vector<T>& out) {
        seen_.insert(key);
        const auto* n = t_.get(key);
        if (!n) return;
        const auto* a = n->as_array();
        if (!a) throw ConfigError(name(key) + " must be an array");
        out.clear();
        for (const auto& e : *a) {
            if constexpr (std::is_same_v<T, std::string>) {
                auto v = e.value<std::string>();
                if (!v) throw ConfigError(name(key) + " must contain strings");
                out.push_back(*v);
            } else {
                auto v = e.value<std::int64_t>();
                if (!v) throw ConfigError(name(key) + " must contain integers");
                out.push_back(static_cast<T>(*v));
            }
        }
    }

    void finish() const {
        for (const auto& [k, _] : t_)
            if (!seen_.count(std::string(k.str()))) throw ConfigError("unknown key " + name(std::string(k.str())));
    }

private:
    std::string name(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

    const toml::table& t_;
    std::string where_;
    std::set<std::string> seen_;
};

inline const toml::table& section(const toml::table& root, const char* name) {
    static const toml::table empty;
    const auto* n = root.get(name);
    if (!n) return empty;
    if (const auto* t = n->as_table()) return *t;
    throw ConfigError(std::string("[") + name + "] must be a table");
}

inline fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

} // namespace config_detail

/// Applies YIELDCAST_<SECTION>__<KEY>=value overrides; "__" separates nesting
/// levels and numeric segments index arrays (YIELDCAST_MODELS__0__N_TREES).
inline void apply_env_overrides(toml::table& root, const std::map<std::string, std::string>& env) {
    const std::string prefix = env_prefix;
    for (const auto& [var, value] : env) {
        if (var.rfind(prefix, 0) != 0 || var.size() == prefix.size()) continue;
        config_detail::set_path(root, config_detail::split_key(std::string_view(var).substr(prefix.size())), value, var);
    }
}

/// Builds a RunConfig from parsed TOML. Relative paths resolve against `base_dir`.
inline RunConfig config_from_toml(const toml::table& root, const fs::path& base_dir) {
    using config_detail::Reader;
    using config_detail::section;
    for (const auto& [k, _] : root) {
        static const std::set<std::string> known{"paths", "data", "geojson", "yield_columns", "match", "split",
                                                 "experiment", "explain", "run", "models"};
        if (!known.count(std::string(k.str()))) throw ConfigError("unknown section [" + std::string(k.str()) + "]");
    }
    RunConfig c;
    {
        Reader r(section(root, "paths"), "paths");
        auto path = [&](const char* key, fs::path& out) {
            if (auto v = r.get<std::string>(key)) out = config_detail::resolve(base_dir, *v);
        };
        path("rasters", c.paths.rasters);
        path("crop_mask", c.paths.crop_mask);
        path("districts", c.paths.districts);
        path("yields", c.paths.yields);
        path("aliases", c.paths.aliases);
        path("output", c.paths.output);
        if (!root["paths"]["output"]) c.paths.output = base_dir / "out";
        r.finish();
    }
    {
        Reader r(section(root, "data"), "data");
        r.read("season", c.yields.season);
        r.read("crop", c.yields.crop);
        r.read("min_year", c.yields.min_year);
        r.read("max_year", c.yields.max_year);
        r.read_list("months", c.schema.months);
        r.read_list("variables", c.schema.variables);
        r.read_list("masked_variables", c.masked_variables);
        r.read("mask_min_area", c.mask_min_area);
        r.read("sowing_year_offset", c.sowing_year_offset);
        r.read("outlier_k", c.outlier_k);
        if (auto s = r.get<std::string>("outlier_scope")) {
            if (*s == "global")
                c.outlier_scope = data::OutlierScope::global;
            else if (*s == "per_district")
                c.outlier_scope = data::OutlierScope::per_district;
            else
                throw ConfigError("data.outlier_scope must be 'global' or 'per_district'");
        }
        r.finish();
    }
    {
        Reader r(section(root, "geojson"), "geojson");
        r.read("district_key", c.geojson.district);
        r.read("state_key", c.geojson.state);
        r.finish();
    }
    {
        Reader r(section(root, "yield_columns"), "yield_columns");
        auto& k = c.yields.columns;
        r.read("state", k.state);
        r.read("district", k.district);
        r.read("crop", k.crop);
        r.read("season", k.season);
        r.read("year", k.year);
        r.read("area", k.area);
        r.read("production", k.production);
        r.read("yield", k.yield);
        r.finish();
    }
    {
        Reader r(section(root, "match"), "match");
        r.read("threshold", c.match_threshold);
        r.finish();
    }
    {
        Reader r(section(root, "split"), "split");
        r.read("last_train_year", c.last_train_year);
        r.finish();
    }
    {
        Reader r(section(root, "experiment"), "experiment");
        if (auto m = r.get<std::string>("mode")) {
            if (*m == "all_features")
                c.mode = ExperimentMode::all_features;
            else if (*m == "eo_only")
                c.mode = ExperimentMode::eo_only;
            else if (*m == "both")
                c.mode = ExperimentMode::both;
            else
                throw ConfigError("experiment.mode must be all_features, eo_only or both");
        }
        r.finish();
    }
    {
        Reader r(section(root, "explain"), "explain");
        r.read("enabled", c.explain.enabled);
        r.read("rows", c.explain.rows);
        r.read("background", c.explain.background);
        r.read("permutations", c.explain.permutations);
        r.read("dependence_feature", c.explain.dependence_feature);
        r.read("color_feature", c.explain.color_feature);
        r.finish();
    }
    {
        Reader r(section(root, "run"), "run");
        r.read("seed", c.seed);
        r.read("threads", c.threads);
        r.finish();
    }
    if (const auto* n = root.get("models")) {
        const auto* arr = n->as_array();
        if (!arr) throw ConfigError("models must be an array of tables ([[models]])");
        for (std::size_t i = 0; i < arr->size(); ++i) {
            const auto* t = arr->get(i)->as_table();
            if (!t) throw ConfigError("models[" + std::to_string(i) + "] must be a table");
            Reader r(*t, "models[" + std::to_string(i) + "]");
            models::ModelSpec s;
            const auto family = r.get<std::string>("family");
            if (!family) throw ConfigError("models[" + std::to_string(i) + "].family is required");
            s.family = models::parse_family(*family);
            r.read("name", s.name);
            r.read("alpha", s.alpha);
            r.read("n_nonzero", s.n_nonzero);
            r.read("k", s.k);
            r.read("learning_rate", s.learning_rate);
            if (auto v = r.get<std::size_t>("n_trees")) s.n_trees = *v;
            if (auto v = r.get<std::size_t>("max_depth")) s.max_depth = *v;
            if (auto v = r.get<std::size_t>("min_samples_leaf")) s.min_samples_leaf = *v;
            if (auto v = r.get<std::size_t>("max_features")) s.max_features = *v;
            if (auto v = r.get<bool>("bootstrap")) s.bootstrap = *v;
            std::optional<std::uint64_t> seed = r.get<std::uint64_t>("seed");
            r.finish();
            s.seed = seed.value_or(c.seed);
            s.threads = c.threads;
            c.models.push_back(std::move(s));
        }
    }
    return c;
}

inline std::map<std::string, std::string> environment_overrides(char** envp) {
    std::map<std::string, std::string> out;
    if (!envp) return out;
    for (char** e = envp; *e; ++e) {
        const std::string kv(*e);
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        if (kv.rfind(env_prefix, 0) == 0) out.emplace(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return out;
}

/// Reads a config file, applies environment overrides and resolves paths
/// against the file's directory. Does not validate.
inline RunConfig load_config(const fs::path& file, const std::map<std::string, std::string>& env = {}) {
    toml::table root;
    try {
        root = toml::parse_file(file.string());
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << file.string() << ":" << e.source().begin.line << ": " << e.description();
        throw ConfigError(os.str());
    }
    apply_env_overrides(root, env);
    return config_from_toml(root, file.parent_path().empty() ? fs::path(".") : file.parent_path());
}

/// Config for a bundle written by write_synth_bundle, with the explanation
/// budget sized for a single-core run of the full model set.
inline std::string synth_config_toml(const data::SynthOptions& o) {
    std::ostringstream s;
    s << "# Generated for a synthetic bundle (seed " << o.seed << ", " << o.n_districts << " districts, " << o.first_year << "-"
      << o.last_year << ", noise_sigma " << format_double(o.noise_sigma) << ")\n\n";
    s << "[paths]\nrasters = \"rasters\"\ncrop_mask = \"cropmask.asc\"\ndistricts = \"districts.geojson\"\n"
         "yields = \"yields.csv\"\noutput = \"out\"\n\n";
    s << "[data]\nseason = \"kharif\"\nmonths = [5, 6, 7, 8, 9, 10, 11]\n"
         "variables = [\"pev\", \"t2m\", \"tp\", \"lai\", \"sp\", \"swvl1\", \"ndvi\"]\nmasked_variables = [\"ndvi\"]\n"
         "mask_min_area = 0.0\noutlier_k = 3.0\n";
    s << "min_year = " << o.first_year << "\nmax_year = " << o.last_year << "\n\n";
    s << "[match]\nthreshold = 85\n\n";
    s << "[split]\nlast_train_year = " << (o.last_year - 2) << "\n\n";
    s << "[experiment]\nmode = \"both\"\n\n";
    s << "[explain]\nrows = 100\nbackground = 16\npermutations = 16\ndependence_feature = \"t2m_aug\"\n"
         "color_feature = \"lai_aug\"\n\n";
    s << "[run]\nseed = " << o.seed << "\n\n";
    for (auto f : models::all_families) s << "[[models]]\nfamily = \"" << models::family_name(f) << "\"\n\n";
    return s.str();
}

} // namespace yieldcast::pipeline
