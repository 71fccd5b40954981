#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "yieldcast/core/error.hpp"
#include "yieldcast/core/log.hpp"
#include "yieldcast/core/parallel.hpp"
#include "yieldcast/core/text.hpp"
#include "yieldcast/dashboard/bundle.hpp"
#include "yieldcast/dataset/feature_table.hpp"
#include "yieldcast/dataset/synth.hpp"
#include "yieldcast/dataset/yield_records.hpp"
#include "yieldcast/evaluation/metrics.hpp"
#include "yieldcast/explain/exports.hpp"
#include "yieldcast/explain/shapley.hpp"
#include "yieldcast/geodata/districts.hpp"
#include "yieldcast/geodata/raster.hpp"
#include "yieldcast/geodata/zonal.hpp"
#include "yieldcast/matching/fuzzy_join.hpp"
#include "yieldcast/models/leaderboard.hpp"
#include "yieldcast/models/model.hpp"
#include "yieldcast/pipeline/config.hpp"
#include "yieldcast/pipeline/manifest.hpp"

namespace yieldcast::pipeline {

/// A pipeline stage failed after validation. `stage()` names it.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what) : Error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

struct ExperimentResult {
    std::string name; ///< "all_features" or "eo_only"
    std::vector<models::LeaderboardRow> leaderboard;
    data::FeatureTable train;
    data::FeatureTable test;
};

struct RunResult {
    fs::path out;
    std::string run_id;
    std::vector<ExperimentResult> experiments;
    std::vector<ManifestEntry> manifest;
};

namespace run_detail {

/// Monthly grid from <var>/<year>/<MM>.asc, or the per-cell mean of the daily
/// grids in <var>/<year>/<MM>/<DD>.asc. nullopt when neither exists.
inline std::optional<geo::RasterGrid> load_month(const fs::path& root, const std::string& var, int year, int month) {
    const fs::path ydir = root / var / std::to_string(year);
    const fs::path monthly = ydir / data::month_file(month);
    auto parse = [](const fs::path& p) {
        try {
            return geo::parse_ascii_grid(read_file(p));
        } catch (const ParseError& e) {
            throw ParseError(p.generic_string() + ": " + e.what());
        }
    };
    if (fs::is_regular_file(monthly)) return parse(monthly);
    const fs::path mdir = ydir / std::string(data::month_file(month)).substr(0, 2);
    if (!fs::is_directory(mdir)) return std::nullopt;
    std::vector<std::pair<int, geo::RasterGrid>> days;
    for (int d = 1; d <= 31; ++d) {
        const fs::path p = mdir / data::month_file(d);
        if (fs::is_regular_file(p)) days.emplace_back(d, parse(p));
    }
    if (days.empty()) return std::nullopt;
    const auto& h = days.front().second.header();
    for (const auto& [_, g] : days)
        if (!g.header().same_geometry(h)) throw SchemaError(mdir.generic_string() + ": daily grids differ in geometry");
    std::vector<double> out(h.size(), h.nodata);
    std::vector<data::DatedValue> series;
    for (std::size_t i = 0; i < h.size(); ++i) {
        series.clear();
        for (const auto& [d, g] : days) {
            const double v = g.values()[i];
            if (!g.is_nodata(v)) series.push_back({{year, month, d}, v});
        }
        if (auto m = data::monthly_mean(series, month, year)) out[i] = *m;
    }
    return geo::RasterGrid(h, std::move(out));
}

/// Routes log lines to run.log as well as the previous sink while alive.
class RunLog {
public:
    explicit RunLog(const fs::path& file) : file_(std::make_shared<std::ofstream>(file)) {
        auto f = file_;
        auto m = mutex_;
        prev_ = log::set_sink(nullptr);
        auto prev = prev_;
        log::set_sink([f, m, prev](log::Level l, std::string_view msg) {
            {
                std::lock_guard lock(*m);
                *f << "level=" << log::level_name(l) << ' ' << msg << '\n';
            }
            if (prev) prev(l, msg);
        });
    }
    ~RunLog() { close(); }
    void close() {
        if (closed_) return;
        closed_ = true;
        log::set_sink(prev_);
        file_->close();
    }
    RunLog(const RunLog&) = delete;
    RunLog& operator=(const RunLog&) = delete;

private:
    std::shared_ptr<std::ofstream> file_;
    std::shared_ptr<std::mutex> mutex_ = std::make_shared<std::mutex>();
    log::Sink prev_;
    bool closed_ = false;
};

inline bool looks_like_run_dir(const fs::path& out) {
    return fs::exists(out / "manifest.json") || fs::exists(out / "run.log") || fs::exists(out / "failed");
}

/// Fresh output directory. A previous run's directory is cleared; any other
/// non-empty directory is refused.
inline void prepare_output(const fs::path& out) {
    if (fs::exists(out)) {
        if (!fs::is_directory(out)) throw ConfigError("output path is not a directory: " + out.string());
        if (!fs::is_empty(out)) {
            if (!looks_like_run_dir(out))
                throw ConfigError("output directory " + out.string() + " is not empty and holds no previous run");
            for (const auto& e : fs::directory_iterator(out)) fs::remove_all(e.path());
        }
    }
    fs::create_directories(out);
}

inline void move_to_failed(const fs::path& out, const std::string& stage, const std::string& what) {
    const fs::path failed = out / "failed";
    fs::create_directories(failed);
    for (const auto& e : fs::directory_iterator(out)) {
        if (e.path().filename() == "failed") continue;
        fs::rename(e.path(), failed / e.path().filename());
    }
    data::write_text_file(failed / "FAILED.txt", "stage=" + stage + "\nerror=" + what + "\n");
}

inline std::vector<std::size_t> evenly_spaced(std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx;
    if (k == 0 || k >= n) {
        for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
        return idx;
    }
    for (std::size_t i = 0; i < k; ++i) idx.push_back(i * n / k);
    return idx;
}

inline std::string predictions_csv(const data::FeatureTable& test, const std::vector<models::LeaderboardRow>& rows) {
    csv::Writer w;
    std::vector<std::string> header{"district_id", "state", "district", "year", "actual"};
    std::vector<const models::LeaderboardRow*> ok;
    for (const auto& r : rows)
        if (r.model) {
            header.push_back(r.spec.label());
            ok.push_back(&r);
        }
    w.row(header);
    for (std::size_t i = 0; i < test.rows.size(); ++i) {
        const auto& t = test.rows[i];
        std::vector<std::string> f{std::to_string(t.district_id), t.state, t.district, std::to_string(t.year),
                                   format_double(t.target)};
        for (const auto* r : ok) f.push_back(format_double(r->predictions[i]));
        w.row(f);
    }
    return w.str();
}

inline std::string split_csv(const data::FeatureTable& train, const data::FeatureTable& test) {
    std::map<int, std::pair<std::string, std::size_t>> years;
    for (const auto& r : train.rows) {
        years[r.year].first = "train";
        ++years[r.year].second;
    }
    for (const auto& r : test.rows) {
        years[r.year].first = "test";
        ++years[r.year].second;
    }
    csv::Writer w;
    w.row({"year", "partition", "rows"});
    for (const auto& [y, p] : years) w.row({std::to_string(y), p.first, std::to_string(p.second)});
    return w.str();
}

} // namespace run_detail

/// Observed yields under polygon-side names; repeated keys keep the smaller yield.
inline dashboard::ActualTable actual_table(const std::vector<data::YieldRecord>& records,
                                           const std::map<match::NamedUnit, std::size_t>& mapping,
                                           const std::vector<match::NamedUnit>& shapes) {
    dashboard::ActualTable actuals;
    for (const auto& r : records) {
        const auto it = mapping.find({r.state, r.district});
        if (it == mapping.end()) continue;
        const auto& s = shapes[it->second];
        auto [pos, fresh] = actuals.emplace(std::tuple{s.state, s.district, r.year}, r.yield);
        if (!fresh) pos->second = std::min(pos->second, r.yield);
    }
    return actuals;
}

/// Feature names the model inputs will carry under this config.
inline std::vector<std::string> input_feature_names(const RunConfig& cfg, bool with_ids) {
    data::FeatureTable t;
    t.eo_names = cfg.schema.feature_names();
    t.include_ids = with_ids;
    return t.input_names();
}

/// Runs every stage and writes artifacts under cfg.paths.output:
///
///   summary.json                     counts from ingest, match, features and split
///   match_states.csv, match_districts.csv
///   features.csv, split.csv
///   <experiment>/leaderboard.csv     one per experiment (all_features, eo_only)
///   <experiment>/predictions.csv     test rows, one column per fitted model
///   <experiment>/metrics.csv, residuals.csv, residual_histogram.csv,
///   <experiment>/region_error.csv, model.txt      for the top-ranked model
///   explain/shap_summary.csv, shap_points.csv, shap_dependence.csv
///   dashboard.json
///   manifest.json                    SHA-256 of every file above
///   run.log                          structured log with timings (not in the manifest)
///
/// ConfigError is thrown before anything is written. Any later failure moves
/// the partial output under <out>/failed/, writes failed/FAILED.txt and throws
/// StageError.
inline RunResult cmd_run(const RunConfig& cfg) {
    cfg.validate();
    const bool want_all = cfg.mode != ExperimentMode::eo_only;
    const bool want_eo = cfg.mode != ExperimentMode::all_features;
    if (cfg.explain.enabled) {
        const auto names = input_feature_names(cfg, want_all);
        for (const auto* f : {&cfg.explain.dependence_feature, &cfg.explain.color_feature})
            if (std::find(names.begin(), names.end(), *f) == names.end())
                throw ConfigError("explain feature '" + *f + "' is not a model input");
    }

    RunResult res;
    res.out = cfg.paths.output;
    const fs::path& out = res.out;
    run_detail::prepare_output(out);
    run_detail::RunLog runlog(out / "run.log");
    std::string stage = "ingest";
    auto put = [&](const std::string& rel, const std::string& text) { data::write_text_file(out / rel, text); };

    try {
        nlohmann::ordered_json summary;

        // ingest
        std::vector<data::YieldRecord> records;
        geo::DistrictSet districts;
        data::ZonalCube cube(0, cfg.schema, 0, 0);
        {
            log::StageTimer t("ingest");
            const std::string yields_text = read_file(cfg.paths.yields);
            auto parsed = data::parse_yield_csv(yields_text, cfg.yields);
            summary["yield_rows_parsed"] = parsed.records.size();
            summary["yield_rows_skipped"] = parsed.skipped;
            summary["yield_rows_other_season_or_crop"] = parsed.filtered;
            auto filtered = data::remove_yield_outliers(parsed.records, cfg.outlier_k, cfg.outlier_scope);
            summary["yield_outliers_removed"] = filtered.removed.size();
            log::info("event=yields parsed=" + std::to_string(parsed.records.size()) + " skipped=" +
                      std::to_string(parsed.skipped) + " outliers=" + std::to_string(filtered.removed.size()));
            records = std::move(filtered.kept);

            const std::string districts_text = read_file(cfg.paths.districts);
            districts = geo::parse_geojson_districts(districts_text, cfg.geojson);
            summary["districts"] = districts.size();

            std::optional<geo::RasterGrid> mask;
            if (!cfg.paths.crop_mask.empty()) mask = geo::parse_ascii_grid(read_file(cfg.paths.crop_mask));

            int y0 = records.front().year, y1 = records.front().year;
            for (const auto& r : records) {
                y0 = std::min(y0, r.year);
                y1 = std::max(y1, r.year);
            }
            y0 -= cfg.sowing_year_offset;
            y1 -= cfg.sowing_year_offset;
            cube = data::ZonalCube(districts.size(), cfg.schema, y0, y1);

            std::optional<geo::RasterHeader> header;
            if (mask) header = mask->header();
            for (int y = y0; y <= y1 && !header; ++y)
                for (int m : cfg.schema.months)
                    if (auto g = run_detail::load_month(cfg.paths.rasters, cfg.schema.variables.front(), y, m)) {
                        header = g->header();
                        break;
                    }
            if (!header) throw InvariantError("no raster grids found under " + cfg.paths.rasters.string());
            const auto labels = geo::rasterize_districts(*header, districts);

            const std::set<std::string> masked(cfg.masked_variables.begin(), cfg.masked_variables.end());
            const std::size_t nvar = cfg.schema.variables.size();
            const std::size_t nyear = cube.years();
            std::vector<std::size_t> missing(nvar * nyear, 0);
            parallel_for(
                nvar * nyear,
                [&](std::size_t task) {
                    const std::size_t v = task / nyear;
                    const int year = y0 + static_cast<int>(task % nyear);
                    const auto& var = cfg.schema.variables[v];
                    for (std::size_t mi = 0; mi < cfg.schema.months.size(); ++mi) {
                        auto g = run_detail::load_month(cfg.paths.rasters, var, year, cfg.schema.months[mi]);
                        if (!g) {
                            ++missing[task];
                            continue;
                        }
                        if (!g->header().same_geometry(*header))
                            throw SchemaError("raster " + var + "/" + std::to_string(year) + "/" +
                                              data::month_file(cfg.schema.months[mi]) + " does not match the grid geometry");
                        if (masked.count(var)) *g = geo::apply_crop_mask(*g, *mask, cfg.mask_min_area);
                        const auto means = geo::zonal_means(*g, labels, districts.size());
                        for (std::size_t d = 0; d < districts.size(); ++d) cube.set(d, v, year, mi, means[d]);
                    }
                },
                cfg.threads);
            std::size_t missing_grids = 0;
            for (auto m : missing) missing_grids += m;
            summary["raster_years"] = {y0, y1};
            summary["raster_grids_missing"] = missing_grids;
            if (missing_grids) log::warn("event=rasters_missing count=" + std::to_string(missing_grids));
        }

        // match
        stage = "match";
        std::vector<match::NamedUnit> shapes;
        match::DistrictMatch matched;
        {
            log::StageTimer t("match");
            for (const auto& d : districts) shapes.push_back({d.state, d.name});
            std::set<match::NamedUnit> units;
            for (const auto& r : records) units.insert({r.state, r.district});
            match::AliasTable aliases;
            if (!cfg.paths.aliases.empty()) aliases = match::parse_alias_csv(read_file(cfg.paths.aliases));
            matched = match::match_districts({units.begin(), units.end()}, shapes, cfg.match_threshold, aliases);
            put("match_states.csv", match::write_match_report_csv(matched.states));
            put("match_districts.csv", match::write_match_report_csv(matched.districts));
            summary["matched_districts"] = matched.districts.matches.size();
            summary["unmatched_yield_districts"] = matched.districts.unmatched_yield.size();
            summary["unmatched_shape_districts"] = matched.districts.unmatched_shape.size();
            log::info("event=match matched=" + std::to_string(matched.districts.matches.size()) +
                      " unmatched_yield=" + std::to_string(matched.districts.unmatched_yield.size()) +
                      " unmatched_shape=" + std::to_string(matched.districts.unmatched_shape.size()));
        }

        // features
        stage = "features";
        data::BuildResult built;
        {
            log::StageTimer t("features");
            built = data::build_feature_table(cube, shapes, records, matched.mapping, {true, cfg.sowing_year_offset});
            put("features.csv", data::write_feature_table_csv(built.table));
            summary["feature_rows"] = built.table.rows.size();
            summary["feature_rows_excluded_missing"] = built.excluded_missing;
            summary["yield_records_unmatched"] = built.unmatched_records;
            summary["yield_records_duplicate"] = built.duplicate_records;
            summary["yield_records_without_rasters"] = built.out_of_range_years;
            summary["schema_hash"] = to_hex(built.table.schema_hash());
        }

        // split
        stage = "split";
        auto [train, test] = data::chronological_split(built.table, cfg.last_train_year);
        put("split.csv", run_detail::split_csv(train, test));
        summary["train_rows"] = train.rows.size();
        summary["test_rows"] = test.rows.size();
        log::info("event=split train=" + std::to_string(train.rows.size()) + " test=" + std::to_string(test.rows.size()));

        // train and evaluate
        stage = "train";
        std::vector<std::pair<std::string, bool>> experiments;
        if (want_all) experiments.emplace_back("all_features", true);
        if (want_eo) experiments.emplace_back("eo_only", false);
        for (const auto& [name, ids] : experiments) {
            stage = "train:" + name;
            log::StageTimer t("train:" + name);
            ExperimentResult ex{name, {}, train.with_ids(ids), test.with_ids(ids)};
            const auto Xtr = ex.train.inputs();
            const auto Xte = ex.test.inputs();
            const auto ytr = ex.train.targets();
            const auto yte = ex.test.targets();
            ex.leaderboard = models::train_all(cfg.models, Xtr, ytr, Xte, yte);
            put(name + "/leaderboard.csv", models::write_leaderboard_csv(ex.leaderboard));
            put(name + "/predictions.csv", run_detail::predictions_csv(ex.test, ex.leaderboard));
            const auto& best = ex.leaderboard.front();
            if (!best.model) throw InvariantError("every model failed to fit");

            stage = "evaluate:" + name;
            put(name + "/metrics.csv", eval::write_metrics_csv(*best.test));
            const auto rs = eval::residual_summary(yte, best.predictions);
            put(name + "/residuals.csv", eval::write_residuals_csv(yte, best.predictions));
            put(name + "/residual_histogram.csv", eval::write_histogram_csv(rs));
            std::vector<eval::RegionRow> region;
            for (std::size_t i = 0; i < ex.test.rows.size(); ++i)
                region.push_back({ex.test.rows[i].state, ex.test.rows[i].district, yte[i], best.predictions[i]});
            put(name + "/region_error.csv", eval::write_region_error_csv(eval::region_error(region)));
            put(name + "/model.txt", models::save_model(*best.model));
            summary["best_model"][name] = best.spec.label();
            res.experiments.push_back(std::move(ex));
        }

        // explain
        const auto& first = res.experiments.front();
        const auto& best = first.leaderboard.front();
        if (cfg.explain.enabled) {
            stage = "explain";
            log::StageTimer t("explain");
            const auto Xtr = first.train.inputs();
            const auto Xte_all = first.test.inputs();
            const auto idx = run_detail::evenly_spaced(Xte_all.rows(), cfg.explain.rows);
            const auto Xte = Xte_all.select_rows(idx);
            auto background = explain::select_background(Xtr, cfg.explain.background, cfg.seed);
            const auto set = explain::explain_rows(*best.model, Xte, std::move(background), cfg.explain.permutations,
                                                   cfg.seed, cfg.threads);
            put("explain/shap_summary.csv", explain::write_shap_summary_csv(set));
            put("explain/shap_points.csv", explain::write_shap_points_csv(set, Xte));
            put("explain/shap_dependence.csv", explain::write_shap_dependence_csv(set, Xte, cfg.explain.dependence_feature,
                                                                                  cfg.explain.color_feature));
            summary["explained_model"] = best.spec.label();
            summary["explained_rows"] = Xte.rows();
        }

        // dashboard
        stage = "dashboard";
        {
            log::StageTimer t("dashboard");
            const auto actuals = actual_table(records, matched.mapping, shapes);
            std::vector<dashboard::Prediction> preds;
            for (std::size_t i = 0; i < first.test.rows.size(); ++i) {
                const auto& row = first.test.rows[i];
                preds.push_back({row.state, row.district, row.year, best.predictions[i]});
            }
            dashboard::Metadata meta;
            meta.model = best.spec.label();
            meta.model_family = std::string(models::family_name(best.spec.family));
            meta.experiment = first.name;
            std::string fingerprint = std::to_string(cfg.seed) + "|" + std::string(mode_name(cfg.mode)) + "|" +
                                      std::to_string(cfg.last_train_year);
            for (const auto& m : cfg.models)
                fingerprint += "|" + m.label() + " " + std::string(models::family_name(m.family)) + " " + std::to_string(m.seed) +
                               " " + m.params_line();
            if (cfg.explain.enabled)
                fingerprint += "|explain " + std::to_string(cfg.explain.rows) + " " + std::to_string(cfg.explain.background) +
                               " " + std::to_string(cfg.explain.permutations) + " " + cfg.explain.dependence_feature + " " +
                               cfg.explain.color_feature;
            fingerprint += "|" + to_hex(built.table.schema_hash()) + "|" + sha256_hex(write_feature_table_csv(built.table));
            res.run_id = "run-" + sha256_hex(fingerprint).substr(0, 16);
            meta.run_id = res.run_id;
            const auto bundle = dashboard::build_bundle(meta, preds, actuals, districts);
            if (!bundle.issues.empty())
                log::warn("event=dashboard_issues count=" + std::to_string(bundle.issues.size()));
            put("dashboard.json", dashboard::serialize(bundle));
        }

        stage = "manifest";
        summary["run_id"] = res.run_id;
        put("summary.json", summary.dump(1) + "\n");
        res.manifest = scan_artifacts(out, {"run.log", "manifest.json"});
        put("manifest.json", write_manifest_json(res.run_id, res.manifest));
        log::info("event=run_complete artifacts=" + std::to_string(res.manifest.size()));
        runlog.close();
        return res;
    } catch (const std::exception& e) {
        log::write(log::Level::error, "event=stage_failed stage=" + stage + " error=\"" + e.what() + "\"");
        runlog.close();
        run_detail::move_to_failed(out, stage, e.what());
        throw StageError(stage, e.what());
    }
}

/// Rebuilds dashboard.json content from a finished run: predictions of the
/// top-ranked model in <run_dir>/<experiment>/predictions.csv, actuals from the
/// configured yield table (parsed, outlier-filtered and matched as in cmd_run)
/// and geometry from the configured districts.
inline dashboard::DashboardBundle export_dashboard(const RunConfig& cfg, const fs::path& run_dir,
                                                   const std::string& experiment = "all_features") {
    const fs::path pred_file = run_dir / experiment / "predictions.csv";
    if (!fs::is_regular_file(pred_file)) throw Error("missing artifact " + pred_file.generic_string());
    const auto rows = csv::parse(read_file(pred_file));
    if (rows.empty() || rows.front().fields.size() < 6) throw ParseError(pred_file.generic_string() + ": no model columns");
    const csv::Header h(rows.front());
    const auto is = h.require("state"), id = h.require("district"), iy = h.require("year");
    const std::size_t ip = 5;

    auto parsed = data::parse_yield_csv(read_file(cfg.paths.yields), cfg.yields);
    auto records = data::remove_yield_outliers(parsed.records, cfg.outlier_k, cfg.outlier_scope).kept;
    const auto districts = geo::parse_geojson_districts(read_file(cfg.paths.districts), cfg.geojson);
    std::vector<match::NamedUnit> shapes;
    for (const auto& d : districts) shapes.push_back({d.state, d.name});
    std::set<match::NamedUnit> units;
    for (const auto& r : records) units.insert({r.state, r.district});
    match::AliasTable aliases;
    if (!cfg.paths.aliases.empty()) aliases = match::parse_alias_csv(read_file(cfg.paths.aliases));
    const auto matched = match::match_districts({units.begin(), units.end()}, shapes, cfg.match_threshold, aliases);

    std::vector<dashboard::Prediction> preds;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& f = rows[i].fields;
        const auto year = parse_int(f.at(iy));
        const auto p = parse_double(f.at(ip));
        if (!year || !p) throw ParseError(pred_file.generic_string() + ": malformed row", rows[i].line);
        preds.push_back({f.at(is), f.at(id), static_cast<int>(*year), *p});
    }
    dashboard::Metadata meta;
    meta.model = rows.front().fields[ip];
    meta.experiment = experiment;
    const fs::path model_file = run_dir / experiment / "model.txt";
    if (fs::is_regular_file(model_file))
        meta.model_family = std::string(models::family_name(models::load_model(read_file(model_file)).family()));
    const fs::path summary_file = run_dir / "summary.json";
    if (fs::is_regular_file(summary_file)) meta.run_id = nlohmann::json::parse(read_file(summary_file)).value("run_id", "");
    return dashboard::build_bundle(meta, preds, actual_table(records, matched.mapping, shapes), districts);
}

} // namespace yieldcast::pipeline
