#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "yieldcast/yieldcast.hpp"

extern char** environ;

namespace {

namespace fs = std::filesystem;
using namespace yieldcast;

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_stage = 3;

pipeline::RunConfig load(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out) {
    if (config.empty()) throw ConfigError("--config is required");
    if (!fs::is_regular_file(config)) throw ConfigError("config file not found: " + config);
    auto cfg = pipeline::load_config(config, pipeline::environment_overrides(environ));
    if (seed) {
        cfg.seed = *seed;
        for (auto& m : cfg.models) m.seed = *seed;
    }
    if (!out.empty()) cfg.paths.output = out;
    return cfg;
}

int run_synth(const data::SynthOptions& opt, const std::string& out) {
    if (out.empty()) throw ConfigError("--out is required");
    log::StageTimer t("synth");
    const auto world = data::synth_generate(opt);
    const auto files = data::write_synth_bundle(world, out);
    data::write_text_file(fs::path(out) / "config.toml", pipeline::synth_config_toml(opt));
    std::cout << "wrote " << files.size() + 1 << " files to " << out << "\n";
    return exit_ok;
}

int run_pipeline(const pipeline::RunConfig& cfg) {
    const auto res = pipeline::cmd_run(cfg);
    for (const auto& ex : res.experiments) {
        const auto& best = ex.leaderboard.front();
        std::cout << ex.name << ": best " << best.spec.label() << " R2=" << format_fixed(best.test->r2, 4)
                  << " MAPE=" << (best.test->mape ? format_fixed(*best.test->mape, 4) : std::string("n/a")) << "\n";
    }
    std::cout << "run " << res.run_id << ": " << res.manifest.size() << " artifacts in " << res.out.string() << "\n";
    return exit_ok;
}

int run_match(const pipeline::RunConfig& cfg, const std::string& out) {
    const auto parsed = data::parse_yield_csv(pipeline::read_file(cfg.paths.yields), cfg.yields);
    const auto districts = geo::parse_geojson_districts(pipeline::read_file(cfg.paths.districts), cfg.geojson);
    std::vector<match::NamedUnit> shapes;
    for (const auto& d : districts) shapes.push_back({d.state, d.name});
    std::set<match::NamedUnit> units;
    for (const auto& r : parsed.records) units.insert({r.state, r.district});
    match::AliasTable aliases;
    if (!cfg.paths.aliases.empty()) aliases = match::parse_alias_csv(pipeline::read_file(cfg.paths.aliases));
    const auto m = match::match_districts({units.begin(), units.end()}, shapes, cfg.match_threshold, aliases);
    const fs::path dir = out.empty() ? cfg.paths.output : fs::path(out);
    data::write_text_file(dir / "match_states.csv", match::write_match_report_csv(m.states));
    data::write_text_file(dir / "match_districts.csv", match::write_match_report_csv(m.districts));
    std::cout << "matched " << m.districts.matches.size() << " districts; " << m.districts.unmatched_yield.size()
              << " yield-side and " << m.districts.unmatched_shape.size() << " polygon-side unmatched; reports in "
              << dir.string() << "\n";
    return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"District-level crop yield forecasting pipeline"};
    app.require_subcommand(1);

    std::string config, out, run_dir, experiment = "all_features";
    std::optional<std::uint64_t> seed;
    data::SynthOptions synth;

    auto* s = app.add_subcommand("synth", "Generate a synthetic input bundle with known ground truth");
    s->add_option("--seed", synth.seed, "Root seed")->capture_default_str();
    s->add_option("--districts", synth.n_districts, "Number of districts")->capture_default_str();
    s->add_option("--first-year", synth.first_year, "First harvest year")->capture_default_str();
    s->add_option("--last-year", synth.last_year, "Last harvest year")->capture_default_str();
    s->add_option("--noise", synth.noise_sigma, "Yield noise standard deviation (t/ha)")->capture_default_str();
    s->add_option("--out", out, "Output directory")->required();

    auto* r = app.add_subcommand("run", "Run the full pipeline from a config file");
    r->add_option("--config", config, "TOML config file")->required();
    r->add_option("--seed", seed, "Override run.seed");
    r->add_option("--out", out, "Override paths.output");

    auto* m = app.add_subcommand("match", "Match yield-table districts to polygons and write the match reports");
    m->add_option("--config", config, "TOML config file")->required();
    m->add_option("--out", out, "Directory for the reports (default paths.output)");

    auto* p = app.add_subcommand("plot", "Render SVG figures from a finished run");
    p->add_option("--run", run_dir, "Run output directory");
    p->add_option("--config", config, "Config whose paths.output is the run directory");
    p->add_option("--out", out, "Directory for the SVG files (default <run>/plots)");

    auto* e = app.add_subcommand("export-dashboard", "Rebuild dashboard.json from a finished run");
    e->add_option("--config", config, "TOML config file")->required();
    e->add_option("--run", run_dir, "Run output directory (default paths.output)");
    e->add_option("--experiment", experiment, "Experiment whose predictions are exported")->capture_default_str();
    e->add_option("--out", out, "Output file (default <run>/dashboard.json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        if (s->parsed()) return run_synth(synth, out);
        if (r->parsed()) return run_pipeline(load(config, seed, out));
        if (m->parsed()) return run_match(load(config, std::nullopt, ""), out);
        if (p->parsed()) {
            fs::path dir = run_dir;
            if (dir.empty()) {
                if (config.empty()) throw ConfigError("plot needs --run or --config");
                dir = load(config, std::nullopt, "").paths.output;
            }
            const fs::path plots = out.empty() ? dir / "plots" : fs::path(out);
            const auto files = pipeline::cmd_plot(dir, plots);
            std::cout << "wrote " << files.size() << " figures to " << plots.string() << "\n";
            return exit_ok;
        }
        if (e->parsed()) {
            const auto cfg = load(config, std::nullopt, "");
            const fs::path dir = run_dir.empty() ? cfg.paths.output : fs::path(run_dir);
            const auto bundle = pipeline::export_dashboard(cfg, dir, experiment);
            const fs::path file = out.empty() ? dir / "dashboard.json" : fs::path(out);
            data::write_text_file(file, dashboard::serialize(bundle));
            std::cout << "wrote " << file.string() << " (" << bundle.records.size() << " records, " << bundle.issues.size()
                      << " issues)\n";
            return exit_ok;
        }
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return exit_config;
    } catch (const pipeline::StageError& err) {
        std::cerr << "stage failed: " << err.what() << "\n";
        return exit_stage;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return exit_stage;
    }
    return exit_config;
}
