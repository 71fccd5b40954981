#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "yieldcast/core/csv.hpp"
#include "yieldcast/dashboard/bundle.hpp"
#include "yieldcast/pipeline/config.hpp"
#include "yieldcast/pipeline/manifest.hpp"

using namespace yieldcast;
using namespace yieldcast::pipeline;
namespace fs = std::filesystem;

namespace {

const fs::path work = fs::path(YIELDCAST_TEST_WORK);

int cli(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + "\"" + YIELDCAST_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

std::vector<csv::Row> table(const fs::path& p) { return csv::parse(read_file(p)); }

/// Small model set and explanation budget so the whole run takes seconds.
std::string small_config(const std::string& output) {
    return R"([paths]
rasters = "rasters"
crop_mask = "cropmask.asc"
districts = "districts.geojson"
yields = "yields.csv"
output = ")" + output + R"("

[data]
season = "kharif"
months = [5, 6, 7, 8, 9, 10, 11]
variables = ["pev", "t2m", "tp", "lai", "sp", "swvl1", "ndvi"]
masked_variables = ["ndvi"]
min_year = 2001
max_year = 2008

[split]
last_train_year = 2006

[experiment]
mode = "both"

[explain]
rows = 20
background = 4
permutations = 4

[run]
seed = 5

[[models]]
family = "dummy"

[[models]]
family = "linear"

[[models]]
family = "knn"

[[models]]
family = "forest"
n_trees = 15

[[models]]
family = "gbm"
n_trees = 40
)";
}

/// One synthetic bundle and one finished run, shared by every test process.
/// Rebuilt whenever the CLI binary changes.
const fs::path& bundle_dir() {
    static const fs::path dir = [] {
        const fs::path d = work / "bundle";
        const auto stamp = std::to_string(fs::last_write_time(YIELDCAST_CLI_PATH).time_since_epoch().count());
        if (!fs::exists(d / "ready") || read_file(d / "ready") != stamp) {
            fs::remove_all(d);
            if (cli("synth --seed 11 --districts 30 --first-year 2001 --last-year 2008 --noise 0.3 --out \"" + d.string() + "\"") != 0)
                throw std::runtime_error("synth failed");
            write(d / "small.toml", small_config("run"));
            if (cli("run --config \"" + (d / "small.toml").string() + "\"") != 0) throw std::runtime_error("run failed");
            write(d / "ready", stamp);
        }
        return d;
    }();
    return dir;
}

fs::path run_dir() { return bundle_dir() / "run"; }

std::vector<std::map<std::string, std::string>> svg_elements(const std::string& svg, const std::string& cls) {
    std::vector<std::map<std::string, std::string>> out;
    const std::regex el("<[a-z]+ class=\"" + cls + "\"([^>]*)/>");
    const std::regex attr("(data-[a-z]+)=\"([^\"]*)\"");
    for (std::sregex_iterator it(svg.begin(), svg.end(), el), end; it != end; ++it) {
        const std::string body = (*it)[1];
        std::map<std::string, std::string> m;
        for (std::sregex_iterator a(body.begin(), body.end(), attr); a != end; ++a) m[(*a)[1]] = (*a)[2];
        out.push_back(std::move(m));
    }
    return out;
}

} // namespace

TEST(Config, ParsesSectionsAndResolvesPaths) {
    const fs::path dir = work / "config_parse";
    fs::remove_all(dir);
    write(dir / "c.toml", "[paths]\nyields = \"y.csv\"\n[split]\nlast_train_year = 2010\n[[models]]\nfamily = \"gbm\"\nn_trees = 7\n");
    const auto cfg = load_config(dir / "c.toml");
    EXPECT_EQ(cfg.paths.yields, dir / "y.csv");
    EXPECT_EQ(cfg.paths.output, dir / "out");
    EXPECT_EQ(cfg.last_train_year, 2010);
    ASSERT_EQ(cfg.models.size(), 1u);
    EXPECT_EQ(cfg.models[0].family, models::Family::gbm);
    EXPECT_EQ(*cfg.models[0].n_trees, 7u);
}

TEST(Config, UnknownKeysAndSectionsAreErrors) {
    const fs::path dir = work / "config_unknown";
    fs::remove_all(dir);
    write(dir / "a.toml", "[split]\nlast_train_yr = 2010\n");
    EXPECT_THROW(load_config(dir / "a.toml"), ConfigError);
    write(dir / "b.toml", "[splitt]\nlast_train_year = 2010\n");
    EXPECT_THROW(load_config(dir / "b.toml"), ConfigError);
    write(dir / "c.toml", "[experiment]\nmode = \"sometimes\"\n");
    EXPECT_THROW(load_config(dir / "c.toml"), ConfigError);
    write(dir / "d.toml", "[split\n");
    EXPECT_THROW(load_config(dir / "d.toml"), ConfigError);
}

TEST(Config, EnvironmentOverrides) {
    const fs::path dir = work / "config_env";
    fs::remove_all(dir);
    write(dir / "c.toml", "[split]\nlast_train_year = 2010\n[[models]]\nfamily = \"gbm\"\n");
    const std::map<std::string, std::string> env{{"YIELDCAST_SPLIT__LAST_TRAIN_YEAR", "2015"},
                                                 {"YIELDCAST_MODELS__0__N_TREES", "9"},
                                                 {"YIELDCAST_EXPLAIN__DEPENDENCE_FEATURE", "tp_aug"},
                                                 {"OTHER_VAR", "1"}};
    const auto cfg = load_config(dir / "c.toml", env);
    EXPECT_EQ(cfg.last_train_year, 2015);
    EXPECT_EQ(*cfg.models[0].n_trees, 9u);
    EXPECT_EQ(cfg.explain.dependence_feature, "tp_aug");
    EXPECT_THROW(load_config(dir / "c.toml", {{"YIELDCAST_MODELS__3__K", "2"}}), ConfigError);
    EXPECT_THROW(load_config(dir / "c.toml", {{"YIELDCAST_SPLIT__BOGUS", "2"}}), ConfigError);
}

TEST(Config, EnvironmentScan) {
    std::string a = "YIELDCAST_RUN__SEED=4", b = "PATH=/bin";
    char* envp[] = {a.data(), b.data(), nullptr};
    const auto env = environment_overrides(envp);
    ASSERT_EQ(env.size(), 1u);
    EXPECT_EQ(env.at("YIELDCAST_RUN__SEED"), "4");
}

TEST(Config, ValidateRejectsMissingInputs) {
    const fs::path dir = work / "config_validate";
    fs::remove_all(dir);
    write(dir / "c.toml", "[paths]\nrasters = \".\"\ndistricts = \"c.toml\"\nyields = \"missing.csv\"\n[data]\nmasked_variables = []\n"
                          "[[models]]\nfamily = \"dummy\"\n");
    EXPECT_THROW(load_config(dir / "c.toml").validate(), ConfigError);
    write(dir / "missing.csv", "x\n");
    EXPECT_NO_THROW(load_config(dir / "c.toml").validate());
}

TEST(Cli, ExitCodes) {
    const fs::path dir = work / "cli_codes";
    fs::remove_all(dir);
    EXPECT_EQ(cli(""), 2);
    EXPECT_EQ(cli("frobnicate"), 2);
    EXPECT_EQ(cli("run"), 2);
    EXPECT_EQ(cli("run --config \"" + (dir / "nope.toml").string() + "\""), 2);
    write(dir / "bad.toml", "[paths]\nrasters = \".\"\ndistricts = \"bad.toml\"\nyields = \"missing.csv\"\n"
                            "[data]\nmasked_variables = []\n[[models]]\nfamily = \"dummy\"\n");
    EXPECT_EQ(cli("run --config \"" + (dir / "bad.toml").string() + "\""), 2);
    EXPECT_EQ(cli("run --config \"" + (dir / "bad.toml").string() + "\"", "YIELDCAST_SPLIT__NOPE=1"), 2);
    EXPECT_EQ(cli("--help"), 0);
}

TEST(Cli, StageFailureLeavesFailedMarker) {
    const fs::path dir = work / "cli_failure";
    fs::remove_all(dir);
    fs::create_directories(dir);
    fs::copy(bundle_dir(), dir, fs::copy_options::recursive);
    fs::remove_all(dir / "run");
    write(dir / "rasters" / "t2m" / "2003" / "07.asc", "ncols 2\nnrows\n");
    EXPECT_EQ(cli("run --config \"" + (dir / "small.toml").string() + "\""), 3);
    EXPECT_TRUE(fs::exists(dir / "run" / "failed" / "FAILED.txt"));
    EXPECT_FALSE(fs::exists(dir / "run" / "manifest.json"));
    const auto text = read_file(dir / "run" / "failed" / "FAILED.txt");
    EXPECT_NE(text.find("stage=ingest"), std::string::npos);
}

TEST(EndToEnd, ManifestCoversEveryArtifact) {
    const auto entries = parse_manifest_json(read_file(run_dir() / "manifest.json"));
    std::set<std::string> listed;
    for (const auto& e : entries) {
        listed.insert(e.path);
        const auto bytes = read_file(run_dir() / e.path);
        EXPECT_EQ(bytes.size(), e.bytes) << e.path;
        EXPECT_EQ(sha256_hex(bytes), e.sha256) << e.path;
    }
    for (const auto& p : fs::recursive_directory_iterator(run_dir())) {
        if (!p.is_regular_file()) continue;
        const auto rel = fs::relative(p.path(), run_dir()).generic_string();
        if (rel == "manifest.json" || rel == "run.log" || rel.rfind("plots/", 0) == 0) continue;
        EXPECT_TRUE(listed.count(rel)) << rel;
    }
    for (const char* f : {"summary.json", "features.csv", "split.csv", "match_states.csv", "match_districts.csv",
                          "dashboard.json", "all_features/leaderboard.csv", "eo_only/leaderboard.csv",
                          "all_features/predictions.csv", "all_features/model.txt", "explain/shap_summary.csv"})
        EXPECT_TRUE(listed.count(f)) << f;
}

TEST(EndToEnd, LeaderboardsAndPredictions) {
    for (const char* ex : {"all_features", "eo_only"}) {
        const auto lb = table(run_dir() / ex / "leaderboard.csv");
        ASSERT_EQ(lb.size(), 6u) << ex;
        const auto preds = table(run_dir() / ex / "predictions.csv");
        const auto& h = preds[0].fields;
        ASSERT_EQ(h.size(), 5u + 5u);
        EXPECT_EQ((std::vector<std::string>(h.begin(), h.begin() + 5)),
                  (std::vector<std::string>{"district_id", "state", "district", "year", "actual"}));
        for (std::size_t k = 1; k < lb.size(); ++k) EXPECT_EQ(h[4 + k], lb[k].fields[0]) << ex;
        for (std::size_t i = 1; i < preds.size(); ++i) {
            const int year = std::stoi(preds[i].fields[3]);
            EXPECT_GT(year, 2006);
        }
    }
}

TEST(EndToEnd, SplitMatchesYearPartition) {
    const auto feats = table(run_dir() / "features.csv");
    const std::size_t fy = csv::Header(feats[0]).require("year");
    std::map<int, std::size_t> per_year;
    for (std::size_t i = 1; i < feats.size(); ++i) ++per_year[std::stoi(feats[i].fields[fy])];
    const auto split = table(run_dir() / "split.csv");
    ASSERT_EQ(split.size() - 1, per_year.size());
    std::size_t test_rows = 0;
    for (std::size_t i = 1; i < split.size(); ++i) {
        const int year = std::stoi(split[i].fields[0]);
        EXPECT_EQ(split[i].fields[1], year <= 2006 ? "train" : "test");
        EXPECT_EQ(std::stoul(split[i].fields[2]), per_year.at(year));
        if (year > 2006) test_rows += per_year.at(year);
    }
    EXPECT_EQ(table(run_dir() / "all_features" / "predictions.csv").size() - 1, test_rows);
}

TEST(EndToEnd, DashboardAggregatesMatchRecords) {
    const auto b = dashboard::parse(read_file(run_dir() / "dashboard.json"));
    EXPECT_FALSE(b.records.empty());
    EXPECT_EQ(b.metadata.test_years, (std::vector<int>{2007, 2008}));
    for (const auto& s : b.states) {
        double ape = 0;
        std::size_t n = 0;
        for (const auto& r : b.records)
            if (r.state == s.state && r.year == s.year && r.ape_percent) ape += *r.ape_percent, ++n;
        ASSERT_TRUE(s.mean_ape_percent);
        EXPECT_NEAR(*s.mean_ape_percent, ape / static_cast<double>(n), 1e-12);
    }
    // districts without a polygon in the bundle surface as issues
    for (const auto& i : b.issues) EXPECT_EQ(i.kind, "missing_geometry");
}

TEST(EndToEnd, TemperatureAttributionRisesWithTemperature) {
    const auto dep = table(run_dir() / "explain" / "shap_dependence.csv");
    std::vector<double> x, phi;
    for (std::size_t i = 1; i < dep.size(); ++i) {
        x.push_back(std::stod(dep[i].fields[0]));
        phi.push_back(std::stod(dep[i].fields[1]));
    }
    const double n = static_cast<double>(x.size());
    double mx = 0, mp = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / n, mp += phi[i] / n;
    double cov = 0;
    for (std::size_t i = 0; i < x.size(); ++i) cov += (x[i] - mx) * (phi[i] - mp);
    EXPECT_GT(cov, 0.0);
}

TEST(EndToEnd, ExportDashboardReproducesRunOutput) {
    const fs::path out = work / "exported_dashboard.json";
    fs::remove(out);
    ASSERT_EQ(cli("export-dashboard --config \"" + (bundle_dir() / "small.toml").string() + "\" --out \"" + out.string() + "\""), 0);
    EXPECT_EQ(read_file(out), read_file(run_dir() / "dashboard.json"));
}

TEST(Plot, SeriesEqualTheirCsvSources) {
    const fs::path plots = work / "plots";
    fs::remove_all(plots);
    ASSERT_EQ(cli("plot --run \"" + run_dir().string() + "\" --out \"" + plots.string() + "\""), 0);

    const auto res = table(run_dir() / "all_features" / "residuals.csv");
    const auto pe = svg_elements(read_file(plots / "all_features_prediction_error.svg"), "point");
    const auto rs = svg_elements(read_file(plots / "all_features_residuals.svg"), "point");
    ASSERT_EQ(pe.size(), res.size() - 1);
    ASSERT_EQ(rs.size(), res.size() - 1);
    for (std::size_t i = 0; i < pe.size(); ++i) {
        EXPECT_EQ(pe[i].at("data-x"), res[i + 1].fields[0]);
        EXPECT_EQ(pe[i].at("data-y"), res[i + 1].fields[1]);
        EXPECT_EQ(rs[i].at("data-x"), res[i + 1].fields[1]);
        EXPECT_EQ(rs[i].at("data-y"), res[i + 1].fields[2]);
    }

    const auto bars = svg_elements(read_file(plots / "all_features_residual_histogram.svg"), "bar");
    const auto n = static_cast<double>(res.size() - 1);
    EXPECT_EQ(bars.size(), static_cast<std::size_t>(std::ceil(std::sqrt(n))));
    std::size_t total = 0;
    for (const auto& b : bars) total += std::stoul(b.at("data-count"));
    EXPECT_EQ(total, res.size() - 1);

    const auto dep = table(run_dir() / "explain" / "shap_dependence.csv");
    const auto dp = svg_elements(read_file(plots / "shap_dependence.svg"), "point");
    ASSERT_EQ(dp.size(), dep.size() - 1);
    for (std::size_t i = 0; i < dp.size(); ++i) {
        EXPECT_EQ(dp[i].at("data-x"), dep[i + 1].fields[0]);
        EXPECT_EQ(dp[i].at("data-y"), dep[i + 1].fields[1]);
    }

    const auto pts = table(run_dir() / "explain" / "shap_points.csv");
    const auto sp = svg_elements(read_file(plots / "shap_summary.svg"), "point");
    std::set<std::string> features;
    for (std::size_t i = 1; i < pts.size(); ++i) features.insert(pts[i].fields[1]);
    const std::size_t rows = (pts.size() - 1) / features.size();
    EXPECT_EQ(sp.size(), rows * std::min<std::size_t>(features.size(), 20));
}

TEST(Determinism, ManifestIndependentOfThreadsAndOutputDir) {
    const fs::path a = work / "det_a", b = work / "det_b";
    fs::remove_all(a);
    fs::remove_all(b);
    const std::string cfg = "--config \"" + (bundle_dir() / "small.toml").string() + "\"";
    ASSERT_EQ(cli("run " + cfg + " --out \"" + a.string() + "\"", "YIELDCAST_RUN__THREADS=1"), 0);
    ASSERT_EQ(cli("run " + cfg + " --out \"" + b.string() + "\"", "YIELDCAST_RUN__THREADS=3"), 0);
    EXPECT_EQ(read_file(a / "manifest.json"), read_file(b / "manifest.json"));
    EXPECT_EQ(read_file(a / "manifest.json"), read_file(run_dir() / "manifest.json"));
    ASSERT_EQ(cli("run " + cfg + " --out \"" + b.string() + "\" --seed 6"), 0);
    EXPECT_NE(read_file(a / "manifest.json"), read_file(b / "manifest.json"));
    // a hyperparameter change alone gives a new run id
    ASSERT_EQ(cli("run " + cfg + " --out \"" + b.string() + "\"", "YIELDCAST_MODELS__3__N_TREES=16"), 0);
    const auto run_id = [](const fs::path& d) { return nlohmann::json::parse(read_file(d / "manifest.json")).at("run_id"); };
    EXPECT_NE(run_id(a), run_id(b));
}

TEST(Determinism, RefusesForeignNonEmptyOutput) {
    const fs::path d = work / "foreign";
    fs::remove_all(d);
    write(d / "keep.txt", "mine");
    EXPECT_EQ(cli("run --config \"" + (bundle_dir() / "small.toml").string() + "\" --out \"" + d.string() + "\""), 2);
    EXPECT_EQ(read_file(d / "keep.txt"), "mine");
}
