#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "yieldcast/core/csv.hpp"
#include "yieldcast/core/text.hpp"
#include "yieldcast/matching/levenshtein.hpp"

namespace yieldcast::match {

inline constexpr int default_threshold = 85;

struct Match {
    std::string yield_name;
    std::string shape_name;
    int score = 0;
    friend bool operator==(const Match&, const Match&) = default;
};

struct MatchReport {
    std::vector<Match> matches;             ///< sorted by (yield_name, shape_name)
    std::vector<std::string> unmatched_yield; ///< sorted
    std::vector<std::string> unmatched_shape; ///< sorted
    int threshold = default_threshold;

    friend bool operator==(const MatchReport&, const MatchReport&) = default;
};

/// Greedy best-first assignment: repeatedly take the highest scoring pair whose
/// two sides are both still free and whose score reaches `threshold`. Ties go to
/// the lexicographically smaller yield name, then shape name, so the result does
/// not depend on input order. Each name is used at most once.
inline MatchReport fuzzy_join(const std::vector<std::string>& yield_names, const std::vector<std::string>& shape_names,
                              int threshold = default_threshold) {
    struct Candidate {
        int score;
        std::size_t y, s;
    };
    std::vector<std::size_t> yorder(yield_names.size()), sorder(shape_names.size());
    for (std::size_t i = 0; i < yorder.size(); ++i) yorder[i] = i;
    for (std::size_t i = 0; i < sorder.size(); ++i) sorder[i] = i;
    std::stable_sort(yorder.begin(), yorder.end(), [&](auto a, auto b) { return yield_names[a] < yield_names[b]; });
    std::stable_sort(sorder.begin(), sorder.end(), [&](auto a, auto b) { return shape_names[a] < shape_names[b]; });

    std::vector<Candidate> cands;
    for (std::size_t yi = 0; yi < yorder.size(); ++yi)
        for (std::size_t si = 0; si < sorder.size(); ++si) {
            const int s = similarity(yield_names[yorder[yi]], shape_names[sorder[si]]);
            if (s >= threshold) cands.push_back({s, yi, si});
        }
    // yi / si are ranks in sorted order, so comparing them is the lexicographic tie-break
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        return std::tie(b.score, a.y, a.s) < std::tie(a.score, b.y, b.s);
    });

    std::vector<bool> yused(yorder.size()), sused(sorder.size());
    MatchReport rep;
    rep.threshold = threshold;
    for (const auto& c : cands) {
        if (yused[c.y] || sused[c.s]) continue;
        yused[c.y] = sused[c.s] = true;
        rep.matches.push_back({yield_names[yorder[c.y]], shape_names[sorder[c.s]], c.score});
    }
    for (std::size_t i = 0; i < yorder.size(); ++i)
        if (!yused[i]) rep.unmatched_yield.push_back(yield_names[yorder[i]]);
    for (std::size_t i = 0; i < sorder.size(); ++i)
        if (!sused[i]) rep.unmatched_shape.push_back(shape_names[sorder[i]]);
    std::sort(rep.matches.begin(), rep.matches.end(), [](const Match& a, const Match& b) {
        return std::tie(a.yield_name, a.shape_name) < std::tie(b.yield_name, b.shape_name);
    });
    return rep;
}

/// Manual corrections applied to yield-side names before matching. Keys are
/// compared after name normalization.
class AliasTable {
public:
    AliasTable() = default;

    void add(std::string_view from, std::string_view to) { map_[normalize_name(from)] = std::string(trim(to)); }

    std::string apply(const std::string& name) const {
        const auto it = map_.find(normalize_name(name));
        return it == map_.end() ? name : it->second;
    }

    std::size_t size() const noexcept { return map_.size(); }

private:
    std::map<std::string, std::string> map_;
};

/// Two-column CSV (from, to). A header row whose first field is "from" or "alias" is skipped.
inline AliasTable parse_alias_csv(std::string_view text) {
    AliasTable t;
    const auto rows = csv::parse(text);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& f = rows[i].fields;
        if (f.size() < 2) throw ParseError("alias row needs two columns", rows[i].line);
        if (i == 0 && (normalize_name(f[0]) == "from" || normalize_name(f[0]) == "alias")) continue;
        t.add(f[0], f[1]);
    }
    return t;
}

struct NamedUnit {
    std::string state;
    std::string district;
    friend auto operator<=>(const NamedUnit&, const NamedUnit&) = default;
};

/// Result of matching (state, district) pairs from the yield table against the
/// polygon attributes. `mapping` goes from yield-side unit to shape index.
struct DistrictMatch {
    MatchReport states;
    MatchReport districts; ///< all per-state district reports merged
    std::map<NamedUnit, std::size_t> mapping;
};

/// State-scoped matching: states are matched first, then districts within each
/// matched state pair, so a district name repeated across states cannot cross over.
inline DistrictMatch match_districts(const std::vector<NamedUnit>& yield_units, const std::vector<NamedUnit>& shapes,
                                     int threshold = default_threshold, const AliasTable& aliases = {}) {
    std::map<std::string, std::vector<std::string>> ydistricts;                  // state -> aliased names
    std::map<std::pair<std::string, std::string>, std::vector<NamedUnit>> back; // (state, aliased) -> originals
    for (const auto& u : yield_units) {
        const std::string name = aliases.apply(u.district);
        auto& v = ydistricts[u.state];
        if (std::find(v.begin(), v.end(), name) == v.end()) v.push_back(name);
        back[{u.state, name}].push_back(u);
    }
    std::map<std::string, std::vector<std::pair<std::string, std::size_t>>> sdistricts;
    for (std::size_t i = 0; i < shapes.size(); ++i) sdistricts[shapes[i].state].emplace_back(shapes[i].district, i);

    std::vector<std::string> ystates, sstates;
    for (const auto& [s, _] : ydistricts) ystates.push_back(s);
    for (const auto& [s, _] : sdistricts) sstates.push_back(s);

    DistrictMatch out;
    out.states = fuzzy_join(ystates, sstates, threshold);
    out.districts.threshold = threshold;
    for (const auto& sm : out.states.matches) {
        const auto& shape_list = sdistricts[sm.shape_name];
        std::vector<std::string> snames;
        for (const auto& [n, _] : shape_list) snames.push_back(n);
        const auto rep = fuzzy_join(ydistricts[sm.yield_name], snames, threshold);
        for (const auto& m : rep.matches) {
            out.districts.matches.push_back(m);
            const auto idx = std::find_if(shape_list.begin(), shape_list.end(),
                                          [&](const auto& p) { return p.first == m.shape_name; })->second;
            for (const auto& orig : back[{sm.yield_name, m.yield_name}]) out.mapping[orig] = idx;
        }
        out.districts.unmatched_yield.insert(out.districts.unmatched_yield.end(), rep.unmatched_yield.begin(),
                                             rep.unmatched_yield.end());
        out.districts.unmatched_shape.insert(out.districts.unmatched_shape.end(), rep.unmatched_shape.begin(),
                                             rep.unmatched_shape.end());
    }
    for (const auto& s : out.states.unmatched_yield)
        for (const auto& n : ydistricts[s]) out.districts.unmatched_yield.push_back(n);
    for (const auto& s : out.states.unmatched_shape)
        for (const auto& [n, _] : sdistricts[s]) out.districts.unmatched_shape.push_back(n);
    return out;
}

/// Audit CSV with columns yield_name, shape_name, score, status.
inline std::string write_match_report_csv(const MatchReport& rep) {
    csv::Writer w;
    w.row({"yield_name", "shape_name", "score", "status"});
    for (const auto& m : rep.matches) w.row({m.yield_name, m.shape_name, std::to_string(m.score), "matched"});
    for (const auto& n : rep.unmatched_yield) w.row({n, "", "", "unmatched_yield"});
    for (const auto& n : rep.unmatched_shape) w.row({"", n, "", "unmatched_shape"});
    return w.str();
}

} // namespace yieldcast::match
