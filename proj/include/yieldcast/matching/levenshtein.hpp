#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string_view>
#include <vector>

#include "yieldcast/core/text.hpp"

namespace yieldcast::match {

/// Edit distance (unit-cost insert / delete / substitute) over bytes.
/// Two-row dynamic program, O(|a|·|b|) time and O(min(|a|,|b|)) space.
inline std::size_t levenshtein(std::string_view a, std::string_view b) {
    if (a.size() < b.size()) std::swap(a, b);
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

/// Similarity score in [0, 100] on normalized names (lowercase, trimmed,
/// whitespace collapsed): round(100 · (1 − distance / longer length)).
inline int similarity(std::string_view a, std::string_view b) {
    const std::string na = normalize_name(a), nb = normalize_name(b);
    const std::size_t longest = std::max(na.size(), nb.size());
    if (longest == 0) return 100;
    const double ratio = 1.0 - static_cast<double>(levenshtein(na, nb)) / static_cast<double>(longest);
    return static_cast<int>(std::lround(100.0 * ratio));
}

} // namespace yieldcast::match
