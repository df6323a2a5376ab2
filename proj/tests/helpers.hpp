#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dmsort/assignment.hpp"
#include "dmsort/geometry.hpp"

namespace dmsort::testutil {

inline BoundingBox random_box(std::mt19937_64& rng, double extent = 100.0) {
    std::uniform_real_distribution<double> pos(0.0, extent), size(1.0, extent / 2);
    return {pos(rng), pos(rng), size(rng), size(rng), 1.0};
}

inline AffineTransform random_affine(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> lin(-0.2, 0.2), t(-10.0, 10.0);
    return AffineTransform({1.0 + lin(rng), lin(rng), t(rng), lin(rng), 1.0 + lin(rng), t(rng)});
}

/// Exhaustive assignment: maximum number of non-gated pairs, then minimum
/// total cost summed in row order. Returns {pairs, cost}.
inline std::pair<int, double> brute_force_assignment(const CostMatrix& c) {
    const int rows = static_cast<int>(c.rows()), cols = static_cast<int>(c.cols());
    const bool transpose = rows > cols;
    const int n = transpose ? cols : rows;
    const int m = transpose ? rows : cols;
    auto at = [&](int i, int j) { return transpose ? c(j, i) : c(i, j); };
    std::vector<int> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    int best_count = -1;
    double best_cost = 0.0;
    do {
        int count = 0;
        // Sum in row order of the original matrix.
        std::vector<std::pair<int, int>> used;
        for (int i = 0; i < n; ++i) {
            if (!is_gated(at(i, perm[i]))) {
                ++count;
                used.emplace_back(transpose ? perm[i] : i, transpose ? i : perm[i]);
            }
        }
        std::sort(used.begin(), used.end());
        double cost = 0.0;
        for (const auto& [i, j] : used) cost += c(i, j);
        if (count > best_count || (count == best_count && cost < best_cost)) {
            best_count = count;
            best_cost = cost;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return {std::max(best_count, 0), best_cost};
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline std::filesystem::path temp_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("dmsort-test-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace dmsort::testutil
