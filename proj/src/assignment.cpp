#include "dmsort/assignment.hpp"

#include <cmath>
#include <stdexcept>

namespace dmsort {

namespace {

// Cost ordered lexicographically: number of gated cells first, then the sum of
// finite costs. Forms an ordered group, so the potentials of the Hungarian
// method stay exact in the first component.
struct LexCost {
    long gated = 0;
    double cost = 0.0;

    LexCost operator+(const LexCost& o) const { return {gated + o.gated, cost + o.cost}; }
    LexCost operator-(const LexCost& o) const { return {gated - o.gated, cost - o.cost}; }
    LexCost& operator+=(const LexCost& o) { gated += o.gated; cost += o.cost; return *this; }
    LexCost& operator-=(const LexCost& o) { gated -= o.gated; cost -= o.cost; return *this; }
    bool operator<(const LexCost& o) const { return gated != o.gated ? gated < o.gated : cost < o.cost; }
};

constexpr LexCost kInf{std::numeric_limits<long>::max() / 4, 0.0};

LexCost lex(double c) { return is_gated(c) ? LexCost{1, 0.0} : LexCost{0, c}; }

// Rows <= cols. Returns the column of each row.
std::vector<int> hungarian(const CostMatrix& a) {
    const int n = static_cast<int>(a.rows());
    const int m = static_cast<int>(a.cols());
    std::vector<LexCost> u(n + 1), v(m + 1);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<LexCost> minv(m + 1, kInf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            LexCost delta = kInf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const LexCost cur = lex(a(i0 - 1, j - 1)) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= m; ++j) {
        if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
    }
    return row_to_col;
}

}  // namespace

Assignment solve(const CostMatrix& c) {
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        const double x = c.data()[i];
        if (std::isnan(x) || x == -std::numeric_limits<double>::infinity()) {
            throw std::invalid_argument("assignment: cost matrix holds NaN or -inf");
        }
    }
    const int rows = static_cast<int>(c.rows());
    const int cols = static_cast<int>(c.cols());
    std::vector<int> row_to_col(rows, -1);
    if (rows > 0 && cols > 0) {
        if (rows <= cols) {
            row_to_col = hungarian(c);
        } else {
            const CostMatrix t = c.transpose();
            const std::vector<int> col_to_row = hungarian(t);
            for (int j = 0; j < cols; ++j) row_to_col[col_to_row[j]] = j;
        }
    }

    Assignment out;
    std::vector<char> col_used(cols, 0);
    for (int i = 0; i < rows; ++i) {
        const int j = row_to_col[i];
        if (j >= 0 && !is_gated(c(i, j))) {
            out.matches.emplace_back(i, j);
            col_used[j] = 1;
        } else {
            out.unmatched_rows.push_back(i);
        }
    }
    for (int j = 0; j < cols; ++j) {
        if (!col_used[j]) out.unmatched_cols.push_back(j);
    }
    return out;
}

double total_cost(const CostMatrix& c, const Assignment& a) {
    double s = 0.0;
    for (const auto& [i, j] : a.matches) s += c(i, j);
    return s;
}

}  // namespace dmsort
