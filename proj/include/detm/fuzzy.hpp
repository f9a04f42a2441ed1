#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "detm/errors.hpp"

namespace detm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// One interval type-2 fuzzy rule: lower/upper grade functions plus the
/// blending weights that mix them into a crisp firing strength.
struct IT2Rule {
    std::function<double(const Vec&)> lower;
    std::function<double(const Vec&)> upper;
    std::function<double(const Vec&)> blend_lower;  // varsigma_low
    std::function<double(const Vec&)> blend_upper;  // varsigma_up
};

struct IT2MembershipFamily {
    std::vector<IT2Rule> rules;

    std::size_t rule_count() const { return rules.size(); }
};

/// Normalized rule weights; nonnegative, summing to one.
struct MembershipVector {
    Vec values;

    std::size_t size() const { return static_cast<std::size_t>(values.size()); }
    double operator[](std::size_t l) const { return values(static_cast<Eigen::Index>(l)); }
};

inline MembershipVector normalized_membership(const IT2MembershipFamily& family, const Vec& x) {
    const auto p = family.rule_count();
    if (p == 0) throw DimensionMismatch("membership family has no rules");
    Vec blended(p);
    for (std::size_t l = 0; l < p; ++l) {
        const auto& r = family.rules[l];
        blended(static_cast<Eigen::Index>(l)) =
            r.blend_lower(x) * r.lower(x) + r.blend_upper(x) * r.upper(x);
    }
    const double denom = blended.sum();
    if (!(denom > 0.0)) throw ZeroDenominator("all blended membership grades vanish at x");
    return MembershipVector{blended / denom};
}

inline bool check_interval_order(const IT2MembershipFamily& family, const std::vector<Vec>& samples) {
    for (const auto& x : samples) {
        for (const auto& r : family.rules) {
            const double lo = r.lower(x);
            const double up = r.upper(x);
            if (!(lo >= 0.0 && lo <= up && up <= 1.0)) return false;
        }
    }
    return true;
}

/// Two-rule family with a sigmoid upper grade on one state axis and a
/// constant uncertainty band below it; rule 2 complements rule 1.
inline IT2MembershipFamily sigmoid_band_family(int axis = 0, double shift = 0.0, double band = 0.1) {
    auto up1 = [axis, shift](const Vec& x) {
        return 1.0 / (1.0 + std::exp(x(axis) - shift));
    };
    auto lo1 = [up1, band](const Vec& x) { return std::max(0.0, up1(x) - band); };
    auto up2 = [lo1](const Vec& x) { return 1.0 - lo1(x); };
    auto lo2 = [up1, band](const Vec& x) { return std::max(0.0, 1.0 - up1(x) - band); };
    auto half = [](const Vec&) { return 0.5; };

    IT2MembershipFamily fam;
    fam.rules.push_back({lo1, up1, half, half});
    fam.rules.push_back({lo2, up2, half, half});
    return fam;
}

/// Piecewise-linear lower/upper grades tabulated over a 1-D grid on one axis.
/// `lower`/`upper` hold one row per rule; values are clamped at the grid ends.
inline IT2MembershipFamily tabulated_family(int axis, std::vector<double> grid,
                                            std::vector<std::vector<double>> lower,
                                            std::vector<std::vector<double>> upper) {
    if (grid.size() < 2 || lower.size() != upper.size() || lower.empty())
        throw ValidationError("tabulated family needs >=2 grid points and matched rule tables");
    for (std::size_t l = 0; l < lower.size(); ++l)
        if (lower[l].size() != grid.size() || upper[l].size() != grid.size())
            throw ValidationError("tabulated rule row length must match grid");

    auto interp = [](const std::vector<double>& g, const std::vector<double>& v, double s) {
        if (s <= g.front()) return v.front();
        if (s >= g.back()) return v.back();
        auto it = std::upper_bound(g.begin(), g.end(), s);
        const std::size_t k = static_cast<std::size_t>(it - g.begin());
        const double t = (s - g[k - 1]) / (g[k] - g[k - 1]);
        return v[k - 1] + t * (v[k] - v[k - 1]);
    };
    auto half = [](const Vec&) { return 0.5; };

    IT2MembershipFamily fam;
    for (std::size_t l = 0; l < lower.size(); ++l) {
        auto lo = [axis, grid, row = lower[l], interp](const Vec& x) { return interp(grid, row, x(axis)); };
        auto up = [axis, grid, row = upper[l], interp](const Vec& x) { return interp(grid, row, x(axis)); };
        fam.rules.push_back({lo, up, half, half});
    }
    return fam;
}

}  // namespace detm
