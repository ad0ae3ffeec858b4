#pragma once

// Independent reference computations shared by the unit tests and the acceptance binary.

#include "tfa/forest.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <optional>
#include <set>

namespace oracle {

using tfa::DyadicInterval;
using tfa::Rational;
using tfa::RInterval;
using tfa::TriTile;

// Smallest dyadic interval containing every interval, if one exists.
inline std::optional<DyadicInterval> smallest_dyadic_cover(const std::vector<DyadicInterval>& ivs) {
    int L = ivs.front().scale;
    for (const auto& d : ivs) L = std::max(L, d.scale);
    for (; L < ivs.front().scale + 61; ++L) {
        const long long idx = ivs.front().index >> (L - ivs.front().scale);
        bool ok = true;
        for (const auto& d : ivs)
            if ((d.index >> (L - d.scale)) != idx) ok = false;
        if (ok) return DyadicInterval{L, idx};
        // intervals on both sides of 0 never share a dyadic ancestor
        bool neg = false, pos = false;
        for (const auto& d : ivs) (d.index < 0 ? neg : pos) = true;
        if (neg && pos) return std::nullopt;
    }
    return std::nullopt;
}

// size by exhaustive subsets: every subset that is a tree for some central frequency, with its best dyadic top.
inline double brute_size(const std::vector<TriTile>& fam, const std::vector<double>& e, int i, int j, int k) {
    double best = 0.0;
    const std::size_t n = fam.size();
    if (i == k) {
        for (std::size_t a = 0; a < n; ++a) best = std::max(best, std::sqrt(e[a] / std::ldexp(1.0, fam[a].scale)));
        return best;
    }
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
        Rational lo, hi;
        bool first = true;
        std::vector<DyadicInterval> ivs;
        double sum = 0.0;
        for (std::size_t a = 0; a < n; ++a) {
            if (!(mask >> a & 1u)) continue;
            const RInterval w = fam[a].comp(i).freq.dilate(Rational(3));
            if (first || w.left() > lo) lo = w.left();
            if (first || w.right() < hi) hi = w.right();
            first = false;
            ivs.push_back(fam[a].dyadic_time(j));
            sum += e[a];
        }
        if (!(lo < hi)) continue;
        auto top = smallest_dyadic_cover(ivs);
        if (!top) continue;
        best = std::max(best, std::sqrt(std::ldexp(sum, -top->scale)));
    }
    return best;
}

// size by a per-top sweep over exact interval endpoints.
inline double sweep_size(const std::vector<TriTile>& fam, const std::vector<double>& e, int i, int j, int k) {
    double best = 0.0;
    if (fam.empty()) return 0.0;
    if (i == k) return brute_size(fam, e, i, j, k);
    std::set<std::pair<int, long long>> tops;
    int cap = fam.front().scale;
    Rational reach(0);
    for (const auto& t : fam) {
        cap = std::max(cap, t.scale);
        const auto& iv = t.comp(j).time;
        reach = std::max({reach, iv.right(), -iv.left()});
    }
    while (Rational::pow2(cap) < reach * Rational(2)) ++cap;
    for (const auto& t : fam) {
        DyadicInterval d = t.dyadic_time(j);
        for (; d.scale <= cap; d = d.parent()) tops.insert({d.scale, d.index});
    }
    for (const auto& [L, idx] : tops) {
        const RInterval top = DyadicInterval{L, idx}.to_interval();
        // events: (coordinate, kind, weight) with removals applied before additions at a shared coordinate
        std::vector<std::tuple<Rational, int, double>> ev;
        for (std::size_t a = 0; a < fam.size(); ++a) {
            if (!fam[a].comp(j).time.subset_of(top)) continue;
            const RInterval w = fam[a].comp(i).freq.dilate(Rational(3));
            ev.emplace_back(w.left(), 1, e[a]);
            ev.emplace_back(w.right(), 0, e[a]);
        }
        std::sort(ev.begin(), ev.end(), [](const auto& x, const auto& y) {
            if (std::get<0>(x) != std::get<0>(y)) return std::get<0>(x) < std::get<0>(y);
            return std::get<1>(x) < std::get<1>(y);
        });
        long double cur = 0.0L, peak = 0.0L;
        for (const auto& [x, kind, w] : ev) {
            cur += kind ? w : -w;
            peak = std::max(peak, cur);
        }
        best = std::max(best, std::sqrt(std::ldexp(static_cast<double>(peak), -L)));
    }
    return best;
}

// Mean-zero packets adapted to dyadic intervals: |I|^{-1/2} A (cos t g1 + sin t g2)((x - c(I))/|I|).
struct AdaptedFactory {
    double amp = 0.0;

    static double g1(double y) { return y * std::exp(-8.0 * y * y); }
    static double g2(double y) { return (1.0 - 16.0 * y * y) * std::exp(-8.0 * y * y); }
    static double d1(double y) { return (1.0 - 16.0 * y * y) * std::exp(-8.0 * y * y); }
    static double d2(double y) { return (-48.0 * y + 256.0 * y * y * y) * std::exp(-8.0 * y * y); }

    AdaptedFactory() {
        double worst = 0.0;
        for (double y = 0.0; y <= 12.0; y += 1e-4) {
            const double w = std::pow(1.0 + y, 10);
            worst = std::max(worst, std::hypot(g1(y), g2(y)) * w);
            worst = std::max(worst, std::hypot(d1(y), d2(y)) * w);
        }
        amp = 0.999 / worst;
    }

    tfa::AdaptedPacket make(const DyadicInterval& I, double theta, int q, double x0, std::size_t n) const {
        const double len = std::ldexp(1.0, I.scale);
        const double c = (static_cast<double>(I.index) + 0.5) * len;
        const double a = amp / std::sqrt(len);
        tfa::GridSignal psi = tfa::GridSignal::from_function(q, x0, n, [&](double x) {
            const double y = (x - c) / len;
            return tfa::cplx(a * (std::cos(theta) * g1(y) + std::sin(theta) * g2(y)), 0.0);
        });
        return {I, psi};
    }
};

// V^r by enumerating every increasing index subset.
inline double brute_variation(const std::vector<tfa::cplx>& a, double r) {
    const std::size_t n = a.size();
    double best = 0.0;
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
        double s = 0.0;
        long prev = -1;
        for (std::size_t i = 0; i < n; ++i) {
            if (!(mask >> i & 1u)) continue;
            if (prev >= 0) s += std::pow(std::abs(a[i] - a[static_cast<std::size_t>(prev)]), r);
            prev = static_cast<long>(i);
        }
        best = std::max(best, s);
    }
    return std::pow(best, 1.0 / r);
}

// Most interleaved jumps s_1 < t_1 <= s_2 < ... by plain recursion from index `from`.
inline std::size_t brute_jumps(const std::vector<tfa::cplx>& a, double lambda, std::size_t from = 0) {
    std::size_t best = 0;
    for (std::size_t s = from; s < a.size(); ++s)
        for (std::size_t t = s + 1; t < a.size(); ++t)
            if (std::abs(a[t] - a[s]) > lambda) best = std::max(best, 1 + brute_jumps(a, lambda, t));
    return best;
}

// Fewest closed intervals of length 2 lambda covering the points; left endpoints may be taken at points.
inline std::size_t brute_cover(const std::vector<double>& pts, double lambda) {
    const std::size_t n = pts.size();
    std::size_t best = n;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        bool ok = true;
        for (double x : pts) {
            bool hit = false;
            for (std::size_t i = 0; i < n; ++i)
                if ((mask >> i & 1u) && x >= pts[i] && x <= pts[i] + 2.0 * lambda) hit = true;
            ok = ok && hit;
        }
        if (ok) best = std::min<std::size_t>(best, static_cast<std::size_t>(std::popcount(mask)));
    }
    return best;
}

}  // namespace oracle
