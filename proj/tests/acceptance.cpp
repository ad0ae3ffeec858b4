// Acceptance checks. Each criterion prints its sub-checks and one "PASS <name>" or "FAIL <name>" line.
// Usage: tfa_acceptance [criterion...]; no argument runs every criterion.

#include "oracles.hpp"
#include "tfa/decomposition.hpp"
#include "tfa/dyadic.hpp"
#include "tfa/forest.hpp"
#include "tfa/harness.hpp"
#include "tfa/variation.hpp"
#include "tfa/wavepackets.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <string>

using namespace tfa;

namespace {

constexpr double kPi = std::numbers::pi;

class Verdict {
public:
    bool check(bool ok, const std::string& what) {
        std::cout << "  [" << (ok ? "ok" : "fail") << "] " << what << "\n";
        all_ = all_ && ok;
        return ok;
    }
    bool ok() const { return all_; }

private:
    bool all_ = true;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::shared_ptr<const WindowRho> window() {
    static auto w = build_window();
    return w;
}

double rel_l2(const GridSignal& a, const GridSignal& b) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += std::norm(a[i] - b[i]);
        den += std::norm(b[i]);
    }
    return den == 0 ? std::sqrt(num) : std::sqrt(num / den);
}

// ---- criteria ----

bool lacunarity(Verdict& v) {
    const auto t0 = std::chrono::steady_clock::now();
    const LacunaritySweep sw = lacunarity_sweep();
    const double secs = seconds_since(t0);
    v.check(sw.cases == 1200, "1200 cases enumerated (got " + std::to_string(sw.cases) + ")");
    v.check(sw.violations == 0, "zero violations (got " + std::to_string(sw.violations) + ")");
    v.check(secs < 1.0, "runtime " + fmt(secs) + " s < 1 s");
    return v.ok();
}

bool prep(Verdict& v) {
    // c ranges on which the probe interval lands inside the window, as stated for each identity
    const auto in_union = [](const Rational& c, Rational a, Rational b, Rational d, Rational e) {
        return (a <= c && c <= b) || (d <= c && c <= e);
    };
    struct Case {
        RInterval probe;
        Rational a, b, d, e;
    };
    const std::vector<Case> cases{
        {RInterval(-1, 2), Rational(-47, 2), Rational(-5, 2), Rational(5, 2), Rational(47, 2)},
        {RInterval(-2, 4), Rational(-45, 2), Rational(-9, 2), Rational(7, 2), Rational(43, 2)}};
    long long checked = 0, wrong = 0;
    for (const auto& k : cases) {
        std::vector<Rational> probes;
        for (const Rational& end : {k.a, k.b, k.d, k.e}) {
            probes.push_back(end);
            probes.push_back(end + Rational(1, 1024));
            probes.push_back(end - Rational(1, 1024));
        }
        probes.push_back((k.a + k.b) / Rational(2));
        probes.push_back((k.d + k.e) / Rational(2));
        probes.push_back((k.b + k.d) / Rational(2));
        for (int i = -30 * 8; i <= 30 * 8; ++i) probes.push_back(Rational(i, 8));
        for (const auto& c : probes) {
            ++checked;
            wrong += prep_inclusion(k.probe, c) != in_union(c, k.a, k.b, k.d, k.e);
        }
    }
    v.check(wrong == 0, std::to_string(checked) + " exact rational points, " + std::to_string(wrong) + " disagreements");
    return v.ok();
}

bool frames(Verdict& v) {
    const auto w = window();
    double partition = 0.0;
    for (int i = -8192; i <= 8192; ++i) {
        const double xi = static_cast<double>(i) / 1024.0;
        partition = std::max(partition, std::abs(w->partition_sum(xi) - 1.0));
    }
    v.check(partition <= 1e-10, "partition of unity deviation " + fmt(partition) + " <= 1e-10");
    double worst = 0.0;
    for (std::uint64_t t = 0; t < 20; ++t) {
        auto rng = trial_rng(2024, "acceptance-frames", t);
        const GridSignal f = random_band_limited(rng, 5, -64.0, 4096, 8.0, 2.0);
        const PacketTable tab = wave_packet_expand(f, *w);
        worst = std::max(worst, tab.residual);
    }
    v.check(worst <= 1e-6, "worst resynthesis error over 20 functions " + fmt(worst) + " <= 1e-6");
    return v.ok();
}

bool discretization(Verdict& v) {
    const auto w = window();
    const ThetaPsi psi = make_theta_psi(0.0, 4);

    // vanishing outside the (a, b) windows
    for (int m : {0, 2}) {
        DiscretizationCaps caps;
        caps.period = 64;
        const auto e = discretize(psi, 0, ShiftSequence::constant(m, 0, 0), w, caps);
        const auto norms = e.table_norms(17, 34, -10, 7);
        double mx = 0.0, outside = 0.0;
        for (const auto& [k, val] : norms) mx = std::max(mx, val);
        for (const auto& [k, val] : norms)
            if (!(k.first >= 21 && k.first <= 30 && k.second >= -6 && k.second <= 3)) outside = std::max(outside, val);
        v.check(mx > 0.0 && outside <= 1e-8 * mx,
                "vanishing outside 21..30 x -6..3 at m = " + std::to_string(m) + ": relative " + fmt(outside / mx));
    }

    // |n| decay: slope of log max|c'| against log |n| over |n| = 1..8
    {
        DiscretizationCaps caps;
        caps.period = 64;
        caps.nMax = 8;
        const auto e = discretize(psi, 0, ShiftSequence::constant(0, 0, 0), w, caps);
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double n = 8;
        for (int r = 1; r <= 8; ++r) {
            const double x = std::log(static_cast<double>(r)), y = std::log(e.ring_max(r));
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        const double exponent = -(n * sxy - sx * sy) / (n * sxx - sx * sx);
        v.check(exponent >= 10.0, "|n| decay exponent over |n| in [1, 8]: " + fmt(exponent) + " >= 10 (ratio ring 8 / ring 1 = " +
                                      fmt(e.ring_max(8) / e.ring_max(1)) + ")");
    }

    // reconstruction against direct quadrature of the bilinear average
    const auto packet = [](double xi, double c, double sig) {
        return GridSignal::from_function(5, -64.0, 4096, [=](double x) {
            const double u = (x - c) / sig;
            return std::exp(-kPi * u * u) * std::polar(1.0, 2 * kPi * xi * x);
        });
    };
    const GridSignal f1 = packet(4.25, 1.0, 20.0), f2 = packet(-4.25, -2.0, 20.0);
    for (int m = 0; m <= 4; ++m) {
        DiscretizationCaps caps;
        caps.period = 128;
        caps.nMax = -1;
        const ShiftSequence sh = ShiftSequence::constant(m, 0, 0);
        const auto e = discretize(psi, 0, sh, w, caps);
        const auto rep = reconstruct(e, f1, f2);
        ThetaPsi p = psi;
        p.tau = static_cast<double>(sh.at(0));
        const GridSignal per = p.periodized(5, -64.0, 4096);
        const GridSignal direct =
            bilinear_average_grid([&](double y) { return per.at(y); }, 0.0, f1, f2, 1.0, Boundary::Periodic);
        const double err = rel_l2(rep.model, direct);
        v.check(err <= 1e-5, "reconstruction at m = " + std::to_string(m) + ": relative L2 " + fmt(err) + " <= 1e-5");
    }
    return v.ok();
}

bool indicator(Verdict& v) {
    const auto cert = indicator_decomposition(12);
    double prev = indicator_residual_l1(cert, 3);
    double lo = 1.0, hi = 0.0;
    for (int j = 4; j <= 12; ++j) {
        const double r = indicator_residual_l1(cert, j);
        lo = std::min(lo, r / prev);
        hi = std::max(hi, r / prev);
        prev = r;
    }
    v.check(lo >= 0.4 && hi <= 0.6, "halving ratios for j = 4..12 in [" + fmt(lo) + ", " + fmt(hi) + "] within [0.4, 0.6]");
    v.check(prev <= 1e-3, "residual at j = 12: " + fmt(prev) + " <= 1e-3");
    // midpoint sum of |1_[0,1) - partial sum| over [-8, 9]; cell edges fall on the jumps
    const double h = std::ldexp(1.0, -16);
    const int n = 17 << 16;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = -8.0 + (i + 0.5) * h;
        s += std::abs((x >= 0.0 && x < 1.0 ? 1.0 : 0.0) - cert.evaluate(x)) * h;
    }
    v.check(s <= 1e-3 && std::abs(s - prev) <= 0.02 * prev, "independent midpoint residual " + fmt(s));
    return v.ok();
}

bool dini(Verdict& v) {
    const DiniDecomposition d = dini_decompose(dini_calibration_kernel(), 0, 6, build_zeta());
    v.check(d.slabs.size() == 6, "six slabs");
    double worst = 0.0, ratio = 0.0;
    for (const auto& sl : d.slabs) {
        worst = std::max(worst, sl.residual);
        ratio = std::max(ratio, sl.coeffRatio);
    }
    v.check(worst <= 1e-5, "slab reconstruction relative L2 " + fmt(worst) + " <= 1e-5 for m <= 6");
    v.check(ratio <= 1.0, "coefficient ratio bounded by 1 across m (max " + fmt(ratio) + ")");
    return v.ok();
}

bool dini_norm_closed_form(Verdict& v) {
    for (double a : {0.5, 1.0, 2.0}) {
        const double got = dini_norm([a](double t) { return std::pow(t, a); }) * std::pow(a, 5.0);
        v.check(std::abs(got - 24.0) <= 1e-6, "alpha = " + fmt(a) + ": norm * alpha^5 = " + fmt(got));
    }
    return v.ok();
}

bool variation(Verdict& v) {
    long long cases = 0, mismatches = 0;
    for (double r : {1.0, 1.5, 2.0, 3.0})
        for (int len = 1; len <= 8; ++len) {
            int total = 1;
            for (int k = 0; k < len; ++k) total *= 3;
            for (int code = 0; code < total; ++code) {
                std::vector<cplx> a(static_cast<std::size_t>(len));
                int c = code;
                for (auto& x : a) {
                    x = static_cast<double>(c % 3);
                    c /= 3;
                }
                ++cases;
                const double dp = variation_norm(SampledPath::from_values(a), r).value;
                mismatches += std::abs(dp - oracle::brute_variation(a, r)) > 1e-12;
            }
        }
    v.check(mismatches == 0, std::to_string(cases) + " sequences, " + std::to_string(mismatches) + " mismatches");

    std::mt19937_64 rng(77);
    std::normal_distribution<double> g;
    long long checks = 0, violations = 0;
    for (int t = 0; t < 1000; ++t) {
        std::vector<cplx> a(12);
        for (auto& z : a) z = {g(rng), t % 2 ? g(rng) : 0.0};
        const SampledPath p = SampledPath::from_values(a);
        for (double r : {1.0, 2.0, 3.0}) {
            const double V = variation_norm(p, r).value;
            for (double lambda = 0.1; lambda < 5.0; lambda *= 1.4) {
                ++checks;
                const double N = static_cast<double>(oracle::brute_jumps(a, lambda));
                violations += std::pow(lambda, r) * N > std::pow(V, r) * (1.0 + 1e-12);
            }
        }
    }
    v.check(violations == 0, "jump inequality: " + std::to_string(checks) + " checks, " + std::to_string(violations) +
                                 " violations");
    return v.ok();
}

bool trees(Verdict& v) {
    const auto w = window();
    long long partitionBad = 0, sizeBad = 0, disjointBad = 0, conservationBad = 0;
    double worstSize = 0.0;
    std::size_t maxTiles = 0;
    for (std::uint64_t t = 0; t < 100; ++t) {
        auto rng = trial_rng(99, "acceptance-trees", t);
        std::uniform_int_distribution<int> A(21, 30), B(-6, 3), M(0, 4), Al(0, 2), comp(1, 3);
        FamilySpec s;
        s.nu = NuParams{.a = A(rng), .b = B(rng), .sPrime = 0, .alpha = Al(rng)};
        s.m = M(rng);
        s.scales = {-10, 0};
        s.xHi = 4.0;
        s.anchors = {0.3, 1.1};
        s.maxTiles = 500;
        s.jitter = 1;
        const auto fam = random_family(rng, s);
        maxTiles = std::max(maxTiles, fam.size());
        const AtomSignal f = AtomSignal::random(rng, 4, 0.0, 4.0, -10.0, 10.0);
        const int k = comp(rng), j = comp(rng);
        const auto fk = f.packets(w);
        const auto e = tile_energies(fam, fk, k);
        double top = 0.0;
        for (int i = 1; i <= 3; ++i) top = std::max(top, oracle::sweep_size(fam, e, i, j, k));
        if (!(top > 0.0)) top = 1.0;
        const double lambda = top / 1.3;
        const TreeSelection sel = select_trees(fam, e, k, j, lambda);

        std::vector<TriTile> all = sel.selected_tiles(), sorted = fam;
        all.insert(all.end(), sel.residual.begin(), sel.residual.end());
        std::vector<TriTile> got = all;
        std::sort(got.begin(), got.end());
        std::sort(sorted.begin(), sorted.end());
        partitionBad += got != sorted;

        std::vector<double> re;
        for (const auto& tile : sel.residual)
            re.push_back(e[static_cast<std::size_t>(std::find(fam.begin(), fam.end(), tile) - fam.begin())]);
        for (int i = 1; i <= 3; ++i) {
            const double sz = oracle::sweep_size(sel.residual, re, i, j, k);
            worstSize = std::max(worstSize, sz / lambda);
            sizeBad += sz > lambda * (1.0 + 1e-12);
        }
        for (int ip = 1; ip <= 3; ++ip) {
            if (ip == k) continue;
            for (bool above : {true, false}) disjointBad += !strongly_disjoint(sel.collection(ip, above), k);
        }
        const auto f1 = AtomSignal::random(rng, 2, 0.0, 4.0, -3.0, 3.0).packets(w);
        const auto f2 = AtomSignal::random(rng, 2, 0.0, 4.0, -9.0, -3.0).packets(w);
        conservationBad += model_form(fam, f1, f2, fk) != model_form(all, f1, f2, fk);
    }
    v.check(maxTiles <= 500, "100 families, largest " + std::to_string(maxTiles) + " tiles");
    v.check(partitionBad == 0, "selected trees and residual partition the family");
    v.check(sizeBad == 0, "residual sizes <= lambda by the endpoint sweep (max size / lambda " + fmt(worstSize) + ")");
    v.check(disjointBad == 0, "selected collections strongly disjoint");
    v.check(conservationBad == 0, "model form conserved exactly over the partition");
    return v.ok();
}

bool growth(Verdict& v) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto rate_of = [](const std::vector<ExperimentRecord>& rows) {
        for (const auto& r : rows)
            if (r.metric == "rate") return r.value;
        return std::numeric_limits<double>::quiet_NaN();
    };
    const double shift = rate_of(shift_growth_experiment(ShiftGrowthSpec{}, 1));
    v.check(shift <= 0.1, "shift growth fitted rate over m = 0..8: " + fmt(shift) + " <= 0.1");
    const double bessel = rate_of(bessel_growth_experiment(BesselGrowthSpec{}, 1));
    v.check(bessel <= 0.1, "bessel ratio fitted rate over m = 0..8: " + fmt(bessel) + " <= 0.1");
    const double secs = seconds_since(t0);
    v.check(secs <= 1800.0, "runtime " + fmt(secs) + " s <= 30 min");
    return v.ok();
}

bool exceptional(Verdict& v) {
    std::mt19937_64 rng(4242);
    const auto trials = exceptional_trials(rng, 100, 4);
    ExceptionalParams p;
    p.C0 = 10.667;
    double worstF = 0.0, worstMajor = 1.0;
    int mMax = 0;
    for (const auto& t : trials) {
        const ExceptionalSet F = exceptional_set(t.E1, t.E2, t.shifts, p);
        worstF = std::max(worstF, F.measure);
        worstMajor = std::min(worstMajor, major_subset(t.E3, F).measure() / t.E3.measure());
        mMax = std::max(mMax, t.shifts.m());
    }
    v.check(trials.size() == 100 && mMax <= 4, "100 trials with m <= 4");
    v.check(worstF < 1.0 / 12.0, "max |F| = " + fmt(worstF) + " < 1/12 at C0 = 10.667");
    v.check(2.0 * worstMajor >= 1.0, "min |E3~| / |E3| = " + fmt(worstMajor) + " >= 1/2");
    return v.ok();
}

bool ergodic(Verdict& v) {
    const double theta = 0.1234;
    std::vector<std::size_t> ns;
    for (std::size_t n = 1; n <= 64; ++n) ns.push_back(n);
    const auto rows = double_recurrence(
        DynSystem::rotation(theta, 64), [](double x) { return std::polar(1.0, 2 * kPi * x); },
        [](double x) { return std::polar(1.0, -2 * kPi * x); }, ns);
    const cplx z = std::polar(1.0, 4 * kPi * theta);
    double err = 0.0;
    for (std::size_t k = 0; k < ns.size(); ++k) {
        const double n = static_cast<double>(ns[k]);
        cplx closed{};
        for (std::size_t i = 0; i < ns[k]; ++i) closed += std::pow(z, static_cast<double>(i));
        closed /= n;
        for (const auto& x : rows[k]) err = std::max(err, std::abs(x - closed));
    }
    v.check(err <= 1e-10, "rotation conjugate pair matches the geometric series: error " + fmt(err));

    const auto quarter = [](double x) {
        static const cplx q[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
        return q[static_cast<std::size_t>(x) % 4];
    };
    double expPair = 0.0;
    for (int scales = 1; scales <= 12; ++scales)
        expPair = std::max(expPair, long_variation_value(DynSystem::cyclic(4096), quarter, quarter, 2.0, 2.0, scales));
    v.check(expPair == 0.0, "exponential pair variation is exactly 0");

    const auto lv = long_variation_experiment(LongVariationSpec{}, 1);
    for (const auto& r : lv)
        if (r.metric == "ratio") {
            const double rr = std::stod(r.params.at("r"));
            if (rr <= 2.0)
                v.check(r.value > 1.2, "r = 2 growth: median ratio 12 vs 6 scales " + fmt(r.value) + " > 1.2");
            else
                v.check(r.value <= 1.1, "r = 2.1 bound: median ratio 12 vs 6 scales " + fmt(r.value) + " <= 1.1");
        }
    return v.ok();
}

bool square_set(Verdict& v) {
    const GridSignal ind = GridSignal::from_function(6, -8.0, 1024, [](double x) { return cplx(x >= 0.0 && x < 1.0, 0.0); });
    const SquareSet F0 = refined_square_set(ind, 0.5);
    v.check(F0.maximal.size() == 1 && F0.maximal[0].to_interval() == RInterval(0, 2), "F for 1_[0,1) at lambda 1/2 is [0, 2)");

    oracle::AdaptedFactory fac;
    const int q = 6;
    const double x0 = -16.0;
    const std::size_t n = 2048;
    long long bad = 0;
    double worst = 0.0;
    for (std::uint64_t t = 0; t < 100; ++t) {
        auto rng = trial_rng(5, "acceptance-square", t);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        GridSignal f(q, x0, n);
        for (std::size_t i = 0; i < n; ++i)
            if (f.x(i) > -2.0 && f.x(i) < 6.0) f[i] = cplx(u(rng) < 0.3 ? 4.0 * u(rng) : 0.0, u(rng) - 0.5);
        const double lambda = 0.2 + u(rng);
        const SquareSet F = refined_square_set(f, lambda);
        const int kScale = 1 + static_cast<int>(t % 3);
        const DyadicInterval K{kScale, static_cast<long long>(t % 2)};
        std::vector<AdaptedPacket> packets;
        for (int s = kScale - 5; s <= kScale; ++s)
            for (long long idx = 0; idx < (1LL << (kScale - s)); ++idx)
                packets.push_back(fac.make({s, K.index * (1LL << (kScale - s)) + idx}, 2 * kPi * u(rng), q, x0, n));
        const SquareCheck c = square_set_check(f, F, lambda, K, packets);
        bad += !c.pass;
        worst = std::max(worst, c.rhs > 0 ? c.lhs / c.rhs : 0.0);
    }
    v.check(bad == 0, "100 random (f, K, packets) trials hold (max lhs / rhs " + fmt(worst) + ")");
    return v.ok();
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<bool(Verdict&)>>> criteria{
        {"lacunarity", lacunarity},   {"prep", prep},       {"frames", frames},
        {"discretization", discretization}, {"indicator", indicator}, {"dini", dini},
        {"dini_norm", dini_norm_closed_form}, {"variation", variation}, {"trees", trees},
        {"growth", growth},           {"exceptional", exceptional}, {"ergodic", ergodic},
        {"square_set", square_set}};
    std::vector<std::string> wanted(argv + 1, argv + argc);
    for (const auto& w : wanted) {
        bool known = false;
        for (const auto& [name, fn] : criteria) known = known || name == w;
        if (!known) {
            std::cerr << "unknown criterion: " << w << "\n";
            return 2;
        }
    }
    bool all = true;
    for (const auto& [name, fn] : criteria) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), name) == wanted.end()) continue;
        Verdict v;
        bool ok = false;
        try {
            ok = fn(v);
        } catch (const std::exception& e) {
            std::cout << "  [fail] exception: " << e.what() << "\n";
        }
        std::cout << (ok ? "PASS " : "FAIL ") << name << std::endl;
        all = all && ok;
    }
    return all ? 0 : 1;
}
