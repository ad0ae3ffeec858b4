// tfa-lab: runs the experiments and verifications, writes CSV under --out.
// Exit status: 0 when every asserted invariant holds, 1 when one fails, 2 on configuration errors.

#include "tfa/decomposition.hpp"
#include "tfa/dyadic.hpp"
#include "tfa/forest.hpp"
#include "tfa/harness.hpp"
#include "tfa/variation.hpp"
#include "tfa/wavepackets.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>

using namespace tfa;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Run {
    Config cfg;
    std::uint64_t seed = 1;
    std::optional<std::size_t> gridSize;
    fs::path out = ".";
};

using Params = std::map<std::string, std::string>;

std::string num(double v) { return format_value(v); }

void emit(const Run& run, const std::string& name, const std::vector<ExperimentRecord>& rows) {
    fs::create_directories(run.out);
    Metadata meta = run_metadata(run.cfg, name);
    meta["seed"] = std::to_string(run.seed);
    if (run.gridSize) meta["grid_size"] = std::to_string(*run.gridSize);
    const fs::path path = run.out / (name + ".csv");
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    write_records_csv(os, rows, meta);
    std::cout << "wrote " << path.string() << "\n";
}

void report(bool ok, const std::string& what) { std::cout << (ok ? "ok    " : "FAIL  ") << what << "\n"; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- verify-lacunarity ----

bool cmd_lacunarity(const Run& run) {
    const auto t0 = std::chrono::steady_clock::now();
    const LacunaritySweep sw = lacunarity_sweep();
    const double secs = seconds_since(t0);
    std::cout << "lacunarity sweep: 10 a x 10 b x 2 parities of s' x 6 ordered pairs = " << sw.cases
              << " cases, " << sw.violations << " violations (literal witness: " << sw.literalViolations
              << "), " << num(secs) << " s\n";
    for (const auto& v : sw.firstViolations) std::cout << "  " << v << "\n";

    // Both window identities at endpoints, midpoints and just outside.
    struct Window {
        RInterval probe;
        Rational lo, hi;
    };
    const std::vector<Window> windows{{RInterval(-1, 2), Rational(5, 2), Rational(47, 2)},
                                      {RInterval(-2, 4), Rational(7, 2), Rational(43, 2)},
                                      {RInterval(-2, 4), Rational(-45, 2), Rational(-9, 2)},
                                      {RInterval(-1, 2), Rational(-47, 2), Rational(-5, 2)}};
    long long prepCases = 0, prepFailures = 0;
    const Rational eps(1, 1000);
    for (const auto& w : windows) {
        for (const Rational& c : {w.lo, w.hi, (w.lo + w.hi) / Rational(2)}) {
            ++prepCases;
            prepFailures += !prep_inclusion(w.probe, c);
        }
        for (const Rational& c : {w.lo - eps, w.hi + eps}) {
            ++prepCases;
            prepFailures += prep_inclusion(w.probe, c);
        }
    }
    std::cout << "window identities: " << prepCases << " exact cases, " << prepFailures << " failures\n";

    const double maxSeconds = run.cfg.get_double("lacunarity", "max_seconds", 1.0);
    const bool ok = sw.violations == 0 && sw.cases == 1200 && prepFailures == 0 && secs < maxSeconds;
    const Params p;
    emit(run, "lacunarity",
         {{"lacunarity", p, run.seed, "cases", static_cast<double>(sw.cases)},
          {"lacunarity", p, run.seed, "violations", static_cast<double>(sw.violations)},
          {"lacunarity", p, run.seed, "literal_violations", static_cast<double>(sw.literalViolations)},
          {"lacunarity", p, run.seed, "seconds", secs},
          {"lacunarity", p, run.seed, "prep_cases", static_cast<double>(prepCases)},
          {"lacunarity", p, run.seed, "prep_failures", static_cast<double>(prepFailures)},
          {"lacunarity", p, run.seed, "pass", ok ? 1.0 : 0.0}});
    report(ok, "lacunarity");
    return ok;
}

// ---- verify-frames ----

bool cmd_frames(const Run& run) {
    const auto w = build_window();
    const double ptol = run.cfg.get_double("frames", "partition_tolerance", 1e-10);
    double partition = 0.0;
    for (int i = -4096; i < 4096; ++i) {
        const double xi = static_cast<double>(i) / 2048.0;
        partition = std::max(partition, std::abs(w->partition_sum(xi) - 1.0));
    }
    const int count = static_cast<int>(run.cfg.get_int("frames", "count", 20));
    const std::size_t n = run.gridSize.value_or(static_cast<std::size_t>(run.cfg.get_int("frames", "grid_size", 4096)));
    const int q = static_cast<int>(run.cfg.get_int("frames", "q", 5));
    const double band = run.cfg.get_double("frames", "band", 8.0);
    const double rtol = run.cfg.get_double("frames", "tolerance", 1e-6);
    const double x0 = -std::ldexp(static_cast<double>(n), -q) / 2.0;
    std::vector<double> residual(static_cast<std::size_t>(count));
    parallel_for(residual.size(), [&](std::size_t i) {
        auto rng = trial_rng(run.seed, "frames", i);
        const GridSignal f = random_band_limited(rng, q, x0, n, band, 2.0);
        residual[i] = wave_packet_expand(f, *w).residual;
    });
    std::vector<ExperimentRecord> rows;
    const Params base{{"grid", std::to_string(n)}};
    rows.push_back({"frames", base, run.seed, "partition_residual", partition});
    double worst = 0.0;
    for (std::size_t i = 0; i < residual.size(); ++i) {
        auto p = base;
        p["trial"] = std::to_string(i);
        rows.push_back({"frames", p, run.seed, "resynthesis_residual", residual[i]});
        worst = std::max(worst, residual[i]);
    }
    const bool ok = partition <= ptol && worst <= rtol;
    rows.push_back({"frames", base, run.seed, "pass", ok ? 1.0 : 0.0});
    std::cout << "partition of unity: max deviation " << num(partition) << " (tolerance " << num(ptol) << ")\n"
              << "resynthesis: " << count << " band-limited functions, worst relative L2 " << num(worst)
              << " (tolerance " << num(rtol) << ")\n";
    emit(run, "frames", rows);
    report(ok, "frames");
    return ok;
}

// ---- decompose / verify ----

void write_cert(const Run& run, const std::string& name, const DecompositionCertificate& cert) {
    fs::create_directories(run.out);
    const fs::path path = run.out / (name + ".cert");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    write_certificate(os, cert);
    std::cout << "wrote " << path.string() << "\n";
}

bool cmd_decompose(const Run& run, const std::string& kind) {
    std::vector<ExperimentRecord> rows;
    bool ok = true;
    const std::string exp = "decompose_" + kind;
    if (kind == "indicator") {
        const int J = static_cast<int>(run.cfg.get_int("decompose", "indicator_jmax", 12));
        const double lo = run.cfg.get_double("decompose", "halving_lo", 0.4);
        const double hi = run.cfg.get_double("decompose", "halving_hi", 0.6);
        const double tol = run.cfg.get_double("decompose", "indicator_tolerance", 1e-3);
        const auto cert = indicator_decomposition(J);
        certify_bumps(cert);
        double prev = indicator_residual_l1(cert, 3);
        for (int j = 4; j <= J; ++j) {
            const double r = indicator_residual_l1(cert, j);
            const double ratio = r / prev;
            rows.push_back({exp, {{"j", std::to_string(j)}}, run.seed, "residual_l1", r});
            rows.push_back({exp, {{"j", std::to_string(j)}}, run.seed, "halving_ratio", ratio});
            std::cout << "j = " << j << ": L1 residual " << num(r) << ", ratio " << num(ratio) << "\n";
            ok = ok && ratio >= lo && ratio <= hi;
            prev = r;
        }
        ok = ok && prev <= tol;
        write_cert(run, "indicator", cert);
    } else if (kind == "dini") {
        const int s = static_cast<int>(run.cfg.get_int("decompose", "dini_s", 0));
        const int mMax = static_cast<int>(run.cfg.get_int("decompose", "dini_mmax", 6));
        const double tol = run.cfg.get_double("decompose", "dini_tolerance", 1e-5);
        const double bound = run.cfg.get_double("decompose", "dini_coefficient_bound", 1.0);
        const DiniDecomposition d = dini_decompose(dini_calibration_kernel(), s, mMax, build_zeta());
        for (const auto& sl : d.slabs) {
            const Params p{{"m", std::to_string(sl.m)}, {"s", std::to_string(s)}};
            rows.push_back({exp, p, run.seed, "slab_residual", sl.residual});
            rows.push_back({exp, p, run.seed, "coefficient_ratio", sl.coeffRatio});
            rows.push_back({exp, p, run.seed, "max_l", static_cast<double>(sl.maxL)});
            std::cout << "m = " << sl.m << ": slab residual " << num(sl.residual) << ", coefficient ratio "
                      << num(sl.coeffRatio) << ", max |l| " << sl.maxL << "\n";
            ok = ok && sl.residual <= tol && sl.coeffRatio <= bound;
        }
        const auto cert = d.certificate();
        certify_bumps(cert);
        write_cert(run, "dini", cert);
    } else if (kind == "hormander") {
        const int sMin = static_cast<int>(run.cfg.get_int("decompose", "hormander_smin", -1));
        const int sMax = static_cast<int>(run.cfg.get_int("decompose", "hormander_smax", 1));
        const double tol = run.cfg.get_double("decompose", "hormander_tolerance", 1e-8);
        const ComplexFn m = [](double xi) { return cplx(std::exp(-xi * xi) * std::cos(xi)); };
        const auto cert = hormander_decomposition(m, sMin, sMax);
        certify_bumps(cert);
        rows.push_back({exp, {}, run.seed, "residual_l1", cert.residualL1});
        rows.push_back({exp, {}, run.seed, "residual_l2", cert.residualL2});
        rows.push_back({exp, {}, run.seed, "terms", static_cast<double>(cert.terms.size())});
        std::cout << "multiplier exp(-xi^2) cos(xi), s in [" << sMin << ", " << sMax << "]: " << cert.terms.size()
                  << " terms, residual L1 " << num(cert.residualL1) << ", L2 " << num(cert.residualL2) << "\n";
        ok = cert.residualL1 <= tol && cert.residualL2 <= tol;
        write_cert(run, "hormander", cert);
    } else {
        throw CLI::ValidationError("decompose", "kind must be indicator, dini or hormander");
    }
    rows.push_back({exp, {}, run.seed, "pass", ok ? 1.0 : 0.0});
    emit(run, exp, rows);
    report(ok, exp);
    return ok;
}

bool cmd_verify(const Run& run, const std::string& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open certificate " + file);
    const DecompositionCertificate cert = read_certificate(in);
    certify_bumps(cert);
    const auto [l1, l2] = verify_certificate(cert);
    // recomputation uses its own quadrature; residuals below 1e-12 are round-off
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-6 * std::abs(b) + 1e-12; };
    const bool ok = close(l1, cert.residualL1) && close(l2, cert.residualL2);
    std::cout << to_string(cert.kind) << " certificate: " << cert.terms.size() << " terms, " << cert.bumps.size()
              << " bumps\n  stored residuals " << num(cert.residualL1) << " / " << num(cert.residualL2)
              << "\n  recomputed       " << num(l1) << " / " << num(l2) << "\n";
    const Params p{{"kind", to_string(cert.kind)}};
    emit(run, "verify",
         {{"verify", p, run.seed, "residual_l1", l1},
          {"verify", p, run.seed, "residual_l2", l2},
          {"verify", p, run.seed, "pass", ok ? 1.0 : 0.0}});
    report(ok, "certificate");
    return ok;
}

// ---- trees ----

struct FamilyOutcome {
    std::size_t tiles = 0, picks = 0;
    double lambda = 0.0, residualSize = 0.0, bessel = 0.0;
    bool partition = false, disjoint = false, conserved = false;
};

FamilyOutcome run_family(std::mt19937_64& rng, std::size_t maxTiles, int mMax,
                         const std::shared_ptr<const WindowRho>& w) {
    std::uniform_int_distribution<int> A(21, 30), B(-6, 3), M(0, mMax), Al(0, 2), comp(1, 3);
    FamilySpec s;
    s.nu = NuParams{.a = A(rng), .b = B(rng), .sPrime = 0, .alpha = Al(rng)};
    s.m = M(rng);
    s.scales = {-10, 0};
    s.xLo = 0.0;
    s.xHi = 4.0;
    s.anchors = {0.3, 1.1};
    s.maxTiles = maxTiles;
    s.jitter = 1;
    const auto fam = random_family(rng, s);
    const AtomSignal f = AtomSignal::random(rng, 4, 0.0, 4.0, -10.0, 10.0);
    const int k = comp(rng), j = comp(rng);
    const auto fk = f.packets(w);
    const auto e = tile_energies(fam, fk, k);
    double top = 0.0;
    for (int i = 1; i <= 3; ++i) top = std::max(top, size(fam, e, i, j, k));
    FamilyOutcome o;
    o.tiles = fam.size();
    if (!(top > 0.0)) top = 1.0;
    o.lambda = top / 1.3;
    const TreeSelection sel = select_trees(fam, e, k, j, o.lambda);
    o.picks = sel.picks.size();

    std::vector<TriTile> all = sel.selected_tiles();
    all.insert(all.end(), sel.residual.begin(), sel.residual.end());
    std::vector<TriTile> sorted = fam, got = all;
    std::sort(sorted.begin(), sorted.end());
    std::sort(got.begin(), got.end());
    o.partition = got == sorted;

    const auto re = tile_energies(sel.residual, fk, k);
    for (int i = 1; i <= 3; ++i) o.residualSize = std::max(o.residualSize, size(sel.residual, re, i, j, k));
    o.disjoint = true;
    for (int ip = 1; ip <= 3; ++ip) {
        if (ip == k) continue;
        for (bool above : {true, false}) {
            const auto col = sel.collection(ip, above);
            o.disjoint = o.disjoint && strongly_disjoint(col, k);
            o.bessel = std::max(o.bessel, bessel_ratio(col, fk, f.norm2(), k, o.lambda));
        }
    }
    const auto f1 = AtomSignal::random(rng, 2, 0.0, 4.0, -3.0, 3.0).packets(w);
    const auto f2 = AtomSignal::random(rng, 2, 0.0, 4.0, -9.0, -3.0).packets(w);
    o.conserved = model_form(fam, f1, f2, fk) == model_form(all, f1, f2, fk);
    return o;
}

bool cmd_trees(const Run& run) {
    const auto w = build_window();
    const std::size_t families = static_cast<std::size_t>(run.cfg.get_int("trees", "families", 100));
    const std::size_t tiles = static_cast<std::size_t>(run.cfg.get_int("trees", "tiles", 500));
    const int mMax = static_cast<int>(run.cfg.get_int("trees", "m_max", 4));
    std::vector<FamilyOutcome> out(families);
    parallel_for(families, [&](std::size_t t) {
        auto rng = trial_rng(run.seed, "trees", t);
        out[t] = run_family(rng, tiles, mMax, w);
    });
    std::vector<ExperimentRecord> rows;
    bool ok = true;
    std::size_t picks = 0;
    for (std::size_t t = 0; t < families; ++t) {
        const auto& o = out[t];
        const Params p{{"family", std::to_string(t)}};
        rows.push_back({"trees", p, run.seed, "tiles", static_cast<double>(o.tiles)});
        rows.push_back({"trees", p, run.seed, "trees_selected", static_cast<double>(o.picks)});
        rows.push_back({"trees", p, run.seed, "residual_size_over_lambda", o.residualSize / o.lambda});
        rows.push_back({"trees", p, run.seed, "bessel_ratio", o.bessel});
        const bool good = o.partition && o.disjoint && o.conserved && o.residualSize <= o.lambda * (1.0 + 1e-12);
        rows.push_back({"trees", p, run.seed, "pass", good ? 1.0 : 0.0});
        ok = ok && good;
        picks += o.picks;
    }
    std::cout << "tree selection: " << families << " families, " << picks << " trees selected\n";
    emit(run, "trees", rows);
    report(ok, "tree selection postconditions");

    // exceptional set at the shipped constant
    const double C0 = run.cfg.get_double("exceptional", "C0", 10.667);
    const int trials = static_cast<int>(run.cfg.get_int("exceptional", "trials", 100));
    auto rng = trial_rng(run.seed, "exceptional", 0);
    const auto ex = exceptional_trials(rng, trials, static_cast<int>(run.cfg.get_int("exceptional", "m_max", 4)));
    ExceptionalParams prm;
    prm.C0 = C0;
    std::vector<ExperimentRecord> erows;
    bool eok = true;
    double worstF = 0.0, worstMajor = 1.0;
    for (std::size_t t = 0; t < ex.size(); ++t) {
        const ExceptionalSet F = exceptional_set(ex[t].E1, ex[t].E2, ex[t].shifts, prm);
        const double major = major_subset(ex[t].E3, F).measure() / ex[t].E3.measure();
        const Params p{{"trial", std::to_string(t)}, {"m", std::to_string(ex[t].shifts.m())}};
        erows.push_back({"exceptional", p, run.seed, "F_measure", F.measure});
        erows.push_back({"exceptional", p, run.seed, "major_fraction", major});
        eok = eok && F.measure < 1.0 / 12.0 && 2.0 * major >= 1.0;
        worstF = std::max(worstF, F.measure);
        worstMajor = std::min(worstMajor, major);
    }
    erows.push_back({"exceptional", {}, run.seed, "pass", eok ? 1.0 : 0.0});
    std::cout << "exceptional set: C0 = " << num(C0) << ", " << trials << " trials, max |F| " << num(worstF)
              << " (< 1/12), min |E3~|/|E3| " << num(worstMajor) << "\n";
    emit(run, "exceptional", erows);
    report(eok, "exceptional set");

    RestrictedWeakTypeSpec rs;
    rs.C0 = C0;
    rs.mMax = static_cast<int>(run.cfg.get_int("restricted_weak_type", "m_max", 4));
    rs.trials = static_cast<int>(run.cfg.get_int("restricted_weak_type", "trials", 20));
    rs.tiles = static_cast<std::size_t>(run.cfg.get_int("restricted_weak_type", "tiles", 80));
    const auto rw = restricted_weak_type_experiment(rs, run.seed);
    bool rok = false;
    for (const auto& r : rw)
        if (r.metric == "pass") rok = r.value == 1.0;
    emit(run, "restricted_weak_type", rw);
    report(rok, "restricted weak type: major subset and finite ratios");
    return ok && eok && rok;
}

// ---- ergodic ----

bool cmd_ergodic(const Run& run) {
    std::vector<ExperimentRecord> rows;
    const std::string exp = "ergodic";

    const double theta = run.cfg.get_double("ergodic", "theta", 0.1234);
    const std::size_t pts = 64;
    const auto rot = DynSystem::rotation(theta, pts);
    std::vector<std::size_t> ns;
    for (std::size_t n = 1; n <= 64; ++n) ns.push_back(n);
    const auto rowsG = double_recurrence(
        rot, [](double x) { return std::polar(1.0, 2 * kPi * x); }, [](double x) { return std::polar(1.0, -2 * kPi * x); },
        ns);
    const cplx z = std::polar(1.0, 4 * kPi * theta);
    double geo = 0.0;
    for (std::size_t k = 0; k < ns.size(); ++k) {
        const double n = static_cast<double>(ns[k]);
        const cplx closed = (1.0 - std::pow(z, n)) / (n * (1.0 - z));
        for (const auto& v : rowsG[k]) geo = std::max(geo, std::abs(v - closed));
    }
    const bool geoOk = geo <= 1e-10;
    rows.push_back({exp, {{"theta", num(theta)}}, run.seed, "geometric_series_error", geo});
    report(geoOk, "conjugate pair matches the geometric series (error " + num(geo) + ")");

    const std::size_t N = run.gridSize.value_or(static_cast<std::size_t>(run.cfg.get_int("ergodic", "N", 4096)));
    const auto cyc = DynSystem::cyclic(N);
    const auto quarter = [](double x) {
        static const cplx v[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
        return v[static_cast<std::size_t>(x) % 4];
    };
    double expPair = 0.0;
    for (int scales = 1; scales <= 12; ++scales)
        expPair = std::max(expPair, long_variation_value(cyc, quarter, quarter, 2.0, 2.0, scales));
    const bool expOk = expPair == 0.0;
    rows.push_back({exp, {{"N", std::to_string(N)}}, run.seed, "exponential_pair_variation", expPair});
    report(expOk, "exponential pair has zero variation");

    // mean conservation against the rearranged sum
    auto rng = trial_rng(run.seed, exp, 1u << 20);
    std::normal_distribution<double> g;
    const std::size_t M = 256;
    std::vector<cplx> a(M), b(M);
    for (auto& v : a) v = {g(rng), g(rng)};
    for (auto& v : b) v = {g(rng), g(rng)};
    const auto rec = double_recurrence(DynSystem::cyclic(M), a, b, 32);
    double meanErr = 0.0;
    for (std::size_t n = 1; n <= 32; ++n) {
        cplx mean{}, want{};
        for (const auto& v : rec[n - 1]) mean += v;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t y = 0; y < M; ++y) want += a[(y + 2 * i) % M] * b[y];
        meanErr = std::max(meanErr, std::abs(mean / static_cast<double>(M) - want / static_cast<double>(n * M)));
    }
    const bool meanOk = meanErr <= 1e-12;
    rows.push_back({exp, {}, run.seed, "mean_conservation_error", meanErr});
    report(meanOk, "means are conserved");

    LongVariationSpec ls;
    ls.N = N;
    ls.trials = static_cast<int>(run.cfg.get_int("ergodic", "trials", 8));
    ls.p = run.cfg.get_double("ergodic", "p", 2.0);
    ls.fewScales = static_cast<int>(run.cfg.get_int("ergodic", "few_scales", 6));
    ls.manyScales = static_cast<int>(run.cfg.get_int("ergodic", "many_scales", 12));
    ls.growthThreshold = run.cfg.get_double("ergodic", "growth_threshold", 1.2);
    ls.boundThreshold = run.cfg.get_double("ergodic", "bound_threshold", 1.1);
    const auto lv = long_variation_experiment(ls, run.seed);
    bool lvOk = true;
    for (const auto& r : lv) {
        if (r.metric == "ratio")
            std::cout << "random signs, r = " << r.params.at("r") << ": median V^r ratio (" << ls.manyScales << " vs "
                      << ls.fewScales << " scales) " << num(r.value) << "\n";
        if (r.metric == "pass") {
            lvOk = lvOk && r.value == 1.0;
            const bool growth = std::stod(r.params.at("r")) <= 2.0;
            report(r.value == 1.0, growth ? "r = " + r.params.at("r") + " ratio exceeds " + num(ls.growthThreshold)
                                          : "r = " + r.params.at("r") + " ratio at most " + num(ls.boundThreshold));
        }
    }
    emit(run, "long_variation", lv);

    ShortVariationSpec ss;
    ss.r = run.cfg.get_double("ergodic", "short_r", 2.5);
    ss.p = run.cfg.get_double("ergodic", "short_p", 2.0);
    ss.samplesPerOctave = static_cast<int>(run.cfg.get_int("ergodic", "samples_per_octave", 16));
    const GridSignal one = GridSignal::from_function(5, -16.0, 1024, [](double) { return cplx(1.0); });
    const GridSignal f = GridSignal::from_function(
        5, -16.0, 1024, [](double x) { return std::polar(1.0, 2 * kPi * x / 8.0) + 0.5 * std::cos(2 * kPi * x / 4.0); });
    const auto sv = short_variation_experiment(f, one, ss, run.seed);
    bool svOk = true;
    for (const auto& r : sv)
        if (r.metric == "refinement_change") {
            svOk = r.value <= 0.05;
            report(svOk, "short variation changes " + num(r.value) + " under t refinement");
        }
    emit(run, "short_variation", sv);

    const bool ok = geoOk && expOk && meanOk && lvOk && svOk;
    rows.push_back({exp, {}, run.seed, "pass", ok ? 1.0 : 0.0});
    emit(run, exp, rows);
    return ok;
}

// ---- growth ----

bool cmd_growth(const Run& run) {
    ShiftGrowthSpec s;
    s.mMin = static_cast<int>(run.cfg.get_int("growth", "m_min", 0));
    s.mMax = static_cast<int>(run.cfg.get_int("growth", "m_max", 8));
    s.trials = static_cast<int>(run.cfg.get_int("growth", "trials", 12));
    s.p1 = run.cfg.get_double("growth", "p1", 3.0);
    s.p2 = run.cfg.get_double("growth", "p2", 3.0);
    s.modes = static_cast<std::size_t>(run.cfg.get_int("growth", "modes", 256));
    s.rateThreshold = run.cfg.get_double("growth", "rate_threshold", 0.1);
    s.stabilityThreshold = run.cfg.get_double("growth", "stability_threshold", 0.1);
    const auto sg = shift_growth_experiment(s, run.seed);
    bool ok = true;
    for (const auto& r : sg) {
        if (r.metric == "rate" || r.metric == "stability")
            std::cout << "shift growth " << r.metric << ": " << num(r.value) << "\n";
        if (r.metric == "pass") ok = ok && r.value == 1.0;
    }
    emit(run, "shift_growth", sg);
    report(ok, "shift growth is subexponential and stable");

    BesselGrowthSpec b;
    b.mMin = s.mMin;
    b.mMax = s.mMax;
    b.trials = static_cast<int>(run.cfg.get_int("growth", "bessel_trials", 16));
    b.tiles = static_cast<std::size_t>(run.cfg.get_int("growth", "bessel_tiles", 120));
    b.rateThreshold = s.rateThreshold;
    const auto bg = bessel_growth_experiment(b, run.seed);
    bool bok = true;
    for (const auto& r : bg) {
        if (r.metric == "rate") std::cout << "bessel growth rate: " << num(r.value) << "\n";
        if (r.metric == "pass") bok = r.value == 1.0;
    }
    emit(run, "bessel_growth", bg);
    report(bok, "bessel ratio growth is subexponential");
    return ok && bok;
}

// ---- variation-oracle ----

double brute_variation(const std::vector<double>& a, double r) {
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

bool cmd_variation_oracle(const Run& run, int maxLen) {
    if (maxLen < 1 || maxLen > 12) throw CLI::ValidationError("--max-len", "must lie in 1..12");
    long long cases = 0, mismatches = 0;
    double worst = 0.0;
    for (double r : {1.0, 1.5, 2.0, 3.0})
        for (int len = 1; len <= maxLen; ++len) {
            unsigned total = 1;
            for (int k = 0; k < len; ++k) total *= 3;
            for (unsigned code = 0; code < total; ++code) {
                std::vector<double> v(static_cast<std::size_t>(len));
                unsigned c = code;
                for (auto& x : v) {
                    x = static_cast<double>(c % 3);
                    c /= 3;
                }
                const double dp = variation_norm(SampledPath::from_values(v), r).value;
                const double err = std::abs(dp - brute_variation(v, r));
                worst = std::max(worst, err);
                mismatches += err > 1e-12;
                ++cases;
            }
        }
    std::cout << "dynamic program vs exhaustive search: " << cases << " cases up to length " << maxLen << ", "
              << mismatches << " mismatches, worst difference " << num(worst) << "\n";

    const int paths = static_cast<int>(run.cfg.get_int("variation-oracle", "paths", 1000));
    const std::size_t len = static_cast<std::size_t>(run.cfg.get_int("variation-oracle", "path_length", 40));
    long long checks = 0, violations = 0;
    for (int t = 0; t < paths; ++t) {
        auto rng = trial_rng(run.seed, "variation-oracle", static_cast<std::uint64_t>(t));
        std::normal_distribution<double> g;
        std::vector<cplx> v(len);
        for (auto& z : v) z = {g(rng), t % 3 == 0 ? g(rng) : 0.0};
        const SampledPath p = SampledPath::from_values(v);
        for (double r : {1.0, 2.0, 2.5}) {
            const double V = variation_norm(p, r).value;
            for (double lambda = 0.05; lambda < 4.0; lambda *= 1.5) {
                ++checks;
                const double N = static_cast<double>(jumps(p, lambda).count);
                violations += std::pow(lambda, r) * N > std::pow(V, r) * (1.0 + 1e-12);
            }
        }
    }
    std::cout << "jump inequality: " << paths << " paths, " << checks << " checks, " << violations << " violations\n";
    const bool ok = mismatches == 0 && violations == 0;
    const Params p{{"max_len", std::to_string(maxLen)}};
    emit(run, "variation_oracle",
         {{"variation_oracle", p, run.seed, "cases", static_cast<double>(cases)},
          {"variation_oracle", p, run.seed, "mismatches", static_cast<double>(mismatches)},
          {"variation_oracle", p, run.seed, "worst_difference", worst},
          {"variation_oracle", p, run.seed, "jump_checks", static_cast<double>(checks)},
          {"variation_oracle", p, run.seed, "jump_violations", static_cast<double>(violations)},
          {"variation_oracle", p, run.seed, "pass", ok ? 1.0 : 0.0}});
    report(ok, "variation oracle");
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tfa-lab: time-frequency experiments and verifications"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string configPath = "config/default.conf";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> gridSize;
    std::string out = "tfa-out";
    app.add_option("--config", configPath, "configuration file")->capture_default_str();
    app.add_option("--seed", seed, "base seed (default from [general] seed)");
    app.add_option("--grid-size", gridSize, "grid size override for the frame and ergodic grids");
    app.add_option("--out", out, "directory for CSV and certificate output")->capture_default_str();

    auto* lac = app.add_subcommand("verify-lacunarity", "exact lacunarity sweep and window identities");
    auto* frames = app.add_subcommand("verify-frames", "partition of unity and frame resynthesis");
    auto* dec = app.add_subcommand("decompose", "build and certify a decomposition");
    std::string kind;
    dec->add_option("kind", kind, "indicator, dini or hormander")
        ->required()
        ->check(CLI::IsMember({"indicator", "dini", "hormander"}));
    auto* ver = app.add_subcommand("verify", "recompute the residuals of a certificate file");
    std::string certFile;
    ver->add_option("certificate", certFile, "certificate written by decompose")->required();
    auto* trees = app.add_subcommand("trees", "tree selection, exceptional set and restricted weak type");
    auto* erg = app.add_subcommand("ergodic", "double recurrence closed forms and variation experiments");
    auto* growth = app.add_subcommand("growth", "shift and bessel growth curves in m");
    auto* vo = app.add_subcommand("variation-oracle", "dynamic program against exhaustive search");
    int maxLen = 8;
    vo->add_option("--max-len", maxLen, "longest sequence checked")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        if (code != 0) std::cerr << app.help();
        return code;
    }

    Run run;
    try {
        if (!fs::exists(configPath)) {
            std::cerr << "tfa-lab: config file not found: " << configPath << "\n";
            return 2;
        }
        run.cfg = Config::load(configPath);
        run.seed = seed ? *seed : static_cast<std::uint64_t>(run.cfg.get_int("general", "seed", 1));
        if (gridSize) {
            if (*gridSize < 2 || (*gridSize & (*gridSize - 1)) != 0) {
                std::cerr << "tfa-lab: --grid-size must be a power of two\n";
                return 2;
            }
            run.gridSize = gridSize;
        }
        run.out = out;
    } catch (const ConfigError& e) {
        std::cerr << "tfa-lab: " << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        bool ok = false;
        if (*lac) ok = cmd_lacunarity(run);
        else if (*frames) ok = cmd_frames(run);
        else if (*dec) ok = cmd_decompose(run, kind);
        else if (*ver) ok = cmd_verify(run, certFile);
        else if (*trees) ok = cmd_trees(run);
        else if (*erg) ok = cmd_ergodic(run);
        else if (*growth) ok = cmd_growth(run);
        else if (*vo) ok = cmd_variation_oracle(run, maxLen);
        return ok ? 0 : 1;
    } catch (const ConfigError& e) {
        std::cerr << "tfa-lab: " << e.what() << "\n" << app.help();
        return 2;
    } catch (const CLI::Error& e) {
        std::cerr << "tfa-lab: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "tfa-lab: " << e.what() << "\n";
        return 1;
    }
}
