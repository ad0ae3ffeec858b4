#include <doctest.h>

#include "tfa/signal.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace tfa;

namespace {

constexpr double kPi = std::numbers::pi;

double gauss(double x) { return std::exp(-kPi * x * x); }

double rel_l2(const GridSignal& a, const GridSignal& b) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += std::norm(a[i] - b[i]);
        den += std::norm(b[i]);
    }
    return std::sqrt(num / den);
}

double max_err(const GridSignal& a, const ComplexFn& f) {
    double e = 0;
    for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, std::abs(a[i] - f(a.x(i))));
    return e;
}

GridSignal wave_packet_signal(int q, double x0, std::size_t n, double xi, double center, double width) {
    return GridSignal::from_function(q, x0, n, [=](double x) {
        double u = (x - center) / width;
        return std::exp(-kPi * u * u) * std::polar(1.0, 2 * kPi * xi * x);
    });
}

}  // namespace

TEST_SUITE("signal") {
TEST_CASE("gaussian is self dual") {
    auto g = GridSignal::from_function(7, -16.0, 4096, [](double x) { return cplx(gauss(x)); });
    auto gh = fourier(g);
    CHECK(max_err(gh, [](double xi) { return cplx(gauss(xi)); }) < 1e-10);
    // Off-centre origin exercises the phase factor.
    auto h = GridSignal::from_function(7, -13.0, 4096, [](double x) { return cplx(gauss(x - 1.5)); });
    auto hh = fourier(h);
    CHECK(max_err(hh, [](double xi) { return gauss(xi) * std::polar(1.0, -2 * kPi * 1.5 * xi); }) < 1e-10);
}

TEST_CASE("spike has flat spectrum and round trip is exact") {
    GridSignal d(6, -32.0, 4096);
    d[1234] = 1.0;
    auto dh = fourier(d);
    for (std::size_t k = 0; k < dh.size(); ++k) CHECK(std::abs(std::abs(dh[k]) - d.step()) < 1e-15);
    auto f = wave_packet_signal(6, -32.0, 4096, 2.5, 3.0, 4.0);
    auto back = inverse_fourier(fourier(f), f.q, f.x0);
    CHECK(rel_l2(back, f) < 1e-12);
}

TEST_CASE("parseval") {
    auto f = wave_packet_signal(6, -32.0, 4096, 1.0, -2.0, 3.0);
    auto g = wave_packet_signal(6, -32.0, 4096, 1.3, 1.0, 2.0);
    cplx a = inner(f, g);
    cplx b = inner_frequency(fourier(f), fourier(g));
    CHECK(std::abs(a - b) < 1e-10 * std::abs(a));
}

TEST_CASE("bilinear average examples") {
    auto one = GridSignal::from_function(6, -32.0, 4096, [](double) { return cplx(1.0); });
    auto phi = [](double y) { return cplx(gauss(y)); };
    CHECK(std::abs(bilinear_average(phi, 2.0, one, one, 1.0, 0.0, Boundary::Periodic) - 1.0) < 1e-12);
    CHECK(std::abs(bilinear_average(phi, 2.0, one, one, 2.5, 1.0, Boundary::Periodic) - 1.0) < 1e-12);

    auto ind = GridSignal::from_function(6, -32.0, 4096, [](double x) { return cplx(x >= 0 && x <= 1 ? 1.0 : 0.0); });
    auto indPhi = [](double y) { return cplx(y >= 0 && y <= 1 ? 1.0 : 0.0); };
    cplx v = bilinear_average(indPhi, 1.0, ind, ind, 1.0, 0.5);
    CHECK(std::abs(v - 0.5) <= ind.step() + 1e-12);

    // f1 = e^{2 pi i xi x}, f2 = 1: B = e^{2 pi i xi x} phihat(t xi).
    auto e1 = GridSignal::from_function(6, -32.0, 4096, [](double x) { return std::polar(1.0, 2 * kPi * x); });
    for (double x : {0.0, 0.25, -3.0}) {
        cplx got = bilinear_average(phi, 2.0, e1, one, 1.0, x, Boundary::Periodic);
        cplx want = std::polar(1.0, 2 * kPi * x) * gauss(1.0);
        CHECK(std::abs(got - want) < 1e-12);
    }
    CHECK_THROWS_AS(bilinear_average(phi, 2.0, one, one, 1.0 / 64.0, 0.0), ResolutionError);
    CHECK_THROWS_AS(bilinear_average(phi, 2.0, one, one, 1.0, 0.001), std::invalid_argument);
}

TEST_CASE("quadrature and frequency evaluations agree") {
    auto f1 = wave_packet_signal(6, -32.0, 4096, 0.5, 0.0, 3.0);
    auto f2 = wave_packet_signal(6, -32.0, 4096, 0.25, 1.0, 4.0);
    auto phi = [](double y) { return cplx(gauss(y)); };
    auto phiHat = [](double xi) { return cplx(gauss(xi)); };
    for (double t : {0.5, 1.0, 2.0}) {
        auto q = bilinear_average_grid(phi, 2.0, f1, f2, t, Boundary::Periodic);
        auto fr = bilinear_average_frequency_grid(phiHat, f1, f2, t);
        CHECK(rel_l2(q, fr) < 1e-6);
        for (double x : {-1.0, 0.5, 2.0}) {
            cplx a = bilinear_average(phi, 2.0, f1, f2, t, x, Boundary::Periodic);
            cplx b = bilinear_average_frequency(phiHat, f1, f2, t, x);
            CHECK(std::abs(a - b) < 1e-6 * std::max(1e-3, std::abs(a)));
        }
    }
}

TEST_CASE("scaling covariance") {
    auto phi = [](double y) { return cplx(gauss(y)); };
    auto f1 = [](double x) { return std::exp(-kPi * x * x / 9.0) * std::polar(1.0, 2 * kPi * 0.5 * x); };
    auto f2 = [](double x) { return cplx(std::exp(-kPi * (x - 1) * (x - 1) / 16.0)); };
    const double t = 2.0;
    auto g1 = GridSignal::from_function(6, -32.0, 4096, f1);
    auto g2 = GridSignal::from_function(6, -32.0, 4096, f2);
    auto h1 = GridSignal::from_function(6, -32.0, 4096, [&](double x) { return f1(t * x); });
    auto h2 = GridSignal::from_function(6, -32.0, 4096, [&](double x) { return f2(t * x); });
    for (double x : {1.0, -2.0}) {
        cplx a = bilinear_average(phi, 2.0, g1, g2, t, x);
        cplx b = bilinear_average(phi, 2.0, h1, h2, 1.0, x / t);
        CHECK(std::abs(a - b) < 1e-9);
    }
}

TEST_CASE("grid phi overload") {
    auto phiG = GridSignal::from_function(6, -32.0, 4096, [](double y) { return cplx(gauss(y)); });
    auto f1 = wave_packet_signal(6, -32.0, 4096, 0.5, 0.0, 3.0);
    auto f2 = wave_packet_signal(6, -32.0, 4096, 0.25, 0.0, 5.0);
    cplx a = bilinear_average(phiG, f1, f2, 1.0, 0.5);
    cplx b = bilinear_average([](double y) { return cplx(gauss(y)); }, 2.0, f1, f2, 1.0, 0.5);
    CHECK(std::abs(a - b) < 1e-12);
    cplx c = bilinear_average(phiG, f1, f2, 1.5, 0.5);
    cplx d = bilinear_average([](double y) { return cplx(gauss(y)); }, 2.0, f1, f2, 1.5, 0.5);
    CHECK(std::abs(c - d) < 1e-4);
}

TEST_CASE("dilate translate modulate") {
    auto g = GridSignal::from_function(6, -32.0, 4096, [](double x) { return cplx(gauss(x)); });
    CHECK(rel_l2(dilate(g, 1.0), g) == 0.0);
    auto d2 = dilate(g, 2.0);
    CHECK(std::abs(integral(d2) - integral(g)) < 1e-10);
    CHECK(max_err(d2, [](double x) { return cplx(0.5 * gauss(x / 2)); }) < 1e-10);
    CHECK(d2.warnings.empty());
    auto tr = translate(translate(g, 0.37), -0.37);
    CHECK(rel_l2(tr, g) < 1e-12);
    auto t1 = translate(g, 1.3);
    CHECK(max_err(t1, [](double x) { return cplx(gauss(x - 1.3)); }) < 1e-10);
    auto m = modulate(g, 2.0);
    CHECK(std::abs(m.at(0.25) + gauss(0.25)) < 1e-12);
    auto wide = GridSignal::from_function(6, -32.0, 4096, [](double x) { return cplx(std::exp(-kPi * x * x / 100)); });
    CHECK(!dilate(wide, 4.0).warnings.empty());
    CHECK(!translate(wide, 20.0).warnings.empty());
}

TEST_CASE("class check") {
    // Analytic oracle for g(x) = x e^{-pi x^2}: sup |x|^m |g^(n)| on a fine mesh.
    auto gder = [](int n, double x) {
        double e = gauss(x);
        double p = kPi;
        switch (n) {
            case 0: return x * e;
            case 1: return (1 - 2 * p * x * x) * e;
            default: return (-6 * p * x + 4 * p * p * x * x * x) * e;
        }
    };
    double sup = 0;
    for (int n = 0; n <= 2; ++n)
        for (int m = 0; m <= 2; ++m)
            for (double x = -8; x <= 8; x += 1e-4) sup = std::max(sup, std::pow(std::abs(x), m) * std::abs(gder(n, x)));
    auto g = GridSignal::from_function(9, -16.0, 16384, [&](double x) { return cplx(gder(0, x) / sup); });
    BumpClassSpec spec{BumpClass::S0, 0.0, 2, 2, 1e-8, 1e-8};
    auto r = class_check(g, spec);
    CHECK(r.pass);
    CHECK(r.worstRatio <= 1.0 + 1e-12);
    CHECK(r.worstRatio > 0.999);

    auto ind = GridSignal::from_function(9, -16.0, 16384, [](double x) { return cplx(x >= 0 && x <= 1 ? 1.0 : 0.0); });
    CHECK(!class_check(ind, spec).pass);

    auto gs = GridSignal::from_function(9, -16.0, 16384, [&](double x) { return cplx(gder(0, x - 3.0) / sup); });
    BumpClassSpec sh{BumpClass::S0tau, 3.0, 2, 2, 1e-8, 1e-8};
    auto rs = class_check(gs, sh);
    CHECK(rs.pass);
    CHECK(std::abs(rs.worstRatio - r.worstRatio) < 1e-12);
    CHECK(std::abs(rs.witness - 3.0 - r.witness) < 1e-12);
}

TEST_CASE("eta kernel check") {
    // K(x) = x / (1 + x^2) / 2 has |K(x)| |x| <= 1/2 and smoothness constant below 2 t.
    auto K = GridSignal::from_function(5, -32.0, 2048, [](double x) { return cplx(0.5 * x / (1 + x * x)); });
    auto eta = ModulusOfContinuity::from_function([](double t) { return 2.0 * t; });
    auto r = eta_kernel_check(K, eta);
    CHECK(r.pass);
    auto even = GridSignal::from_function(5, -32.0, 2048, [](double x) { return cplx(0.5 / (1 + x * x)); });
    auto re = eta_kernel_check(even, eta);
    CHECK(!re.pass);
    CHECK(re.reason == "kernel not odd");
    ModulusOfContinuity bad = eta;
    bad.fn = nullptr;
    bad.eta[10] = bad.eta[9] * 0.5;
    auto rb = eta_kernel_check(K, bad);
    CHECK(!rb.etaMonotone);
    CHECK(!rb.pass);
}

TEST_CASE("shifted maximal function") {
    auto one = GridSignal::from_function(6, -32.0, 4096, [](double) { return cplx(1.0); });
    auto sh = ShiftSequence::constant(2, -3, 4);
    CHECK(std::abs(shifted_maximal(one, sh, 1.0, 0.0, -3, 4) - 1.0) < 1e-10);
    CHECK(std::abs(shifted_maximal(one, sh, 2.0, 5.0, -3, 4) - 1.0) < 1e-10);

    auto ind = GridSignal::from_function(9, -32.0, 32768, [](double x) { return cplx(x >= 0 && x < 1 ? 1.0 : 0.0); });
    ShiftSequence zero;
    double prev = 0;
    for (int sMin : {-2, -4, -6}) {
        double v = shifted_maximal(ind, zero, 1.0, 0.5, sMin, 2);
        CHECK(v >= prev);
        prev = v;
    }
    // Limit of mollified averages at a Lebesgue point: (2/pi) atan(2^{-s-1}) at the finest scale.
    CHECK(std::abs(prev - 2.0 / kPi * std::atan(std::ldexp(1.0, 5))) < 1e-5);
    CHECK_THROWS_AS(shifted_maximal(ind, zero, 1.0, 0.5, -7, 2), ResolutionError);

    // Grid version agrees with the pointwise version.
    std::vector<double> absF(one.size());
    auto bump = GridSignal::from_function(6, -32.0, 4096, [](double x) { return cplx(gauss(x)); });
    for (std::size_t i = 0; i < bump.size(); ++i) absF[i] = std::abs(bump[i]);
    auto grid = shifted_maximal_grid(absF, 6, -3, 3, &sh, 1.0);
    for (std::size_t i : {100u, 2048u, 3000u}) CHECK(std::abs(grid[i] - shifted_maximal(bump, sh, 1.0, bump.x(i), -3, 3)) < 1e-12);
}

TEST_CASE("weak type diagnostic grows at most linearly in m") {
    const int q = 4;
    const std::size_t n = 16384;
    std::vector<double> delta(n, 0.0);
    delta[n / 2] = std::ldexp(1.0, q);  // unit mass
    const double lambda = 0.05;
    std::vector<double> vals;
    for (int m = 1; m <= 6; ++m) {
        auto sh = ShiftSequence::constant(m, 0, 3);
        auto M = shifted_maximal_grid(delta, q, 0, 3, &sh, 1.0);
        double count = 0;
        for (double v : M) count += v > lambda;
        vals.push_back(lambda * count * std::ldexp(1.0, -q));
    }
    for (int m = 1; m <= 6; ++m) CHECK(vals[m - 1] <= 2.0 * m * vals[0]);
}

TEST_CASE("serialization") {
    auto f = wave_packet_signal(6, -32.0, 4096, 1.0, 0.0, 2.0);
    std::stringstream bin;
    write_signal_binary(bin, f);
    auto g = read_signal_binary(bin);
    CHECK(g.same_grid(f));
    CHECK(g.samples == f.samples);
    auto small = wave_packet_signal(3, -1.0, 16, 1.0, 0.0, 1.0);
    std::stringstream csv;
    write_signal_csv(csv, small);
    auto h = read_signal_csv(csv);
    CHECK(h.same_grid(small));
    CHECK(rel_l2(h, small) < 1e-15);
    std::stringstream junk("nope\n");
    CHECK_THROWS(read_signal_csv(junk));
}

TEST_CASE("profiles") {
    CHECK(smooth_step(0.0) == 0.0);
    CHECK(smooth_step(1.0) == 1.0);
    CHECK(std::abs(smooth_step(0.5) - 0.5) < 1e-15);
    CHECK(smooth_bump(0.1, 0.1, 0.9) == 0.0);
    CHECK(smooth_bump(0.5, 0.1, 0.9) == 1.0);
    CHECK(plateau(0.4, 0.5, 1.0) == 1.0);
    CHECK(plateau(1.0, 0.5, 1.0) == 0.0);
}
}
