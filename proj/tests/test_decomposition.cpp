#include "tfa/decomposition.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

using namespace tfa;

namespace {

constexpr double kPi = std::numbers::pi;

template <class F>
double simpson(F f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

const ZetaWindow& zeta() {
    static const ZetaWindow z = build_zeta();
    return z;
}

const DecompositionCertificate& indicator12() {
    static const DecompositionCertificate c = indicator_decomposition(12);
    return c;
}

std::vector<double> quadratic_weights(int aMax) {
    std::vector<double> w(static_cast<std::size_t>(aMax) + 1);
    double s = 0.0;
    for (int a = 0; a <= aMax; ++a) s += w[static_cast<std::size_t>(a)] = 1.0 / ((1.0 + a) * (1.0 + a));
    for (auto& x : w) x /= s;
    return w;
}

}  // namespace

TEST_SUITE("decomposition") {

TEST_CASE("Littlewood-Paley partition") {
    const LPPartition p = build_lp_partition(20);
    CHECK(std::abs(p.partial_sum(1.0, 20) - 1.0) <= 1e-10);
    CHECK(lp_rho_hat(0.3) == 0.0);
    CHECK(lp_rho_hat(2.5) == 0.0);
    CHECK(lp_rho_hat(-0.49) == 0.0);
    CHECK(p.residual <= 1e-10);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-std::ldexp(1.0, 20), std::ldexp(1.0, 20));
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const double xi = u(rng);
        double s = lp_theta(xi / 2.0);
        for (int j = 1; j <= 20; ++j) s += lp_theta(std::ldexp(xi, -j - 1)) - lp_theta(std::ldexp(xi, -j));
        worst = std::max({worst, std::abs(s - 1.0), std::abs(p.partial_sum(xi, 20) - 1.0)});
    }
    CHECK(worst <= 1e-10);
    CHECK_THROWS_AS(build_lp_partition(0), std::invalid_argument);
}

TEST_CASE("indicator decomposition terms") {
    const auto& c = indicator12();
    REQUIRE(c.terms.size() == 25);
    CHECK(certify_bumps(c).size() == c.bumps.size());
    for (int j = 1; j <= 12; ++j) {
        const auto& t0 = c.terms[static_cast<std::size_t>(2 * j - 1)];
        const auto& t1 = c.terms[static_cast<std::size_t>(2 * j)];
        CHECK(t0.group == j);
        CHECK(t1.shift == std::ldexp(1.0, j));
        // phi_1(y) = -phi_0(y - 2^j), seen through the dilation by 2^-j
        for (double x : {-3.0, -0.2, 0.4, 1.7, 5.0}) CHECK(c.term_value(t1, x) + c.term_value(t0, x - 1.0) == cplx{});
    }
    const GridSignal& prim = c.bumps[1];
    CHECK(std::abs(integral(prim)) * c.terms[1].classConstant <= 1e-10);
}

TEST_CASE("indicator residual halves with each scale") {
    const auto& c = indicator12();
    double prev = indicator_residual_l1(c, 4);
    for (int J = 5; J <= 12; ++J) {
        const double r = indicator_residual_l1(c, J);
        CHECK(r / prev >= 0.4);
        CHECK(r / prev <= 0.6);
        prev = r;
    }
    CHECK(c.residualL1 <= 1e-3);
    CHECK(c.residualL1 == doctest::Approx(indicator_residual_l1(c, 12)).epsilon(1e-12));
    // independent check of the L1 residual by a midpoint sum over [-8, 9]; cell edges fall on the jumps
    const double h = std::ldexp(1.0, -16);
    const int n = 17 << 16;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = -8.0 + (i + 0.5) * h;
        const double one = (x >= 0.0 && x < 1.0) ? 1.0 : 0.0;
        s += std::abs(one - c.evaluate(x)) * h;
    }
    CHECK(s == doctest::Approx(c.residualL1).epsilon(0.02).scale(0.0));
}

TEST_CASE("zeta window") {
    const auto& z = zeta();
    // transform by Simpson's rule on the closed form, then the Calderon integral in log u
    auto hat = [&](double u) { return 2.0 * simpson([&](double x) { return z.value(x) * std::cos(2.0 * kPi * u * x); }, 0.0, 1.0, 4096); };
    const double cal = simpson([&](double v) { const double h = hat(std::exp(v)); return h * h; }, std::log(1e-6), std::log(128.0), 2000);
    CHECK(std::abs(cal - 1.0) <= 1e-8);
    CHECK(std::abs(z.calderon(1.0) - 1.0) <= 1e-8);
    CHECK(std::abs(z.calderon(2.0) - 1.0) <= 1e-8);
    CHECK(std::abs(z.calderon(-0.7) - 1.0) <= 1e-8);
    CHECK(std::abs(simpson([&](double x) { return z.value(x); }, -1.0, 1.0, 8000)) <= 1e-12);
    CHECK(z.value(1.0) == 0.0);
    CHECK(z.value(1.2) == 0.0);
    CHECK(z.value(0.3) == z.value(-0.3));
    for (double u : {0.5, 1.0, 3.0}) CHECK(z.hat(u) == doctest::Approx(hat(u)).epsilon(1e-8));
}

TEST_CASE("Dini decomposition of the calibration kernel") {
    const DiniKernel K = dini_calibration_kernel();
    const DiniDecomposition d = dini_decompose(K, 0, 6, zeta());
    REQUIRE(d.slabs.size() == 6);
    double lo = 1e300, hi = 0.0;
    for (const auto& sl : d.slabs) {
        CHECK(sl.residual <= 1e-5);
        CHECK(sl.maxL <= 10LL << sl.m);
        lo = std::min(lo, sl.coeffRatio);
        hi = std::max(hi, sl.coeffRatio);
    }
    CHECK(hi <= 1.0);
    CHECK(lo > 0.0);
    for (const auto& p : d.pieces) {
        CHECK(std::abs(p.l) <= 10LL << p.m);
        CHECK(p.c > 0.0);
    }
    const auto cert = d.certificate();
    CHECK_NOTHROW(certify_bumps(cert));
    const auto v = verify_certificate(cert);
    CHECK(v.second == doctest::Approx(cert.residualL2).epsilon(1e-3).scale(1e-9));
}

TEST_CASE("Dini decomposition at another scale and a rejected kernel") {
    const DiniDecomposition d = dini_decompose(dini_calibration_kernel(), 2, 2, zeta());
    for (const auto& sl : d.slabs) CHECK(sl.residual <= 1e-5);
    DiniKernel even = dini_calibration_kernel();
    even.K = [](double x) { return 1.0 / (1.0 + x * x); };
    CHECK_THROWS_AS(dini_decompose(even, 0, 2, zeta()), PreconditionError);
}

TEST_CASE("Dini norm") {
    for (double a : {0.5, 1.0, 2.0}) {
        const double n = dini_norm([a](double t) { return std::pow(t, a); });
        CHECK(std::abs(n * std::pow(a, 5) - 24.0) <= 1e-6);
    }
    CHECK(dini_norm([](double) { return 0.0; }) == 0.0);
    const auto eta = ModulusOfContinuity::from_function([](double t) { return std::sqrt(t); });
    CHECK(dini_norm(eta, 1.0) == doctest::Approx(dini_norm(eta)).epsilon(1e-14));
    // p = 3/4 with eta = t: int u^3 e^{-u/2} du = 96, raised to 4/3
    CHECK(dini_norm([](double t) { return t; }, 0.75) == doctest::Approx(std::pow(96.0, 4.0 / 3.0)).epsilon(1e-8));
    CHECK(std::isinf(dini_norm([](double t) { return t; }, 0.5)));
    CHECK(std::isinf(dini_norm([](double t) { return 1.0 / std::log(2.0 / t); })));
}

TEST_CASE("multiplier localization") {
    const auto one = multiplier_localize([](double) { return cplx(1.0); }, 0);
    for (std::size_t k = 0; k < one.ms.size(); ++k) CHECK(one.ms[k] == cplx(lp_rho_hat(8.0 * one.ms.x(k))));
    for (long long l = -20; l <= 20; ++l) {
        const double re = simpson([&](double x) { return lp_rho_hat(8.0 * x) * std::cos(2.0 * kPi * l * x); }, -0.5, 0.5, 1 << 14);
        const double im = -simpson([&](double x) { return lp_rho_hat(8.0 * x) * std::sin(2.0 * kPi * l * x); }, -0.5, 0.5, 1 << 14);
        CHECK(std::abs(one.coeffs.at(l) - cplx(re, im)) <= 1e-10);
    }
    for (std::size_t k = 0; k < one.ms.size(); ++k)
        if (std::abs(one.ms.x(k)) > 0.25) CHECK(one.ms[k] == cplx{});

    const auto loc = multiplier_localize([](double xi) { return cplx(std::exp(-xi * xi) * std::cos(xi)); }, 1);
    double prev = 1e300;
    for (long long L : {4, 16, 64, 256}) {
        const double r = loc.reconstruction_residual(L);
        CHECK(r <= prev);
        prev = r;
    }
    CHECK(prev < 1e-6);

    const auto five = multiplier_localize(
        [](double xi) { return std::polar(1.0, 2.0 * kPi * 5.0 * xi) * std::exp(-40.0 * xi * xi); }, 0);
    long long arg = 0;
    double best = 0.0, total = 0.0, near = 0.0;
    for (const auto& [l, v] : five.coeffs) {
        if (std::abs(v) > best) {
            best = std::abs(v);
            arg = l;
        }
        total += std::norm(v);
        if (std::abs(l - 5) <= 16) near += std::norm(v);
    }
    CHECK(arg == 5);
    CHECK(near / total >= 0.99);
}

TEST_CASE("pigeonhole classes") {
    const auto w = quadratic_weights(12);
    std::map<long long, cplx> zero;
    for (long long l = -64; l <= 64; ++l) zero[l] = 0.0;
    for (int a = 0; a <= 7; ++a)
        for (int j = 0; j <= 6; ++j) CHECK(pigeonhole_classes(zero, a, j, w).empty());
    CHECK(annulus_of(0) == 0);
    CHECK(annulus_of(1) == 1);
    CHECK(annulus_of(-3) == 2);
    CHECK(annulus_of(4) == 3);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::map<long long, cplx> c;
        for (int a = 0; a <= 7; ++a) {
            std::vector<long long> ls;
            if (a == 0) ls = {0};
            else
                for (long long l = 1LL << (a - 1); l < (1LL << a); ++l) {
                    ls.push_back(l);
                    ls.push_back(-l);
                }
            std::vector<double> mags(ls.size());
            double s = 0.0;
            for (auto& m : mags) s += m = std::pow(u(rng), 4.0);
            const double budget = pigeonhole_weight(w, a) / (1.0 + std::pow(a, 5)) * u(rng);
            for (std::size_t i = 0; i < ls.size(); ++i) c[ls[i]] = std::polar(mags[i] / s * budget, 6.0 * u(rng));
        }
        for (int a = 0; a <= 7; ++a) {
            std::set<long long> seen;
            std::size_t nonzero = 0;
            for (const auto& [l, v] : c)
                if (annulus_of(l) == a && std::abs(v) > std::ldexp(pigeonhole_weight(w, a) / (1.0 + std::pow(a, 5)), -60))
                    ++nonzero;
            for (int j = 0; j <= 60; ++j) {
                const auto L = pigeonhole_classes(c, a, j, w);
                CHECK(static_cast<double>(L.size()) <= std::min(std::ldexp(1.0, j + 1), std::ldexp(1.0, a)));
                for (auto l : L) CHECK(seen.insert(l).second);
            }
            CHECK(seen.size() == nonzero);
        }
    }
    std::map<long long, cplx> heavy;
    const double cls = pigeonhole_weight(w, 3) / (1.0 + 243.0);
    for (long long l = 4; l < 8; ++l) heavy[l] = 0.75 * cls;
    CHECK_THROWS_AS(pigeonhole_classes(heavy, 3, 0, w), FalsificationError);
}

TEST_CASE("multiplier norms") {
    const ComplexFn zero = [](double) { return cplx{}; };
    const auto w = quadratic_weights(10);
    CHECK(hsigma_norm(zero, 0.6) == 0.0);
    CHECK(yw_norm(zero, w) == 0.0);
    CHECK(yw_norm(zero, w, 0.5) == 0.0);

    std::vector<double> wd(6);
    for (std::size_t a = 0; a < wd.size(); ++a) wd[a] = std::ldexp(1.0, -static_cast<int>(a) - 1);
    const GridSignal box = GridSignal::from_function(6, -8.0, 1024, [](double x) { return cplx(std::abs(x) < 1.0 ? 1.0 : 0.0); });
    double mass = 0.0;
    for (std::size_t i = 0; i < box.size(); ++i) mass += box[i].real() * box.step();
    CHECK(yw_value(box, wd) == doctest::Approx(2.0 * mass).epsilon(1e-14));
    CHECK(std::abs(yw_value(box, wd) - 4.0) <= 4.0 * box.step());

    const double C = yw_hsigma_constant(w, 0.6, 10);
    for (double width : {0.5, 1.0, 2.0}) {
        const ComplexFn m = [width](double xi) { return cplx(smooth_bump(xi, -width, width)); };
        const double hs = hsigma_norm(m, 0.6), yw = yw_norm(m, w);
        CHECK(hs > 0.0);
        CHECK(yw <= 1.01 * C * hs);
    }
}

TEST_CASE("Hormander decomposition and certificate round trip") {
    const ComplexFn m = [](double xi) { return cplx(std::exp(-xi * xi) * std::cos(xi)); };
    const auto c = hormander_decomposition(m, -1, 1);
    CHECK(c.residualL2 <= 1e-8);
    CHECK(c.residualL1 <= 1e-8);
    CHECK_NOTHROW(certify_bumps(c));
    for (const auto& t : c.terms) CHECK(t.shift == -static_cast<double>(t.index));

    for (const DecompositionCertificate* cert : {&c, &indicator12()}) {
        std::stringstream ss;
        write_certificate(ss, *cert);
        const auto back = read_certificate(ss);
        CHECK(back.kind == cert->kind);
        REQUIRE(back.terms.size() == cert->terms.size());
        REQUIRE(back.bumps.size() == cert->bumps.size());
        CHECK(back.bumps.back().samples == cert->bumps.back().samples);
        CHECK(back.terms.back().coefficient == cert->terms.back().coefficient);
        const auto v = verify_certificate(back);
        CHECK(v.first == doctest::Approx(cert->residualL1).epsilon(1e-10).scale(1e-15));
        CHECK(v.second == doctest::Approx(cert->residualL2).epsilon(1e-10).scale(1e-15));
    }
    std::stringstream bad("{\"kind\":\"spiral\"}\n");
    CHECK_THROWS(read_certificate(bad));
}

}
