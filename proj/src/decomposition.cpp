#include "tfa/decomposition.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <set>
#include <stdexcept>

namespace tfa {

namespace {

constexpr double kPi = std::numbers::pi;
using GL = boost::math::quadrature::gauss<double, 20>;

int log2_exact(std::size_t n) { return std::countr_zero(n); }

}  // namespace

double lp_theta(double xi) { return plateau(xi, 0.5, 1.0); }
double lp_rho_hat(double xi) { return lp_theta(0.5 * xi) - lp_theta(xi); }
double lp_chi_hat(double xi) { return lp_theta(0.5 * xi); }

double LPPartition::partial_sum(double xi, int J) const {
    double s = lp_chi_hat(xi);
    for (int j = 1; j <= J; ++j) s += lp_rho_hat(std::ldexp(xi, -j));
    return s;
}

LPPartition build_lp_partition(int jMax) {
    if (jMax < 1) throw std::invalid_argument("build_lp_partition: jMax < 1");
    LPPartition p;
    p.jMax = jMax;
    p.chiHat = GridSignal::from_function(8, -4.0, 2048, [](double x) { return cplx(lp_chi_hat(x)); });
    p.rhoHat = GridSignal::from_function(8, -4.0, 2048, [](double x) { return cplx(lp_rho_hat(x)); });
    const double band = std::ldexp(1.0, jMax);
    auto probe = [&](double xi) { p.residual = std::max(p.residual, std::abs(p.partial_sum(xi, jMax) - 1.0)); };
    for (int k = 0; k <= 4000; ++k) probe(-band + 2.0 * band * k / 4000.0);
    for (double e = -30.0; e <= jMax; e += 0.01) {
        probe(std::exp2(e));
        probe(-std::exp2(e));
    }
    if (p.residual > 1e-10) throw std::runtime_error("build_lp_partition: partition of unity fails");
    return p;
}

GridSignal spectral_samples(const FourierFn& hat, int q, double x0, std::size_t n) {
    const int qh = log2_exact(n) - q;
    GridSignal fh(qh, 0.0, n);
    fh.x0 = -static_cast<double>(n / 2) * fh.step();
    for (std::size_t k = 0; k < n; ++k) fh[k] = hat(fh.x(k));
    return inverse_fourier(fh, q, x0);
}

cplx interpolate(const GridSignal& f, double x) {
    const double h = f.step();
    const double u = (x - f.x0) / h;
    const long long n = static_cast<long long>(f.size());
    if (u < -0.5 || u > static_cast<double>(n) - 0.5) return {};
    const double r = std::round(u);
    if (std::abs(u - r) < 1e-12) {
        const long long i = static_cast<long long>(r);
        return (i >= 0 && i < n) ? f.samples[static_cast<std::size_t>(i)] : cplx{};
    }
    static constexpr double w[8] = {-1, 7, -21, 35, -35, 21, -7, 1};
    const long long i0 = static_cast<long long>(std::floor(u)) - 3;
    cplx num{};
    double den = 0.0;
    for (int k = 0; k < 8; ++k) {
        const long long i = i0 + k;
        const double c = w[k] / (u - static_cast<double>(i));
        den += c;
        if (i >= 0 && i < n) num += c * f.samples[static_cast<std::size_t>(i)];
    }
    return num / den;
}

std::string to_string(DecompositionKind k) {
    switch (k) {
        case DecompositionKind::Indicator: return "indicator";
        case DecompositionKind::Dini: return "dini";
        case DecompositionKind::Hormander: return "hormander";
    }
    return "unknown";
}

cplx DecompositionCertificate::term_value(const CertificateTerm& t, double x) const {
    const double y = std::ldexp(x, -t.scaleExp) - t.shift;
    return t.coefficient * t.classConstant * std::ldexp(1.0, -t.scaleExp) * interpolate(bumps.at(t.bump), y);
}

cplx DecompositionCertificate::evaluate(double x, const std::function<bool(const CertificateTerm&)>& keep) const {
    cplx s{};
    for (const auto& t : terms)
        if (!keep || keep(t)) s += term_value(t, x);
    return s;
}

namespace {

BumpClassSpec unshifted(BumpClassSpec s) {
    if (s.cls == BumpClass::S0tau) s.cls = BumpClass::S0;
    if (s.cls == BumpClass::Theta0tau) s.cls = BumpClass::Theta0;
    s.shift = 0.0;
    return s;
}

GridSignal scaled(GridSignal f, double c) {
    for (auto& v : f.samples) v /= c;
    return f;
}

// Largest seminorm ratio of f for the class. Rounding in high-order differences can leave the rescaled
// ratio just above 1, so rescale until it is not.
double class_constant(const GridSignal& f, const BumpClassSpec& spec) {
    double c = class_check(f, spec).worstRatio;
    if (!(c > 0.0)) throw std::runtime_error("class_constant: vanishing profile");
    for (int it = 0; it < 8; ++it) {
        const double r = class_check(scaled(f, c), spec).worstRatio;
        if (r <= 1.0) return c;
        c *= r * (1.0 + 1e-12);
    }
    return c * 1.000001;
}

}  // namespace

std::vector<ClassReport> certify_bumps(const DecompositionCertificate& cert) {
    std::vector<ClassReport> out(cert.bumps.size());
    std::vector<char> done(cert.bumps.size(), 0);
    for (const auto& t : cert.terms) {
        if (!t.classSpec || done.at(t.bump)) continue;
        out[t.bump] = class_check(cert.bumps[t.bump], unshifted(*t.classSpec));
        done[t.bump] = 1;
        if (!out[t.bump].pass)
            throw PreconditionError("certify_bumps: bump " + std::to_string(t.bump) + " fails its class: " +
                                    out[t.bump].reason);
    }
    return out;
}

void write_certificate(std::ostream& os, const DecompositionCertificate& cert) {
    using nlohmann::json;
    json h;
    h["kind"] = to_string(cert.kind);
    h["residualL1"] = cert.residualL1;
    h["residualL2"] = cert.residualL2;
    h["meta"] = cert.meta;
    json grids = json::array();
    for (const auto& b : cert.bumps) grids.push_back({{"q", b.q}, {"x0", b.x0}, {"n", b.size()}});
    h["bumps"] = grids;
    json terms = json::array();
    for (const auto& t : cert.terms) {
        json j = {{"coefficient", {t.coefficient.real(), t.coefficient.imag()}},
                  {"classConstant", t.classConstant},
                  {"scaleExp", t.scaleExp},
                  {"shift", t.shift},
                  {"bump", t.bump},
                  {"group", t.group},
                  {"index", t.index}};
        if (t.classSpec)
            j["classSpec"] = {{"cls", static_cast<int>(t.classSpec->cls)},
                              {"shift", t.classSpec->shift},
                              {"maxDerivOrder", t.classSpec->maxDerivOrder},
                              {"maxDecayOrder", t.classSpec->maxDecayOrder},
                              {"meanTolerance", t.classSpec->meanTolerance},
                              {"supportTolerance", t.classSpec->supportTolerance}};
        terms.push_back(j);
    }
    h["terms"] = terms;
    os << h.dump() << '\n';
    for (const auto& b : cert.bumps) write_signal_binary(os, b);
}

DecompositionCertificate read_certificate(std::istream& is) {
    using nlohmann::json;
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("read_certificate: empty input");
    json h = json::parse(line);
    DecompositionCertificate c;
    const std::string kind = h.at("kind");
    if (kind == "indicator") c.kind = DecompositionKind::Indicator;
    else if (kind == "dini") c.kind = DecompositionKind::Dini;
    else if (kind == "hormander") c.kind = DecompositionKind::Hormander;
    else throw std::runtime_error("read_certificate: unknown kind " + kind);
    c.residualL1 = h.at("residualL1");
    c.residualL2 = h.at("residualL2");
    c.meta = h.at("meta").get<std::map<std::string, double>>();
    for (const auto& j : h.at("terms")) {
        CertificateTerm t;
        t.coefficient = {j.at("coefficient")[0].get<double>(), j.at("coefficient")[1].get<double>()};
        t.classConstant = j.at("classConstant");
        t.scaleExp = j.at("scaleExp");
        t.shift = j.at("shift");
        t.bump = j.at("bump");
        t.group = j.at("group");
        t.index = j.at("index");
        if (j.contains("classSpec")) {
            const auto& s = j["classSpec"];
            BumpClassSpec b;
            b.cls = static_cast<BumpClass>(s.at("cls").get<int>());
            b.shift = s.at("shift");
            b.maxDerivOrder = s.at("maxDerivOrder");
            b.maxDecayOrder = s.at("maxDecayOrder");
            b.meanTolerance = s.at("meanTolerance");
            b.supportTolerance = s.at("supportTolerance");
            t.classSpec = b;
        }
        c.terms.push_back(t);
    }
    const std::size_t nb = h.at("bumps").size();
    for (std::size_t i = 0; i < nb; ++i) c.bumps.push_back(read_signal_binary(is));
    for (const auto& t : c.terms)
        if (t.bump >= c.bumps.size()) throw std::runtime_error("read_certificate: term references a missing bump");
    return c;
}

// ---- indicator ----

namespace {

BumpClassSpec plus_spec(double shift) {
    BumpClassSpec s;
    s.cls = BumpClass::S0plus;
    s.shift = shift;
    s.maxDerivOrder = 4;
    s.maxDecayOrder = 4;
    return s;
}

// Integral of g over [-8, 9] with panels refined geometrically toward 0 and 1.
double edge_integral(const std::function<double(double)>& g, int depth) {
    std::set<double> pts{-8.0, 9.0};
    for (double x = -8.0; x <= 9.0; x += 0.125) pts.insert(x);
    for (double e : {0.0, 1.0})
        for (int k = 1; k <= depth; ++k) {
            pts.insert(e - std::ldexp(1.0, -k));
            pts.insert(e + std::ldexp(1.0, -k));
        }
    std::vector<double> p(pts.begin(), pts.end());
    double s = 0.0;
    for (std::size_t i = 1; i < p.size(); ++i) {
        const double a = p[i - 1], b = p[i];
        for (int k = 0; k < 4; ++k) {
            const double lo = a + (b - a) * k / 4.0, hi = a + (b - a) * (k + 1) / 4.0;
            s += GL::integrate(g, lo, hi);
        }
    }
    return s;
}

double indicator_residual(const DecompositionCertificate& cert, int J, double power) {
    if (cert.kind != DecompositionKind::Indicator) throw std::invalid_argument("indicator_residual: wrong kind");
    auto keep = [J](const CertificateTerm& t) { return t.group <= J; };
    auto g = [&](double x) {
        const double one = (x >= 0.0 && x < 1.0) ? 1.0 : 0.0;
        return std::pow(std::abs(one - cert.evaluate(x, keep)), power);
    };
    return std::pow(edge_integral(g, J + 12), 1.0 / power);
}

}  // namespace

DecompositionCertificate indicator_decomposition(int jMax) {
    if (jMax < 1) throw std::invalid_argument("indicator_decomposition: jMax < 1");
    const int q = 7;
    const double x0 = -128.0;
    const std::size_t n = 32768;
    // phihat = chihat (1 - e^{-2 pi i xi}) / (2 pi i xi)
    GridSignal phi = spectral_samples(
        [](double xi) {
            if (std::abs(xi) < 1e-9) return cplx(lp_chi_hat(xi));
            const cplx z(0.0, 2.0 * kPi * xi);
            return lp_chi_hat(xi) * (1.0 - std::exp(-z)) / z;
        },
        q, x0, n);
    // primitive of rho: rhohat / (2 pi i xi), rhohat vanishes near 0
    GridSignal prim = spectral_samples(
        [](double xi) {
            const double r = lp_rho_hat(xi);
            return r == 0.0 ? cplx{} : r / cplx(0.0, 2.0 * kPi * xi);
        },
        q, x0, n);
    for (auto& v : phi.samples) v = v.real();
    for (auto& v : prim.samples) v = v.real();
    const double C = class_constant(prim, plus_spec(0.0));

    DecompositionCertificate c;
    c.kind = DecompositionKind::Indicator;
    c.bumps = {phi, scaled(prim, C)};
    c.terms.push_back(CertificateTerm{});
    for (int j = 1; j <= jMax; ++j) {
        const double w = std::ldexp(1.0, -j), sh = std::ldexp(1.0, j);
        c.terms.push_back({cplx(w), C, -j, 0.0, 1, plus_spec(0.0), j, 0});
        c.terms.push_back({cplx(-w), C, -j, sh, 1, plus_spec(sh), j, 1});
    }
    c.meta = {{"jMax", jMax}, {"q", q}, {"x0", x0}, {"n", static_cast<double>(n)}, {"classConstant", C}};
    certify_bumps(c);
    c.residualL1 = indicator_residual(c, jMax, 1.0);
    c.residualL2 = indicator_residual(c, jMax, 2.0);
    return c;
}

double indicator_residual_l1(const DecompositionCertificate& cert, int J) { return indicator_residual(cert, J, 1.0); }
double indicator_residual_l2(const DecompositionCertificate& cert, int J) { return indicator_residual(cert, J, 2.0); }

// ---- zeta ----

namespace {

constexpr double kZetaGauss = 8.0;

struct StepDerivs {
    double s0, s1, s2;
};

// smooth_step and its first two derivatives on (0, 1)
StepDerivs smooth_step_derivs(double t) {
    if (t <= 0.0) return {0.0, 0.0, 0.0};
    if (t >= 1.0) return {1.0, 0.0, 0.0};
    const double u = 1.0 - t;
    const double a = std::exp(-1.0 / t), b = std::exp(-1.0 / u);
    const double a1 = a / (t * t), a2 = a * (1.0 / std::pow(t, 4) - 2.0 / std::pow(t, 3));
    const double b1 = -b / (u * u), b2 = b * (1.0 / std::pow(u, 4) - 2.0 / std::pow(u, 3));
    const double D = a + b, D1 = a1 + b1;
    const double num1 = a1 * b - a * b1;
    return {a / D, num1 / (D * D), (a2 * b - a * b2) / (D * D) - 2.0 * num1 * D1 / (D * D * D)};
}

// Second derivative of exp(-8 x^2) times the plateau cutoff on [1/2, 1].
double zeta_seed(double x) {
    const double ax = std::abs(x);
    if (ax >= 1.0) return 0.0;
    const double g = std::exp(-kZetaGauss * x * x);
    const double g1 = -2.0 * kZetaGauss * x * g;
    const double g2 = (4.0 * kZetaGauss * kZetaGauss * x * x - 2.0 * kZetaGauss) * g;
    double p = 1.0, p1 = 0.0, p2 = 0.0;
    if (ax > 0.5) {
        const auto d = smooth_step_derivs(2.0 * ax - 1.0);
        const double sg = x < 0 ? -1.0 : 1.0;
        p = 1.0 - d.s0;
        p1 = -2.0 * sg * d.s1;
        p2 = -4.0 * d.s2;
    }
    return g2 * p + 2.0 * g1 * p1 + g * p2;
}

// int over u in (lo, hi) of zetahat(u)^2 du / u in log u, quarter-octave panels
double log_integral(const ZetaWindow& z, double lo, double hi) {
    if (!(hi > lo)) return 0.0;
    double s = 0.0;
    const double a = std::log(lo), b = std::log(hi);
    const int panels = std::max(1, static_cast<int>(std::ceil(4.0 * (b - a) / std::log(2.0))));
    for (int k = 0; k < panels; ++k) {
        const double l = a + (b - a) * k / panels, r = a + (b - a) * (k + 1) / panels;
        s += GL::integrate([&](double v) { const double h = z.hat(std::exp(v)); return h * h; }, l, r);
    }
    return s;
}

constexpr double kZetaHatMax = 512.0;

}  // namespace

double ZetaWindow::value(double x) const { return zeta_seed(x) / norm; }

double ZetaWindow::hat(double xi) const {
    const double a = std::abs(xi);
    if (a >= kZetaHatMax) return 0.0;
    return interpolate(zetaHat, a).real();
}

double ZetaWindow::calderon(double xi) const {
    return calderon(xi, 0.0, std::numeric_limits<double>::infinity());
}

double ZetaWindow::calderon(double xi, double a, double b) const {
    const double x = std::abs(xi);
    if (x == 0.0) return 0.0;
    const double hi = std::isinf(b) ? kZetaHatMax : std::min(b * x, kZetaHatMax);
    return log_integral(*this, std::max(a * x, 1e-9), hi);
}

ZetaWindow build_zeta() {
    ZetaWindow z;
    GridSignal wide = GridSignal::from_function(10, -32.0, 65536, [](double x) { return cplx(zeta_seed(x)); });
    z.zetaHat = fourier(wide);
    for (auto& v : z.zetaHat.samples) v = v.real();
    z.norm = 1.0;
    const double N = z.calderon(1.0);
    if (!(N > 0.0)) throw std::runtime_error("build_zeta: vanishing Calderon integral");
    z.norm = std::sqrt(N);
    for (auto& v : z.zetaHat.samples) v /= z.norm;
    z.zeta = GridSignal::from_function(10, -2.0, 4096, [&](double x) { return cplx(z.value(x)); });
    return z;
}

// ---- Dini ----

DiniKernel dini_calibration_kernel() {
    DiniKernel k;
    k.K = [](double x) { return 0.25 * x / (x * x + 0.0625); };
    k.eta = ModulusOfContinuity::from_function([](double t) { return t; });
    return k;
}

namespace {

// samples of K_0 = (2^s K(2^s .)) rho on y0 + i h
std::vector<double> localized_kernel(const DiniKernel& K, int s, double y0, double h, std::size_t n) {
    std::vector<double> k0(n);
    const double sc = std::ldexp(1.0, s);
    for (std::size_t i = 0; i < n; ++i) {
        const double y = y0 + static_cast<double>(i) * h;
        k0[i] = sc * K.K(sc * y) * lp_rho_hat(y);
    }
    return k0;
}

}  // namespace

GridSignal dini_slab_oracle(const DiniKernel& K, int s, int m, const ZetaWindow& zeta, int q, double x0,
                            std::size_t n) {
    GridSignal k0(q, x0, n);
    const auto v = localized_kernel(K, s, x0, k0.step(), n);
    for (std::size_t i = 0; i < n; ++i) k0[i] = v[i];
    GridSignal kh = fourier(k0);
    const double a = std::ldexp(1.0, -m), b = std::ldexp(1.0, 1 - m);
    for (std::size_t k = 0; k < kh.size(); ++k) kh[k] *= zeta.calderon(kh.x(k), a, b);
    GridSignal out = inverse_fourier(kh, q, x0);
    for (auto& z : out.samples) z = z.real();
    return out;
}

DiniDecomposition dini_decompose(const DiniKernel& K, int s, int mMax, const ZetaWindow& zeta,
                                 const DiniOptions& opt) {
    if (mMax < 1) throw std::invalid_argument("dini_decompose: mMax < 1");
    {
        const double sc = std::ldexp(1.0, s);
        GridSignal ks = GridSignal::from_function(6, -32.0, 4096, [&](double x) { return cplx(sc * K.K(sc * x)); });
        const EtaReport er = eta_kernel_check(ks, K.eta);
        if (!er.pass) throw PreconditionError("dini_decompose: kernel fails the eta-kernel check: " + er.reason);
    }
    DiniDecomposition out;
    out.s = s;
    out.etaFactor = K.eta(1.0);

    // smooth part: K_0 * phi with phihat(xi) = int_1^infty zetahat(t xi)^2 dt/t
    {
        const int q = 6;
        const double x0 = -16.0;
        const std::size_t n = 2048;
        GridSignal k0(q, x0, n);
        const auto v = localized_kernel(K, s, x0, k0.step(), n);
        for (std::size_t i = 0; i < n; ++i) k0[i] = v[i];
        GridSignal kh = fourier(k0);
        for (std::size_t k = 0; k < kh.size(); ++k)
            kh[k] *= zeta.calderon(kh.x(k), 1.0, std::numeric_limits<double>::infinity());
        GridSignal sm = inverse_fourier(kh, q, x0);
        for (auto& z : sm.samples) z = z.real() / out.etaFactor;
        BumpClassSpec spec;
        out.smoothConstant = class_constant(sm, spec);
        out.smooth = scaled(sm, out.smoothConstant);
    }

    const double etaDen = out.etaFactor;
    (void)etaDen;
    for (int m = 1; m <= mMax; ++m) {
        const int per = opt.samplesPerUnit;
        const double h = std::ldexp(1.0, -m) / per;
        const double y0 = -4.0;
        const std::size_t n = static_cast<std::size_t>(8.0 / h);
        const auto k0 = localized_kernel(K, s, y0, h, n);

        // Gauss-Legendre nodes in log t over [2^-m, 2^{1-m}]
        const auto& xs = GL::abscissa();
        const auto& ws = GL::weights();
        std::vector<double> tn, tw;
        const double ua = -m * std::log(2.0), ub = (1 - m) * std::log(2.0);
        const double mid = 0.5 * (ua + ub), half = 0.5 * (ub - ua);
        for (std::size_t k = 0; k < xs.size(); ++k) {
            for (int sgn : {-1, 1}) {
                if (xs[k] == 0.0 && sgn < 0) continue;
                tn.push_back(std::exp(mid + sgn * half * xs[k]));
                tw.push_back(half * ws[k]);
            }
        }

        // per node: zeta_t taps and K_0^t = K_0 * zeta_t
        std::vector<std::vector<double>> taps(tn.size());
        std::vector<std::vector<double>> kt(tn.size(), std::vector<double>(n, 0.0));
        std::vector<long long> R(tn.size());
        for (std::size_t a = 0; a < tn.size(); ++a) {
            const double t = tn[a];
            R[a] = static_cast<long long>(std::floor(t / h));
            taps[a].resize(static_cast<std::size_t>(2 * R[a] + 1));
            for (long long r = -R[a]; r <= R[a]; ++r)
                taps[a][static_cast<std::size_t>(r + R[a])] = zeta.value(static_cast<double>(r) * h / t) / t * h;
            for (long long i = 0; i < static_cast<long long>(n); ++i) {
                double acc = 0.0;
                for (long long r = -R[a]; r <= R[a]; ++r) {
                    const long long j = i - r;
                    if (j < 0 || j >= static_cast<long long>(n)) continue;
                    acc += k0[static_cast<std::size_t>(j)] * taps[a][static_cast<std::size_t>(r + R[a])];
                }
                kt[a][static_cast<std::size_t>(i)] = acc;
            }
        }

        DiniSlab slab;
        slab.m = m;
        std::vector<double> assembled(n, 0.0);
        const long long lMax = 10LL << m;
        const long long perL = per;  // grid points per slice
        const double ref = std::ldexp(1.0, -m) * K.eta(std::ldexp(1.0, -m));
        for (long long l = -lMax; l <= lMax; ++l) {
            // slice [(l - 1/2) 2^-m, (l + 1/2) 2^-m) in grid indices
            const long long lo = (l * perL - perL / 2) + static_cast<long long>(4.0 / h);
            const long long hi = lo + perL;
            if (hi <= 0 || lo >= static_cast<long long>(n)) continue;
            double c = 0.0;
            for (std::size_t a = 0; a < tn.size(); ++a)
                for (long long i = std::max(lo, 0LL); i < std::min(hi, static_cast<long long>(n)); ++i)
                    c += tw[a] * std::abs(kt[a][static_cast<std::size_t>(i)]) * h;
            if (c == 0.0) continue;
            // profile on x' in [-4, 4) with x = 2^m y = l + x'
            GridSignal prof(7, -4.0, 1024);
            const long long base = static_cast<long long>(std::llround((static_cast<double>(l) * std::ldexp(1.0, -m) + 4.0 - 4.0 * std::ldexp(1.0, -m)) / h));
            std::vector<double> g(1024, 0.0);
            for (std::size_t a = 0; a < tn.size(); ++a)
                for (long long i = std::max(lo, 0LL); i < std::min(hi, static_cast<long long>(n)); ++i) {
                    const double w = tw[a] * kt[a][static_cast<std::size_t>(i)] * h;
                    if (w == 0.0) continue;
                    for (long long r = -R[a]; r <= R[a]; ++r) {
                        const long long k = i + r - base;  // output index on the profile grid
                        if (k < 0 || k >= 1024) continue;
                        g[static_cast<std::size_t>(k)] += w * taps[a][static_cast<std::size_t>(r + R[a])] / h;
                    }
                }
            for (std::size_t k = 0; k < 1024; ++k) {
                const long long i = base + static_cast<long long>(k);
                if (i >= 0 && i < static_cast<long long>(n)) assembled[static_cast<std::size_t>(i)] += g[k];
                prof[k] = std::ldexp(g[k], -m) / c;
            }
            DiniPiece piece;
            piece.m = m;
            piece.l = l;
            piece.c = c;
            BumpClassSpec spec;
            piece.classConstant = class_constant(prof, spec);
            piece.phi = scaled(prof, piece.classConstant);
            out.pieces.push_back(std::move(piece));
            slab.coeffRatio = std::max(slab.coeffRatio, c / ref);
            slab.maxL = std::max(slab.maxL, std::abs(l));
        }
        const GridSignal oracle = dini_slab_oracle(K, s, m, zeta, log2_exact(static_cast<std::size_t>(1.0 / h)), y0, n);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            num += std::pow(assembled[i] - oracle[i].real(), 2);
            den += std::norm(oracle[i]);
        }
        slab.residual = den > 0 ? std::sqrt(num / den) : std::sqrt(num);
        out.slabs.push_back(slab);
        if (slab.residual > opt.sliceTolerance)
            throw FalsificationError("dini_decompose: slab m = " + std::to_string(m) + " residual " +
                                     std::to_string(slab.residual));
    }
    return out;
}

DecompositionCertificate DiniDecomposition::certificate() const {
    DecompositionCertificate c;
    c.kind = DecompositionKind::Dini;
    c.bumps.push_back(smooth);
    CertificateTerm t0;
    t0.coefficient = etaFactor;
    t0.classConstant = smoothConstant;
    t0.scaleExp = s;
    t0.classSpec = BumpClassSpec{};
    c.terms.push_back(t0);
    for (const auto& p : pieces) {
        c.bumps.push_back(p.phi);
        BumpClassSpec spec;
        spec.cls = BumpClass::S0tau;
        spec.shift = static_cast<double>(p.l);
        c.terms.push_back({cplx(p.c), p.classConstant, s - p.m, static_cast<double>(p.l), c.bumps.size() - 1, spec,
                           p.m, p.l});
    }
    double worst = 0.0;
    for (const auto& sl : slabs) worst = std::max(worst, sl.residual);
    c.residualL2 = worst;
    c.meta = {{"s", s}, {"mMax", static_cast<double>(slabs.size())}, {"etaFactor", etaFactor}};
    return c;
}

// ---- Dini norm ----

double dini_norm(const RealFn& eta, std::optional<double> p) {
    const double P = p.value_or(1.0);
    if (!(P > 0.0 && P <= 1.0)) throw std::invalid_argument("dini_norm: p outside (0, 1]");
    auto f = [&](double u) {
        const double e = eta(std::exp(-u));
        if (e <= 0.0) return 0.0;
        return std::exp(P * std::log(e) + 4.0 * P * std::log(u) + (1.0 - P) * u);
    };
    // t = e^{-u} underflows past u = 700, so a tail still alive there counts as divergent
    double total = 0.0, last = 0.0;
    int quiet = 0;
    for (double u = 0.0; u < 700.0; u += 1.0) {
        last = GL::integrate(f, u, u + 1.0);
        if (!std::isfinite(last)) return std::numeric_limits<double>::infinity();
        total += last;
        quiet = (last <= 1e-18 * total) ? quiet + 1 : 0;
        if (u > 8.0 && (quiet >= 8 || (total == 0.0 && u > 64.0))) return std::pow(total, 1.0 / P);
    }
    if (last > 1e-12 * total) return std::numeric_limits<double>::infinity();
    return std::pow(total, 1.0 / P);
}

double dini_norm(const ModulusOfContinuity& eta, std::optional<double> p) {
    return dini_norm([&](double t) { return eta(t); }, p);
}

// ---- Hormander ----

double rho_scaled(double xi, int k) { return lp_rho_hat(std::ldexp(xi, -k)); }
double multiplier_psi_hat(double xi) { return rho_scaled(xi, -4) + rho_scaled(xi, -3) + rho_scaled(xi, -2); }

namespace {

MultiplierLocalization localize(const std::function<cplx(double)>& m, int s, int q) {
    MultiplierLocalization loc;
    loc.s = s;
    const std::size_t n = std::size_t{1} << q;
    loc.ms = GridSignal::from_function(q, -0.5, n, [&](double xi) {
        const double r = rho_scaled(xi, -3);
        return r == 0.0 ? cplx{} : m(std::ldexp(xi, -s)) * r;
    });
    std::vector<cplx> a(loc.ms.samples);
    fft_inplace(a, false);
    const long long N = static_cast<long long>(n);
    for (long long l = -N / 2; l < N / 2; ++l) {
        const cplx v = a[static_cast<std::size_t>((l % N + N) % N)] / static_cast<double>(n);
        loc.coeffs[l] = (l % 2 ? -v : v);  // e^{-2 pi i l (-1/2)} = (-1)^l
    }
    return loc;
}

}  // namespace

MultiplierLocalization multiplier_localize(const ComplexFn& m, int s, int q) { return localize(m, s, q); }

MultiplierLocalization multiplier_localize(const GridSignal& m, int s, int q) {
    return localize([&](double xi) { return interpolate(m, xi); }, s, q);
}

double MultiplierLocalization::reconstruction_residual(long long L) const {
    double worst = 0.0;
    for (std::size_t k = 0; k < ms.size(); ++k) {
        const double xi = ms.x(k);
        const double ph = multiplier_psi_hat(xi);
        cplx acc{};
        if (ph != 0.0)
            for (long long l = -L; l <= L; ++l) {
                auto it = coeffs.find(l);
                if (it == coeffs.end()) continue;
                acc += it->second * std::polar(1.0, 2.0 * kPi * std::fmod(static_cast<double>(l) * xi, 1.0));
            }
        worst = std::max(worst, std::abs(ms[k] - acc * ph));
    }
    return worst;
}

int annulus_of(long long l) {
    if (l == 0) return 0;
    const unsigned long long a = static_cast<unsigned long long>(l < 0 ? -l : l);
    return std::bit_width(a);
}

double pigeonhole_weight(const std::vector<double>& w, int a, double C) {
    double s = 0.0;
    for (std::size_t b = 0; b < w.size(); ++b)
        s += std::pow(1.0 + std::abs(static_cast<double>(b) - a), -10.0) * w[b] / (1.0 + std::pow(static_cast<double>(b), 5));
    return C * (1.0 + std::pow(static_cast<double>(a), 5)) * s;
}

std::vector<long long> pigeonhole_classes(const std::map<long long, cplx>& coeffs, int a, int j,
                                          const std::vector<double>& w, double C) {
    double l1 = 0.0;
    for (double x : w) {
        if (x < 0.0) throw std::invalid_argument("pigeonhole_classes: negative weight");
        l1 += x;
    }
    if (l1 > 1.0 + 1e-12) throw std::invalid_argument("pigeonhole_classes: weights exceed l1 norm 1");
    const double W = pigeonhole_weight(w, a, C);
    const double base = W / (1.0 + std::pow(static_cast<double>(a), 5));
    const double hi = std::ldexp(base, -j), lo = std::ldexp(base, -j - 1);
    std::vector<long long> out;
    for (const auto& [l, v] : coeffs) {
        if (annulus_of(l) != a) continue;
        const double x = std::abs(v);
        if (x > lo && x <= hi) out.push_back(l);
    }
    const double cap = std::min(std::ldexp(1.0, j + 1), std::ldexp(1.0, a));
    if (static_cast<double>(out.size()) > cap)
        throw FalsificationError("pigeonhole_classes: |L(a, j, s)| = " + std::to_string(out.size()) + " exceeds " +
                                 std::to_string(cap));
    return out;
}

double yw_value(const GridSignal& g, const std::vector<double>& w, std::optional<double> p) {
    const double P = p.value_or(1.0);
    std::vector<double> mass(w.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = std::abs(g.x(i));
        int a = 0;
        if (x >= 1.0) a = static_cast<int>(std::floor(std::log2(x))) + 1;
        if (a < static_cast<int>(w.size())) mass[static_cast<std::size_t>(a)] += std::pow(std::abs(g[i]), P) * g.step();
    }
    double best = 0.0;
    for (std::size_t a = 0; a < w.size(); ++a) {
        if (w[a] <= 0.0) continue;
        const double ad = static_cast<double>(a);
        const double v = p ? (1.0 + std::pow(ad, 4.0 * P + 1.0)) / std::pow(w[a], P) * mass[a]
                           : (1.0 + std::pow(ad, 5)) / w[a] * mass[a];
        best = std::max(best, v);
    }
    return p ? std::pow(best, 1.0 / P) : best;
}

namespace {

// transform of m(xi) rho(2^-s xi) on a grid reaching |x| >= 2^aMax with step <= 1/64
GridSignal localized_transform(const ComplexFn& m, int s, int aMax) {
    const int q = aMax + 1;
    const double len = std::max(64.0, std::ldexp(1.0, s + 2));
    const std::size_t n = static_cast<std::size_t>(len) << q;
    GridSignal g = GridSignal::from_function(q, -0.5 * len, n, [&](double xi) {
        const double r = rho_scaled(xi, s);
        return r == 0.0 ? cplx{} : m(xi) * r;
    });
    return fourier(g);
}

}  // namespace

double hsigma_norm(const ComplexFn& m, double sigma, const NormOptions& opt) {
    double best = 0.0;
    for (int s = opt.sMin; s <= opt.sMax; ++s) {
        const GridSignal gh = localized_transform(m, s, opt.aMax);
        double acc = 0.0;
        for (std::size_t k = 0; k < gh.size(); ++k) acc += std::pow(1.0 + gh.x(k) * gh.x(k), sigma) * std::norm(gh[k]);
        best = std::max(best, std::sqrt(acc * gh.step()));
    }
    return best;
}

double yw_norm(const ComplexFn& m, const std::vector<double>& w, std::optional<double> p, const NormOptions& opt) {
    double best = 0.0;
    std::vector<double> ww(w.begin(), w.begin() + std::min<std::size_t>(w.size(), static_cast<std::size_t>(opt.aMax) + 1));
    for (int s = opt.sMin; s <= opt.sMax; ++s) best = std::max(best, yw_value(localized_transform(m, s, opt.aMax), ww, p));
    return best;
}

double yw_hsigma_constant(const std::vector<double>& w, double sigma, int aMax) {
    double best = 0.0;
    auto f = [&](double x) { return std::pow(1.0 + x * x, -sigma); };
    for (int a = 0; a <= aMax && a < static_cast<int>(w.size()); ++a) {
        const double I = a == 0 ? 2.0 * GL::integrate(f, 0.0, 1.0)
                                : 2.0 * GL::integrate(f, std::ldexp(1.0, a - 1), std::ldexp(1.0, a));
        best = std::max(best, (1.0 + std::pow(static_cast<double>(a), 5)) / w[static_cast<std::size_t>(a)] * std::sqrt(I));
    }
    return best;
}

namespace {

std::pair<double, double> hormander_errors(const GridSignal& ms, const std::vector<std::pair<long long, cplx>>& cs) {
    double l1 = 0.0, num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < ms.size(); ++k) {
        const double xi = ms.x(k);
        const double ph = multiplier_psi_hat(xi);
        cplx acc{};
        if (ph != 0.0)
            for (const auto& [l, c] : cs) acc += c * std::polar(1.0, 2.0 * kPi * std::fmod(static_cast<double>(l) * xi, 1.0));
        const double e = std::abs(ms[k] - acc * ph);
        l1 += e * ms.step();
        num += e * e;
        den += std::norm(ms[k]);
    }
    return {l1, den > 0 ? std::sqrt(num / den) : std::sqrt(num)};
}

}  // namespace

DecompositionCertificate hormander_decomposition(const ComplexFn& m, int sMin, int sMax, double tol) {
    DecompositionCertificate c;
    c.kind = DecompositionKind::Hormander;
    GridSignal psi = spectral_samples([](double xi) { return cplx(multiplier_psi_hat(xi)); }, 2, -4096.0, 32768);
    for (auto& v : psi.samples) v = v.real();
    const double C = class_constant(psi, BumpClassSpec{});
    c.bumps.push_back(scaled(psi, C));
    std::vector<MultiplierLocalization> locs;
    double cmax = 0.0;
    for (int s = sMin; s <= sMax; ++s) {
        locs.push_back(multiplier_localize(m, s));
        for (const auto& [l, v] : locs.back().coeffs) cmax = std::max(cmax, std::abs(v));
    }
    for (const auto& loc : locs) {
        c.bumps.push_back(loc.ms);
        std::vector<std::pair<long long, cplx>> kept;
        for (const auto& [l, v] : loc.coeffs) {
            if (std::abs(v) <= tol * cmax) continue;
            BumpClassSpec spec;
            spec.cls = BumpClass::S0tau;
            spec.shift = -static_cast<double>(l);
            c.terms.push_back({v, C, loc.s, -static_cast<double>(l), 0, spec, loc.s, l});
            kept.emplace_back(l, v);
        }
        const auto [l1, l2] = hormander_errors(loc.ms, kept);
        c.residualL1 = std::max(c.residualL1, l1);
        c.residualL2 = std::max(c.residualL2, l2);
    }
    c.meta = {{"sMin", sMin}, {"sMax", sMax}, {"tol", tol}, {"classConstant", C}};
    certify_bumps(c);
    return c;
}

std::pair<double, double> verify_certificate(const DecompositionCertificate& cert) {
    switch (cert.kind) {
        case DecompositionKind::Indicator: {
            const int J = static_cast<int>(cert.meta.at("jMax"));
            return {indicator_residual_l1(cert, J), indicator_residual_l2(cert, J)};
        }
        case DecompositionKind::Dini: {
            const int s = static_cast<int>(cert.meta.at("s"));
            const int mMax = static_cast<int>(cert.meta.at("mMax"));
            const DiniKernel K = dini_calibration_kernel();
            const ZetaWindow zeta = build_zeta();
            double worst = 0.0;
            for (int m = 1; m <= mMax; ++m) {
                const double h = std::ldexp(1.0, -m - 7);
                const std::size_t n = static_cast<std::size_t>(8.0 / h);
                const GridSignal oracle = dini_slab_oracle(K, s, m, zeta, m + 7, -4.0, n);
                std::vector<double> v(n, 0.0);
                for (const auto& t : cert.terms) {
                    if (!t.classSpec || t.group != m || t.scaleExp != s - m) continue;
                    const GridSignal& b = cert.bumps[t.bump];
                    const double scale = t.coefficient.real() * t.classConstant * std::ldexp(1.0, m);
                    // profile nodes land on the slab grid: y = 2^-m (l + x')
                    for (std::size_t k = 0; k < b.size(); ++k) {
                        const double y = std::ldexp(t.shift + b.x(k), -m);
                        const long long i = std::llround((y + 4.0) / h);
                        if (i >= 0 && i < static_cast<long long>(n)) v[static_cast<std::size_t>(i)] += scale * b[k].real();
                    }
                }
                double num = 0.0, den = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    num += std::pow(v[i] - oracle[i].real(), 2);
                    den += std::norm(oracle[i]);
                }
                worst = std::max(worst, std::sqrt(num / den));
            }
            return {0.0, worst};
        }
        case DecompositionKind::Hormander: {
            double l1 = 0.0, l2 = 0.0;
            const int sMin = static_cast<int>(cert.meta.at("sMin"));
            const int sMax = static_cast<int>(cert.meta.at("sMax"));
            for (int s = sMin; s <= sMax; ++s) {
                std::vector<std::pair<long long, cplx>> cs;
                for (const auto& t : cert.terms)
                    if (t.group == s) cs.emplace_back(t.index, t.coefficient);
                const auto [a, b] = hormander_errors(cert.bumps.at(static_cast<std::size_t>(1 + s - sMin)), cs);
                l1 = std::max(l1, a);
                l2 = std::max(l2, b);
            }
            return {l1, l2};
        }
    }
    throw std::invalid_argument("verify_certificate: unknown kind");
}

}  // namespace tfa
