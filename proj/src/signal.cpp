#include "tfa/signal.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>

namespace tfa {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_pow2(std::size_t n) { return n >= 2 && (n & (n - 1)) == 0; }

int ilog2(std::size_t n) {
    int r = 0;
    while ((std::size_t{1} << r) < n) ++r;
    return r;
}

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

GridSignal::GridSignal(int q_, double x0_, std::size_t n) : q(q_), x0(x0_), samples(n) {
    if (!is_pow2(n)) throw std::invalid_argument("GridSignal: N must be a power of two >= 2");
}

GridSignal GridSignal::from_function(int q, double x0, std::size_t n, const ComplexFn& f) {
    GridSignal g(q, x0, n);
    for (std::size_t i = 0; i < n; ++i) g.samples[i] = f(g.x(i));
    return g;
}

double GridSignal::step() const { return std::ldexp(1.0, -q); }

cplx GridSignal::at(double xx) const {
    const double u = (xx - x0) / step();
    const double fl = std::floor(u);
    const long long i = static_cast<long long>(fl);
    const double t = u - fl;
    auto s = [&](long long k) -> cplx {
        return (k < 0 || k >= static_cast<long long>(size())) ? cplx{} : samples[static_cast<std::size_t>(k)];
    };
    if (t == 0.0) return s(i);
    // Catmull-Rom cubic.
    cplx p0 = s(i - 1), p1 = s(i), p2 = s(i + 1), p3 = s(i + 2);
    return p1 + 0.5 * t * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)));
}

GridSignal default_grid() { return GridSignal(6, -32.0, 4096); }

double trapezoid_integral_abs(const GridSignal& f, double p) {
    double s = 0.0;
    for (const auto& v : f.samples) s += std::pow(std::abs(v), p);
    return s * f.step();
}

double lp_norm(const GridSignal& f, double p) {
    if (std::isinf(p)) {
        double m = 0.0;
        for (const auto& v : f.samples) m = std::max(m, std::abs(v));
        return m;
    }
    return std::pow(trapezoid_integral_abs(f, p), 1.0 / p);
}

cplx integral(const GridSignal& f) {
    cplx s{};
    for (const auto& v : f.samples) s += v;
    return s * f.step();
}

cplx inner(const GridSignal& f, const GridSignal& g) {
    if (!f.same_grid(g)) throw std::invalid_argument("inner: grids differ");
    cplx s{};
    for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * std::conj(g[i]);
    return s * f.step();
}

void fft_inplace(std::vector<cplx>& a, bool inverse) {
    fftw_plan plan;
    auto* p = reinterpret_cast<fftw_complex*>(a.data());
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        plan = fftw_plan_dft_1d(static_cast<int>(a.size()), p, p, inverse ? FFTW_BACKWARD : FFTW_FORWARD,
                                FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
}

void fft2_inplace(std::vector<cplx>& a, std::size_t n0, std::size_t n1, bool inverse) {
    if (a.size() != n0 * n1) throw std::invalid_argument("fft2_inplace: size mismatch");
    fftw_plan plan;
    auto* p = reinterpret_cast<fftw_complex*>(a.data());
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        plan = fftw_plan_dft_2d(static_cast<int>(n0), static_cast<int>(n1), p, p,
                                inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
}

GridSignal fourier(const GridSignal& f) {
    const std::size_t n = f.size();
    const double dx = f.step();
    GridSignal out(ilog2(n) - f.q, 0.0, n);
    const double dxi = out.step();
    out.x0 = -static_cast<double>(n / 2) * dxi;
    std::vector<cplx> a(f.samples);
    for (std::size_t i = 1; i < n; i += 2) a[i] = -a[i];
    fft_inplace(a, false);
    for (std::size_t k = 0; k < n; ++k) {
        const double xi = out.x(k);
        out[k] = dx * a[k] * std::polar(1.0, -2.0 * kPi * std::fmod(xi * f.x0, 1.0));
    }
    return out;
}

GridSignal inverse_fourier(const GridSignal& fhat, int q, double x0) {
    const std::size_t n = fhat.size();
    if (ilog2(n) - q != fhat.q) throw std::invalid_argument("inverse_fourier: grid mismatch");
    const double dxi = fhat.step();
    std::vector<cplx> a(n);
    for (std::size_t k = 0; k < n; ++k)
        a[k] = fhat[k] * std::polar(1.0, 2.0 * kPi * std::fmod(fhat.x(k) * x0, 1.0));
    fft_inplace(a, true);
    GridSignal out(q, x0, n);
    for (std::size_t i = 0; i < n; ++i) out[i] = dxi * ((i % 2) ? -a[i] : a[i]);
    return out;
}

cplx inner_frequency(const GridSignal& fhat, const GridSignal& ghat) { return inner(fhat, ghat); }

namespace {

long long grid_index(const GridSignal& f, double x) {
    const double u = (x - f.x0) / f.step();
    const double r = std::round(u);
    if (std::abs(u - r) > 1e-7) throw std::invalid_argument("bilinear_average: x is not a grid point");
    return static_cast<long long>(r);
}

cplx sample(const GridSignal& f, long long i, Boundary bc) {
    const long long n = static_cast<long long>(f.size());
    if (bc == Boundary::Periodic) return f.samples[static_cast<std::size_t>(((i % n) + n) % n)];
    return (i < 0 || i >= n) ? cplx{} : f.samples[static_cast<std::size_t>(i)];
}

double effective_width(const GridSignal& phi) {
    double m = 0.0;
    for (const auto& v : phi.samples) m = std::max(m, std::abs(v));
    if (m == 0.0) return 0.0;
    std::size_t lo = phi.size(), hi = 0;
    for (std::size_t i = 0; i < phi.size(); ++i)
        if (std::abs(phi[i]) > 1e-3 * m) {
            lo = std::min(lo, i);
            hi = std::max(hi, i);
        }
    return static_cast<double>(hi - lo + 1) * phi.step();
}

}  // namespace

cplx bilinear_average(const ComplexFn& phi, double phiWidth, const GridSignal& f1, const GridSignal& f2, double t,
                      double x, Boundary bc) {
    if (t <= 0) throw std::invalid_argument("bilinear_average: t <= 0");
    if (!f1.same_grid(f2)) throw std::invalid_argument("bilinear_average: signals on different grids");
    const double dx = f1.step();
    if (phiWidth > 0 && t * phiWidth < 8.0 * dx)
        throw ResolutionError("bilinear_average: t = " + std::to_string(t) + " leaves fewer than 8 samples across phi");
    const long long ix = grid_index(f1, x);
    const long long n = static_cast<long long>(f1.size());
    const long long half = (bc == Boundary::Periodic) ? n / 2 : n;
    cplx s{};
    for (long long m = -half; m < half; ++m) {
        const cplx a = sample(f1, ix - m, bc);
        if (a == cplx{}) continue;
        const cplx b = sample(f2, ix + m, bc);
        if (b == cplx{}) continue;
        const double y = static_cast<double>(m) * dx;
        s += a * b * phi(y / t);
    }
    return s * dx / t;
}

cplx bilinear_average(const GridSignal& phi, const GridSignal& f1, const GridSignal& f2, double t, double x,
                      Boundary bc) {
    return bilinear_average([&](double y) { return phi.at(y); }, effective_width(phi), f1, f2, t, x, bc);
}

GridSignal bilinear_average_grid(const ComplexFn& phi, double phiWidth, const GridSignal& f1, const GridSignal& f2,
                                 double t, Boundary bc, std::size_t stride) {
    if (!f1.same_grid(f2)) throw std::invalid_argument("bilinear_average_grid: signals on different grids");
    const double dx = f1.step();
    if (phiWidth > 0 && t * phiWidth < 8.0 * dx)
        throw ResolutionError("bilinear_average_grid: t = " + std::to_string(t) + " unresolved");
    const long long n = static_cast<long long>(f1.size());
    // Tabulate the kernel once; drop negligible taps.
    std::vector<cplx> k(static_cast<std::size_t>(n));
    std::vector<long long> taps;
    double kmax = 0.0;
    for (long long m = -n / 2; m < n / 2; ++m) {
        cplx v = phi(static_cast<double>(m) * dx / t) * (dx / t);
        k[static_cast<std::size_t>(m + n / 2)] = v;
        kmax = std::max(kmax, std::abs(v));
    }
    for (long long m = -n / 2; m < n / 2; ++m)
        if (std::abs(k[static_cast<std::size_t>(m + n / 2)]) > 1e-17 * kmax) taps.push_back(m);
    GridSignal out(f1.q, f1.x0, f1.size());
    for (long long ix = 0; ix < n; ix += static_cast<long long>(stride)) {
        cplx s{};
        for (long long m : taps) s += sample(f1, ix - m, bc) * sample(f2, ix + m, bc) * k[static_cast<std::size_t>(m + n / 2)];
        out.samples[static_cast<std::size_t>(ix)] = s;
    }
    return out;
}

namespace {

struct Sparse {
    std::vector<std::size_t> idx;
    std::vector<cplx> val;
};

// Entries below the FFT round-off floor are dropped.
Sparse nonzero(const GridSignal& g) {
    double m = 0.0;
    for (const auto& v : g.samples) m = std::max(m, std::abs(v));
    Sparse s;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (std::abs(g[i]) > 1e-14 * m) {
            s.idx.push_back(i);
            s.val.push_back(g[i]);
        }
    return s;
}

// Transform of B on the sum grid zeta_k = 2 xi_0 + k dxi, k = 0 .. 2N-2.
std::vector<cplx> bilinear_spectrum(const ComplexFn& phiHat, const GridSignal& f1, const GridSignal& f2, double t,
                                    GridSignal& h1) {
    h1 = fourier(f1);
    GridSignal h2 = fourier(f2);
    const double dxi = h1.step();
    Sparse a = nonzero(h1), b = nonzero(h2);
    std::vector<cplx> spec(2 * h1.size(), cplx{});
    for (std::size_t p = 0; p < a.idx.size(); ++p)
        for (std::size_t r = 0; r < b.idx.size(); ++r) {
            const double diff = (static_cast<double>(a.idx[p]) - static_cast<double>(b.idx[r])) * dxi;
            const cplx m = phiHat(t * diff);
            if (m == cplx{}) continue;
            spec[a.idx[p] + b.idx[r]] += a.val[p] * b.val[r] * m * dxi * dxi;
        }
    return spec;
}

}  // namespace

cplx bilinear_average_frequency(const ComplexFn& phiHat, const GridSignal& f1, const GridSignal& f2, double t,
                                double x) {
    GridSignal h1;
    auto spec = bilinear_spectrum(phiHat, f1, f2, t, h1);
    const double dxi = h1.step();
    const double z0 = 2.0 * h1.x0;
    cplx s{};
    for (std::size_t k = 0; k < spec.size(); ++k)
        if (spec[k] != cplx{}) s += spec[k] * std::polar(1.0, 2.0 * kPi * std::fmod((z0 + static_cast<double>(k) * dxi) * x, 1.0));
    return s;
}

GridSignal bilinear_average_frequency_grid(const ComplexFn& phiHat, const GridSignal& f1, const GridSignal& f2,
                                           double t) {
    GridSignal h1;
    auto spec = bilinear_spectrum(phiHat, f1, f2, t, h1);
    const std::size_t n = f1.size();
    // Fold the sum grid onto the periodic output grid; exact when the output band fits.
    GridSignal bh = h1;
    std::fill(bh.samples.begin(), bh.samples.end(), cplx{});
    const double dxi = h1.step();
    const double z0 = 2.0 * h1.x0;
    for (std::size_t k = 0; k < spec.size(); ++k) {
        if (spec[k] == cplx{}) continue;
        const double zeta = z0 + static_cast<double>(k) * dxi;
        long long idx = std::llround((zeta - h1.x0) / dxi);
        idx = ((idx % static_cast<long long>(n)) + static_cast<long long>(n)) % static_cast<long long>(n);
        bh.samples[static_cast<std::size_t>(idx)] += spec[k] / dxi;
    }
    return inverse_fourier(bh, f1.q, f1.x0);
}

namespace {

// Evaluate the trigonometric interpolant of f at arbitrary points.
std::vector<cplx> trig_interpolate(const GridSignal& f, const std::vector<double>& xs) {
    GridSignal fh = fourier(f);
    const double dxi = fh.step();
    std::vector<cplx> out(xs.size());
    for (std::size_t p = 0; p < xs.size(); ++p) {
        cplx s{};
        const cplx w = std::polar(1.0, 2.0 * kPi * std::fmod(dxi * xs[p], 1.0));
        cplx e = std::polar(1.0, 2.0 * kPi * std::fmod(fh.x0 * xs[p], 1.0));
        for (std::size_t k = 0; k < fh.size(); ++k) {
            s += fh[k] * e;
            e *= w;
        }
        out[p] = s * dxi;
    }
    return out;
}

}  // namespace

GridSignal dilate(const GridSignal& f, double lambda) {
    if (lambda <= 0) throw std::invalid_argument("dilate: lambda <= 0");
    GridSignal out = f;
    if (lambda == 1.0) return out;
    std::vector<double> xs(f.size());
    bool truncated = false;
    const double lo = f.x0, hi = f.x0 + f.length();
    for (std::size_t i = 0; i < f.size(); ++i) xs[i] = f.x(i) / lambda;
    auto vals = trig_interpolate(f, xs);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const bool inside = xs[i] >= lo && xs[i] < hi;
        out[i] = inside ? vals[i] / lambda : cplx{};
    }
    // Mass that would land outside the window.
    if (lambda > 1.0) {
        double outside = 0.0, total = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            total += std::abs(f[i]);
            const double y = f.x(i) * lambda;
            if (y < lo || y >= hi) outside += std::abs(f[i]);
        }
        truncated = total > 0 && outside > 1e-12 * total;
    }
    if (truncated) out.warnings.push_back("dilate: support exceeds domain, result truncated");
    return out;
}

GridSignal translate(const GridSignal& f, double tau) {
    GridSignal fh = fourier(f);
    for (std::size_t k = 0; k < fh.size(); ++k) fh[k] *= std::polar(1.0, -2.0 * kPi * std::fmod(fh.x(k) * tau, 1.0));
    GridSignal out = inverse_fourier(fh, f.q, f.x0);
    out.warnings = f.warnings;
    // Circular shift: flag mass that wrapped.
    double wrapped = 0.0, total = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        total += std::abs(f[i]);
        const double y = f.x(i) + tau;
        if (y < f.x0 || y >= f.x0 + f.length()) wrapped += std::abs(f[i]);
    }
    if (total > 0 && wrapped > 1e-12 * total) out.warnings.push_back("translate: support exceeds domain, wrapped");
    return out;
}

GridSignal modulate(const GridSignal& f, double xi) {
    GridSignal out = f;
    for (std::size_t i = 0; i < f.size(); ++i) out[i] *= std::polar(1.0, 2.0 * kPi * std::fmod(xi * f.x(i), 1.0));
    return out;
}

namespace {

std::vector<cplx> finite_difference(const std::vector<cplx>& f, int order, double h) {
    const std::size_t n = f.size();
    std::vector<cplx> d(n, cplx{});
    auto s = [&](long long i) { return (i < 0 || i >= static_cast<long long>(n)) ? cplx{} : f[static_cast<std::size_t>(i)]; };
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        cplx v;
        switch (order) {
            case 0: v = s(i); break;
            case 1: v = (s(i + 1) - s(i - 1)) / (2 * h); break;
            case 2: v = (s(i + 1) - 2.0 * s(i) + s(i - 1)) / (h * h); break;
            case 3: v = (s(i + 2) - 2.0 * s(i + 1) + 2.0 * s(i - 1) - s(i - 2)) / (2 * h * h * h); break;
            case 4: v = (s(i + 2) - 4.0 * s(i + 1) + 6.0 * s(i) - 4.0 * s(i - 1) + s(i - 2)) / (h * h * h * h); break;
            default: throw std::invalid_argument("finite_difference: order > 4");
        }
        d[static_cast<std::size_t>(i)] = v;
    }
    return d;
}

bool shifted_class(BumpClass c) { return c == BumpClass::S0tau || c == BumpClass::Theta0tau; }
bool theta_class(BumpClass c) { return c == BumpClass::Theta0 || c == BumpClass::Theta0tau; }

}  // namespace

ClassReport class_check(const GridSignal& f, const BumpClassSpec& spec) {
    ClassReport r;
    if (spec.maxDerivOrder > 4) throw std::invalid_argument("class_check: maxDerivOrder > 4");
    if (!shifted_class(spec.cls) && spec.shift != 0.0 && spec.cls != BumpClass::S0plus)
        throw std::invalid_argument("class_check: unshifted class with nonzero shift");
    const double h = f.step();
    if (theta_class(spec.cls)) {
        // |psi(x - shift)| (1 + |x - shift|)^M <= 1, frequency support in [8, 9].
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double u = std::abs(f.x(i) - spec.shift);
            const double v = std::abs(f[i]) * std::pow(1.0 + u, spec.maxDecayOrder);
            if (v > r.worstRatio) {
                r.worstRatio = v;
                r.witness = f.x(i);
                r.witnessDecay = spec.maxDecayOrder;
            }
        }
        GridSignal fh = fourier(f);
        double in = 0.0, out = 0.0;
        for (std::size_t k = 0; k < fh.size(); ++k) {
            const double a = std::norm(fh[k]);
            const double xi = fh.x(k);
            (xi >= 8.0 - 1e-12 && xi <= 9.0 + 1e-12 ? in : out) += a;
        }
        r.outOfBandMass = (in + out) > 0 ? std::sqrt(out / (in + out)) : 0.0;
        r.meanAbs = std::abs(integral(f));
        r.pass = r.worstRatio <= 1.0 + 1e-12 && r.outOfBandMass <= spec.supportTolerance;
        if (!r.pass) r.reason = r.worstRatio > 1.0 + 1e-12 ? "decay bound exceeded" : "spectrum leaves [8,9]";
        return r;
    }
    for (int n = 0; n <= spec.maxDerivOrder; ++n) {
        auto d = finite_difference(f.samples, n, h);
        for (int m = 0; m <= spec.maxDecayOrder; ++m) {
            for (std::size_t i = 0; i < f.size(); ++i) {
                const double u = std::abs(f.x(i) - spec.shift);
                const double v = std::pow(u, m) * std::abs(d[i]);
                if (v > r.worstRatio) {
                    r.worstRatio = v;
                    r.witness = f.x(i);
                    r.witnessDeriv = n;
                    r.witnessDecay = m;
                }
            }
        }
    }
    r.meanAbs = std::abs(integral(f));
    const bool meanOk = r.meanAbs <= spec.meanTolerance;
    r.pass = r.worstRatio <= 1.0 + 1e-12 && meanOk;
    if (!r.pass) r.reason = !meanOk ? "mean not zero" : "seminorm bound exceeded";
    return r;
}

ModulusOfContinuity ModulusOfContinuity::from_function(const RealFn& f, std::size_t n) {
    ModulusOfContinuity m;
    m.fn = f;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = std::pow(2.0, -static_cast<double>(n - 1 - i) * 20.0 / static_cast<double>(n - 1));
        m.t.push_back(t);
        m.eta.push_back(f(t));
    }
    return m;
}

double ModulusOfContinuity::operator()(double x) const {
    if (fn) return fn(x);
    if (t.empty()) return 0.0;
    if (x <= t.front()) return eta.front() * x / t.front();
    for (std::size_t i = 1; i < t.size(); ++i)
        if (x <= t[i]) {
            const double w = (x - t[i - 1]) / (t[i] - t[i - 1]);
            return eta[i - 1] + w * (eta[i] - eta[i - 1]);
        }
    return eta.back();
}

EtaReport eta_kernel_check(const GridSignal& K, const ModulusOfContinuity& eta, double tol) {
    EtaReport r;
    // Properties of eta on its samples.
    for (std::size_t i = 1; i < eta.t.size(); ++i)
        if (eta.eta[i] + tol < eta.eta[i - 1]) r.etaMonotone = false;
    for (std::size_t i = 0; i < eta.t.size(); ++i)
        for (std::size_t j = 0; j < eta.t.size(); ++j) {
            const double s = eta.t[i] + eta.t[j];
            if (s > 1.0) continue;
            if (eta(s) > eta.eta[i] + eta.eta[j] + tol) r.etaSubadditive = false;
        }
    if (!eta.t.empty() && eta.eta.front() > 1e-3 * std::max(1e-300, eta.eta.back())) r.etaVanishes = false;

    const double e1 = eta(1.0);
    const std::size_t n = K.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double x = K.x(i);
        if (x == 0.0) continue;
        const cplx kx = K[i];
        // Oddness at the mirrored grid point.
        const double u = (-x - K.x0) / K.step();
        const long long im = std::llround(u);
        if (im >= 0 && im < static_cast<long long>(n) && std::abs(u - static_cast<double>(im)) < 1e-9)
            r.worstOdd = std::max(r.worstOdd, std::abs(kx + K[static_cast<std::size_t>(im)]));
        if (e1 > 0) r.worstSize = std::max(r.worstSize, std::abs(kx) * std::abs(x) / e1);
    }
    // Smoothness over pairs with 2|x - x'| < |x| on a thinned set of anchors.
    const std::size_t stride = std::max<std::size_t>(1, n / 512);
    for (std::size_t i = 0; i < n; i += stride) {
        const double x = K.x(i);
        if (x == 0.0) continue;
        for (std::size_t j = 0; j < n; j += stride) {
            const double xp = K.x(j);
            const double d = std::abs(x - xp);
            if (i == j || !(2.0 * d < std::abs(x))) continue;
            const double e = eta(d / std::abs(x));
            const double diff = std::abs(K[i] - K[j]) * std::abs(x);
            if (e > 0) r.worstSmooth = std::max(r.worstSmooth, diff / e);
            else if (diff > tol) r.worstSmooth = std::numeric_limits<double>::infinity();
        }
    }
    const bool odd = r.worstOdd <= tol * std::max(1.0, r.worstSize);
    r.pass = odd && r.worstSize <= 1.0 + 1e-9 && r.worstSmooth <= 1.0 + 1e-9 && r.etaMonotone && r.etaSubadditive &&
             r.etaVanishes;
    if (!odd) r.reason = "kernel not odd";
    else if (!r.etaMonotone) r.reason = "eta not monotone";
    else if (!r.etaSubadditive) r.reason = "eta not subadditive";
    else if (!r.etaVanishes) r.reason = "eta does not vanish at 0";
    else if (r.worstSize > 1.0 + 1e-9) r.reason = "size bound exceeded";
    else if (r.worstSmooth > 1.0 + 1e-9) r.reason = "smoothness bound exceeded";
    return r;
}

namespace {

// Cauchy kernel (1/pi) a / (a^2 + z^2) periodized with period L.
double periodic_cauchy(double a, double z, double L) {
    const double w = 2.0 * kPi / L;
    const double ch = std::cosh(w * a);
    if (!std::isfinite(ch)) return 1.0 / L;
    return std::sinh(w * a) / (L * (ch - std::cos(w * z)));
}

}  // namespace

double shifted_maximal(const GridSignal& f, const ShiftSequence& shifts, double p, double x, int sMin, int sMax,
                       double shiftFactor) {
    if (p < 1) throw std::invalid_argument("shifted_maximal: p < 1");
    const double dx = f.step();
    const double L = f.length();
    double best = 0.0;
    for (int s = sMin; s <= sMax; ++s) {
        const double a = std::ldexp(1.0, s);
        if (a < 8.0 * dx) throw ResolutionError("shifted_maximal: scale 2^" + std::to_string(s) + " unresolved");
        const double tau = shifts.has(s) ? shiftFactor * static_cast<double>(shifts.at(s)) : 0.0;
        double acc = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double v = std::pow(std::abs(f[i]), p);
            if (v == 0.0) continue;
            acc += v * periodic_cauchy(a, f.x(i) - x - a * tau, L);
        }
        best = std::max(best, acc * dx);
    }
    return std::pow(best, 1.0 / p);
}

std::vector<double> shifted_maximal_grid(const std::vector<double>& absF, int q, int sMin, int sMax,
                                         const ShiftSequence* shifts, double shiftFactor) {
    const std::size_t n = absF.size();
    const double dx = std::ldexp(1.0, -q);
    const double L = dx * static_cast<double>(n);
    std::vector<cplx> fh(absF.begin(), absF.end());
    fft_inplace(fh, false);
    std::vector<double> best(n, 0.0);
    for (int s = sMin; s <= sMax; ++s) {
        const double a = std::ldexp(1.0, s);
        if (a < 8.0 * dx) throw ResolutionError("shifted_maximal_grid: scale 2^" + std::to_string(s) + " unresolved");
        const double tau = (shifts && shifts->has(s)) ? shiftFactor * static_cast<double>(shifts->at(s)) : 0.0;
        // Result(x_i) = sum_j f_j K(x_j - x_i - a tau) dx: correlation with kernel k_d = K(d dx - a tau).
        std::vector<cplx> k(n);
        for (std::size_t d = 0; d < n; ++d) {
            const double z = static_cast<double>(d) * dx - a * tau;
            k[d] = periodic_cauchy(a, z, L) * dx;
        }
        fft_inplace(k, false);
        std::vector<cplx> prod(n);
        for (std::size_t i = 0; i < n; ++i) prod[i] = fh[i] * std::conj(k[i]);
        fft_inplace(prod, true);
        for (std::size_t i = 0; i < n; ++i) best[i] = std::max(best[i], prod[i].real() / static_cast<double>(n));
    }
    return best;
}

void write_signal_binary(std::ostream& os, const GridSignal& f) {
    const std::int64_t q = f.q;
    const double x0 = f.x0;
    const std::int64_t n = static_cast<std::int64_t>(f.size());
    os.write(reinterpret_cast<const char*>(&q), sizeof q);
    os.write(reinterpret_cast<const char*>(&x0), sizeof x0);
    os.write(reinterpret_cast<const char*>(&n), sizeof n);
    for (const auto& v : f.samples) {
        const double re = v.real(), im = v.imag();
        os.write(reinterpret_cast<const char*>(&re), sizeof re);
        os.write(reinterpret_cast<const char*>(&im), sizeof im);
    }
}

GridSignal read_signal_binary(std::istream& is) {
    std::int64_t q = 0, n = 0;
    double x0 = 0;
    is.read(reinterpret_cast<char*>(&q), sizeof q);
    is.read(reinterpret_cast<char*>(&x0), sizeof x0);
    is.read(reinterpret_cast<char*>(&n), sizeof n);
    if (!is || n < 2) throw std::runtime_error("read_signal_binary: bad header");
    GridSignal f(static_cast<int>(q), x0, static_cast<std::size_t>(n));
    for (auto& v : f.samples) {
        double re = 0, im = 0;
        is.read(reinterpret_cast<char*>(&re), sizeof re);
        is.read(reinterpret_cast<char*>(&im), sizeof im);
        v = {re, im};
    }
    if (!is) throw std::runtime_error("read_signal_binary: truncated payload");
    return f;
}

void write_signal_csv(std::ostream& os, const GridSignal& f) {
    os << "x,re,im\n";
    os.precision(17);
    for (std::size_t i = 0; i < f.size(); ++i) os << f.x(i) << ',' << f[i].real() << ',' << f[i].imag() << '\n';
}

GridSignal read_signal_csv(std::istream& is) {
    std::string line;
    std::getline(is, line);
    if (line.rfind("x,re,im", 0) != 0) throw std::runtime_error("read_signal_csv: missing header x,re,im");
    std::vector<double> xs;
    std::vector<cplx> vs;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        double x = 0, re = 0, im = 0;
        char c1 = 0, c2 = 0;
        if (!(ls >> x >> c1 >> re >> c2 >> im)) throw std::runtime_error("read_signal_csv: malformed row");
        xs.push_back(x);
        vs.push_back({re, im});
    }
    if (xs.size() < 2) throw std::runtime_error("read_signal_csv: need at least two rows");
    const double h = xs[1] - xs[0];
    const int q = static_cast<int>(std::lround(-std::log2(h)));
    GridSignal f(q, xs[0], vs.size());
    for (std::size_t i = 0; i < vs.size(); ++i) {
        if (std::abs(xs[i] - f.x(i)) > 1e-9 * std::max(1.0, std::abs(xs[i])))
            throw std::runtime_error("read_signal_csv: rows are not on a uniform dyadic grid");
        f[i] = vs[i];
    }
    return f;
}

double smooth_step(double t) {
    if (t <= 0) return 0.0;
    if (t >= 1) return 1.0;
    const double a = std::exp(-1.0 / t);
    const double b = std::exp(-1.0 / (1.0 - t));
    return a / (a + b);
}

double smooth_bump(double x, double lo, double hi) {
    if (x <= lo || x >= hi) return 0.0;
    const double u = 2.0 * (x - lo) / (hi - lo) - 1.0;
    return std::exp(1.0 - 1.0 / (1.0 - u * u));
}

double plateau(double x, double inner, double outer) {
    const double a = std::abs(x);
    if (a <= inner) return 1.0;
    if (a >= outer) return 0.0;
    return 1.0 - smooth_step((a - inner) / (outer - inner));
}

}  // namespace tfa
