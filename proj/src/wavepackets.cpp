#include "tfa/wavepackets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace tfa {

namespace {

constexpr double kPi = std::numbers::pi;

double bump(double u) { return smooth_bump(u, 0.1, 0.9); }

long long floor_div(long long a, long long b) {
    long long q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

long long pmod(long long a, long long m) { return ((a % m) + m) % m; }

cplx unit(double turns) { return std::polar(1.0, 2.0 * kPi * (turns - std::floor(turns))); }

// Power-of-two node count resolving oscillation e^{2 pi i u x} over a unit interval.
int nodes_for(double x) {
    int M = 2048;
    while (M < 4 * std::abs(x) + 2048) M *= 2;
    return M;
}

}  // namespace

namespace {

// sum_l b(xi - l/3)^2; each point meets at most three translates.
double bump_sum(double xi) {
    double s = 0.0;
    const long long l0 = static_cast<long long>(std::floor(3.0 * (xi - 0.9))) - 1;
    for (long long l = l0; l <= l0 + 5; ++l) {
        const double v = bump(xi - static_cast<double>(l) / 3.0);
        s += v * v;
    }
    return s;
}

}  // namespace

double WindowRho::partition_sum(double xi) const {
    double s = 0.0;
    const long long l0 = static_cast<long long>(std::floor(3.0 * (xi - hi()))) - 1;
    for (long long l = l0; l <= l0 + 5; ++l) {
        const double v = hat(xi - static_cast<double>(l) / 3.0);
        s += v * v;
    }
    return s;
}

double WindowRho::hat(double u) const {
    const double b = bump(u);
    if (b == 0.0) return 0.0;
    return b / std::sqrt(bump_sum(u));
}

const std::vector<double>& WindowRho::nodes(int M) const {
    std::lock_guard<std::mutex> lock(cacheMutex_);
    auto it = nodeCache_.find(M);
    if (it != nodeCache_.end()) return *it->second;
    auto v = std::make_shared<std::vector<double>>(static_cast<std::size_t>(M) + 1);
    const double h = (hi() - lo()) / M;
    for (int j = 0; j <= M; ++j) (*v)[static_cast<std::size_t>(j)] = hat(lo() + j * h);
    nodeCache_[M] = v;
    return *v;
}

cplx WindowRho::time(double x) const {
    const int M = nodes_for(x);
    const auto& r = nodes(M);
    const double h = (hi() - lo()) / M;
    cplx s{};
    const cplx step = unit(h * x);
    cplx e = unit(lo() * x);
    for (int j = 0; j <= M; ++j) {
        s += r[static_cast<std::size_t>(j)] * e;
        e *= step;
    }
    return s * h;
}

std::shared_ptr<const WindowRho> build_window() {
    auto w = std::make_shared<WindowRho>();
    GridSignal freq = fourier(default_grid());
    double worst = 0.0;
    for (std::size_t k = 0; k < freq.size(); ++k) worst = std::max(worst, std::abs(w->partition_sum(freq.x(k)) - 1.0));
    w->partitionResidual = worst;
    if (worst > 1e-10) throw std::runtime_error("build_window: partition of unity residual " + std::to_string(worst));
    w->rhoHat = GridSignal::from_function(8, -0.5, 512, [&](double u) { return cplx(w->hat(u)); });
    GridSignal g = default_grid();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = w->time(g.x(i));
    w->rho = g;
    for (int k = 0; k <= 12; ++k) {
        double c = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) c = std::max(c, std::abs(g[i]) * std::pow(1.0 + std::abs(g.x(i)), k));
        w->decayConstants.push_back(c);
    }
    return w;
}

cplx wave_packet_hat(const WindowRho& w, int s, long long v, long long l, double xi) {
    const double u = std::ldexp(xi, s) - static_cast<double>(l) / 3.0;
    const double r = w.hat(u);
    if (r == 0.0) return {};
    return std::ldexp(1.0, 0) * std::pow(2.0, 0.5 * s) * r * unit(-static_cast<double>(v) * std::ldexp(xi, s));
}

WavePacket make_wave_packet(const WindowRho& w, int s, long long v, long long l, int q, double x0, std::size_t n) {
    WavePacket p{v, l, s, GridSignal(q, x0, n)};
    const double amp = std::pow(2.0, -0.5 * s);
    for (std::size_t i = 0; i < n; ++i) {
        const double y = std::ldexp(p.samples.x(i), -s) - static_cast<double>(v);
        p.samples[i] = amp * unit(static_cast<double>(l) * y / 3.0) * w.time(y);
    }
    return p;
}

cplx packet_coefficient(const FourierFn& fhat, const WindowRho& w, int s, long long v, long long l, double relTol) {
    const double lo = w.lo(), hi = w.hi();
    const double third = static_cast<double>(l) / 3.0;
    const cplx pre = std::pow(2.0, -0.5 * s) * unit(static_cast<double>(pmod(v * pmod(l, 3), 3)) / 3.0);
    auto integrate = [&](int M, double& absSum) {
        const auto& r = w.nodes(M);
        const double h = (hi - lo) / M;
        cplx acc{};
        absSum = 0.0;
        for (int j = 1; j < M; ++j) {
            const double u = lo + j * h;
            const double rv = r[static_cast<std::size_t>(j)];
            if (rv == 0.0) continue;
            const cplx term = fhat(std::ldexp(u + third, -s)) * rv * unit(static_cast<double>(v) * u);
            acc += term;
            absSum += std::abs(term);
        }
        absSum *= h;
        return acc * h;
    };
    int M = 64;
    while (M < 8 * std::abs(static_cast<double>(v))) M *= 2;
    double a0 = 0.0;
    cplx prev = integrate(M, a0);
    for (int iter = 0; iter < 12; ++iter) {
        M *= 2;
        double a1 = 0.0;
        cplx cur = integrate(M, a1);
        const double floor = 1e-15 * a1;
        if (std::abs(cur - prev) <= relTol * std::abs(cur) || std::abs(cur - prev) <= floor) return pre * cur;
        prev = cur;
    }
    return pre * prev;
}

cplx PacketTable::at(long long v, long long l) const {
    auto it = rows.find(l);
    if (it == rows.end() || vCount == 0) return {};
    return it->second[static_cast<std::size_t>(pmod(v - vMin, vCount))];
}

double PacketTable::energy() const {
    double e = 0.0;
    for (const auto& [l, row] : rows)
        for (const auto& c : row) e += std::norm(c);
    return e;
}

namespace {

struct Band {
    std::vector<std::size_t> k;
    std::vector<double> r;  // rhohat(2^s xi_k - l/3)
};

Band band_points(const GridSignal& fh, const WindowRho& w, int s, long long l) {
    Band b;
    const double third = static_cast<double>(l) / 3.0;
    const double dxi = fh.step();
    // 2^s xi - l/3 in (0.1, 0.9).
    const double xlo = std::ldexp(third + w.lo(), -s), xhi = std::ldexp(third + w.hi(), -s);
    long long k0 = static_cast<long long>(std::floor((xlo - fh.x0) / dxi));
    long long k1 = static_cast<long long>(std::ceil((xhi - fh.x0) / dxi));
    k0 = std::max<long long>(k0, 0);
    k1 = std::min<long long>(k1, static_cast<long long>(fh.size()) - 1);
    for (long long k = k0; k <= k1; ++k) {
        const double r = w.hat(std::ldexp(fh.x(static_cast<std::size_t>(k)), s) - third);
        if (r != 0.0) {
            b.k.push_back(static_cast<std::size_t>(k));
            b.r.push_back(r);
        }
    }
    return b;
}

}  // namespace

PacketTable wave_packet_expand(const GridSignal& f, const WindowRho& w, const WaveCaps& caps, int s) {
    GridSignal fh = fourier(f);
    PacketTable t;
    t.scale = s;
    const double period = std::ldexp(f.length(), -s);
    const double dxi = fh.step();
    if (caps.fullPeriod) {
        if (period < 1.0 || period != std::floor(period))
            throw std::invalid_argument("wave_packet_expand: domain is not a whole number of scale-s periods");
        t.vMin = static_cast<long long>(std::floor(std::ldexp(f.x0, -s)));
        t.vCount = static_cast<long long>(period);
    } else {
        t.vMin = caps.vMin;
        t.vCount = caps.vMax - caps.vMin + 1;
    }
    double fmax = 0.0, total = 0.0;
    for (const auto& c : fh.samples) {
        fmax = std::max(fmax, std::abs(c));
        total += std::norm(c);
    }
    if (fmax == 0.0) return t;
    // Rows whose band meets the numerical support of fhat.
    std::vector<double> covered(fh.size(), 0.0);
    const double ulo = std::ldexp(fh.x0, s), uhi = std::ldexp(fh.x(fh.size() - 1), s);
    const long long lLo = std::max(-caps.lCap, static_cast<long long>(std::floor(3.0 * (ulo - w.hi()))) - 1);
    const long long lHi = std::min(caps.lCap, static_cast<long long>(std::ceil(3.0 * (uhi - w.lo()))) + 1);
    const double amp = std::pow(2.0, 0.5 * s) * dxi;
    for (long long l = lLo; l <= lHi; ++l) {
        Band b = band_points(fh, w, s, l);
        bool live = false;
        for (std::size_t i = 0; i < b.k.size(); ++i)
            if (std::abs(fh[b.k[i]]) > 1e-15 * fmax) live = true;
        if (!live) continue;
        std::vector<cplx> row(static_cast<std::size_t>(t.vCount));
        std::vector<cplx> g(b.k.size());
        for (std::size_t i = 0; i < b.k.size(); ++i) {
            g[i] = fh[b.k[i]] * b.r[i];
            covered[b.k[i]] += b.r[i] * b.r[i];
        }
        for (long long j = 0; j < t.vCount; ++j) {
            const double v = static_cast<double>(t.vMin + j);
            cplx acc{};
            for (std::size_t i = 0; i < b.k.size(); ++i) acc += g[i] * unit(v * std::ldexp(fh.x(b.k[i]), s));
            row[static_cast<std::size_t>(j)] = amp * acc;
        }
        t.rows[l] = std::move(row);
    }
    double missing = 0.0;
    for (std::size_t k = 0; k < fh.size(); ++k) missing += std::norm(fh[k]) * std::max(0.0, 1.0 - covered[k]);
    t.outOfCapMass = total > 0 ? missing / total : 0.0;
    GridSignal back = resynthesize(t, w, f);
    double num = 0.0;
    for (std::size_t k = 0; k < fh.size(); ++k) num += std::norm(back[k] - fh[k]);
    t.residual = std::sqrt(num / total);
    return t;
}

GridSignal resynthesize(const PacketTable& t, const WindowRho& w, const GridSignal& like) {
    GridSignal fh(static_cast<int>(std::lround(std::log2(static_cast<double>(like.size())))) - like.q, 0.0, like.size());
    fh.x0 = -static_cast<double>(like.size() / 2) * fh.step();
    const double amp = std::pow(2.0, 0.5 * t.scale);
    for (const auto& [l, row] : t.rows) {
        Band b = band_points(fh, w, t.scale, l);
        for (std::size_t i = 0; i < b.k.size(); ++i) {
            const double xs = std::ldexp(fh.x(b.k[i]), t.scale);
            cplx acc{};
            for (long long j = 0; j < t.vCount; ++j)
                acc += unit(-static_cast<double>(t.vMin + j) * xs) * row[static_cast<std::size_t>(j)];
            fh[b.k[i]] += amp * b.r[i] * acc;
        }
    }
    return fh;
}

cplx ThetaPsi::hat(double xi) const {
    const double b = smooth_bump(xi, 8.0, 9.0);
    if (b == 0.0) return {};
    return kappa * b * unit(-tau * xi);
}

cplx ThetaPsi::time(double y) const {
    const double x = y - tau;
    const int M = nodes_for(x);
    const double h = 1.0 / M;
    cplx s{};
    const cplx step = unit(h * x);
    cplx e = unit(8.0 * x);
    for (int j = 0; j <= M; ++j) {
        s += smooth_bump(8.0 + j * h, 8.0, 9.0) * e;
        e *= step;
    }
    return kappa * h * s;
}

GridSignal ThetaPsi::periodized(int q, double x0, std::size_t n) const {
    GridSignal g(q, x0, n);
    const double L = g.length();
    const long long k0 = static_cast<long long>(std::floor(8.0 * L)), k1 = static_cast<long long>(std::ceil(9.0 * L));
    std::vector<std::pair<double, cplx>> lines;
    for (long long k = k0; k <= k1; ++k) {
        const double xi = static_cast<double>(k) / L;
        const cplx hv = hat(xi);
        if (hv != cplx{}) lines.emplace_back(xi, hv);
    }
    for (std::size_t i = 0; i < n; ++i) {
        cplx acc{};
        for (const auto& [xi, hv] : lines) acc += hv * unit(xi * g.x(i));
        g[i] = acc / L;
    }
    return g;
}

GridSignal ThetaPsi::sampled(int q, double x0, std::size_t n) const {
    GridSignal g(q, x0, n);
    for (std::size_t i = 0; i < n; ++i) g[i] = time(g.x(i));
    return g;
}

ThetaPsi make_theta_psi(double tau, int decayOrder) {
    static std::mutex mu;
    static std::map<int, double> kappas;
    double kappa = 0.0;
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = kappas.find(decayOrder);
        if (it != kappas.end()) kappa = it->second;
    }
    if (kappa == 0.0) {
        ThetaPsi unitPsi{1.0, 0.0};
        double worst = 0.0;
        for (double y = 0.0; y <= 256.0; y += 1.0 / 16.0) {
            const double r = std::abs(unitPsi.time(y)) * std::pow(1.0 + y, decayOrder);
            worst = std::max(worst, r);
        }
        // |psi0| is even in y.
        kappa = (1.0 - 1e-6) / worst;
        std::lock_guard<std::mutex> lock(mu);
        kappas[decayOrder] = kappa;
    }
    return ThetaPsi{kappa, tau};
}

ModelExpansion::ModelExpansion(ThetaPsi psi, int s, long long tau, std::shared_ptr<const WindowRho> w,
                               DiscretizationCaps caps)
    : psi_(psi), s_(s), tau_(tau), w_(std::move(w)), caps_(caps) {
    if (caps_.period < 16 || (caps_.period & (caps_.period - 1)) != 0)
        throw std::invalid_argument("ModelExpansion: period must be a power of two >= 16");
    psi_.tau = static_cast<double>(tau);
    if (caps_.nMax >= 0 && 2 * caps_.nMax + 1 > caps_.period)
        throw std::invalid_argument("ModelExpansion: nMax exceeds the lattice period");
    if (caps_.nMax >= 0) {
        const double tail = tail_mass();
        if (tail > 1e-26)
            warnings.push_back("discretize: |n| cap " + std::to_string(caps_.nMax) + " leaves relative tail energy " +
                               std::to_string(tail));
    }
}

std::shared_ptr<std::vector<cplx>> ModelExpansion::raw_table(int a, int b, int r) const {
    const auto key = std::make_tuple(a, b, r);
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }
    const long long P = caps_.period;
    const long long l1 = r, l2 = l1 - a, l3 = 2 * l1 - a - b;
    const long long K1 = floor_div(P * l1, 3), K2 = floor_div(P * l2, 3);
    const double dxi = 1.0 / static_cast<double>(P);
    std::vector<double> r1(static_cast<std::size_t>(P)), r2(static_cast<std::size_t>(P));
    for (long long j = 0; j < P; ++j) {
        r1[static_cast<std::size_t>(j)] = w_->hat(static_cast<double>(3 * (K1 + j) - P * l1) / (3.0 * static_cast<double>(P)));
        r2[static_cast<std::size_t>(j)] = w_->hat(static_cast<double>(3 * (K2 + j) - P * l2) / (3.0 * static_cast<double>(P)));
    }
    auto tab = std::make_shared<std::vector<cplx>>(static_cast<std::size_t>(P * P), cplx{});
    bool any = false;
    for (long long j1 = 0; j1 < P; ++j1) {
        if (r1[static_cast<std::size_t>(j1)] == 0.0) continue;
        for (long long j2 = 0; j2 < P; ++j2) {
            if (r2[static_cast<std::size_t>(j2)] == 0.0) continue;
            const double xi1 = static_cast<double>(K1 + j1) * dxi, xi2 = static_cast<double>(K2 + j2) * dxi;
            const cplx ph = psi_.hat(xi1 - xi2);
            if (ph == cplx{}) continue;
            const double r3 = w_->hat(static_cast<double>(3 * (K1 + j1 + K2 + j2) - P * l3) / (3.0 * static_cast<double>(P)));
            if (r3 == 0.0) continue;
            (*tab)[static_cast<std::size_t>(j1 * P + j2)] = r1[static_cast<std::size_t>(j1)] * r2[static_cast<std::size_t>(j2)] * r3 * ph;
            any = true;
        }
    }
    if (any) {
        fft2_inplace(*tab, static_cast<std::size_t>(P), static_cast<std::size_t>(P), false);
        for (long long d1 = 0; d1 < P; ++d1)
            for (long long d2 = 0; d2 < P; ++d2) {
                const long long ph = pmod(d1 * pmod(K1, P) + d2 * pmod(K2, P), P);
                (*tab)[static_cast<std::size_t>(d1 * P + d2)] *= dxi * dxi * unit(-static_cast<double>(ph) / static_cast<double>(P));
            }
    }
    std::lock_guard<std::mutex> lock(mu_);
    cache_[key] = tab;
    return tab;
}

std::vector<cplx> ModelExpansion::table(int a, int b, long long l1) const {
    auto raw = raw_table(a, b, static_cast<int>(pmod(l1, 3)));
    std::vector<cplx> t(*raw);
    if (caps_.nMax < 0) return t;
    const long long P = caps_.period;
    for (long long d1 = 0; d1 < P; ++d1)
        for (long long d2 = 0; d2 < P; ++d2) {
            // Representative n in (-P/2, P/2].
            long long n1 = pmod(d1 + tau_, P), n2 = pmod(d2 - tau_, P);
            if (n1 > P / 2) n1 -= P;
            if (n2 > P / 2) n2 -= P;
            if (std::max(std::llabs(n1), std::llabs(n2)) > caps_.nMax) t[static_cast<std::size_t>(d1 * P + d2)] = {};
        }
    return t;
}

cplx ModelExpansion::coefficient(int a, int b, long long n1, long long n2, long long l) const {
    if (caps_.nMax >= 0 && std::max(std::llabs(n1), std::llabs(n2)) > caps_.nMax) return {};
    auto raw = raw_table(a, b, static_cast<int>(pmod(l, 3)));
    const long long P = caps_.period;
    return (*raw)[static_cast<std::size_t>(pmod(n1 - tau_, P) * P + pmod(n2 + tau_, P))];
}

cplx ModelExpansion::coefficient(const TriTile& p, long long n1, long long n2) const {
    if (p.scale != s_ || p.tau != tau_) throw std::invalid_argument("ModelExpansion: tile from another scale or shift");
    return coefficient(p.nu.a, p.nu.b, n1, n2, p.l);
}

std::map<std::pair<int, int>, double> ModelExpansion::table_norms(int aLo, int aHi, int bLo, int bHi) const {
    std::map<std::pair<int, int>, double> out;
    for (int a = aLo; a <= aHi; ++a)
        for (int b = bLo; b <= bHi; ++b) {
            double m = 0.0;
            for (int r = 0; r < 3; ++r)
                for (const auto& c : *raw_table(a, b, r)) m = std::max(m, std::abs(c));
            out[{a, b}] = m;
        }
    return out;
}

double ModelExpansion::ring_max(int rad) const {
    double m = 0.0;
    for (int a = caps_.aLo; a <= caps_.aHi; ++a)
        for (int b = caps_.bLo; b <= caps_.bHi; ++b)
            for (int r = 0; r < 3; ++r) {
                auto raw = raw_table(a, b, r);
                const long long P = caps_.period;
                for (long long n1 = -rad; n1 <= rad; ++n1)
                    for (long long n2 = -rad; n2 <= rad; ++n2) {
                        if (std::max(std::llabs(n1), std::llabs(n2)) != rad) continue;
                        m = std::max(m, std::abs((*raw)[static_cast<std::size_t>(pmod(n1 - tau_, P) * P + pmod(n2 + tau_, P))]));
                    }
            }
    return m;
}

double ModelExpansion::tail_mass() const {
    if (caps_.nMax < 0) return 0.0;
    double in = 0.0, out = 0.0;
    const long long P = caps_.period;
    for (int a = caps_.aLo; a <= caps_.aHi; ++a)
        for (int b = caps_.bLo; b <= caps_.bHi; ++b)
            for (int r = 0; r < 3; ++r) {
                auto raw = raw_table(a, b, r);
                for (long long d1 = 0; d1 < P; ++d1)
                    for (long long d2 = 0; d2 < P; ++d2) {
                        long long n1 = pmod(d1 + tau_, P), n2 = pmod(d2 - tau_, P);
                        if (n1 > P / 2) n1 -= P;
                        if (n2 > P / 2) n2 -= P;
                        const double e = std::norm((*raw)[static_cast<std::size_t>(d1 * P + d2)]);
                        (std::max(std::llabs(n1), std::llabs(n2)) > caps_.nMax ? out : in) += e;
                    }
            }
    return (in + out) > 0 ? out / (in + out) : 0.0;
}

ModelExpansion discretize(const ThetaPsi& psi, int s, const ShiftSequence& shifts, std::shared_ptr<const WindowRho> w,
                          DiscretizationCaps caps) {
    return ModelExpansion(psi, s, shifts.at(s), std::move(w), caps);
}

namespace {

GridSignal relabel(const GridSignal& f, int s) {
    GridSignal g = f;
    g.q = f.q + s;
    g.x0 = std::ldexp(f.x0, -s);
    return g;
}

}  // namespace

ReconstructionReport reconstruct(const ModelExpansion& e, const GridSignal& f1, const GridSignal& f2) {
    if (!f1.same_grid(f2)) throw std::invalid_argument("reconstruct: signals on different grids");
    const int s = e.scale();
    const long long P = e.period();
    if (std::ldexp(f1.length(), -s) != static_cast<double>(P))
        throw std::invalid_argument("reconstruct: domain length does not match the lattice period");
    const WindowRho& w = e.window();
    GridSignal g1 = relabel(f1, s), g2 = relabel(f2, s);
    PacketTable F1 = wave_packet_expand(g1, w), F2 = wave_packet_expand(g2, w);
    ReconstructionReport rep;
    rep.outOfCapMass = std::max(F1.outOfCapMass, F2.outOfCapMass);
    const auto Pz = static_cast<std::size_t>(P);

    std::map<long long, std::vector<cplx>> C;
    std::map<long long, std::vector<cplx>> hat1, hat2;
    auto hat_of = [&](const PacketTable& F, long long l, std::map<long long, std::vector<cplx>>& cache) -> const std::vector<cplx>& {
        auto it = cache.find(l);
        if (it != cache.end()) return it->second;
        std::vector<cplx> a(F.rows.at(l));
        fft_inplace(a, false);
        return cache[l] = std::move(a);
    };
    const auto& caps = e.caps();
    for (const auto& [l1, row1] : F1.rows) {
        for (int a = caps.aLo; a <= caps.aHi; ++a) {
            const long long l2 = l1 - a;
            if (!F2.rows.count(l2)) continue;
            const auto& h1 = hat_of(F1, l1, hat1);
            const auto& h2 = hat_of(F2, l2, hat2);
            for (int b = caps.bLo; b <= caps.bHi; ++b) {
                std::vector<cplx> T = e.table(a, b, l1);
                bool any = false;
                for (const auto& c : T)
                    if (c != cplx{}) {
                        any = true;
                        break;
                    }
                if (!any) continue;
                fft2_inplace(T, Pz, Pz, true);  // Ttilde(k) = sum_d T(d) e^{2 pi i k.d / P}
                std::vector<cplx> S(Pz, cplx{});
                for (std::size_t k1 = 0; k1 < Pz; ++k1)
                    for (std::size_t k2 = 0; k2 < Pz; ++k2) S[(k1 + k2) % Pz] += h1[k1] * h2[k2] * T[k1 * Pz + k2];
                fft_inplace(S, true);
                auto& dst = C[2 * l1 - a - b];
                if (dst.empty()) dst.assign(Pz, cplx{});
                const double norm = 1.0 / (static_cast<double>(P) * static_cast<double>(P));
                for (std::size_t j = 0; j < Pz; ++j) dst[j] += S[j] * norm;
                rep.terms += Pz * Pz * Pz;
            }
        }
    }
    GridSignal bh = fourier(g1);
    std::fill(bh.samples.begin(), bh.samples.end(), cplx{});
    for (const auto& [l3, row] : C) {
        Band bd = band_points(bh, w, 0, l3);
        for (std::size_t i = 0; i < bd.k.size(); ++i) {
            const double z = bh.x(bd.k[i]);
            cplx acc{};
            for (std::size_t j = 0; j < Pz; ++j) acc += unit(-static_cast<double>(F1.vMin + static_cast<long long>(j)) * z) * row[j];
            bh[bd.k[i]] += bd.r[i] * acc;
        }
    }
    GridSignal out = inverse_fourier(bh, g1.q, g1.x0);
    out.q = f1.q;
    out.x0 = f1.x0;
    rep.model = std::move(out);
    return rep;
}

cplx model_row_literal(const ModelExpansion& e, const PacketTable& F1, const PacketTable& F2, long long l1, int a, int b,
                       long long v) {
    const long long P = e.period();
    auto raw = e.table(a, b, l1);
    cplx acc{};
    for (long long d1 = 0; d1 < P; ++d1) {
        const cplx x1 = F1.at(v + d1, l1);
        if (x1 == cplx{}) continue;
        for (long long d2 = 0; d2 < P; ++d2) acc += raw[static_cast<std::size_t>(d1 * P + d2)] * x1 * F2.at(v + d2, l1 - a);
    }
    return acc;
}

void write_expansion_csv(std::ostream& os, const ModelExpansion& e, const std::vector<TriTile>& tiles, int nMax) {
    os << "a,b,n1,n2,v,l,re,im\n";
    os.precision(17);
    for (const auto& p : tiles)
        for (int n1 = -nMax; n1 <= nMax; ++n1)
            for (int n2 = -nMax; n2 <= nMax; ++n2) {
                const cplx c = e.coefficient(p, n1, n2);
                os << p.nu.a << ',' << p.nu.b << ',' << n1 << ',' << n2 << ',' << p.v << ',' << p.l << ',' << c.real()
                   << ',' << c.imag() << '\n';
            }
}

PacketFn packet_fn(const FourierFn& fhat, std::shared_ptr<const WindowRho> w) {
    return [fhat, w](int s, long long v, long long l) { return packet_coefficient(fhat, *w, s, v, l); };
}

PacketFn packet_fn(const GridSignal& f, std::shared_ptr<const WindowRho> w) {
    auto fh = std::make_shared<GridSignal>(fourier(f));
    return [fh, w](int s, long long v, long long l) {
        Band b = band_points(*fh, *w, s, l);
        cplx acc{};
        for (std::size_t i = 0; i < b.k.size(); ++i)
            acc += (*fh)[b.k[i]] * b.r[i] * unit(static_cast<double>(v) * std::ldexp(fh->x(b.k[i]), s));
        return acc * fh->step() * std::pow(2.0, 0.5 * s);
    };
}

void ExactSum::add(double x) {
    std::size_t i = 0;
    for (double y : partials_) {
        if (std::abs(x) < std::abs(y)) std::swap(x, y);
        const double hi = x + y;
        const double lo = y - (hi - x);
        if (lo != 0.0) partials_[i++] = lo;
        x = hi;
    }
    partials_.resize(i);
    partials_.push_back(x);
}

double ExactSum::value() const {
    if (partials_.empty()) return 0.0;
    std::size_t n = partials_.size();
    double hi = partials_[--n];
    double lo = 0.0;
    while (n > 0) {
        const double x = hi;
        const double y = partials_[--n];
        hi = x + y;
        const double yr = hi - x;
        lo = y - yr;
        if (lo != 0.0) break;
    }
    if (n > 0 && ((lo < 0 && partials_[n - 1] < 0) || (lo > 0 && partials_[n - 1] > 0))) {
        const double y = lo * 2;
        const double x = hi + y;
        if (y == x - hi) hi = x;
    }
    return hi;
}

double model_term(const TriTile& p, const PacketFn& f1, const PacketFn& f2, const PacketFn& f3) {
    const double a = std::abs(f1(p.scale, p.comp_v(1), p.comp_l(1)));
    if (a == 0.0) return 0.0;
    const double b = std::abs(f2(p.scale, p.comp_v(2), p.comp_l(2)));
    if (b == 0.0) return 0.0;
    const double c = std::abs(f3(p.scale, p.comp_v(3), p.comp_l(3)));
    return std::pow(2.0, -0.5 * p.scale) * a * b * c;
}

double model_form(const std::vector<TriTile>& tiles, const PacketFn& f1, const PacketFn& f2, const PacketFn& f3) {
    ExactSum s;
    for (const auto& p : tiles) s.add(model_term(p, f1, f2, f3));
    return s.value();
}

}  // namespace tfa
