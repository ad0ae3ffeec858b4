#pragma once

#include "tfa/dyadic.hpp"
#include "tfa/signal.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <tuple>

namespace tfa {

// Frequency window rhohat = b / sqrt(sum_l b(. - l/3)^2), b a smooth bump on [0.1, 0.9].
class WindowRho {
public:
    double lo() const { return 0.1; }
    double hi() const { return 0.9; }
    double hat(double u) const;
    // rho(x) = integral rhohat(u) e^{2 pi i u x} du.
    cplx time(double x) const;
    // sum_l rhohat(xi - l/3)^2
    double partition_sum(double xi) const;

    GridSignal rhoHat;  // sampled on [-0.5, 1.5)
    GridSignal rho;     // sampled on the default time grid
    double partitionResidual = 0.0;
    std::vector<double> decayConstants;  // max |rho(x)| (1 + |x|)^k, k = 0, 1, ...

    // Trapezoid nodes on [0.1, 0.9] with M intervals, cached.
    const std::vector<double>& nodes(int M) const;

private:
    mutable std::mutex cacheMutex_;
    mutable std::map<int, std::shared_ptr<std::vector<double>>> nodeCache_;
};

// Throws std::runtime_error when the partition residual exceeds 1e-10.
std::shared_ptr<const WindowRho> build_window();

// Lattice packet at scale s: 2^{-s/2} e^{2 pi i l (2^{-s}x - v)/3} rho(2^{-s}x - v).
struct WavePacket {
    long long v = 0;
    long long l = 0;
    int scale = 0;
    GridSignal samples;
};

WavePacket make_wave_packet(const WindowRho& w, int s, long long v, long long l, int q, double x0, std::size_t n);
cplx wave_packet_hat(const WindowRho& w, int s, long long v, long long l, double xi);

using FourierFn = std::function<cplx(double)>;

// <f, psi_{s,v,l}> from a closed-form fhat, adaptive trapezoid on the window support.
cplx packet_coefficient(const FourierFn& fhat, const WindowRho& w, int s, long long v, long long l,
                        double relTol = 1e-13);

// Coefficients of a grid signal, periodic on its domain: rows[l][v - vMin].
struct PacketTable {
    int scale = 0;
    long long vMin = 0;
    long long vCount = 0;
    std::map<long long, std::vector<cplx>> rows;
    double residual = 0.0;       // relative L2 error of the resynthesis
    double outOfCapMass = 0.0;   // relative spectral energy outside the l cap

    cplx at(long long v, long long l) const;
    double energy() const;
};

struct WaveCaps {
    long long vMin = -64;
    long long vMax = 63;
    long long lCap = 600;
    bool fullPeriod = true;  // ignore vMin/vMax, use one period of the domain
};

PacketTable wave_packet_expand(const GridSignal& f, const WindowRho& w, const WaveCaps& caps = {}, int s = 0);
// Frequency samples of sum_{v,l} psihat_{v,l} <f, psi_{v,l}> on the grid of fourier(f).
GridSignal resynthesize(const PacketTable& t, const WindowRho& w, const GridSignal& like);

// psi0 with psi0hat = kappa * bump on [8, 9]; the shifted function is T_tau psi0.
struct ThetaPsi {
    double kappa = 1.0;
    double tau = 0.0;
    cplx hat(double xi) const;   // Fourier transform of T_tau psi0
    cplx time(double y) const;   // T_tau psi0(y)
    // Samples of sum_k T_tau psi0(y + kL) on the grid, L the domain length.
    GridSignal periodized(int q, double x0, std::size_t n) const;
    GridSignal sampled(int q, double x0, std::size_t n) const;
};

// Normalized so that |psi0(x)| (1 + |x|)^decayOrder <= 1.
ThetaPsi make_theta_psi(double tau, int decayOrder = 4);

struct DiscretizationCaps {
    long long period = 128;  // frequency lattice 1/period at scale 0
    int nMax = 8;            // truncation of n; negative means the full period
    int aLo = 21, aHi = 30, bLo = -6, bHi = 3;
};

// Coefficients c'_{n1,n2,v,l,a,b}; independent of v and periodic in n with the lattice period.
class ModelExpansion {
public:
    ModelExpansion(ThetaPsi psi, int s, long long tau, std::shared_ptr<const WindowRho> w, DiscretizationCaps caps);

    int scale() const { return s_; }
    long long tau() const { return tau_; }
    long long period() const { return caps_.period; }
    const DiscretizationCaps& caps() const { return caps_; }
    const ThetaPsi& psi() const { return psi_; }
    const WindowRho& window() const { return *w_; }

    // Table T(d1, d2) = c for v1 - v3 = d1, v2 - v3 = d2, indexed (d1 mod P) * P + (d2 mod P).
    std::vector<cplx> table(int a, int b, long long l1) const;
    cplx coefficient(int a, int b, long long n1, long long n2, long long l) const;
    cplx coefficient(const TriTile& p, long long n1, long long n2) const;

    // max |c'| for each (a, b), over l mod 3 and all n.
    std::map<std::pair<int, int>, double> table_norms(int aLo, int aHi, int bLo, int bHi) const;
    // max over (a,b,l) of |c'| on the ring |n|_inf = r.
    double ring_max(int r) const;
    // Energy of c' with |n|_inf > nMax relative to the total.
    double tail_mass() const;

    std::vector<std::string> warnings;

private:
    ThetaPsi psi_;
    int s_;
    long long tau_;
    std::shared_ptr<const WindowRho> w_;
    DiscretizationCaps caps_;
    mutable std::mutex mu_;
    mutable std::map<std::tuple<int, int, int>, std::shared_ptr<std::vector<cplx>>> cache_;
    std::shared_ptr<std::vector<cplx>> raw_table(int a, int b, int r) const;
};

ModelExpansion discretize(const ThetaPsi& psi, int s, const ShiftSequence& shifts,
                          std::shared_ptr<const WindowRho> w, DiscretizationCaps caps = {});

struct ReconstructionReport {
    GridSignal model;
    double outOfCapMass = 0.0;
    std::size_t terms = 0;
};

// Model sum with the expansion's n truncation; periodic on the signal domain.
ReconstructionReport reconstruct(const ModelExpansion& e, const GridSignal& f1, const GridSignal& f2);
// Single-v literal model term sum for row l3 (oracle path).
cplx model_row_literal(const ModelExpansion& e, const PacketTable& F1, const PacketTable& F2, long long l1, int a,
                       int b, long long v);

// CSV rows a,b,n1,n2,v,l,re,im for the given tiles and |n|_inf <= nMax.
void write_expansion_csv(std::ostream& os, const ModelExpansion& e, const std::vector<TriTile>& tiles, int nMax);

using PacketFn = std::function<cplx(int s, long long v, long long l)>;
PacketFn packet_fn(const FourierFn& fhat, std::shared_ptr<const WindowRho> w);
PacketFn packet_fn(const GridSignal& f, std::shared_ptr<const WindowRho> w);

// Compensated exactly rounded summation.
class ExactSum {
public:
    void add(double x);
    double value() const;

private:
    std::vector<double> partials_;
};

double model_term(const TriTile& p, const PacketFn& f1, const PacketFn& f2, const PacketFn& f3);
double model_form(const std::vector<TriTile>& tiles, const PacketFn& f1, const PacketFn& f2, const PacketFn& f3);

}  // namespace tfa
