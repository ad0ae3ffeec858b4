#pragma once

#include "tfa/dyadic.hpp"

#include <complex>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace tfa {

using cplx = std::complex<double>;
using RealFn = std::function<double(double)>;
using ComplexFn = std::function<cplx(double)>;

// Samples on x0 + n 2^{-q}, n = 0..N-1. N a power of two.
struct GridSignal {
    int q = 6;
    double x0 = 0.0;
    std::vector<cplx> samples;
    std::vector<std::string> warnings;

    GridSignal() = default;
    GridSignal(int q, double x0, std::size_t n);
    static GridSignal from_function(int q, double x0, std::size_t n, const ComplexFn& f);

    std::size_t size() const { return samples.size(); }
    double step() const;
    double x(std::size_t i) const { return x0 + static_cast<double>(i) * step(); }
    double length() const { return static_cast<double>(size()) * step(); }
    bool same_grid(const GridSignal& o) const { return q == o.q && x0 == o.x0 && size() == o.size(); }

    // Zero outside the domain; cubic interpolation between samples.
    cplx at(double x) const;
    cplx& operator[](std::size_t i) { return samples[i]; }
    const cplx& operator[](std::size_t i) const { return samples[i]; }
};

// Default grid: N = 2^12, step 2^-6, domain [-32, 32).
GridSignal default_grid();

double trapezoid_integral_abs(const GridSignal& f, double p = 1.0);
double lp_norm(const GridSignal& f, double p);
cplx integral(const GridSignal& f);
cplx inner(const GridSignal& f, const GridSignal& g);  // integral of f conj(g)

// Continuous transform samples: fhat(xi_k) = integral e^{-2 pi i xi x} f(x) dx on xi_k = -N/2 dxi + k dxi.
GridSignal fourier(const GridSignal& f);
GridSignal inverse_fourier(const GridSignal& fhat, int q, double x0);
cplx inner_frequency(const GridSignal& fhat, const GridSignal& ghat);

// Raw DFT helpers on FFTW.
void fft_inplace(std::vector<cplx>& a, bool inverse);
void fft2_inplace(std::vector<cplx>& a, std::size_t n0, std::size_t n1, bool inverse);

enum class Boundary { Zero, Periodic };

struct ResolutionError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// B_t(phi, f1, f2)(x) by trapezoid quadrature. x must be a grid point of f1.
cplx bilinear_average(const ComplexFn& phi, double phiWidth, const GridSignal& f1, const GridSignal& f2, double t,
                      double x, Boundary bc = Boundary::Zero);
cplx bilinear_average(const GridSignal& phi, const GridSignal& f1, const GridSignal& f2, double t, double x,
                      Boundary bc = Boundary::Zero);
// Whole-grid version.
GridSignal bilinear_average_grid(const ComplexFn& phi, double phiWidth, const GridSignal& f1, const GridSignal& f2,
                                 double t, Boundary bc = Boundary::Zero, std::size_t stride = 1);
// Double Fourier inversion with multiplier phihat(t(xi - eta)); periodic semantics.
cplx bilinear_average_frequency(const ComplexFn& phiHat, const GridSignal& f1, const GridSignal& f2, double t, double x);
GridSignal bilinear_average_frequency_grid(const ComplexFn& phiHat, const GridSignal& f1, const GridSignal& f2,
                                           double t);

GridSignal dilate(const GridSignal& f, double lambda);
GridSignal translate(const GridSignal& f, double tau);
GridSignal modulate(const GridSignal& f, double xi);

enum class BumpClass { S0, S0tau, S0plus, Theta0, Theta0tau };

struct BumpClassSpec {
    BumpClass cls = BumpClass::S0;
    double shift = 0.0;
    int maxDerivOrder = 2;
    int maxDecayOrder = 2;
    double meanTolerance = 1e-8;
    double supportTolerance = 1e-8;
};

struct ClassReport {
    bool pass = false;
    double worstRatio = 0.0;
    double witness = 0.0;
    int witnessDeriv = 0;
    int witnessDecay = 0;
    double meanAbs = 0.0;
    double outOfBandMass = 0.0;
    std::string reason;
};

ClassReport class_check(const GridSignal& f, const BumpClassSpec& spec);

struct ModulusOfContinuity {
    std::vector<double> t;
    std::vector<double> eta;
    RealFn fn;  // evaluator used at off-sample points

    static ModulusOfContinuity from_function(const RealFn& f, std::size_t n = 64);
    double operator()(double x) const;
};

struct EtaReport {
    bool pass = false;
    double worstSize = 0.0;       // max |K(x)| |x| / eta(1)
    double worstSmooth = 0.0;     // max |K(x) - K(x')| |x| / eta(|x-x'|/|x|)
    double worstOdd = 0.0;        // max |K(x) + K(-x)|
    bool etaMonotone = true;
    bool etaSubadditive = true;
    bool etaVanishes = true;
    std::string reason;
};

EtaReport eta_kernel_check(const GridSignal& K, const ModulusOfContinuity& eta, double tol = 1e-9);

// sup over s in [sMin, sMax] of (1/pi) integral |f(x - 2^s(y - tau_s))|^p (1+y^2)^-1 dy, then ^(1/p).
double shifted_maximal(const GridSignal& f, const ShiftSequence& shifts, double p, double x, int sMin, int sMax,
                       double shiftFactor = 1.0);
// Whole-grid version via FFT convolution (periodic).
std::vector<double> shifted_maximal_grid(const std::vector<double>& absF, int q, int sMin, int sMax,
                                         const ShiftSequence* shifts, double shiftFactor);

void write_signal_binary(std::ostream& os, const GridSignal& f);
GridSignal read_signal_binary(std::istream& is);
void write_signal_csv(std::ostream& os, const GridSignal& f);
GridSignal read_signal_csv(std::istream& is);

// Smooth profiles shared by the constructions.
double smooth_step(double t);                          // 0 for t <= 0, 1 for t >= 1, C-infinity
double smooth_bump(double x, double lo, double hi);    // support [lo, hi], peak 1 at midpoint
double plateau(double x, double inner, double outer);  // 1 on |x| <= inner, 0 on |x| >= outer

}  // namespace tfa
