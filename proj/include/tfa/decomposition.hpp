#pragma once

#include "tfa/errors.hpp"
#include "tfa/signal.hpp"
#include "tfa/wavepackets.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tfa {

// theta = 1 on [-1/2, 1/2], 0 outside (-1, 1).
double lp_theta(double xi);
// rhohat(xi) = theta(xi/2) - theta(xi), supported in 1/2 <= |xi| <= 2.
double lp_rho_hat(double xi);
// chihat(xi) = theta(xi/2); chihat + sum_{j=1}^J rhohat(2^-j .) = theta(2^{-J-1} .).
double lp_chi_hat(double xi);

struct LPPartition {
    int jMax = 1;
    GridSignal chiHat;  // samples on [-4, 4)
    GridSignal rhoHat;
    double residual = 0.0;  // max |partial sum - 1| on |xi| <= 2^jMax

    // chihat(xi) + sum_{j=1}^J rhohat(2^-j xi), summed term by term.
    double partial_sum(double xi, int J) const;
};

LPPartition build_lp_partition(int jMax);

// Samples of the inverse transform of hat on x0 + n 2^-q (periodized over the grid length).
GridSignal spectral_samples(const FourierFn& hat, int q, double x0, std::size_t n);
// 8-point Lagrange interpolation; 0 outside the grid.
cplx interpolate(const GridSignal& f, double x);

enum class DecompositionKind { Indicator, Dini, Hormander };
std::string to_string(DecompositionKind k);

// One summand coefficient * classConstant * D_{2^scaleExp}(T_shift bump), where T_shift g = g(. - shift).
// The bump profile is stored unshifted; classSpec names the class of the shifted term.
struct CertificateTerm {
    cplx coefficient{1.0, 0.0};
    double classConstant = 1.0;
    int scaleExp = 0;
    double shift = 0.0;
    std::size_t bump = 0;  // index into DecompositionCertificate::bumps
    std::optional<BumpClassSpec> classSpec;  // empty for the non-mean-zero leading term
    int group = 0;           // j for the indicator, m for Dini, s for Hormander
    long long index = 0;     // l for Dini and Hormander
};

struct DecompositionCertificate {
    DecompositionKind kind = DecompositionKind::Indicator;
    std::vector<GridSignal> bumps;
    std::vector<CertificateTerm> terms;
    double residualL1 = 0.0;
    double residualL2 = 0.0;
    std::map<std::string, double> meta;

    cplx term_value(const CertificateTerm& t, double x) const;
    // Sum of the terms accepted by keep.
    cplx evaluate(double x, const std::function<bool(const CertificateTerm&)>& keep = {}) const;
};

// Each bump checked once against the unshifted version of its class. Throws PreconditionError on failure.
std::vector<ClassReport> certify_bumps(const DecompositionCertificate& cert);

void write_certificate(std::ostream& os, const DecompositionCertificate& cert);
DecompositionCertificate read_certificate(std::istream& is);

// 1_[0,1] = phi + sum_j 2^-j D_{2^-j} phi_{0,j} + sum_j 2^-j D_{2^-j} phi_{1,j}, truncated at jMax.
DecompositionCertificate indicator_decomposition(int jMax);
// L1 norm of 1_[0,1) minus the partial sum through J.
double indicator_residual_l1(const DecompositionCertificate& cert, int J);
double indicator_residual_l2(const DecompositionCertificate& cert, int J);

struct ZetaWindow {
    GridSignal zeta;     // samples on [-2, 2)
    GridSignal zetaHat;  // samples of the transform on a fine frequency grid
    double norm = 1.0;   // divisor applied to the seed

    double value(double x) const;  // closed form
    double hat(double xi) const;   // interpolated, real and even
    // int_0^infty |zetahat(t xi)|^2 dt/t, by quadrature in log t.
    double calderon(double xi) const;
    // int_a^b |zetahat(t xi)|^2 dt/t
    double calderon(double xi, double a, double b) const;
};

ZetaWindow build_zeta();

struct DiniKernel {
    RealFn K;
    ModulusOfContinuity eta;
};

// K(x) = eta(1) x / (4 (x^2 + 1/16)), eta(t) = t. Smooth, odd, and an eta-kernel.
DiniKernel dini_calibration_kernel();

struct DiniPiece {
    int m = 1;
    long long l = 0;
    double c = 0.0;              // c_{s,m,l}
    double classConstant = 1.0;  // max seminorm of the unnormalized profile
    GridSignal phi;              // phi_{s,m,l}(x + l) / classConstant on [-4, 4)
};

struct DiniSlab {
    int m = 1;
    double residual = 0.0;    // relative L2 error of the reassembled slab against the Fourier-side slab
    double coeffRatio = 0.0;  // max_l |c| / (2^-m eta(2^-m))
    long long maxL = 0;       // largest |l| with c != 0
};

struct DiniDecomposition {
    int s = 0;
    double etaFactor = 1.0;  // eta(1)
    double smoothConstant = 1.0;
    GridSignal smooth;  // phi_{s,0} / smoothConstant on [-8, 8)
    std::vector<DiniPiece> pieces;
    std::vector<DiniSlab> slabs;
    DecompositionCertificate certificate() const;
};

struct DiniOptions {
    int tNodes = 16;            // Gauss-Legendre nodes in log t per octave
    int samplesPerUnit = 128;   // grid points per unit of 2^-m
    double sliceTolerance = 1e-5;
};

// K is checked with eta_kernel_check first. Throws FalsificationError if a slab residual exceeds the tolerance.
DiniDecomposition dini_decompose(const DiniKernel& K, int s, int mMax, const ZetaWindow& zeta,
                                 const DiniOptions& opt = {});
// The m-slab int_{2^-m}^{2^{1-m}} K_0^t * zeta_t dt/t at scale 0 on a grid, by the Fourier-side formula.
GridSignal dini_slab_oracle(const DiniKernel& K, int s, int m, const ZetaWindow& zeta, int q, double x0,
                            std::size_t n);

// int_0^1 eta(t) |log t|^4 dt/t, or (int_0^1 eta^p |log t|^{4p} t^{p-2} dt)^{1/p}. +infinity when divergent.
double dini_norm(const ModulusOfContinuity& eta, std::optional<double> p = std::nullopt);
double dini_norm(const RealFn& eta, std::optional<double> p = std::nullopt);

struct MultiplierLocalization {
    int s = 0;
    GridSignal ms;  // m(2^-s xi) rho_{-3}(xi) on [-1/2, 1/2)
    std::map<long long, cplx> coeffs;  // Fourier series coefficients on [-1/2, 1/2)

    // sup over the grid of |m_s - sum_{|l| <= L} mhat_s(l) e^{2 pi i l xi} psihat(xi)|.
    double reconstruction_residual(long long L) const;
};

double rho_scaled(double xi, int k);     // rho_k(xi) = rho(2^-k xi), rho = rhohat of the partition
double multiplier_psi_hat(double xi);    // rho_{-4} + rho_{-3} + rho_{-2}

MultiplierLocalization multiplier_localize(const ComplexFn& m, int s, int q = 12);
MultiplierLocalization multiplier_localize(const GridSignal& m, int s, int q = 12);

// A(0) = {0}; A(a) = {2^{a-1} <= |l| < 2^a}.
int annulus_of(long long l);
// W_a = C (1 + a^5) sum_b (1 + |b - a|)^-10 w_b / (1 + b^5).
double pigeonhole_weight(const std::vector<double>& w, int a, double C = 1.0);
// L(a, j, s). Throws FalsificationError if |L| > min(2^{j+1}, 2^a).
std::vector<long long> pigeonhole_classes(const std::map<long long, cplx>& coeffs, int a, int j,
                                          const std::vector<double>& w, double C = 1.0);

struct NormOptions {
    int sMin = -3;
    int sMax = 3;
    int aMax = 10;
};

// sup_a (1 + a^5)/w_a int_{A(a)} |g| dx, or the p < 1 variant, for samples g on a symmetric grid.
double yw_value(const GridSignal& g, const std::vector<double>& w, std::optional<double> p = std::nullopt);
double hsigma_norm(const ComplexFn& m, double sigma, const NormOptions& opt = {});
double yw_norm(const ComplexFn& m, const std::vector<double>& w, std::optional<double> p = std::nullopt,
               const NormOptions& opt = {});
// Cauchy-Schwarz constant: sup_a (1 + a^5)/w_a (int_{A(a)} (1 + x^2)^-sigma dx)^{1/2}, a <= aMax.
double yw_hsigma_constant(const std::vector<double>& w, double sigma, int aMax);

// Localized pieces of m for s in [sMin, sMax], coefficients kept when above tol * max.
DecompositionCertificate hormander_decomposition(const ComplexFn& m, int sMin, int sMax, double tol = 1e-12);

// Recomputes the residual fields from the payload. Returns (L1, L2) as stored in the respective kind.
std::pair<double, double> verify_certificate(const DecompositionCertificate& cert);

}  // namespace tfa
