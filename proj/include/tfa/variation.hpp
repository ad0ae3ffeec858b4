#pragma once

#include "tfa/errors.hpp"
#include "tfa/signal.hpp"

#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

namespace tfa {

struct SampledPath {
    std::vector<double> times;
    std::vector<cplx> values;

    SampledPath() = default;
    SampledPath(std::vector<double> t, std::vector<cplx> v);
    static SampledPath from_values(const std::vector<double>& v);  // times 0, 1, 2, ...
    static SampledPath from_values(const std::vector<cplx>& v);
    static SampledPath from_function(const ComplexFn& a, double lo, double hi, std::size_t n);  // n + 1 samples

    std::size_t size() const { return values.size(); }
    bool real() const;
};

struct VariationResult {
    double r = 1.0;
    double value = 0.0;
    std::vector<std::size_t> witness;
};

// Exact sup over subsequences, O(n^2). r >= 1.
VariationResult variation_norm(const SampledPath& path, double r);
// (sum over consecutive witness entries of |a_i - a_j|^r)^{1/r}, summed in order.
double variation_sum(const SampledPath& path, const std::vector<std::size_t>& idx, double r);

struct JumpResult {
    std::size_t count = 0;
    std::vector<std::pair<std::size_t, std::size_t>> jumps;  // (s_i, t_i)
};

// Maximal interleaved jumps s_1 < t_1 <= s_2 < ... with |a_t - a_s| > lambda; each jump ends as early as possible.
JumpResult jumps(const SampledPath& path, double lambda);
// Count of jumps(). Throws FalsificationError unless lambda^r N <= V^r(path)^r.
std::size_t jump_count(const SampledPath& path, double lambda, double r);

// Fewest closed intervals of length 2 lambda covering the points.
std::size_t entropy_count(std::vector<double> points, double lambda);
// Entropy of a real path's value set. Throws FalsificationError unless lambda^r (E - 1) <= V^r(path)^r.
std::size_t entropy_count(const SampledPath& path, double lambda, double r);

struct FtcCheck {
    double lhs = 0.0;  // ||a||^2_{V^r([2^s, 2^{s+1}])}
    double rhs = 0.0;  // (int |a|^2 dt/t)^{1 - 1/r} (int |t a'|^2 dt/t)^{1/r}
};

// Samples outside [2^s, 2^{s+1}] are ignored. Central differences when derivative samples are absent.
FtcCheck ftc_variation_check(const SampledPath& a, const std::optional<std::vector<cplx>>& derivative, double r,
                             int s);
// a and a' sampled at n + 1 equispaced points of [2^s, 2^{s+1}].
FtcCheck ftc_variation_check(const ComplexFn& a, const ComplexFn& da, double r, int s, std::size_t n);

struct SquareFunctionOptions {
    double tMin = 0.125;
    double tMax = 64.0;
    int samplesPerOctave = 32;
    Boundary bc = Boundary::Zero;
    double meanTolerance = 1e-8;  // relative to the L1 norm of psi
};

// (int_{tMin}^{tMax} |B_t(psi, f1, f2)(x)|^2 dt/t)^{1/2}, trapezoid rule in log t.
double square_function(const GridSignal& psi, const GridSignal& f1, const GridSignal& f2, double x,
                       const SquareFunctionOptions& opt = {});
double square_function(const ComplexFn& psi, double psiWidth, const GridSignal& f1, const GridSignal& f2, double x,
                       const SquareFunctionOptions& opt = {});

void write_path_csv(std::ostream& os, const SampledPath& path);
SampledPath read_path_csv(std::istream& is);
// Header `r,value,witness`, witness indices separated by spaces.
void write_variation_csv(std::ostream& os, const std::vector<VariationResult>& results);

}  // namespace tfa
