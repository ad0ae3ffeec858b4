#pragma once

#include "tfa/errors.hpp"
#include "tfa/forest.hpp"
#include "tfa/signal.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace tfa {

inline constexpr const char* kLibraryVersion = "0.1.0";

struct ExperimentRecord {
    std::string experiment;
    std::map<std::string, std::string> params;
    std::uint64_t seed = 0;
    std::string metric;
    double value = 0.0;
};

using Metadata = std::map<std::string, std::string>;

// Shortest decimal text that reads back to the same double.
std::string format_value(double v);

// A `# key=value;key=value` metadata row, then `experiment,metric,seed,` + sorted param columns + `value`.
// Rows lacking a param leave its cell empty.
void write_records_csv(std::ostream& os, const std::vector<ExperimentRecord>& rows, const Metadata& meta);
std::vector<ExperimentRecord> read_records_csv(std::istream& is, Metadata* meta = nullptr);

// Per-trial generator keyed on (seed, experiment, trial), independent of scheduling.
std::mt19937_64 trial_rng(std::uint64_t seed, std::string_view experiment, std::uint64_t trial);

// TFA_LAB_THREADS sets the worker count; default is the hardware concurrency.
unsigned worker_count();
// Runs body(i) for i in [0, n) on worker threads. Exceptions are rethrown in index order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

struct ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat `key = value` lines under `[section]` headers; `#` starts a comment. Keys before any header are in "".
class Config {
public:
    static Config load(const std::string& path);
    static Config parse(std::istream& is, const std::string& name = "<config>");

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    long long get_int(const std::string& section, const std::string& key, long long fallback) const;
    void set(const std::string& section, const std::string& key, const std::string& value);
    const std::map<std::string, std::map<std::string, std::string>>& sections() const { return data_; }

private:
    std::map<std::string, std::map<std::string, std::string>> data_;
};

// ---- ergodic averages ----

struct DynSystem {
    enum class Kind { CyclicShift, CircleRotation };
    Kind kind = Kind::CyclicShift;
    std::size_t N = 1;   // points of Z/N, or grid points k/N of the circle
    double theta = 0.0;  // rotation angle

    static DynSystem cyclic(std::size_t n);
    static DynSystem rotation(double theta, std::size_t n);
    // Position of T^i applied to grid point x: x + i mod N, or x/N + i theta mod 1.
    double orbit(std::size_t x, long long i) const;
};

// rows[k][x] = M_{ns[k]}(f1, f2)(x) = (1/n) sum_{i<n} f1(T^i x) f2(T^-i x), by one running sum. ns increasing.
std::vector<std::vector<cplx>> double_recurrence(const DynSystem& sys, const ComplexFn& f1, const ComplexFn& f2,
                                                 const std::vector<std::size_t>& ns);
// All n = 1..nMax. Array inputs are indexed by grid point; a rotation must move by whole grid steps.
std::vector<std::vector<cplx>> double_recurrence(const DynSystem& sys, const std::vector<cplx>& f1,
                                                 const std::vector<cplx>& f2, std::size_t nMax);

// (mean_x ||M_{2^k}(x)||^p_{V^r(k < scales)})^{1/p}.
double long_variation_value(const DynSystem& sys, const ComplexFn& f1, const ComplexFn& f2, double r, double p,
                            int scales);

struct LongVariationSpec {
    std::size_t N = 4096;
    int trials = 8;
    std::vector<double> rs{2.0, 2.1};
    double p = 2.0;
    int fewScales = 6;
    int manyScales = 12;
    double growthThreshold = 1.2;  // median ratio at r = 2 must exceed
    double boundThreshold = 1.1;   // median ratio at r > 2 must not exceed
};

// Random +-1 signals on Z/N. Emits per-trial values, medians, and ratio_r=<r> = median(many) / median(few).
std::vector<ExperimentRecord> long_variation_experiment(const LongVariationSpec& spec, std::uint64_t seed);

// Continuous analogue over dyadic t = 2^s: B_t(1_[0,1], f1, f2)(x) sampled on every stride-th grid point.
double long_variation_continuous(const GridSignal& f1, const GridSignal& f2, double r, double p, int sMin, int sMax,
                                 std::size_t stride = 1);

// 1/r < min{3/2 - 1/p, 1}
bool short_variation_admissible(double r, double p);

struct ShortVariationSpec {
    double r = 2.5;
    double p = 2.0;
    std::vector<int> octaves{-2, -1, 0, 1};
    int samplesPerOctave = 32;
    std::size_t stride = 16;  // x sampled on every stride-th grid point
};

// (sum_s ||B_t(1_[0,1], f1, f2)(x)||^2_{V^r(t in [2^s, 2^{s+1}])})^{1/2}, then L^p over the sampled x.
double short_variation_value(const GridSignal& f1, const GridSignal& f2, const ShortVariationSpec& spec);
std::vector<ExperimentRecord> short_variation_experiment(const GridSignal& f1, const GridSignal& f2,
                                                         const ShortVariationSpec& spec, std::uint64_t seed);

// ---- growth in the shift parameter ----

// Least-squares slope of log(values) against ms.
double fitted_rate(const std::vector<double>& ms, const std::vector<double>& values);

// Complex Gaussian coefficients on the grid frequencies |xi| <= band, scaled to unit L^p norm on the grid.
// modes > 0 keeps that many frequencies drawn uniformly from the band instead of all of them.
GridSignal random_band_limited(std::mt19937_64& rng, int q, double x0, std::size_t n, double band, double p,
                               std::size_t modes = 0);

struct ShiftGrowthSpec {
    int mMin = 0;
    int mMax = 8;
    double p1 = 3.0;  // p = 3/2; at p = 2 sparse spectra make the norm blind to the shift
    double p2 = 3.0;
    int trials = 12;
    int sMin = 0;
    int sMax = 3;
    int q = 5;
    int logLength = 0;  // periodic grid of length 2^logLength; 0 picks mMax + sMax + 1 so no shift wraps
    double band = 8.0;
    std::size_t modes = 256;
    double rateThreshold = 0.1;
    double stabilityThreshold = 0.1;
};

struct GrowthCurve {
    std::vector<int> ms;
    std::vector<double> estimate;      // max ratio over all trials
    std::vector<double> halfEstimate;  // max ratio over the first half of the trials
    double rate = 0.0;
    double stability = 0.0;  // max_m (estimate - halfEstimate) / halfEstimate
};

// ||sum_s B_{2^s}(psi_s, f1, f2)||_p / (||f1||_p1 ||f2||_p2), psi_s = T_{tau} psi0 with tau = 2^m (1 when m = 0).
double shift_ratio(int m, const GridSignal& f1, const GridSignal& f2, const ShiftGrowthSpec& spec);
GrowthCurve shift_growth_curve(const ShiftGrowthSpec& spec, std::uint64_t seed);
std::vector<ExperimentRecord> shift_growth_experiment(const ShiftGrowthSpec& spec, std::uint64_t seed);

struct BesselGrowthSpec {
    int mMin = 0;
    int mMax = 8;
    int trials = 16;
    std::size_t tiles = 120;
    double rateThreshold = 0.1;  // only the rate is asserted; the max over trials is heavy-tailed
};

// Max bessel_ratio over the selected collections of random families with shift parameter m.
GrowthCurve bessel_growth_curve(const BesselGrowthSpec& spec, std::uint64_t seed);
std::vector<ExperimentRecord> bessel_growth_experiment(const BesselGrowthSpec& spec, std::uint64_t seed);

std::vector<ExperimentRecord> curve_records(const std::string& experiment, const GrowthCurve& c, std::uint64_t seed,
                                            const std::map<std::string, std::string>& params);

// ---- restricted weak type ----

struct RestrictedWeakTypeSpec {
    int mMax = 4;
    int trials = 20;
    double C0 = 10.667;
    std::size_t tiles = 80;
};

struct RestrictedWeakTypeTrial {
    int m = 0;
    double e1 = 0.0, e2 = 0.0, e3 = 0.0, e3Major = 0.0;
    double lambda = 0.0;
    double rhs = 0.0;  // max(1, m)^4 (1 + |log2 |E1||) |E1| |E2|^{1/2}
    bool majorOk = false;
};

// Lambda over the family with f1 = 1_E1, f2 = 1_E2, f3 = 1 on the major subset of E3. All sets on one grid.
RestrictedWeakTypeTrial restricted_weak_type_eval(const GridSet& E1, const GridSet& E2, const GridSet& E3,
                                                  const std::vector<TriTile>& family, int m, double C0);
// Sets on [-32, 32) at step 2^-6 inside [0, 4) with |E1| <= |E2| <= |E3|, |E3| in (1, 2].
RestrictedWeakTypeTrial restricted_weak_type_trial(std::mt19937_64& rng, int m, const RestrictedWeakTypeSpec& spec);
// |lambda| / rhs, with 0 / 0 read as 0.
double restricted_weak_type_ratio(const RestrictedWeakTypeTrial& t);
std::vector<ExperimentRecord> restricted_weak_type_experiment(const RestrictedWeakTypeSpec& spec, std::uint64_t seed);

// Metadata row shared by every experiment.
Metadata run_metadata(const Config& cfg, const std::string& experiment);

}  // namespace tfa
