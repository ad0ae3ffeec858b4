#pragma once

#include "tfa/dyadic.hpp"
#include "tfa/errors.hpp"
#include "tfa/signal.hpp"
#include "tfa/wavepackets.hpp"

#include <iosfwd>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace tfa {

// Finite sum of modulated Gaussians amp e^{2 pi i freq x} exp(-pi ((x - center)/width)^2).
struct AtomSignal {
    struct Atom {
        cplx amp{1.0, 0.0};
        double center = 0.0;
        double freq = 0.0;
        double width = 1.0;
    };
    std::vector<Atom> atoms;

    cplx operator()(double x) const;
    cplx hat(double xi) const;
    double norm2() const;  // squared L2 norm, closed form
    FourierFn fourier() const;
    // Packet coefficients integrated only where each atom's spectrum is above 1e-18 of its peak.
    PacketFn packets(std::shared_ptr<const WindowRho> w) const;
    GridSignal sample(int q, double x0, std::size_t n) const;

    static AtomSignal random(std::mt19937_64& rng, int count, double xLo, double xHi, double fLo, double fHi,
                             double wLo = 0.5, double wHi = 2.0);
};

// |<f, psi_{p,k}>|^2 for every tile.
std::vector<double> tile_energies(const std::vector<TriTile>& tiles, const PacketFn& f, int k);

struct SizeResult {
    double value = 0.0;
    Rational xi;            // central frequency of a maximizing tree (i != k)
    DyadicInterval top{};   // its top, or I_{p_j} of the maximizing tile when i = k
    std::size_t members = 0;
};

// size_{i,j,k} from precomputed energies |<f, psi_{p,k}>|^2. Tops are dyadic.
SizeResult size_detail(const std::vector<TriTile>& family, const std::vector<double>& energy, int i, int j, int k);
double size(const std::vector<TriTile>& family, const std::vector<double>& energy, int i, int j, int k);
double size(const std::vector<TriTile>& family, const PacketFn& f, int i, int j, int k);

struct TreeBound {
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
};

// Single tree estimate: |sum |I_{p_3}|^{-1/2} <f1,psi_1><f2,psi_2><f3,psi_3>| <= |I_T| prod_k size_{i,j,k}(f_k, T).
// The top must be dyadic. Throws FalsificationError if the bound fails.
TreeBound single_tree_bound(const Tree& tree, const PacketFn& f1, const PacketFn& f2, const PacketFn& f3);

struct SelectedTree {
    Tree tree;
    Rational xiPrime;
    bool above = true;  // >-tree
    double energy = 0.0;
    Tree companion;     // the (k, j)-tree removed with it; may be empty
    double companionEnergy = 0.0;
};

struct TraceRow {
    int step = 0;
    int iPrime = 0;
    std::string direction;  // ">", "<" or "S"
    Rational xi;
    Rational topLeft;
    Rational topLen;
    std::size_t numTiles = 0;
    double energy = 0.0;
};

struct TreeSelection {
    int k = 1;
    int j = 3;
    double lambda = 0.0;
    std::vector<SelectedTree> picks;
    std::vector<TriTile> residual;
    std::vector<TraceRow> log;

    std::vector<Tree> collection(int iPrime, bool above) const;
    std::vector<Tree> central() const;  // nonempty companions
    std::vector<TriTile> selected_tiles() const;
    double support() const;  // sum of |I_T| over selected trees
};

struct SelectOptions {
    bool checkPrecondition = true;
    bool checkPostcondition = true;
};

TreeSelection select_trees(const std::vector<TriTile>& family, const PacketFn& fk, int k, int j, double lambda,
                           const SelectOptions& opt = {});
TreeSelection select_trees(const std::vector<TriTile>& family, const std::vector<double>& energy, int k, int j,
                           double lambda, const SelectOptions& opt = {});

void write_selection_trace(std::ostream& os, const TreeSelection& sel);

// (sum |I_T|) lambda^2 / ||f||^2 after checking strong disjointness and both energy bounds.
double bessel_ratio(const std::vector<Tree>& trees, const PacketFn& f, double fNorm2, int k, double lambda);

// Subset of a dyadic-aligned grid, one flag per cell [x0 + n 2^-q, x0 + (n+1) 2^-q).
struct GridSet {
    int q = 6;
    double x0 = 0.0;
    std::vector<char> in;

    GridSet() = default;
    GridSet(int q, double x0, std::size_t n) : q(q), x0(x0), in(n, 0) {}
    double step() const { return std::ldexp(1.0, -q); }
    std::size_t size() const { return in.size(); }
    double measure() const;
    std::vector<std::pair<double, double>> runs() const;
    std::vector<double> indicator() const;
};

// About `pieces` random intervals inside [lo, hi) with total measure rounded to whole cells.
GridSet random_grid_set(std::mt19937_64& rng, int q, double x0, std::size_t n, double lo, double hi, double measure,
                        int pieces);

struct ExceptionalSet {
    GridSet cells;
    double measure = 0.0;
};

struct ExceptionalParams {
    double C0 = 10.667;
    int sMin = -3;  // 2^sMin >= 8 grid steps
    int sMax = 5;
};

// Per cell, the supremum of the C0 values for which the cell lies in the exceptional set.
std::vector<double> exceptional_profile(const GridSet& E1, const GridSet& E2, const ShiftSequence& shifts,
                                        const ExceptionalParams& prm = {});
// Union over k = 1, 2 of {M^{q_k} 1_{E_k} > C0 |E_k|^{1/q_k}} and {M^{q_k}_{c tau} 1_{E_k} > C0 (m |E_k|)^{1/q_k}},
// c in -2..2, with q_1 = 1, q_2 = 2. Scales below 2^sMin enter through their limit 1_{E_k}.
ExceptionalSet exceptional_set(const GridSet& E1, const GridSet& E2, const ShiftSequence& shifts,
                               const ExceptionalParams& prm = {});
// Union of 3J over the maximal dyadic J inside F, clipped to the grid.
GridSet enlarge_exceptional(const ExceptionalSet& F);
GridSet major_subset(const GridSet& E3, const ExceptionalSet& F);

struct ExceptionalTrial {
    GridSet E1, E2, E3;
    ShiftSequence shifts;
};

// Random sets on [-32, 32) at step 2^-6 inside [0, 2): 1/2 < |E3| <= 1, |E1| <= |E2| <= |E3|, m uniform in [0, mMax].
std::vector<ExceptionalTrial> exceptional_trials(std::mt19937_64& rng, int count, int mMax);
// Largest |F| over the trials.
double worst_exceptional_measure(const std::vector<ExceptionalTrial>& trials, const ExceptionalParams& prm);
// Smallest C0 with |F| < target on every trial, read off the sorted cell profiles.
double calibrate_c0(const std::vector<ExceptionalTrial>& trials, double target);

struct SquareSet {
    std::vector<DyadicInterval> maximal;  // disjoint maximal intervals J with int_J |f| >= lambda |J|
    bool contains(const DyadicInterval& I) const;
    Rational measure() const;
};

// Intervals range over dyadic grid intervals of length at least one cell. x0 must be a multiple of the step.
SquareSet refined_square_set(const GridSignal& f, double lambda);

struct AdaptedPacket {
    DyadicInterval I;
    GridSignal psi;
};

struct SquareCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    std::size_t counted = 0;
    bool pass = false;
};

// sum over packets with I inside K and I not inside F of |<f, psi_I>|^2 against lambda^2 |K|.
SquareCheck square_set_check(const GridSignal& f, const SquareSet& F, double lambda, const DyadicInterval& K,
                             const std::vector<AdaptedPacket>& packets);

struct FamilySpec {
    NuParams nu;
    int m = 0;
    int sign = 1;
    std::vector<int> scales{-10, 0};
    double xLo = 0.0;
    double xHi = 4.0;
    std::vector<double> anchors{0.5, 1.5};
    std::size_t maxTiles = 200;
    long long jitter = 3;
};

// Random tiles whose frequency components cluster around the anchor frequencies.
std::vector<TriTile> random_family(std::mt19937_64& rng, const FamilySpec& spec);

}  // namespace tfa
