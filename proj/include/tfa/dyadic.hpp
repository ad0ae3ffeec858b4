#pragma once

#include "tfa/rational.hpp"

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tfa {

// Half-open interval [left, right).
class RInterval {
public:
    RInterval(Rational left, Rational right);

    const Rational& left() const { return left_; }
    const Rational& right() const { return right_; }
    Rational length() const { return right_ - left_; }
    Rational center() const { return (left_ + right_) / Rational(2); }

    bool contains(const Rational& x) const { return left_ <= x && x < right_; }
    bool subset_of(const RInterval& o) const { return o.left_ <= left_ && right_ <= o.right_; }
    bool strict_subset_of(const RInterval& o) const { return subset_of(o) && !(*this == o); }
    bool intersects(const RInterval& o) const { return left_ < o.right_ && o.left_ < right_; }

    // Same center, c times the length.
    RInterval dilate(const Rational& c) const;
    RInterval shift(const Rational& d) const { return {left_ + d, right_ + d}; }

    std::string str() const;

    friend bool operator==(const RInterval& a, const RInterval& b) {
        return a.left_ == b.left_ && a.right_ == b.right_;
    }
    friend auto operator<=>(const RInterval& a, const RInterval& b) {
        if (auto c = a.left_ <=> b.left_; c != 0) return c;
        return a.right_ <=> b.right_;
    }

private:
    Rational left_;
    Rational right_;
};

struct Tile {
    RInterval time;
    RInterval freq;
};

struct NuParams {
    int a = 21;
    int b = 0;
    int sPrime = 0;
    int alpha = 0;

    void validate() const;
    friend bool operator==(const NuParams&, const NuParams&) = default;
};

// Integer shifts tau_s with 2^{m-1} <= |tau_s| <= 2^m on a finite scale domain.
class ShiftSequence {
public:
    ShiftSequence() = default;
    ShiftSequence(int m, std::map<int, long long> tau);

    // tau_s = sign * 2^m (or sign * 1 when m = 0) on every scale in [sMin, sMax].
    static ShiftSequence constant(int m, int sMin, int sMax, int sign = 1);

    int m() const { return m_; }
    bool has(int s) const { return tau_.count(s) != 0; }
    long long at(int s) const;
    const std::map<int, long long>& table() const { return tau_; }

private:
    int m_ = 0;
    std::map<int, long long> tau_;
};

// Dyadic interval 2^scale [index, index + 1).
struct DyadicInterval {
    int scale = 0;
    long long index = 0;

    RInterval to_interval() const;
    DyadicInterval parent() const;
    bool subset_of(const DyadicInterval& o) const;
    friend auto operator<=>(const DyadicInterval&, const DyadicInterval&) = default;
};

struct TriTile {
    std::array<Tile, 3> p;
    int scale = 0;
    long long v = 0;
    long long l = 0;
    long long tau = 0;
    NuParams nu;

    const Tile& comp(int k) const { return p.at(static_cast<std::size_t>(k - 1)); }
    // Integer data of component k: I = 2^s [vk, vk+1), omega = 2^{-s}[lk/3, lk/3 + 1).
    long long comp_v(int k) const;
    long long comp_l(int k) const;
    DyadicInterval dyadic_time(int k) const { return {scale, comp_v(k)}; }

    friend bool operator==(const TriTile& a, const TriTile& b) {
        return a.scale == b.scale && a.v == b.v && a.l == b.l && a.tau == b.tau && a.nu == b.nu;
    }
    // Canonical order (s, v, l).
    friend bool operator<(const TriTile& a, const TriTile& b) {
        if (a.scale != b.scale) return a.scale < b.scale;
        if (a.v != b.v) return a.v < b.v;
        return a.l < b.l;
    }
};

class CongruenceError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

TriTile make_tritile(const NuParams& nu, const ShiftSequence& shifts, int s, long long v, long long l);

struct EnumerationCaps {
    long long freqCap = 120;  // |l| <= freqCap
};

std::vector<TriTile> enumerate_family(const NuParams& nu, const ShiftSequence& shifts,
                                      const RInterval& timeWindow, int sMin, int sMax,
                                      const EnumerationCaps& caps = {});

std::optional<int> grid_membership(const RInterval& interval);
// Label predicted by the grid assignment for component k of a tile from P_nu.
int predicted_grid_label(const NuParams& nu, int k);

bool sparse_scale_check(const RInterval& w, const RInterval& wPrime);

struct Tree {
    int i = 1;
    int j = 3;
    RInterval top{Rational(0), Rational(1)};
    Rational xi;
    std::vector<TriTile> tiles;
};

bool is_tree(const std::vector<TriTile>& tiles, int i, int j, const RInterval& top, const Rational& xi);

// Witness frequency for the non-central component iPrime of an (i, j)-tree.
Rational lacunary_witness(int i, int iPrime, const Rational& xiT);
// Literal witness: xi_T for i' = 1,2 and 2 xi_T for i' = 3.
Rational literal_witness(int iPrime, const Rational& xiT);

struct LacunaryViolation : public std::runtime_error {
    LacunaryViolation(const std::string& what, TriTile tile)
        : std::runtime_error(what), tile(std::move(tile)) {}
    TriTile tile;
};

// Returns the witness and checks it lies in 50 omega \ 2 omega for every tile.
Rational lacunary_frequency(const Tree& tree, int iPrime);
bool in_lacunary_band(const Rational& x, const RInterval& w);

struct LacunaritySweep {
    long long cases = 0;
    long long violations = 0;
    long long literalViolations = 0;
    std::vector<std::string> firstViolations;
};

// Every (a, b), both parities of s', every ordered pair i != i'. The membership claim is
// affine in l and invariant under s, so checking the whole interval 3 omega_i for one
// representative tile per case is complete.
LacunaritySweep lacunarity_sweep();

// [lo, hi) subset 50 omega \ 2 omega with omega = [0,1) - c.
bool prep_inclusion(const RInterval& probe, const Rational& c);

bool strongly_disjoint(const std::vector<Tree>& trees, int k);

// Text format: one tile per line "a b sPrime alpha s v l tau_s".
void write_tritiles(std::ostream& os, const std::vector<TriTile>& tiles);
std::vector<TriTile> read_tritiles(std::istream& is);

}  // namespace tfa
