#include "tfa/dyadic.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

namespace tfa {

namespace {

long long mod3(long long x) { return ((x % 3) + 3) % 3; }

long long floor_mod(long long x, long long m) { return ((x % m) + m) % m; }

// Exponent e with q = 2^e, if q is a power of two.
std::optional<int> log2_exact(const Rational& q) {
    if (q <= Rational(0)) return std::nullopt;
    mpz_class n = q.num();
    mpz_class d = q.den();
    if (n == 1 && mpz_popcount(d.get_mpz_t()) == 1)
        return -static_cast<int>(mpz_sizeinbase(d.get_mpz_t(), 2) - 1);
    if (d == 1 && mpz_popcount(n.get_mpz_t()) == 1)
        return static_cast<int>(mpz_sizeinbase(n.get_mpz_t(), 2) - 1);
    return std::nullopt;
}

}  // namespace

RInterval::RInterval(Rational left, Rational right) : left_(std::move(left)), right_(std::move(right)) {
    if (!(left_ < right_)) throw std::invalid_argument("RInterval: need left < right, got " + str());
}

RInterval RInterval::dilate(const Rational& c) const {
    Rational half = length() * c / Rational(2);
    Rational mid = center();
    return {mid - half, mid + half};
}

std::string RInterval::str() const { return "[" + left_.str() + ", " + right_.str() + ")"; }

void NuParams::validate() const {
    if (a < 21 || a > 30) throw std::invalid_argument("NuParams: a out of [21,30]");
    if (b < -6 || b > 3) throw std::invalid_argument("NuParams: b out of [-6,3]");
    if (sPrime < 0 || sPrime > 9) throw std::invalid_argument("NuParams: sPrime out of [0,9]");
    if (alpha < 0 || alpha > 2) throw std::invalid_argument("NuParams: alpha out of [0,2]");
}

ShiftSequence::ShiftSequence(int m, std::map<int, long long> tau) : m_(m), tau_(std::move(tau)) {
    if (m < 0) throw std::invalid_argument("ShiftSequence: m < 0");
    const long long hi = 1LL << m;
    for (const auto& [s, t] : tau_) {
        long long a = t < 0 ? -t : t;
        // m = 0 reads 1/2 <= |tau| <= 1, so |tau| = 1.
        bool ok = (m == 0) ? a == 1 : (2 * a >= hi && a <= hi);
        if (!ok)
            throw std::invalid_argument("ShiftSequence: |tau_" + std::to_string(s) + "| = " +
                                        std::to_string(a) + " violates 2^{m-1} <= |tau| <= 2^m");
    }
}

ShiftSequence ShiftSequence::constant(int m, int sMin, int sMax, int sign) {
    std::map<int, long long> tau;
    for (int s = sMin; s <= sMax; ++s) tau[s] = (sign < 0 ? -1 : 1) * (1LL << m);
    return {m, std::move(tau)};
}

long long ShiftSequence::at(int s) const {
    auto it = tau_.find(s);
    if (it == tau_.end()) throw std::out_of_range("ShiftSequence: scale " + std::to_string(s) + " outside domain");
    return it->second;
}

RInterval DyadicInterval::to_interval() const {
    Rational w = Rational::pow2(scale);
    return {w * Rational(index), w * Rational(index + 1)};
}

DyadicInterval DyadicInterval::parent() const {
    return {scale + 1, index >> 1};
}

bool DyadicInterval::subset_of(const DyadicInterval& o) const {
    if (o.scale < scale) return false;
    int d = o.scale - scale;
    if (d >= 62) return false;
    long long idx = index >> d;  // arithmetic shift floors
    return idx == o.index;
}

long long TriTile::comp_v(int k) const {
    switch (k) {
        case 1: return v - tau;
        case 2: return v + tau;
        case 3: return v;
        default: throw std::out_of_range("component index");
    }
}

long long TriTile::comp_l(int k) const {
    switch (k) {
        case 1: return l;
        case 2: return l - nu.a;
        case 3: return 2 * l - nu.a - nu.b;
        default: throw std::out_of_range("component index");
    }
}

TriTile make_tritile(const NuParams& nu, const ShiftSequence& shifts, int s, long long v, long long l) {
    nu.validate();
    if (floor_mod(s - nu.sPrime, 10) != 0)
        throw CongruenceError("make_tritile: s = " + std::to_string(s) + " violates s = sPrime (mod 10)");
    if (mod3(l - nu.alpha) != 0)
        throw CongruenceError("make_tritile: l = " + std::to_string(l) + " violates l = alpha (mod 3)");
    if (!shifts.has(s)) throw std::out_of_range("make_tritile: scale " + std::to_string(s) + " outside shift domain");

    TriTile t{.p = {Tile{RInterval(0, 1), RInterval(0, 1)}, Tile{RInterval(0, 1), RInterval(0, 1)},
                    Tile{RInterval(0, 1), RInterval(0, 1)}},
              .scale = s, .v = v, .l = l, .tau = shifts.at(s), .nu = nu};
    const Rational w = Rational::pow2(s);
    const Rational iw = Rational::pow2(-s);
    for (int k = 1; k <= 3; ++k) {
        Rational tl = w * Rational(t.comp_v(k));
        Rational fl = iw * Rational(t.comp_l(k), 3);
        t.p[k - 1] = Tile{RInterval(tl, tl + w), RInterval(fl, fl + iw)};
    }
    return t;
}

std::vector<TriTile> enumerate_family(const NuParams& nu, const ShiftSequence& shifts,
                                      const RInterval& timeWindow, int sMin, int sMax,
                                      const EnumerationCaps& caps) {
    std::vector<TriTile> out;
    for (int s = sMin; s <= sMax; ++s) {
        if (floor_mod(s - nu.sPrime, 10) != 0 || !shifts.has(s)) continue;
        const Rational w = Rational::pow2(s);
        // I_{p3} = 2^s [v, v+1) meets [L, R) iff v in (L/2^s - 1, R/2^s).
        mpz_class lo = (timeWindow.left() / w).floor();
        Rational rq = timeWindow.right() / w;
        mpz_class hi = rq.floor();
        if (Rational(mpq_class(hi)) == rq) hi -= 1;
        for (long long v = lo.get_si(); v <= hi.get_si(); ++v) {
            long long l0 = -caps.freqCap;
            while (mod3(l0 - nu.alpha) != 0) ++l0;
            for (long long l = l0; l <= caps.freqCap; l += 3) out.push_back(make_tritile(nu, shifts, s, v, l));
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::optional<int> grid_membership(const RInterval& interval) {
    auto e = log2_exact(interval.length());
    if (!e) return std::nullopt;
    int s = -*e;  // length 2^{-s}
    Rational x = interval.left() * Rational::pow2(s);
    Rational frac = x - Rational(mpq_class(x.floor()));
    Rational three = frac * Rational(3);
    if (three.den() != 1) return std::nullopt;
    long long d = three.num().get_si();
    long long delta = (s % 2 == 0) ? d : -d;
    return static_cast<int>(mod3(delta));
}

int predicted_grid_label(const NuParams& nu, int k) {
    long long eps = (nu.sPrime % 2 == 0) ? 1 : -1;
    long long base = 0;
    switch (k) {
        case 1: base = nu.alpha; break;
        case 2: base = nu.alpha - nu.a; break;
        case 3: base = 2 * nu.alpha - nu.a - nu.b; break;
        default: throw std::out_of_range("component index");
    }
    return static_cast<int>(mod3(eps * base));
}

bool sparse_scale_check(const RInterval& w, const RInterval& wPrime) {
    if (!w.strict_subset_of(wPrime)) return true;
    return w.length() <= Rational::pow2(-10) * wPrime.length();
}

bool is_tree(const std::vector<TriTile>& tiles, int i, int j, const RInterval& top, const Rational& xi) {
    for (const auto& t : tiles) {
        if (!t.comp(i).freq.dilate(Rational(3)).contains(xi)) return false;
        if (!t.comp(j).time.subset_of(top)) return false;
    }
    return true;
}

Rational lacunary_witness(int i, int iPrime, const Rational& xiT) {
    if (i == iPrime) throw std::invalid_argument("lacunary_witness: iPrime equals i");
    if (iPrime == 3) return xiT * Rational(2);
    if (i == 3) return xiT / Rational(2);
    return xiT;
}

Rational literal_witness(int iPrime, const Rational& xiT) {
    return iPrime == 3 ? xiT * Rational(2) : xiT;
}

bool in_lacunary_band(const Rational& x, const RInterval& w) {
    return w.dilate(Rational(50)).contains(x) && !w.dilate(Rational(2)).contains(x);
}

Rational lacunary_frequency(const Tree& tree, int iPrime) {
    if (tree.tiles.empty()) throw std::invalid_argument("lacunary_frequency: empty tree");
    Rational w = lacunary_witness(tree.i, iPrime, tree.xi);
    for (const auto& t : tree.tiles) {
        if (!in_lacunary_band(w, t.comp(iPrime).freq)) {
            std::ostringstream os;
            os << "lacunary_frequency: witness " << w.str() << " outside 50w\\2w for tile (s=" << t.scale
               << ", v=" << t.v << ", l=" << t.l << ", a=" << t.nu.a << ", b=" << t.nu.b << ")";
            throw LacunaryViolation(os.str(), t);
        }
    }
    return w;
}

namespace {

// Image of [lo, hi) under x -> c x for c > 0.
RInterval scale_interval(const RInterval& iv, const Rational& c) { return {iv.left() * c, iv.right() * c}; }

bool band_contains(const RInterval& img, const RInterval& w) {
    RInterval big = w.dilate(Rational(50));
    RInterval small = w.dilate(Rational(2));
    if (!img.subset_of(big)) return false;
    // img must avoid [small.left, small.right): lies entirely left or right of it.
    return img.right() <= small.left() || img.left() >= small.right();
}

Rational witness_scale(int i, int iPrime, bool literal) {
    if (iPrime == 3) return Rational(2);
    if (i == 3 && !literal) return Rational(1, 2);
    return Rational(1);
}

}  // namespace

LacunaritySweep lacunarity_sweep() {
    LacunaritySweep r;
    for (int sPrime = 0; sPrime <= 1; ++sPrime) {
        for (int a = 21; a <= 30; ++a) {
            for (int b = -6; b <= 3; ++b) {
                NuParams nu{a, b, sPrime, 0};
                auto shifts = ShiftSequence::constant(0, sPrime, sPrime);
                TriTile t = make_tritile(nu, shifts, sPrime, 0, 0);
                for (int i = 1; i <= 3; ++i) {
                    RInterval range = t.comp(i).freq.dilate(Rational(3));
                    for (int ip = 1; ip <= 3; ++ip) {
                        if (ip == i) continue;
                        ++r.cases;
                        const RInterval& w = t.comp(ip).freq;
                        if (!band_contains(scale_interval(range, witness_scale(i, ip, false)), w)) {
                            ++r.violations;
                            if (r.firstViolations.size() < 8)
                                r.firstViolations.push_back("a=" + std::to_string(a) + " b=" + std::to_string(b) +
                                                            " i=" + std::to_string(i) + " i'=" + std::to_string(ip));
                        }
                        if (!band_contains(scale_interval(range, witness_scale(i, ip, true)), w)) ++r.literalViolations;
                    }
                }
            }
        }
    }
    return r;
}

bool prep_inclusion(const RInterval& probe, const Rational& c) {
    RInterval w(-c, Rational(1) - c);
    return band_contains(probe, w);
}

bool strongly_disjoint(const std::vector<Tree>& trees, int k) {
    if (trees.empty()) return true;
    const int i = trees.front().i;
    const int j = trees.front().j;
    for (const auto& t : trees)
        if (t.i != i || t.j != j) throw std::invalid_argument("strongly_disjoint: trees of mixed type");
    if (i == k) throw std::invalid_argument("strongly_disjoint: need i != k");
    for (std::size_t a = 0; a < trees.size(); ++a) {
        for (std::size_t b = 0; b < trees.size(); ++b) {
            if (a == b) continue;
            const Tree& T = trees[a];
            const Tree& U = trees[b];
            for (const auto& p : T.tiles)
                for (const auto& q : U.tiles)
                    if (p.comp(k).freq.strict_subset_of(q.comp(k).freq) && q.comp(j).time.subset_of(T.top))
                        return false;
        }
    }
    return true;
}

void write_tritiles(std::ostream& os, const std::vector<TriTile>& tiles) {
    for (const auto& t : tiles)
        os << t.nu.a << ' ' << t.nu.b << ' ' << t.nu.sPrime << ' ' << t.nu.alpha << ' ' << t.scale << ' ' << t.v << ' '
           << t.l << ' ' << t.tau << '\n';
}

std::vector<TriTile> read_tritiles(std::istream& is) {
    std::vector<TriTile> out;
    std::string line;
    int lineNo = 0;
    while (std::getline(is, line)) {
        ++lineNo;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        NuParams nu;
        int s = 0;
        long long v = 0, l = 0, tau = 0;
        if (!(ls >> nu.a >> nu.b >> nu.sPrime >> nu.alpha >> s >> v >> l >> tau))
            throw std::runtime_error("read_tritiles: malformed line " + std::to_string(lineNo));
        // Rebuilding through make_tritile re-validates every invariant.
        int m = 0;
        long long a = tau < 0 ? -tau : tau;
        while ((1LL << m) < a) ++m;
        ShiftSequence shifts(m, {{s, tau}});
        out.push_back(make_tritile(nu, shifts, s, v, l));
    }
    return out;
}

}  // namespace tfa
