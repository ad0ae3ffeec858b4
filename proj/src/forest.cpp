#include "tfa/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

namespace tfa {

namespace {

constexpr double kPi = std::numbers::pi;

cplx unit(double t) { return std::polar(1.0, 2.0 * kPi * t); }

void check_index(int k, const char* who) {
    if (k < 1 || k > 3) throw std::invalid_argument(std::string(who) + ": component index must be 1, 2 or 3");
}

bool power_of_two(const mpz_class& z) { return z > 0 && (z & (z - 1)) == 0; }

bool is_dyadic(const RInterval& iv) {
    const Rational len = iv.length();
    if (!power_of_two(len.num()) || !power_of_two(len.den())) return false;
    return (iv.left() / len).den() == 1;
}

long long mod3(long long x) { return ((x % 3) + 3) % 3; }

// Exact integer coordinates r * D for a finite set of rationals.
class Lattice {
public:
    explicit Lattice(const std::vector<Rational>& values) : D_(1) {
        for (const auto& r : values) D_ = lcm(D_, r.den());
    }
    long long to_int(const Rational& r) const {
        mpz_class z = r.num() * (D_ / r.den());
        if (!z.fits_slong_p() || abs(z) > mpz_class(1L << 60))
            throw std::overflow_error("frequency lattice exceeds 64-bit range");
        return z.get_si();
    }
    Rational to_rational(const mpz_class& twiceNum) const {
        return Rational(mpq_class(twiceNum, D_ * 2));
    }

private:
    mpz_class D_;
};

// Dyadic tops above the j-intervals of a family, numbered once.
struct TopIndex {
    int cap = 0;
    std::vector<DyadicInterval> tops;
    std::vector<std::vector<int>> anc;  // per tile, own interval first
    std::map<std::pair<int, long long>, int> id;

    TopIndex(const std::vector<TriTile>& tiles, int j) {
        if (tiles.empty()) return;
        Rational maxAbs(0);
        cap = tiles.front().scale;
        for (const auto& t : tiles) {
            const auto& iv = t.comp(j).time;
            for (const Rational& e : {iv.left(), iv.right()}) {
                Rational a = e < Rational(0) ? -e : e;
                if (a > maxAbs) maxAbs = a;
            }
            cap = std::max(cap, t.scale);
        }
        while (Rational::pow2(cap) < maxAbs * Rational(2)) ++cap;
        anc.resize(tiles.size());
        for (std::size_t n = 0; n < tiles.size(); ++n) {
            const int s = tiles[n].scale;
            const long long v = tiles[n].comp_v(j);
            if (cap - s >= 62) throw std::overflow_error("tree tops span too many scales");
            for (int L = s; L <= cap; ++L) {
                const long long idx = v >> (L - s);
                auto [it, fresh] = id.try_emplace({L, idx}, static_cast<int>(tops.size()));
                if (fresh) tops.push_back({L, idx});
                anc[n].push_back(it->second);
            }
        }
    }
};

// Candidate central frequencies: every breakpoint x (position 2x) and the open gap to its right (2x + 1).
struct Sweep {
    std::vector<long long> breaks;
    std::vector<long long> start, end;  // membership [start, end) in positions
    std::vector<long long> positions;

    void finish() {
        std::sort(breaks.begin(), breaks.end());
        breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
        positions.clear();
        for (long long b : breaks) {
            positions.push_back(2 * b);
            positions.push_back(2 * b + 1);
        }
    }

    mpz_class position_value(long long pos) const {
        if (pos % 2 == 0) return mpz_class(static_cast<long>(pos));
        const long long x = (pos - 1) / 2;
        auto it = std::upper_bound(breaks.begin(), breaks.end(), x);
        const long long next = it == breaks.end() ? x + 1 : *it;
        // midpoint (x + next)/2 as twice-value x + next
        return mpz_class(static_cast<long>(x)) + mpz_class(static_cast<long>(next));
    }
};

// Accumulated energy per top at one candidate position.
struct Accumulator {
    std::vector<double> sum;
    std::vector<int> count;
    std::vector<int> touched;

    explicit Accumulator(std::size_t n) : sum(n, 0.0), count(n, 0) {}

    void add(const std::vector<int>& ids, double e) {
        for (int id : ids) {
            if (count[id] == 0) touched.push_back(id);
            sum[id] += e;
            ++count[id];
        }
    }
    void reset() {
        for (int id : touched) {
            sum[id] = 0.0;
            count[id] = 0;
        }
        touched.clear();
    }
};

Sweep tree_sweep(const std::vector<TriTile>& tiles, int i, Lattice& lat) {
    Sweep sw;
    for (const auto& t : tiles) {
        const RInterval w3 = t.comp(i).freq.dilate(Rational(3));
        const long long lo = lat.to_int(w3.left()), hi = lat.to_int(w3.right());
        sw.breaks.push_back(lo);
        sw.breaks.push_back(hi);
        sw.start.push_back(2 * lo);
        sw.end.push_back(2 * hi);
    }
    sw.finish();
    return sw;
}

std::vector<Rational> tree_values(const std::vector<TriTile>& tiles, int i) {
    std::vector<Rational> vals;
    for (const auto& t : tiles) {
        const RInterval w3 = t.comp(i).freq.dilate(Rational(3));
        vals.push_back(w3.left());
        vals.push_back(w3.right());
    }
    return vals;
}

}  // namespace

// ---------------------------------------------------------------- atoms

cplx AtomSignal::operator()(double x) const {
    cplx acc{};
    for (const auto& a : atoms) {
        const double y = (x - a.center) / a.width;
        acc += a.amp * unit(a.freq * x) * std::exp(-kPi * y * y);
    }
    return acc;
}

cplx AtomSignal::hat(double xi) const {
    cplx acc{};
    for (const auto& a : atoms) {
        const double d = xi - a.freq;
        acc += a.amp * a.width * std::exp(-kPi * a.width * a.width * d * d) * unit(-d * a.center);
    }
    return acc;
}

double AtomSignal::norm2() const {
    cplx acc{};
    for (const auto& a : atoms) {
        for (const auto& b : atoms) {
            const double ia = 1.0 / (a.width * a.width), ib = 1.0 / (b.width * b.width);
            const double A = kPi * (ia + ib);
            const cplx B(2.0 * kPi * (a.center * ia + b.center * ib), 2.0 * kPi * (a.freq - b.freq));
            const double C = -kPi * (a.center * a.center * ia + b.center * b.center * ib);
            acc += a.amp * std::conj(b.amp) * std::sqrt(kPi / A) * std::exp(B * B / (4.0 * A) + C);
        }
    }
    return acc.real();
}

FourierFn AtomSignal::fourier() const {
    auto self = *this;
    return [self](double xi) { return self.hat(xi); };
}

namespace {

cplx atom_packet(const AtomSignal::Atom& a, const WindowRho& w, int s, long long v, long long l) {
    const double dil = std::ldexp(1.0, -s);  // xi = dil (u + l/3)
    const double third = static_cast<double>(l) / 3.0;
    const double uStar = a.freq / dil - third;
    const double reach = 3.7 / (a.width * dil);
    const double lo = std::max(w.lo(), uStar - reach), hi = std::min(w.hi(), uStar + reach);
    if (!(lo < hi)) return {};
    const double beta = static_cast<double>(v) - dil * a.center;
    auto f = [&](double u) {
        const double d = dil * (u + third) - a.freq;
        // phase -d c + v u, reduced before the exponential
        const double turns = static_cast<double>(v) * u - d * a.center;
        return a.amp * a.width * std::exp(-kPi * a.width * a.width * d * d) * w.hat(u) *
               unit(turns - std::floor(turns));
    };
    int M = 16;
    while (M < 4.0 * (std::abs(beta) + a.width * dil + 1.0) * (hi - lo)) M *= 2;
    auto trap = [&](int n, double& absSum) {
        const double h = (hi - lo) / n;
        cplx acc = 0.5 * (f(lo) + f(hi));
        absSum = std::abs(acc);
        for (int k = 1; k < n; ++k) {
            const cplx t = f(lo + k * h);
            acc += t;
            absSum += std::abs(t);
        }
        absSum *= h;
        return acc * h;
    };
    double a0 = 0.0;
    cplx prev = trap(M, a0);
    for (int it = 0; it < 10; ++it) {
        M *= 2;
        double a1 = 0.0;
        const cplx cur = trap(M, a1);
        if (std::abs(cur - prev) <= 1e-13 * std::abs(cur) || std::abs(cur - prev) <= 1e-13 * a1) return cur;
        prev = cur;
    }
    return prev;
}

}  // namespace

PacketFn AtomSignal::packets(std::shared_ptr<const WindowRho> w) const {
    auto self = *this;
    return [self, w](int s, long long v, long long l) {
        cplx acc{};
        for (const auto& a : self.atoms) acc += atom_packet(a, *w, s, v, l);
        const long long ph = ((v % 3) * (((l % 3) + 3) % 3) % 3 + 3) % 3;
        return acc * std::pow(2.0, -0.5 * s) * unit(static_cast<double>(ph) / 3.0);
    };
}

GridSignal AtomSignal::sample(int q, double x0, std::size_t n) const {
    return GridSignal::from_function(q, x0, n, [this](double x) { return (*this)(x); });
}

AtomSignal AtomSignal::random(std::mt19937_64& rng, int count, double xLo, double xHi, double fLo, double fHi,
                              double wLo, double wHi) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    AtomSignal s;
    for (int n = 0; n < count; ++n) {
        Atom a;
        a.amp = std::polar(0.5 + 0.5 * u(rng), 2.0 * kPi * u(rng));
        a.center = xLo + (xHi - xLo) * u(rng);
        a.freq = fLo + (fHi - fLo) * u(rng);
        a.width = wLo + (wHi - wLo) * u(rng);
        s.atoms.push_back(a);
    }
    return s;
}

// ---------------------------------------------------------------- sizes

std::vector<double> tile_energies(const std::vector<TriTile>& tiles, const PacketFn& f, int k) {
    check_index(k, "tile_energies");
    std::vector<double> e;
    e.reserve(tiles.size());
    for (const auto& t : tiles) e.push_back(std::norm(f(t.scale, t.comp_v(k), t.comp_l(k))));
    return e;
}

SizeResult size_detail(const std::vector<TriTile>& family, const std::vector<double>& energy, int i, int j, int k) {
    check_index(i, "size");
    check_index(j, "size");
    check_index(k, "size");
    if (energy.size() != family.size()) throw std::invalid_argument("size: energy table does not match family");
    SizeResult best;
    if (family.empty()) return best;

    if (i == k) {
        for (std::size_t n = 0; n < family.size(); ++n) {
            const double v = std::sqrt(std::ldexp(energy[n], -family[n].scale));
            if (v > best.value) best = {v, Rational(0), family[n].dyadic_time(j), 1};
        }
        return best;
    }

    Lattice lat(tree_values(family, i));
    Sweep sw = tree_sweep(family, i, lat);
    TopIndex tops(family, j);
    Accumulator acc(tops.tops.size());
    for (long long pos : sw.positions) {
        for (std::size_t n = 0; n < family.size(); ++n)
            if (sw.start[n] <= pos && pos < sw.end[n]) acc.add(tops.anc[n], energy[n]);
        for (int id : acc.touched) {
            const double v = std::sqrt(std::ldexp(acc.sum[id], -tops.tops[id].scale));
            if (v > best.value) {
                best.value = v;
                best.xi = lat.to_rational(sw.position_value(pos));
                best.top = tops.tops[id];
                best.members = static_cast<std::size_t>(acc.count[id]);
            }
        }
        acc.reset();
    }
    return best;
}

double size(const std::vector<TriTile>& family, const std::vector<double>& energy, int i, int j, int k) {
    return size_detail(family, energy, i, j, k).value;
}

double size(const std::vector<TriTile>& family, const PacketFn& f, int i, int j, int k) {
    return size(family, tile_energies(family, f, k), i, j, k);
}

TreeBound single_tree_bound(const Tree& tree, const PacketFn& f1, const PacketFn& f2, const PacketFn& f3) {
    TreeBound r;
    if (tree.tiles.empty()) return r;
    if (!is_dyadic(tree.top)) throw std::invalid_argument("single_tree_bound: top interval is not dyadic");
    if (!is_tree(tree.tiles, tree.i, tree.j, tree.top, tree.xi))
        throw std::invalid_argument("single_tree_bound: tiles do not form a tree with the given top and frequency");

    const PacketFn* fs[3] = {&f1, &f2, &f3};
    std::vector<std::vector<cplx>> c(3);
    double unitProduct = 1.0;
    for (int k = 1; k <= 3; ++k) {
        double peak = 0.0;
        for (const auto& p : tree.tiles) {
            c[k - 1].push_back((*fs[k - 1])(p.scale, p.comp_v(k), p.comp_l(k)));
            peak = std::max(peak, std::abs(c[k - 1].back()));
        }
        if (peak == 0.0) return r;  // every term vanishes
        // normalize each component so tiny coefficients do not underflow when squared
        for (auto& x : c[k - 1]) x /= peak;
        unitProduct *= peak;
    }
    cplx lhs{};
    std::vector<std::vector<double>> e(3);
    for (std::size_t n = 0; n < tree.tiles.size(); ++n) {
        cplx prod(std::pow(2.0, -0.5 * tree.tiles[n].scale), 0.0);
        for (int k = 1; k <= 3; ++k) {
            prod *= c[k - 1][n];
            e[k - 1].push_back(std::norm(c[k - 1][n]));
        }
        lhs += prod;
    }
    double rhs = tree.top.length().to_double();
    for (int k = 1; k <= 3; ++k) rhs *= size(tree.tiles, e[k - 1], tree.i, tree.j, k);
    r.ratio = std::abs(lhs) / rhs;
    r.lhs = std::abs(lhs) * unitProduct;
    r.rhs = rhs * unitProduct;
    if (r.ratio > 1.0 + 1e-12) {
        std::ostringstream os;
        os << "single_tree_bound: lhs " << r.lhs << " exceeds size product " << r.rhs << " (ratio " << r.ratio << ")";
        throw FalsificationError(os.str());
    }
    return r;
}

// ---------------------------------------------------------------- selection

std::vector<Tree> TreeSelection::collection(int iPrime, bool above) const {
    std::vector<Tree> out;
    for (const auto& p : picks)
        if (p.tree.i == iPrime && p.above == above) out.push_back(p.tree);
    return out;
}

std::vector<Tree> TreeSelection::central() const {
    std::vector<Tree> out;
    for (const auto& p : picks)
        if (!p.companion.tiles.empty()) out.push_back(p.companion);
    return out;
}

std::vector<TriTile> TreeSelection::selected_tiles() const {
    std::vector<TriTile> out;
    for (const auto& p : picks) {
        out.insert(out.end(), p.tree.tiles.begin(), p.tree.tiles.end());
        out.insert(out.end(), p.companion.tiles.begin(), p.companion.tiles.end());
    }
    return out;
}

double TreeSelection::support() const {
    double s = 0.0;
    for (const auto& p : picks) s += p.tree.top.length().to_double();
    return s;
}

namespace {

struct Selector {
    const std::vector<TriTile>& fam;
    const std::vector<double>& e;
    int k, j;
    double lambda;
    std::vector<char> alive;
    TopIndex tops;
    TreeSelection& out;
    int step = 0;

    Selector(const std::vector<TriTile>& f, const std::vector<double>& en, int k_, int j_, double lam,
             TreeSelection& o)
        : fam(f), e(en), k(k_), j(j_), lambda(lam), alive(f.size(), 1), tops(f, j_), out(o) {}

    // Returns false when no tree of this kind meets the selection criterion.
    bool pick(int ip, bool above) {
        const Rational factor = lacunary_witness(ip, k, Rational(1));
        std::vector<Rational> vals = tree_values(fam, ip);
        std::vector<Rational> thr;
        for (const auto& t : fam) {
            thr.push_back(t.comp(k).freq.center() / factor);
            vals.push_back(thr.back());
        }
        Lattice lat(vals);
        Sweep sw = tree_sweep(fam, ip, lat);
        for (std::size_t n = 0; n < fam.size(); ++n) {
            const long long t = lat.to_int(thr[n]);
            sw.breaks.push_back(t);
            if (above) sw.start[n] = std::max(sw.start[n], 2 * t + 1);
            else sw.end[n] = std::min(sw.end[n], 2 * t);
        }
        sw.finish();
        if (!above) std::reverse(sw.positions.begin(), sw.positions.end());

        const double crit = 0.5 * lambda * lambda;
        Accumulator acc(tops.tops.size());
        for (long long pos : sw.positions) {
            for (std::size_t n = 0; n < fam.size(); ++n)
                if (alive[n] && sw.start[n] <= pos && pos < sw.end[n]) acc.add(tops.anc[n], e[n]);
            std::vector<int> good;
            for (int id : acc.touched)
                if (acc.sum[id] > std::ldexp(crit, tops.tops[id].scale)) good.push_back(id);
            if (good.empty()) {
                acc.reset();
                continue;
            }
            // keep the inclusion maximal member sets
            std::vector<int> maximal;
            for (int id : good) {
                const DyadicInterval d = tops.tops[id];
                bool dominated = false;
                for (int L = d.scale + 1; L <= tops.cap && !dominated; ++L) {
                    auto it = tops.id.find({L, d.index >> (L - d.scale)});
                    if (it == tops.id.end()) continue;
                    const int a = it->second;
                    if (acc.count[a] > acc.count[id] && acc.sum[a] > std::ldexp(crit, L)) dominated = true;
                }
                if (!dominated) maximal.push_back(id);
            }
            std::sort(maximal.begin(), maximal.end(), [&](int x, int y) {
                const RInterval a = tops.tops[x].to_interval(), b = tops.tops[y].to_interval();
                if (a.left() != b.left()) return a.left() < b.left();
                return a.length() < b.length();
            });
            const DyadicInterval top = tops.tops[maximal.front()];
            acc.reset();
            commit(ip, above, top, lat.to_rational(sw.position_value(pos)), sw, pos);
            return true;
        }
        return false;
    }

    void commit(int ip, bool above, const DyadicInterval& top, const Rational& xi, const Sweep& sw, long long pos) {
        SelectedTree st;
        st.above = above;
        st.tree.i = ip;
        st.tree.j = j;
        st.tree.top = top.to_interval();
        st.tree.xi = xi;
        for (std::size_t n = 0; n < fam.size(); ++n) {
            if (!alive[n] || !(sw.start[n] <= pos && pos < sw.end[n])) continue;
            if (!fam[n].dyadic_time(j).subset_of(top)) continue;
            st.tree.tiles.push_back(fam[n]);
            st.energy += e[n];
            alive[n] = 0;
        }
        st.xiPrime = lacunary_frequency(st.tree, k);
        st.companion.i = k;
        st.companion.j = j;
        st.companion.top = st.tree.top;
        st.companion.xi = st.xiPrime;
        for (std::size_t n = 0; n < fam.size(); ++n) {
            if (!alive[n]) continue;
            if (!fam[n].comp(k).freq.dilate(Rational(3)).contains(st.xiPrime)) continue;
            if (!fam[n].comp(j).time.subset_of(st.tree.top)) continue;
            st.companion.tiles.push_back(fam[n]);
            st.companionEnergy += e[n];
            alive[n] = 0;
        }
        ++step;
        const Rational left = st.tree.top.left(), len = st.tree.top.length();
        out.log.push_back({step, ip, above ? ">" : "<", st.tree.xi, left, len, st.tree.tiles.size(), st.energy});
        out.log.push_back({step, k, "S", st.companion.xi, left, len, st.companion.tiles.size(), st.companionEnergy});
        out.picks.push_back(std::move(st));
    }
};

std::string size_name(int i, int j, int k) {
    return "size_{" + std::to_string(i) + "," + std::to_string(j) + "," + std::to_string(k) + "}";
}

}  // namespace

TreeSelection select_trees(const std::vector<TriTile>& family, const std::vector<double>& energy, int k, int j,
                           double lambda, const SelectOptions& opt) {
    check_index(k, "select_trees");
    check_index(j, "select_trees");
    if (!(lambda > 0.0)) throw std::invalid_argument("select_trees: lambda must be positive");
    if (energy.size() != family.size()) throw std::invalid_argument("select_trees: energy table does not match family");
    if (opt.checkPrecondition) {
        for (int i = 1; i <= 3; ++i) {
            const double s = size(family, energy, i, j, k);
            if (s > 2.0 * lambda) {
                std::ostringstream os;
                os << "select_trees: " << size_name(i, j, k) << " = " << s << " exceeds 2 lambda = " << 2.0 * lambda;
                throw PreconditionError(os.str());
            }
        }
    }
    TreeSelection out;
    out.k = k;
    out.j = j;
    out.lambda = lambda;
    Selector sel(family, energy, k, j, lambda, out);
    for (int ip = 1; ip <= 3; ++ip) {
        if (ip == k) continue;
        while (sel.pick(ip, true)) {}
        while (sel.pick(ip, false)) {}
    }
    std::vector<double> restE;
    for (std::size_t n = 0; n < family.size(); ++n) {
        if (!sel.alive[n]) continue;
        out.residual.push_back(family[n]);
        restE.push_back(energy[n]);
    }
    if (opt.checkPostcondition) {
        for (int i = 1; i <= 3; ++i) {
            const double s = size(out.residual, restE, i, j, k);
            if (s > lambda * (1.0 + 1e-12)) {
                std::ostringstream os;
                os << "select_trees: residual " << size_name(i, j, k) << " = " << s << " exceeds lambda = " << lambda;
                throw FalsificationError(os.str());
            }
        }
        for (int ip = 1; ip <= 3; ++ip) {
            if (ip == k) continue;
            for (bool above : {true, false})
                if (!strongly_disjoint(out.collection(ip, above), k))
                    throw FalsificationError("select_trees: selected trees are not strongly disjoint");
        }
    }
    return out;
}

TreeSelection select_trees(const std::vector<TriTile>& family, const PacketFn& fk, int k, int j, double lambda,
                           const SelectOptions& opt) {
    return select_trees(family, tile_energies(family, fk, k), k, j, lambda, opt);
}

void write_selection_trace(std::ostream& os, const TreeSelection& sel) {
    os << "step,iPrime,direction,xiT,topLeft,topLen,numTiles,energy\n";
    const auto prec = os.precision(17);
    for (const auto& r : sel.log)
        os << r.step << ',' << r.iPrime << ',' << r.direction << ',' << r.xi.str() << ',' << r.topLeft.str() << ','
           << r.topLen.str() << ',' << r.numTiles << ',' << r.energy << '\n';
    os.precision(prec);
}

double bessel_ratio(const std::vector<Tree>& trees, const PacketFn& f, double fNorm2, int k, double lambda) {
    check_index(k, "bessel_ratio");
    if (trees.empty()) return 0.0;
    if (!(fNorm2 > 0.0) || !(lambda > 0.0)) throw std::invalid_argument("bessel_ratio: need positive norm and lambda");
    if (!strongly_disjoint(trees, k)) throw PreconditionError("bessel_ratio: trees are not pairwise strongly disjoint");
    double total = 0.0;
    for (const auto& T : trees) {
        const std::vector<double> e = tile_energies(T.tiles, f, k);
        double sum = 0.0;
        for (std::size_t n = 0; n < e.size(); ++n) {
            if (e[n] > 4.0 * lambda * lambda * std::ldexp(1.0, T.tiles[n].scale) * (1.0 + 1e-12))
                throw PreconditionError("bessel_ratio: tile energy exceeds 4 lambda^2 |I|");
            sum += e[n];
        }
        const double len = T.top.length().to_double();
        if (sum < 0.5 * lambda * lambda * len * (1.0 - 1e-12))
            throw PreconditionError("bessel_ratio: tree energy below lambda^2 |I_T| / 2");
        total += len;
    }
    return total * lambda * lambda / fNorm2;
}

// ---------------------------------------------------------------- exceptional sets

double GridSet::measure() const {
    return static_cast<double>(std::count(in.begin(), in.end(), 1)) * step();
}

std::vector<std::pair<double, double>> GridSet::runs() const {
    std::vector<std::pair<double, double>> out;
    const double h = step();
    std::size_t n = 0;
    while (n < in.size()) {
        if (!in[n]) {
            ++n;
            continue;
        }
        std::size_t m = n;
        while (m < in.size() && in[m]) ++m;
        out.push_back({x0 + static_cast<double>(n) * h, x0 + static_cast<double>(m) * h});
        n = m;
    }
    return out;
}

std::vector<double> GridSet::indicator() const { return {in.begin(), in.end()}; }

namespace {

long long cell_origin(int q, double x0) {
    const double a = std::ldexp(x0, q);
    if (a != std::floor(a)) throw std::invalid_argument("grid origin is not a multiple of the step");
    return static_cast<long long>(a);
}

}  // namespace

GridSet random_grid_set(std::mt19937_64& rng, int q, double x0, std::size_t n, double lo, double hi, double measure,
                        int pieces) {
    GridSet E(q, x0, n);
    const double h = E.step();
    const long long first = std::max<long long>(0, std::llround((lo - x0) / h));
    const long long last = std::min<long long>(static_cast<long long>(n), std::llround((hi - x0) / h));
    const long long target = std::llround(measure / h);
    if (target > last - first) throw std::invalid_argument("random_grid_set: measure exceeds the window");
    if (pieces < 1) pieces = 1;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    long long count = 0;
    while (count < target) {
        const long long len = std::max<long long>(1, std::llround((0.5 + u(rng)) * static_cast<double>(target) / pieces));
        const long long span = std::max<long long>(1, last - first - len + 1);
        const long long at = first + static_cast<long long>(u(rng) * static_cast<double>(span));
        for (long long c = at; c < std::min(at + len, last) && count < target; ++c)
            if (!E.in[c]) {
                E.in[c] = 1;
                ++count;
            }
    }
    return E;
}

std::vector<double> exceptional_profile(const GridSet& E1, const GridSet& E2, const ShiftSequence& shifts,
                                        const ExceptionalParams& prm) {
    if (E1.q != E2.q || E1.x0 != E2.x0 || E1.size() != E2.size())
        throw std::invalid_argument("exceptional_set: sets live on different grids");
    if (E1.measure() > E2.measure()) throw PreconditionError("exceptional_set: need |E1| <= |E2|");
    std::vector<double> crit(E1.size(), 0.0);
    const double mEff = std::max(shifts.m(), 1);
    const GridSet* sets[2] = {&E1, &E2};
    for (int kk = 0; kk < 2; ++kk) {
        const GridSet& E = *sets[kk];
        const double meas = E.measure();
        if (meas == 0.0) continue;
        const double q = kk == 0 ? 1.0 : 2.0;
        const std::vector<double> ind = E.indicator();
        // M^q 1_E = (M 1_E)^{1/q} > C0 (c |E|)^{1/q}  iff  C0 < (M 1_E / (c |E|))^{1/q}
        auto raise = [&](const std::vector<double>& M, double base) {
            for (std::size_t n = 0; n < M.size(); ++n)
                if (M[n] > 0.0) crit[n] = std::max(crit[n], std::pow(M[n] / base, 1.0 / q));
        };
        raise(shifted_maximal_grid(ind, E.q, prm.sMin, prm.sMax, nullptr, 1.0), meas);
        for (int c = -2; c <= 2; ++c)
            raise(shifted_maximal_grid(ind, E.q, prm.sMin, prm.sMax, &shifts, c), mEff * meas);
        // small scales: the averages tend to 1 on E
        const double limit = std::pow(1.0 / meas, 1.0 / q);
        for (std::size_t n = 0; n < E.size(); ++n)
            if (E.in[n]) crit[n] = std::max(crit[n], limit);
    }
    return crit;
}

ExceptionalSet exceptional_set(const GridSet& E1, const GridSet& E2, const ShiftSequence& shifts,
                               const ExceptionalParams& prm) {
    const std::vector<double> crit = exceptional_profile(E1, E2, shifts, prm);
    ExceptionalSet F;
    F.cells = GridSet(E1.q, E1.x0, E1.size());
    for (std::size_t n = 0; n < crit.size(); ++n) F.cells.in[n] = crit[n] > prm.C0;
    F.measure = F.cells.measure();
    return F;
}

GridSet enlarge_exceptional(const ExceptionalSet& F) {
    const GridSet& g = F.cells;
    GridSet out(g.q, g.x0, g.size());
    const long long a0 = cell_origin(g.q, g.x0);
    const long long n = static_cast<long long>(g.size());
    // full[d] holds absolute indices of level-d intervals made of grid cells that all lie in F.
    std::vector<std::set<long long>> full(1);
    for (long long c = 0; c < n; ++c)
        if (g.in[c]) full[0].insert(a0 + c);
    while (!full.back().empty()) {
        std::map<long long, int> cnt;
        for (long long idx : full.back()) ++cnt[idx >> 1];
        std::set<long long> next;
        for (auto [idx, c] : cnt)
            if (c == 2) next.insert(idx);
        full.push_back(std::move(next));
    }
    for (std::size_t d = 0; d + 1 < full.size(); ++d) {
        for (long long idx : full[d]) {
            if (full[d + 1].count(idx >> 1)) continue;
            const long long w = 1LL << d;
            for (long long c = (idx - 1) * w; c < (idx + 2) * w; ++c) {
                const long long local = c - a0;
                if (local >= 0 && local < n) out.in[local] = 1;
            }
        }
    }
    return out;
}

GridSet major_subset(const GridSet& E3, const ExceptionalSet& F) {
    if (E3.q != F.cells.q || E3.x0 != F.cells.x0 || E3.size() != F.cells.size())
        throw std::invalid_argument("major_subset: sets live on different grids");
    GridSet tilde = enlarge_exceptional(F);
    GridSet out = E3;
    for (std::size_t n = 0; n < out.size(); ++n)
        if (tilde.in[n]) out.in[n] = 0;
    return out;
}

std::vector<ExceptionalTrial> exceptional_trials(std::mt19937_64& rng, int count, int mMax) {
    constexpr int q = 6;
    constexpr double x0 = -32.0;
    constexpr std::size_t n = 4096;
    const ExceptionalParams prm;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> M(0, mMax), S(0, 1), P(1, 6);
    std::vector<ExceptionalTrial> out;
    for (int t = 0; t < count; ++t) {
        const double m3 = static_cast<double>(33 + static_cast<int>(32.0 * u(rng))) / 64.0;
        const double m2 = m3 * std::pow(2.0, -6.0 * u(rng));
        const double m1 = m2 * std::pow(2.0, -4.0 * u(rng));
        ExceptionalTrial tr;
        tr.E3 = random_grid_set(rng, q, x0, n, 0.0, 2.0, m3, P(rng));
        tr.E2 = random_grid_set(rng, q, x0, n, 0.0, 2.0, m2, P(rng));
        tr.E1 = random_grid_set(rng, q, x0, n, 0.0, 2.0, std::max(m1, 1.0 / 64.0), P(rng));
        if (tr.E1.measure() > tr.E2.measure()) std::swap(tr.E1, tr.E2);
        tr.shifts = ShiftSequence::constant(M(rng), prm.sMin, prm.sMax, S(rng) ? 1 : -1);
        out.push_back(std::move(tr));
    }
    return out;
}

double worst_exceptional_measure(const std::vector<ExceptionalTrial>& trials, const ExceptionalParams& prm) {
    double worst = 0.0;
    for (const auto& t : trials) worst = std::max(worst, exceptional_set(t.E1, t.E2, t.shifts, prm).measure);
    return worst;
}

double calibrate_c0(const std::vector<ExceptionalTrial>& trials, double target) {
    const ExceptionalParams prm;
    double c0 = 0.0;
    for (const auto& t : trials) {
        std::vector<double> crit = exceptional_profile(t.E1, t.E2, t.shifts, prm);
        // |F| = step * #{crit > C0} < target needs at most `allowed` cells above C0
        const double h = t.E1.step();
        auto allowed = static_cast<std::size_t>(std::ceil(target / h)) - 1;
        if (allowed >= crit.size()) continue;
        std::nth_element(crit.begin(), crit.begin() + static_cast<long>(allowed), crit.end(), std::greater<>());
        c0 = std::max(c0, crit[allowed]);
    }
    return c0;
}

// ---------------------------------------------------------------- refined square set

bool SquareSet::contains(const DyadicInterval& I) const {
    for (const auto& J : maximal)
        if (I.subset_of(J)) return true;
    return false;
}

Rational SquareSet::measure() const {
    Rational m(0);
    for (const auto& J : maximal) m += Rational::pow2(J.scale);
    return m;
}

SquareSet refined_square_set(const GridSignal& f, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("refined_square_set: lambda must be positive");
    const long long a0 = cell_origin(f.q, f.x0);
    const double h = f.step();
    std::map<long long, double> level;
    double total = 0.0;
    for (std::size_t n = 0; n < f.size(); ++n) {
        const double v = std::abs(f[n]) * h;
        if (v == 0.0) continue;
        level[a0 + static_cast<long long>(n)] += v;
        total += v;
    }
    // qualifying intervals per level d (length 2^d cells)
    std::vector<std::set<long long>> good;
    for (int d = 0; !level.empty(); ++d) {
        const double len = std::ldexp(h, d);
        if (lambda * len > total) break;
        std::set<long long> g;
        for (auto [idx, s] : level)
            if (s >= lambda * len) g.insert(idx);
        good.push_back(std::move(g));
        std::map<long long, double> up;
        for (auto [idx, s] : level) up[idx >> 1] += s;
        level = std::move(up);
    }
    SquareSet F;
    for (std::size_t d = 0; d < good.size(); ++d) {
        for (long long idx : good[d]) {
            bool covered = false;
            for (std::size_t e = d + 1; e < good.size() && !covered; ++e)
                covered = good[e].count(idx >> (e - d)) != 0;
            if (!covered) F.maximal.push_back({static_cast<int>(d) - f.q, idx});
        }
    }
    std::sort(F.maximal.begin(), F.maximal.end(),
              [](const DyadicInterval& a, const DyadicInterval& b) {
                  return a.to_interval().left() < b.to_interval().left();
              });
    return F;
}

SquareCheck square_set_check(const GridSignal& f, const SquareSet& F, double lambda, const DyadicInterval& K,
                             const std::vector<AdaptedPacket>& packets) {
    SquareCheck r;
    r.rhs = lambda * lambda * std::ldexp(1.0, K.scale);
    for (const auto& p : packets) {
        if (!p.I.subset_of(K) || F.contains(p.I)) continue;
        if (!p.psi.same_grid(f)) throw std::invalid_argument("square_set_check: packet lives on a different grid");
        r.lhs += std::norm(inner(f, p.psi));
        ++r.counted;
    }
    r.pass = r.lhs <= r.rhs * (1.0 + 1e-12);
    return r;
}

// ---------------------------------------------------------------- random families

std::vector<TriTile> random_family(std::mt19937_64& rng, const FamilySpec& spec) {
    if (spec.scales.empty() || spec.anchors.empty()) throw std::invalid_argument("random_family: empty scale or anchor list");
    const auto [sLo, sHi] = std::minmax_element(spec.scales.begin(), spec.scales.end());
    const ShiftSequence shifts = ShiftSequence::constant(spec.m, *sLo, *sHi, spec.sign);
    std::uniform_int_distribution<std::size_t> pickScale(0, spec.scales.size() - 1);
    std::uniform_int_distribution<std::size_t> pickAnchor(0, spec.anchors.size() - 1);
    std::uniform_int_distribution<int> pickComp(1, 3);
    std::uniform_int_distribution<long long> jit(-spec.jitter, spec.jitter);
    std::set<std::tuple<int, long long, long long>> seen;
    std::vector<TriTile> out;
    const std::size_t attempts = spec.maxTiles * 20 + 100;
    for (std::size_t a = 0; a < attempts && out.size() < spec.maxTiles; ++a) {
        const int s = spec.scales[pickScale(rng)];
        const double xi = spec.anchors[pickAnchor(rng)];
        const int i = pickComp(rng);
        const long long li = std::llround(3.0 * (std::ldexp(xi, s) - 0.5)) + jit(rng);
        long long l = 0;
        if (i == 1) l = li;
        else if (i == 2) l = li + spec.nu.a;
        else l = static_cast<long long>(std::floor(0.5 * static_cast<double>(li + spec.nu.a + spec.nu.b)));
        l += mod3(spec.nu.alpha - l);
        const long long vLo = static_cast<long long>(std::ceil(std::ldexp(spec.xLo, -s)));
        const long long vHi = static_cast<long long>(std::floor(std::ldexp(spec.xHi, -s))) - 1;
        if (vHi < vLo) continue;
        const long long v = std::uniform_int_distribution<long long>(vLo, vHi)(rng);
        if (!seen.insert({s, v, l}).second) continue;
        out.push_back(make_tritile(spec.nu, shifts, s, v, l));
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace tfa
