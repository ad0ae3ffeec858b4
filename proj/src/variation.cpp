#include "tfa/variation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace tfa {

SampledPath::SampledPath(std::vector<double> t, std::vector<cplx> v) : times(std::move(t)), values(std::move(v)) {
    if (times.size() != values.size()) throw std::invalid_argument("SampledPath: times and values differ in length");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw std::invalid_argument("SampledPath: times not strictly increasing");
}

SampledPath SampledPath::from_values(const std::vector<double>& v) {
    std::vector<cplx> c(v.begin(), v.end());
    return from_values(c);
}

SampledPath SampledPath::from_values(const std::vector<cplx>& v) {
    std::vector<double> t(v.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
    return SampledPath(std::move(t), v);
}

SampledPath SampledPath::from_function(const ComplexFn& a, double lo, double hi, std::size_t n) {
    std::vector<double> t(n + 1);
    std::vector<cplx> v(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        t[i] = (i == n) ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
        v[i] = a(t[i]);
    }
    return SampledPath(std::move(t), std::move(v));
}

bool SampledPath::real() const {
    return std::all_of(values.begin(), values.end(), [](const cplx& z) { return z.imag() == 0.0; });
}

namespace {

double rpow(double d, double r) { return r == 1.0 ? d : (r == 2.0 ? d * d : std::pow(d, r)); }

}  // namespace

VariationResult variation_norm(const SampledPath& path, double r) {
    if (!(r >= 1.0)) throw std::invalid_argument("variation_norm: r < 1");
    const std::size_t n = path.size();
    VariationResult res;
    res.r = r;
    if (n == 0) return res;
    std::vector<double> B(n, 0.0);
    std::vector<std::size_t> back(n, n);
    for (std::size_t i = 1; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) {
            const double c = B[j] + rpow(std::abs(path.values[i] - path.values[j]), r);
            if (c > B[i]) {
                B[i] = c;
                back[i] = j;
            }
        }
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (B[i] > B[best]) best = i;
    for (std::size_t i = best; i != n; i = back[i]) res.witness.push_back(i);
    std::reverse(res.witness.begin(), res.witness.end());
    res.value = std::pow(B[best], 1.0 / r);
    return res;
}

double variation_sum(const SampledPath& path, const std::vector<std::size_t>& idx, double r) {
    double s = 0.0;
    for (std::size_t k = 1; k < idx.size(); ++k) {
        if (idx[k] <= idx[k - 1]) throw std::invalid_argument("variation_sum: indices not increasing");
        s += rpow(std::abs(path.values[idx[k]] - path.values[idx[k - 1]]), r);
    }
    return std::pow(s, 1.0 / r);
}

JumpResult jumps(const SampledPath& path, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("jumps: lambda <= 0");
    JumpResult res;
    const std::size_t n = path.size();
    const auto& a = path.values;
    const bool real = path.real();
    std::size_t start = 0;
    while (start + 1 < n) {
        std::size_t lo = start, hi = start;  // argmin / argmax of the real values seen since start
        std::size_t found = n, from = start;
        for (std::size_t t = start + 1; t < n && found == n; ++t) {
            if (real) {
                const double x = a[t].real();
                if (x - a[lo].real() > lambda) {
                    found = t;
                    from = lo;
                } else if (a[hi].real() - x > lambda) {
                    found = t;
                    from = hi;
                }
                if (x < a[lo].real()) lo = t;
                if (x > a[hi].real()) hi = t;
            } else {
                for (std::size_t s = start; s < t; ++s)
                    if (std::abs(a[t] - a[s]) > lambda) {
                        found = t;
                        from = s;
                        break;
                    }
            }
        }
        if (found == n) break;
        res.jumps.emplace_back(from, found);
        start = found;
    }
    res.count = res.jumps.size();
    return res;
}

std::size_t jump_count(const SampledPath& path, double lambda, double r) {
    const std::size_t N = jumps(path, lambda).count;
    const double v = variation_norm(path, r).value;
    if (std::pow(lambda, r) * static_cast<double>(N) > std::pow(v, r) * (1.0 + 1e-12))
        throw FalsificationError("jump_count: lambda^r N exceeds the r-variation");
    return N;
}

std::size_t entropy_count(std::vector<double> points, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("entropy_count: lambda <= 0");
    std::sort(points.begin(), points.end());
    std::size_t count = 0;
    double end = 0.0;
    for (double x : points)
        if (count == 0 || x > end) {
            ++count;
            end = x + 2.0 * lambda;
        }
    return count;
}

std::size_t entropy_count(const SampledPath& path, double lambda, double r) {
    if (!path.real()) throw std::invalid_argument("entropy_count: path values must be real");
    std::vector<double> pts;
    pts.reserve(path.size());
    for (const auto& z : path.values) pts.push_back(z.real());
    const std::size_t E = entropy_count(pts, lambda);
    const double v = variation_norm(path, r).value;
    if (E > 0 && std::pow(lambda, r) * static_cast<double>(E - 1) > std::pow(v, r) * (1.0 + 1e-12))
        throw FalsificationError("entropy_count: lambda^r (E - 1) exceeds the r-variation");
    return E;
}

FtcCheck ftc_variation_check(const SampledPath& a, const std::optional<std::vector<cplx>>& derivative, double r,
                             int s) {
    if (!(r >= 1.0 && r <= 2.0)) throw std::invalid_argument("ftc_variation_check: r outside [1, 2]");
    if (derivative && derivative->size() != a.size())
        throw std::invalid_argument("ftc_variation_check: derivative length mismatch");
    const double lo = std::ldexp(1.0, s), hi = std::ldexp(1.0, s + 1);
    const double slack = 1e-12 * hi;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.times[i] >= lo - slack && a.times[i] <= hi + slack) keep.push_back(i);
    if (keep.size() < 3) throw std::invalid_argument("ftc_variation_check: fewer than three samples in the octave");
    std::vector<double> t;
    std::vector<cplx> v, d;
    for (auto i : keep) {
        t.push_back(a.times[i]);
        v.push_back(a.values[i]);
    }
    const std::size_t n = t.size();
    if (derivative) {
        for (auto i : keep) d.push_back((*derivative)[i]);
    } else {
        d.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t l = i == 0 ? 0 : i - 1, h = i + 1 == n ? n - 1 : i + 1;
            d[i] = (v[h] - v[l]) / (t[h] - t[l]);
        }
    }
    double X = 0.0, Y = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        const double h = t[i] - t[i - 1];
        X += 0.5 * h * (std::norm(v[i]) / t[i] + std::norm(v[i - 1]) / t[i - 1]);
        Y += 0.5 * h * (std::norm(d[i]) * t[i] + std::norm(d[i - 1]) * t[i - 1]);
    }
    FtcCheck out;
    const double V = variation_norm(SampledPath(t, v), r).value;
    out.lhs = V * V;
    out.rhs = std::pow(X, 1.0 - 1.0 / r) * std::pow(Y, 1.0 / r);
    return out;
}

FtcCheck ftc_variation_check(const ComplexFn& a, const ComplexFn& da, double r, int s, std::size_t n) {
    const double lo = std::ldexp(1.0, s), hi = std::ldexp(1.0, s + 1);
    SampledPath p = SampledPath::from_function(a, lo, hi, n);
    std::vector<cplx> d;
    d.reserve(p.size());
    for (double t : p.times) d.push_back(da(t));
    return ftc_variation_check(p, d, r, s);
}

namespace {

double log_quadrature(const std::function<cplx(double)>& B, const SquareFunctionOptions& opt) {
    if (!(opt.tMin > 0.0 && opt.tMax > opt.tMin)) throw std::invalid_argument("square_function: bad t range");
    if (opt.samplesPerOctave < 1) throw std::invalid_argument("square_function: samplesPerOctave < 1");
    const double u0 = std::log2(opt.tMin), u1 = std::log2(opt.tMax);
    const auto n = static_cast<std::size_t>(std::ceil((u1 - u0) * opt.samplesPerOctave));
    const double h = (u1 - u0) / static_cast<double>(n);
    double s = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
        const double w = (i == 0 || i == n) ? 0.5 : 1.0;
        s += w * std::norm(B(std::exp2(u0 + h * static_cast<double>(i))));
    }
    return std::sqrt(s * h * std::log(2.0));
}

}  // namespace

double square_function(const GridSignal& psi, const GridSignal& f1, const GridSignal& f2, double x,
                       const SquareFunctionOptions& opt) {
    double l1 = 0.0;
    for (const auto& z : psi.samples) l1 += std::abs(z);
    l1 *= psi.step();
    if (std::abs(integral(psi)) > opt.meanTolerance * std::max(l1, 1e-300))
        throw std::invalid_argument("square_function: psi does not have mean zero");
    return log_quadrature([&](double t) { return bilinear_average(psi, f1, f2, t, x, opt.bc); }, opt);
}

double square_function(const ComplexFn& psi, double psiWidth, const GridSignal& f1, const GridSignal& f2, double x,
                       const SquareFunctionOptions& opt) {
    return log_quadrature([&](double t) { return bilinear_average(psi, psiWidth, f1, f2, t, x, opt.bc); }, opt);
}

void write_path_csv(std::ostream& os, const SampledPath& path) {
    os << "t,re,im\n" << std::setprecision(17);
    for (std::size_t i = 0; i < path.size(); ++i)
        os << path.times[i] << ',' << path.values[i].real() << ',' << path.values[i].imag() << '\n';
}

SampledPath read_path_csv(std::istream& is) {
    std::string line;
    std::getline(is, line);
    if (line.rfind("t,re,im", 0) != 0) throw std::runtime_error("read_path_csv: missing header t,re,im");
    std::vector<double> t;
    std::vector<cplx> v;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        double x = 0, re = 0, im = 0;
        char c1 = 0, c2 = 0;
        if (!(ls >> x >> c1 >> re >> c2 >> im) || c1 != ',' || c2 != ',')
            throw std::runtime_error("read_path_csv: malformed row");
        t.push_back(x);
        v.push_back({re, im});
    }
    return SampledPath(std::move(t), std::move(v));
}

void write_variation_csv(std::ostream& os, const std::vector<VariationResult>& results) {
    os << "r,value,witness\n" << std::setprecision(17);
    for (const auto& r : results) {
        os << r.r << ',' << r.value << ',';
        for (std::size_t k = 0; k < r.witness.size(); ++k) os << (k ? " " : "") << r.witness[k];
        os << '\n';
    }
}

}  // namespace tfa
