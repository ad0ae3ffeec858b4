#include "tfa/harness.hpp"

#include "tfa/forest.hpp"
#include "tfa/variation.hpp"
#include "tfa/wavepackets.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <istream>
#include <iterator>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace tfa {

std::string format_value(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

void check_cell(const std::string& s) {
    if (s.find_first_of(",\n;") != std::string::npos)
        throw std::invalid_argument("write_records_csv: cell contains a separator: " + s);
}

double parse_double(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw std::runtime_error("not a number: " + s);
    return v;
}

}  // namespace

void write_records_csv(std::ostream& os, const std::vector<ExperimentRecord>& rows, const Metadata& meta) {
    os << '#';
    bool first = true;
    for (const auto& [k, v] : meta) {
        check_cell(k);
        check_cell(v);
        os << (first ? " " : ";") << k << '=' << v;
        first = false;
    }
    os << '\n';
    std::set<std::string> keys;
    for (const auto& r : rows)
        for (const auto& [k, v] : r.params) keys.insert(k);
    os << "experiment,metric,seed";
    for (const auto& k : keys) {
        check_cell(k);
        os << ',' << k;
    }
    os << ",value\n";
    for (const auto& r : rows) {
        check_cell(r.experiment);
        check_cell(r.metric);
        os << r.experiment << ',' << r.metric << ',' << r.seed;
        for (const auto& k : keys) {
            auto it = r.params.find(k);
            os << ',';
            if (it != r.params.end()) {
                check_cell(it->second);
                os << it->second;
            }
        }
        os << ',' << format_value(r.value) << '\n';
    }
}

std::vector<ExperimentRecord> read_records_csv(std::istream& is, Metadata* meta) {
    std::string line;
    if (!std::getline(is, line) || line.empty() || line[0] != '#')
        throw std::runtime_error("read_records_csv: missing metadata row");
    if (meta) {
        meta->clear();
        const std::string body = trim(line.substr(1));
        if (!body.empty())
            for (const auto& kv : split(body, ';')) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) throw std::runtime_error("read_records_csv: bad metadata entry " + kv);
                (*meta)[kv.substr(0, eq)] = kv.substr(eq + 1);
            }
    }
    if (!std::getline(is, line)) throw std::runtime_error("read_records_csv: missing header");
    const auto head = split(line, ',');
    if (head.size() < 4 || head[0] != "experiment" || head[1] != "metric" || head[2] != "seed" || head.back() != "value")
        throw std::runtime_error("read_records_csv: unexpected header " + line);
    std::vector<ExperimentRecord> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != head.size()) throw std::runtime_error("read_records_csv: ragged row " + line);
        ExperimentRecord r;
        r.experiment = cells[0];
        r.metric = cells[1];
        r.seed = std::stoull(cells[2]);
        for (std::size_t c = 3; c + 1 < cells.size(); ++c)
            if (!cells[c].empty()) r.params[head[c]] = cells[c];
        r.value = parse_double(cells.back());
        out.push_back(std::move(r));
    }
    return out;
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

std::mt19937_64 trial_rng(std::uint64_t seed, std::string_view experiment, std::uint64_t trial) {
    const std::uint64_t h = splitmix(splitmix(splitmix(seed) ^ fnv1a(experiment)) ^ trial);
    std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                      static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(seed)};
    return std::mt19937_64(seq);
}

unsigned worker_count() {
    if (const char* env = std::getenv("TFA_LAB_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(std::min(v, 256L));
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), n));
    std::vector<std::exception_ptr> errors(n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        body(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// ---- config ----

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse(in, path);
}

Config Config::parse(std::istream& is, const std::string& name) {
    Config c;
    std::string line, section;
    int lineNo = 0;
    while (std::getline(is, line)) {
        ++lineNo;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                throw ConfigError(name + ":" + std::to_string(lineNo) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            c.data_[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(name + ":" + std::to_string(lineNo) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(name + ":" + std::to_string(lineNo) + ": empty key");
        c.data_[section][key] = trim(line.substr(eq + 1));
    }
    return c;
}

bool Config::has(const std::string& section, const std::string& key) const {
    auto it = data_.find(section);
    return it != data_.end() && it->second.count(key) != 0;
}

std::string Config::get(const std::string& section, const std::string& key) const {
    if (!has(section, key)) throw ConfigError("missing config key [" + section + "] " + key);
    return data_.at(section).at(key);
}

std::string Config::get(const std::string& section, const std::string& key, const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
}

double Config::get_double(const std::string& section, const std::string& key, double fallback) const {
    if (!has(section, key)) return fallback;
    try {
        return parse_double(get(section, key));
    } catch (const std::exception&) {
        throw ConfigError("config key [" + section + "] " + key + " is not a number");
    }
}

long long Config::get_int(const std::string& section, const std::string& key, long long fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key);
    long long out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
        throw ConfigError("config key [" + section + "] " + key + " is not an integer");
    return out;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
    data_[section][key] = value;
}

Metadata run_metadata(const Config& cfg, const std::string& experiment) {
    Metadata m;
    m["version"] = kLibraryVersion;
    m["experiment"] = experiment;
    if (cfg.sections().count(experiment))
        for (const auto& [k, v] : cfg.sections().at(experiment)) m[k] = v;
    m["C0"] = cfg.get("exceptional", "C0", "10.667");
    return m;
}

// ---- ergodic averages ----

DynSystem DynSystem::cyclic(std::size_t n) {
    if (n == 0) throw std::invalid_argument("DynSystem::cyclic: N = 0");
    return {Kind::CyclicShift, n, 0.0};
}

DynSystem DynSystem::rotation(double theta, std::size_t n) {
    if (n == 0) throw std::invalid_argument("DynSystem::rotation: N = 0");
    return {Kind::CircleRotation, n, theta};
}

double DynSystem::orbit(std::size_t x, long long i) const {
    if (kind == Kind::CyclicShift) {
        const long long n = static_cast<long long>(N);
        return static_cast<double>(((static_cast<long long>(x) + i) % n + n) % n);
    }
    double y = std::fmod(static_cast<double>(x) / static_cast<double>(N) + static_cast<double>(i) * theta, 1.0);
    return y < 0.0 ? y + 1.0 : y;
}

std::vector<std::vector<cplx>> double_recurrence(const DynSystem& sys, const ComplexFn& f1, const ComplexFn& f2,
                                                 const std::vector<std::size_t>& ns) {
    for (std::size_t k = 0; k < ns.size(); ++k)
        if (ns[k] == 0 || (k > 0 && ns[k] <= ns[k - 1]))
            throw std::invalid_argument("double_recurrence: ns must be positive and increasing");
    std::vector<std::vector<cplx>> out(ns.size(), std::vector<cplx>(sys.N));
    if (ns.empty()) return out;
    for (std::size_t x = 0; x < sys.N; ++x) {
        cplx S{};
        std::size_t k = 0;
        for (std::size_t i = 0; i < ns.back(); ++i) {
            const long long ii = static_cast<long long>(i);
            S += f1(sys.orbit(x, ii)) * f2(sys.orbit(x, -ii));
            if (i + 1 == ns[k]) out[k++][x] = S / static_cast<double>(i + 1);
        }
    }
    return out;
}

std::vector<std::vector<cplx>> double_recurrence(const DynSystem& sys, const std::vector<cplx>& f1,
                                                 const std::vector<cplx>& f2, std::size_t nMax) {
    if (nMax == 0) throw std::invalid_argument("double_recurrence: nMax = 0");
    if (f1.size() != sys.N || f2.size() != sys.N) throw std::invalid_argument("double_recurrence: size mismatch");
    const long long N = static_cast<long long>(sys.N);
    long long step = 1;
    if (sys.kind == DynSystem::Kind::CircleRotation) {
        const double s = sys.theta * static_cast<double>(sys.N);
        if (std::abs(s - std::round(s)) > 1e-9)
            throw std::invalid_argument("double_recurrence: rotation does not move by whole grid steps");
        step = static_cast<long long>(std::llround(s));
    }
    std::vector<std::vector<cplx>> out(nMax, std::vector<cplx>(sys.N));
    std::vector<cplx> S(sys.N);
    for (std::size_t i = 0; i < nMax; ++i) {
        const long long d = (static_cast<long long>(i) * step) % N;
        for (long long x = 0; x < N; ++x)
            S[static_cast<std::size_t>(x)] += f1[static_cast<std::size_t>(((x + d) % N + N) % N)] *
                                              f2[static_cast<std::size_t>(((x - d) % N + N) % N)];
        for (std::size_t x = 0; x < sys.N; ++x) out[i][x] = S[x] / static_cast<double>(i + 1);
    }
    return out;
}

namespace {

std::vector<std::size_t> lacunary(int scales) {
    std::vector<std::size_t> ns;
    for (int k = 0; k < scales; ++k) ns.push_back(std::size_t{1} << k);
    return ns;
}

double lp_mean(const std::vector<double>& v, double p) {
    double s = 0.0;
    for (double x : v) s += std::pow(std::abs(x), p);
    return std::pow(s / static_cast<double>(v.size()), 1.0 / p);
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v) { return format_value(v); }

}  // namespace

double long_variation_value(const DynSystem& sys, const ComplexFn& f1, const ComplexFn& f2, double r, double p,
                            int scales) {
    if (scales < 1) throw std::invalid_argument("long_variation_value: scales < 1");
    const auto rows = double_recurrence(sys, f1, f2, lacunary(scales));
    std::vector<double> v(sys.N);
    for (std::size_t x = 0; x < sys.N; ++x) {
        std::vector<cplx> path(rows.size());
        for (std::size_t k = 0; k < rows.size(); ++k) path[k] = rows[k][x];
        v[x] = variation_norm(SampledPath::from_values(path), r).value;
    }
    return lp_mean(v, p);
}

std::vector<ExperimentRecord> long_variation_experiment(const LongVariationSpec& spec, std::uint64_t seed) {
    const std::string name = "long_variation";
    if (spec.fewScales < 1 || spec.manyScales <= spec.fewScales)
        throw std::invalid_argument("long_variation_experiment: need 1 <= fewScales < manyScales");
    const DynSystem sys = DynSystem::cyclic(spec.N);
    const std::size_t T = static_cast<std::size_t>(spec.trials);
    // values[trial][r][0 few / 1 many]
    std::vector<std::vector<std::array<double, 2>>> values(T, std::vector<std::array<double, 2>>(spec.rs.size()));
    parallel_for(T, [&](std::size_t t) {
        auto rng = trial_rng(seed, name, t);
        std::vector<double> a(spec.N), b(spec.N);
        for (auto& x : a) x = (rng() & 1) ? 1.0 : -1.0;
        for (auto& x : b) x = (rng() & 1) ? 1.0 : -1.0;
        const auto rows = double_recurrence(
            sys, [&](double x) { return cplx(a[static_cast<std::size_t>(x)]); },
            [&](double x) { return cplx(b[static_cast<std::size_t>(x)]); }, lacunary(spec.manyScales));
        for (std::size_t ri = 0; ri < spec.rs.size(); ++ri) {
            std::vector<double> few(spec.N), many(spec.N);
            for (std::size_t x = 0; x < spec.N; ++x) {
                std::vector<cplx> path(rows.size());
                for (std::size_t k = 0; k < rows.size(); ++k) path[k] = rows[k][x];
                many[x] = variation_norm(SampledPath::from_values(path), spec.rs[ri]).value;
                path.resize(static_cast<std::size_t>(spec.fewScales));
                few[x] = variation_norm(SampledPath::from_values(path), spec.rs[ri]).value;
            }
            values[t][ri] = {lp_mean(few, spec.p), lp_mean(many, spec.p)};
        }
    });
    std::vector<ExperimentRecord> out;
    const std::map<std::string, std::string> base{{"N", std::to_string(spec.N)}, {"p", fmt(spec.p)}};
    for (std::size_t ri = 0; ri < spec.rs.size(); ++ri) {
        auto prm = base;
        prm["r"] = fmt(spec.rs[ri]);
        double med[2];
        for (int c = 0; c < 2; ++c) {
            auto q = prm;
            q["scales"] = std::to_string(c ? spec.manyScales : spec.fewScales);
            std::vector<double> col;
            for (std::size_t t = 0; t < T; ++t) {
                auto qt = q;
                qt["trial"] = std::to_string(t);
                out.push_back({name, qt, seed, "value", values[t][ri][static_cast<std::size_t>(c)]});
                col.push_back(values[t][ri][static_cast<std::size_t>(c)]);
            }
            med[c] = median(col);
            out.push_back({name, q, seed, "median", med[c]});
        }
        const double ratio = med[1] / med[0];
        out.push_back({name, prm, seed, "ratio", ratio});
        const bool ok = spec.rs[ri] <= 2.0 ? ratio > spec.growthThreshold : ratio <= spec.boundThreshold;
        out.push_back({name, prm, seed, "pass", ok ? 1.0 : 0.0});
    }
    return out;
}

namespace {

cplx unit_box(double y) { return (y >= 0.0 && y < 1.0) ? cplx(1.0) : cplx{}; }

}  // namespace

double long_variation_continuous(const GridSignal& f1, const GridSignal& f2, double r, double p, int sMin, int sMax,
                                 std::size_t stride) {
    if (sMax < sMin || stride < 1) throw std::invalid_argument("long_variation_continuous: empty scale range or zero stride");
    std::vector<GridSignal> B;
    for (int s = sMin; s <= sMax; ++s)
        B.push_back(bilinear_average_grid(unit_box, 1.0, f1, f2, std::ldexp(1.0, s), Boundary::Periodic, stride));
    const std::size_t n = B.front().size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; i += stride) {
        std::vector<cplx> path;
        for (const auto& g : B) path.push_back(g[i]);
        acc += std::pow(variation_norm(SampledPath::from_values(path), r).value, p);
    }
    return std::pow(acc * B.front().step() * static_cast<double>(stride), 1.0 / p);
}

bool short_variation_admissible(double r, double p) { return 1.0 / r < std::min(1.5 - 1.0 / p, 1.0); }

double short_variation_value(const GridSignal& f1, const GridSignal& f2, const ShortVariationSpec& spec) {
    if (spec.samplesPerOctave < 1 || spec.stride < 1) throw std::invalid_argument("short_variation_value: bad sampling");
    std::vector<double> sq;
    double measure = 0.0;
    for (int s : spec.octaves) {
        std::vector<GridSignal> B;
        for (int j = 0; j <= spec.samplesPerOctave; ++j) {
            const double t = std::ldexp(1.0 + static_cast<double>(j) / spec.samplesPerOctave, s);
            B.push_back(bilinear_average_grid(unit_box, 1.0, f1, f2, t, Boundary::Periodic, spec.stride));
        }
        if (sq.empty()) {
            sq.assign(B.front().size(), 0.0);
            measure = B.front().step() * static_cast<double>(spec.stride);
        }
        for (std::size_t i = 0; i < sq.size(); i += spec.stride) {
            std::vector<cplx> path;
            for (const auto& g : B) path.push_back(g[i]);
            const double v = variation_norm(SampledPath::from_values(path), spec.r).value;
            sq[i] += v * v;
        }
    }
    double acc = 0.0;
    for (double v : sq) acc += std::pow(std::sqrt(v), spec.p);
    return std::pow(acc * measure, 1.0 / spec.p);
}

std::vector<ExperimentRecord> short_variation_experiment(const GridSignal& f1, const GridSignal& f2,
                                                         const ShortVariationSpec& spec, std::uint64_t seed) {
    const std::string name = "short_variation";
    std::map<std::string, std::string> prm{{"r", fmt(spec.r)},
                                           {"p", fmt(spec.p)},
                                           {"samples_per_octave", std::to_string(spec.samplesPerOctave)},
                                           {"octaves", std::to_string(spec.octaves.size())}};
    const double v = short_variation_value(f1, f2, spec);
    ShortVariationSpec fine = spec;
    fine.samplesPerOctave *= 2;
    const double vf = short_variation_value(f1, f2, fine);
    std::vector<ExperimentRecord> out;
    out.push_back({name, prm, seed, "value", v});
    out.push_back({name, prm, seed, "value_refined", vf});
    out.push_back({name, prm, seed, "refinement_change", v > 0 ? std::abs(vf - v) / v : std::abs(vf - v)});
    out.push_back({name, prm, seed, "admissible", short_variation_admissible(spec.r, spec.p) ? 1.0 : 0.0});
    return out;
}

// ---- growth in m ----

double fitted_rate(const std::vector<double>& ms, const std::vector<double>& values) {
    if (ms.size() != values.size() || ms.size() < 2) throw std::invalid_argument("fitted_rate: need two points");
    double mx = 0.0, my = 0.0;
    const double n = static_cast<double>(ms.size());
    for (std::size_t i = 0; i < ms.size(); ++i) {
        if (!(values[i] > 0.0)) throw std::invalid_argument("fitted_rate: nonpositive value");
        mx += ms[i] / n;
        my += std::log(values[i]) / n;
    }
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < ms.size(); ++i) {
        sxy += (ms[i] - mx) * (std::log(values[i]) - my);
        sxx += (ms[i] - mx) * (ms[i] - mx);
    }
    return sxy / sxx;
}

GridSignal random_band_limited(std::mt19937_64& rng, int q, double x0, std::size_t n, double band, double p,
                               std::size_t modes) {
    GridSignal fh = fourier(GridSignal(q, x0, n));
    std::normal_distribution<double> g;
    std::vector<std::size_t> inBand;
    for (std::size_t k = 0; k < fh.size(); ++k)
        if (std::abs(fh.x(k)) <= band) inBand.push_back(k);
    if (modes > 0 && modes < inBand.size()) {
        std::vector<std::size_t> pick;
        std::sample(inBand.begin(), inBand.end(), std::back_inserter(pick), modes, rng);
        inBand = std::move(pick);
    }
    for (std::size_t k : inBand) fh[k] = cplx(g(rng), g(rng));
    GridSignal f = inverse_fourier(fh, q, x0);
    double s = 0.0;
    for (const auto& z : f.samples) s += std::pow(std::abs(z), p);
    const double norm = std::pow(s * f.step(), 1.0 / p);
    for (auto& z : f.samples) z /= norm;
    return f;
}

namespace {

double lp_grid(const GridSignal& f, double p) {
    double s = 0.0;
    for (const auto& z : f.samples) s += std::pow(std::abs(z), p);
    return std::pow(s * f.step(), 1.0 / p);
}

double shift_tau(int m) { return m == 0 ? 1.0 : std::ldexp(1.0, m); }

void certify_theta(const ThetaPsi& psi, double tau) {
    const GridSignal g = psi.periodized(5, tau - 64.0, 4096);
    const BumpClassSpec spec{BumpClass::Theta0tau, tau, 0, 4, 1e-8, 1e-8};
    const ClassReport r = class_check(g, spec);
    if (!r.pass) throw PreconditionError("shift growth: psi fails its class check: " + r.reason);
}

GrowthCurve finish_curve(std::vector<int> ms, const std::vector<std::vector<double>>& ratios) {
    GrowthCurve c;
    c.ms = std::move(ms);
    std::vector<double> mx;
    for (std::size_t i = 0; i < c.ms.size(); ++i) {
        const auto& r = ratios[i];
        const std::size_t half = std::max<std::size_t>(1, r.size() / 2);
        c.estimate.push_back(*std::max_element(r.begin(), r.end()));
        c.halfEstimate.push_back(*std::max_element(r.begin(), r.begin() + static_cast<long>(half)));
        c.stability = std::max(c.stability, (c.estimate.back() - c.halfEstimate.back()) / c.halfEstimate.back());
        mx.push_back(c.ms[i]);
    }
    c.rate = c.ms.size() >= 2 ? fitted_rate(mx, c.estimate) : 0.0;
    return c;
}

}  // namespace

double shift_ratio(int m, const GridSignal& f1, const GridSignal& f2, const ShiftGrowthSpec& spec) {
    const double tau = shift_tau(m);
    const ThetaPsi psi = make_theta_psi(tau);
    GridSignal sum;
    for (int s = spec.sMin; s <= spec.sMax; ++s) {
        GridSignal b = bilinear_average_frequency_grid([&](double xi) { return psi.hat(xi); }, f1, f2, std::ldexp(1.0, s));
        if (sum.samples.empty()) sum = b;
        else
            for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += b[i];
    }
    const double p = 1.0 / (1.0 / spec.p1 + 1.0 / spec.p2);
    return lp_grid(sum, p) / (lp_grid(f1, spec.p1) * lp_grid(f2, spec.p2));
}

GrowthCurve shift_growth_curve(const ShiftGrowthSpec& spec, std::uint64_t seed) {
    std::vector<int> ms;
    for (int m = spec.mMin; m <= spec.mMax; ++m) ms.push_back(m);
    for (int m : ms) certify_theta(make_theta_psi(shift_tau(m)), shift_tau(m));
    const int logLength = spec.logLength > 0 ? spec.logLength : spec.mMax + spec.sMax + 1;
    const std::size_t n = std::size_t{1} << (logLength + spec.q);
    const std::size_t T = static_cast<std::size_t>(spec.trials);
    std::vector<std::vector<double>> ratios(ms.size(), std::vector<double>(T));
    parallel_for(T, [&](std::size_t t) {
        auto rng = trial_rng(seed, "shift_growth", t);
        const GridSignal f1 = random_band_limited(rng, spec.q, 0.0, n, spec.band, spec.p1, spec.modes);
        const GridSignal f2 = random_band_limited(rng, spec.q, 0.0, n, spec.band, spec.p2, spec.modes);
        for (std::size_t i = 0; i < ms.size(); ++i) ratios[i][t] = shift_ratio(ms[i], f1, f2, spec);
    });
    return finish_curve(ms, ratios);
}

std::vector<ExperimentRecord> curve_records(const std::string& experiment, const GrowthCurve& c, std::uint64_t seed,
                                            const std::map<std::string, std::string>& params) {
    std::vector<ExperimentRecord> out;
    for (std::size_t i = 0; i < c.ms.size(); ++i) {
        auto p = params;
        p["m"] = std::to_string(c.ms[i]);
        out.push_back({experiment, p, seed, "norm_estimate", c.estimate[i]});
        out.push_back({experiment, p, seed, "norm_estimate_half", c.halfEstimate[i]});
    }
    out.push_back({experiment, params, seed, "rate", c.rate});
    out.push_back({experiment, params, seed, "stability", c.stability});
    return out;
}

std::vector<ExperimentRecord> shift_growth_experiment(const ShiftGrowthSpec& spec, std::uint64_t seed) {
    const GrowthCurve c = shift_growth_curve(spec, seed);
    std::map<std::string, std::string> prm{{"p1", fmt(spec.p1)},
                                           {"p2", fmt(spec.p2)},
                                           {"trials", std::to_string(spec.trials)},
                                           {"modes", std::to_string(spec.modes)}};
    auto out = curve_records("shift_growth", c, seed, prm);
    const bool ok = c.rate <= spec.rateThreshold && c.stability <= spec.stabilityThreshold;
    out.push_back({"shift_growth", prm, seed, "pass", ok ? 1.0 : 0.0});
    return out;
}

namespace {

double bessel_trial(std::mt19937_64& rng, int m, std::size_t tiles, const std::shared_ptr<const WindowRho>& w) {
    std::uniform_int_distribution<int> A(21, 30), B(-6, 3), Al(0, 2), comp(1, 3);
    FamilySpec spec;
    spec.nu = NuParams{.a = A(rng), .b = B(rng), .sPrime = 0, .alpha = Al(rng)};
    spec.m = m;
    spec.scales = {0};
    spec.xLo = 0.0;
    spec.xHi = 16.0;
    spec.anchors = {0.3, 1.1};
    spec.maxTiles = tiles;
    spec.jitter = 1;
    const auto fam = random_family(rng, spec);
    const int k = comp(rng), j = comp(rng);
    // Atoms sitting on component k of a few tiles of the family.
    AtomSignal f;
    std::uniform_int_distribution<std::size_t> pick(0, fam.size() - 1);
    std::normal_distribution<double> g;
    for (int a = 0; a < 4; ++a) {
        const Tile& c = fam[pick(rng)].comp(k);
        f.atoms.push_back({cplx(g(rng), g(rng)), c.time.center().to_double(), c.freq.center().to_double(),
                           c.time.length().to_double()});
    }
    const auto fk = f.packets(w);
    const auto e = tile_energies(fam, fk, k);
    double top = 0.0;
    for (int i = 1; i <= 3; ++i) top = std::max(top, size(fam, e, i, j, k));
    if (!(top > 0.0)) return 0.0;
    const double lambda = top / 1.2;
    const TreeSelection sel = select_trees(fam, e, k, j, lambda);
    double best = 0.0;
    for (int ip = 1; ip <= 3; ++ip) {
        if (ip == k) continue;
        for (bool above : {true, false})
            best = std::max(best, bessel_ratio(sel.collection(ip, above), fk, f.norm2(), k, lambda));
    }
    return best;
}

}  // namespace

GrowthCurve bessel_growth_curve(const BesselGrowthSpec& spec, std::uint64_t seed) {
    std::vector<int> ms;
    for (int m = spec.mMin; m <= spec.mMax; ++m) ms.push_back(m);
    const auto w = build_window();
    const std::size_t T = static_cast<std::size_t>(spec.trials);
    std::vector<std::vector<double>> ratios(ms.size(), std::vector<double>(T));
    parallel_for(ms.size() * T, [&](std::size_t idx) {
        const std::size_t i = idx / T, t = idx % T;
        auto rng = trial_rng(seed, "bessel_growth_m" + std::to_string(ms[i]), t);
        ratios[i][t] = bessel_trial(rng, ms[i], spec.tiles, w);
    });
    return finish_curve(ms, ratios);
}

std::vector<ExperimentRecord> bessel_growth_experiment(const BesselGrowthSpec& spec, std::uint64_t seed) {
    const GrowthCurve c = bessel_growth_curve(spec, seed);
    std::map<std::string, std::string> prm{{"trials", std::to_string(spec.trials)}, {"tiles", std::to_string(spec.tiles)}};
    auto out = curve_records("bessel_growth", c, seed, prm);
    const bool ok = c.rate <= spec.rateThreshold;
    out.push_back({"bessel_growth", prm, seed, "pass", ok ? 1.0 : 0.0});
    return out;
}

// ---- restricted weak type ----

RestrictedWeakTypeTrial restricted_weak_type_eval(const GridSet& E1, const GridSet& E2, const GridSet& E3,
                                                  const std::vector<TriTile>& family, int m, double C0) {
    static const auto w = build_window();
    if (E1.q != E3.q || E2.q != E3.q || E1.x0 != E3.x0 || E2.x0 != E3.x0 || E1.size() != E3.size() ||
        E2.size() != E3.size())
        throw std::invalid_argument("restricted_weak_type_eval: sets on different grids");
    RestrictedWeakTypeTrial t;
    t.m = m;
    t.e1 = E1.measure();
    t.e2 = E2.measure();
    t.e3 = E3.measure();
    ExceptionalParams prm;
    prm.C0 = C0;
    const ExceptionalSet F = exceptional_set(E1, E2, ShiftSequence::constant(m, prm.sMin, prm.sMax), prm);
    const GridSet major = major_subset(E3, F);
    t.e3Major = major.measure();
    t.majorOk = 2.0 * t.e3Major >= t.e3;
    auto as_signal = [&](const GridSet& S) {
        GridSignal g(S.q, S.x0, S.size());
        const auto ind = S.indicator();
        for (std::size_t i = 0; i < ind.size(); ++i) g[i] = ind[i];
        return g;
    };
    t.lambda = t.e1 == 0.0 ? 0.0
                           : model_form(family, packet_fn(as_signal(E1), w), packet_fn(as_signal(E2), w),
                                        packet_fn(as_signal(major), w));
    t.rhs = t.e1 == 0.0 ? 0.0
                        : std::pow(std::max(1.0, static_cast<double>(m)), 4) * (1.0 + std::abs(std::log2(t.e1))) *
                              t.e1 * std::sqrt(t.e2);
    return t;
}

double restricted_weak_type_ratio(const RestrictedWeakTypeTrial& t) {
    if (t.lambda == 0.0) return 0.0;
    return std::abs(t.lambda) / t.rhs;
}

RestrictedWeakTypeTrial restricted_weak_type_trial(std::mt19937_64& rng, int m, const RestrictedWeakTypeSpec& spec) {
    const int q = 6;
    const double x0 = -32.0;
    const std::size_t n = 4096;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double e3 = 1.0 + std::ldexp(std::ceil(u(rng) * 63.0 + 1e-9), -q);  // (1, 2] in whole cells
    const double e2 = std::ldexp(std::max(1.0, std::floor(u(rng) * e3 * 64.0)), -q);
    const double e1 = std::ldexp(std::max(1.0, std::floor(u(rng) * e2 * 64.0)), -q);
    const GridSet E1 = random_grid_set(rng, q, x0, n, 0.0, 4.0, e1, 3);
    const GridSet E2 = random_grid_set(rng, q, x0, n, 0.0, 4.0, e2, 3);
    const GridSet E3 = random_grid_set(rng, q, x0, n, 0.0, 4.0, e3, 3);

    std::uniform_int_distribution<int> A(21, 30), B(-6, 3), Al(0, 2);
    FamilySpec fs;
    fs.nu = NuParams{.a = A(rng), .b = B(rng), .sPrime = 0, .alpha = Al(rng)};
    fs.m = m;
    fs.scales = {0};
    fs.xLo = 0.0;
    fs.xHi = 4.0;
    fs.anchors = {0.5, 1.5};
    fs.maxTiles = spec.tiles;
    fs.jitter = 2;
    const auto fam = random_family(rng, fs);
    RestrictedWeakTypeTrial t = restricted_weak_type_eval(E1, E2, E3, fam, m, spec.C0);
    if (!(t.e1 <= t.e2 && t.e2 <= t.e3 && t.e3 > 1.0 && t.e3 <= 2.0))
        throw PreconditionError("restricted_weak_type_trial: set measures out of order");
    return t;
}

std::vector<ExperimentRecord> restricted_weak_type_experiment(const RestrictedWeakTypeSpec& spec, std::uint64_t seed) {
    const std::string name = "restricted_weak_type";
    const std::size_t T = static_cast<std::size_t>(spec.trials);
    const std::size_t M = static_cast<std::size_t>(spec.mMax) + 1;
    std::vector<RestrictedWeakTypeTrial> trials(M * T);
    parallel_for(M * T, [&](std::size_t idx) {
        auto rng = trial_rng(seed, name, idx);
        trials[idx] = restricted_weak_type_trial(rng, static_cast<int>(idx / T), spec);
    });
    std::vector<ExperimentRecord> out;
    bool allMajor = true;
    for (std::size_t mi = 0; mi < M; ++mi) {
        std::map<std::string, std::string> prm{{"m", std::to_string(mi)}, {"C0", fmt(spec.C0)}};
        double worst = 0.0;
        double minMajor = 1e300;
        for (std::size_t t = 0; t < T; ++t) {
            const auto& tr = trials[mi * T + t];
            auto p = prm;
            p["trial"] = std::to_string(t);
            out.push_back({name, p, seed, "lambda", tr.lambda});
            out.push_back({name, p, seed, "ratio", restricted_weak_type_ratio(tr)});
            out.push_back({name, p, seed, "major_fraction", tr.e3Major / tr.e3});
            worst = std::max(worst, restricted_weak_type_ratio(tr));
            minMajor = std::min(minMajor, tr.e3Major / tr.e3);
            allMajor = allMajor && tr.majorOk && std::isfinite(restricted_weak_type_ratio(tr));
        }
        out.push_back({name, prm, seed, "max_ratio", worst});
        out.push_back({name, prm, seed, "min_major_fraction", minMajor});
    }
    out.push_back({name, {{"C0", fmt(spec.C0)}}, seed, "pass", allMajor ? 1.0 : 0.0});
    return out;
}

}  // namespace tfa
