#include "tfa/rational.hpp"

#include <stdexcept>

namespace tfa {

Rational::Rational(long long n, long long d) {
    if (d == 0) throw std::invalid_argument("Rational: zero denominator");
    v_ = mpq_class(mpz_class(static_cast<long>(n)), mpz_class(static_cast<long>(d)));
    v_.canonicalize();
}

Rational Rational::pow2(int e) {
    mpz_class p = 1;
    mpz_mul_2exp(p.get_mpz_t(), p.get_mpz_t(), static_cast<mp_bitcnt_t>(e < 0 ? -e : e));
    if (e >= 0) return Rational(mpq_class(p));
    return Rational(mpq_class(mpz_class(1), p));
}

Rational Rational::parse(const std::string& s) {
    mpq_class q;
    if (q.set_str(s, 10) != 0) throw std::invalid_argument("Rational: cannot parse '" + s + "'");
    return Rational(q);
}

mpz_class Rational::floor() const {
    mpz_class r;
    mpz_fdiv_q(r.get_mpz_t(), v_.get_num_mpz_t(), v_.get_den_mpz_t());
    return r;
}

Rational& Rational::operator/=(const Rational& o) {
    if (sgn(o.v_) == 0) throw std::domain_error("Rational: division by zero");
    v_ /= o.v_;
    return *this;
}

std::size_t hash_value(const Rational& r) {
    std::size_t h1 = std::hash<std::string>{}(r.num().get_str(16));
    std::size_t h2 = std::hash<std::string>{}(r.den().get_str(16));
    return h1 ^ (h2 + 0x9e3779b97f4a7c15ULL + (h1 << 6) + (h1 >> 2));
}

}  // namespace tfa
