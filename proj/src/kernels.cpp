#include "fbmlt/kernels.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>

#include "fbmlt/errors.hpp"
#include "fbmlt/quadrature.hpp"

namespace fbmlt {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599343819;
constexpr double kCompactAbsTol = 1e-10;
constexpr double kWholeLineAbsTol = 1e-9;

// b^{(j)}(x) = exp(-1/(1-x^2)) * p_j(x) / (1-x^2)^{2j}, with
// p_{j+1} = p_j' q^2 + 4 j x q p_j - 2 x p_j and q = 1 - x^2.
constexpr int kBumpOrders = 8;

using Poly = std::vector<double>;

Poly poly_mul(const Poly& a, const Poly& b) {
    Poly out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            out[i + j] += a[i] * b[j];
        }
    }
    return out;
}

Poly poly_add(Poly a, const Poly& b) {
    if (a.size() < b.size()) {
        a.resize(b.size(), 0.0);
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
        a[i] += b[i];
    }
    return a;
}

Poly poly_deriv(const Poly& a) {
    if (a.size() <= 1) {
        return {0.0};
    }
    Poly out(a.size() - 1);
    for (std::size_t i = 1; i < a.size(); ++i) {
        out[i - 1] = static_cast<double>(i) * a[i];
    }
    return out;
}

double poly_eval(const Poly& a, double x) {
    double r = 0.0;
    for (auto it = a.rbegin(); it != a.rend(); ++it) {
        r = r * x + *it;
    }
    return r;
}

const std::array<Poly, kBumpOrders + 1>& bump_numerators() {
    static const auto table = [] {
        std::array<Poly, kBumpOrders + 1> p;
        const Poly q{1.0, 0.0, -1.0};
        const Poly q2 = poly_mul(q, q);
        p[0] = {1.0};
        for (int j = 0; j < kBumpOrders; ++j) {
            const Poly x_term{0.0, 4.0 * j};
            const Poly a = poly_mul(poly_deriv(p[j]), q2);
            const Poly b = poly_mul(poly_mul(x_term, q), p[j]);
            const Poly c = poly_mul(Poly{0.0, -2.0}, p[j]);
            p[j + 1] = poly_add(poly_add(a, b), c);
        }
        return p;
    }();
    return table;
}

double bump_derivative(int j, double x) {
    if (!(std::abs(x) < 1.0)) {
        return 0.0;
    }
    const double q = 1.0 - x * x;
    const double u = -1.0 / q;
    const double e = u - 2.0 * j * std::log(q);
    if (e < -745.0) {
        return 0.0;
    }
    return poly_eval(bump_numerators()[static_cast<std::size_t>(j)], x) * std::exp(e);
}

double cauchy_derivative(int j, double x) {
    if (std::abs(x) > 1e100) {
        return 0.0;  // below 1e-200 for every order; avoids inf/inf
    }
    const double s = 1.0 + x * x;
    constexpr double inv_pi = std::numbers::inv_pi;
    switch (j) {
        case 0:
            return inv_pi / s;
        case 1:
            return inv_pi * (-2.0 * x) / (s * s);
        case 2:
            return inv_pi * (6.0 * x * x - 2.0) / (s * s * s);
        default:
            return inv_pi * (-24.0 * x * (x * x - 1.0)) / (s * s * s * s);
    }
}

std::string format_number(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

HermitePoly HermitePoly::of(int q) {
    if (q < 0) {
        throw DomainError("Hermite order must be nonnegative");
    }
    if (q > 20) {
        throw DomainError("exact Hermite coefficients are limited to q <= 20");
    }
    std::vector<std::int64_t> prev{1};
    if (q == 0) {
        return {0, prev};
    }
    std::vector<std::int64_t> cur{0, 1};
    for (int k = 1; k < q; ++k) {
        std::vector<std::int64_t> next(cur.size() + 1, 0);
        for (std::size_t i = 0; i < cur.size(); ++i) {
            next[i + 1] += cur[i];
        }
        for (std::size_t i = 0; i < prev.size(); ++i) {
            next[i] -= static_cast<std::int64_t>(k) * prev[i];
        }
        prev = std::move(cur);
        cur = std::move(next);
    }
    return {q, cur};
}

double HermitePoly::operator()(double x) const {
    double r = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) {
        r = r * x + static_cast<double>(*it);
    }
    return r;
}

double hermite_eval(int q, double x) {
    if (q < 0) {
        throw DomainError("Hermite order must be nonnegative");
    }
    if (q == 0) {
        return 1.0;
    }
    double prev = 1.0;
    double cur = x;
    for (int k = 1; k < q; ++k) {
        const double next = x * cur - k * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

double mollifier_deriv(const MollifierSpec& spec, double x) {
    if (!(spec.epsilon > 0.0)) {
        throw DomainError("mollifier variance must be positive");
    }
    if (spec.order < 0) {
        throw DomainError("mollifier derivative order must be nonnegative");
    }
    const double sd = std::sqrt(spec.epsilon);
    const double z = x / sd;
    if (std::abs(z) > kMollifierCutoff) {
        return 0.0;
    }
    const double sign = spec.order % 2 == 0 ? 1.0 : -1.0;
    return sign * std::pow(sd, -(spec.order + 1)) * hermite_eval(spec.order, z) * kInvSqrt2Pi *
           std::exp(-0.5 * z * z);
}

Kernel::Kernel(std::string name, int max_derivative_order, Support support, DecayClass decay, DerivativeFn eval)
    : name_(std::move(name)),
      max_order_(max_derivative_order),
      support_(support),
      decay_(decay),
      eval_(std::move(eval)) {
    if (max_order_ < 0) {
        throw DomainError("kernel derivative order must be nonnegative");
    }
    if (support_.compact && !(support_.lo < support_.hi)) {
        throw DomainError("kernel support must be a nonempty interval");
    }
}

double Kernel::deriv(int j, double x) const {
    if (j < 0 || j > max_order_) {
        std::ostringstream os;
        os << "kernel '" << name_ << "' provides derivatives up to order " << max_order_ << ", requested " << j;
        throw CapabilityError(os.str());
    }
    return eval_(j, x);
}

Kernel Kernel::derivative_kernel(int j) const {
    if (j == 0) {
        return *this;
    }
    if (j < 0 || j > max_order_) {
        throw CapabilityError("derivative_kernel order exceeds kernel capability");
    }
    auto eval = eval_;
    Kernel out("d" + std::to_string(j) + "(" + name_ + ")", max_order_ - j, support_, decay_,
               [eval, j](int i, double x) { return eval(i + j, x); });
    if (j == 1) {
        out.primitive_ = std::make_shared<const Kernel>(*this);
    } else {
        out.primitive_ = std::make_shared<const Kernel>(derivative_kernel(j - 1));
    }
    return out;
}

Kernel Kernel::renamed(std::string name) const {
    Kernel out = *this;
    out.name_ = std::move(name);
    return out;
}

double kernel_deriv(const Kernel& k, int j, double x) {
    return k.deriv(j, x);
}

namespace catalogue {

Kernel gaussian(double eps) {
    if (!(eps > 0.0)) {
        throw DomainError("gaussian kernel variance must be positive");
    }
    return Kernel("gaussian(eps=" + format_number(eps) + ")", 12, Support::whole_line(),
                  {DecayClass::Kind::gaussian, std::sqrt(eps)},
                  [eps](int j, double x) { return mollifier_deriv({eps, j}, x); });
}

Kernel gaussian_deriv(int l, double eps) {
    if (l < 0 || l > 9) {
        throw DomainError("gaussian_deriv order must be in [0, 9]");
    }
    return gaussian(eps).derivative_kernel(l).renamed("gaussian_deriv(l=" + std::to_string(l) +
                                                       ",eps=" + format_number(eps) + ")");
}

Kernel affine_gaussian() {
    // (x+1) phi is a product with a linear factor, so Leibniz stops after two terms.
    return Kernel("affine_gaussian", 10, Support::whole_line(), {DecayClass::Kind::gaussian, 1.0},
                  [](int j, double x) {
                      double v = (x + 1.0) * mollifier_deriv({1.0, j}, x);
                      if (j > 0) {
                          v += j * mollifier_deriv({1.0, j - 1}, x);
                      }
                      return v;
                  });
}

Kernel bump() {
    return Kernel("bump", kBumpOrders, Support::interval(-1.0, 1.0), {DecayClass::Kind::compact, 0.0},
                  [](int j, double x) { return bump_derivative(j, x); });
}

Kernel bump_deriv() {
    return bump().derivative_kernel(1).renamed("bump_deriv");
}

Kernel cauchy() {
    return Kernel("cauchy", 3, Support::whole_line(), {DecayClass::Kind::polynomial, 2.0},
                  [](int j, double x) { return cauchy_derivative(j, x); });
}

Kernel zero() {
    return Kernel("zero", 12, Support::interval(-1.0, 1.0), {DecayClass::Kind::compact, 0.0},
                  [](int, double) { return 0.0; });
}

Kernel truncated(const Kernel& k, double lo, double hi) {
    if (!(lo < hi)) {
        throw DomainError("truncation interval must be nonempty");
    }
    Kernel inner = k;
    return Kernel("truncated(kernel=" + k.name() + ",lo=" + format_number(lo) + ",hi=" + format_number(hi) + ")",
                  0, Support::interval(lo, hi), {DecayClass::Kind::compact, 0.0},
                  [inner, lo, hi](int, double x) { return (x >= lo && x <= hi) ? inner(x) : 0.0; });
}

}  // namespace catalogue

namespace {

struct ParsedRef {
    std::string name;
    std::map<std::string, std::string> args;
};

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) {
        ++b;
    }
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) {
        --e;
    }
    return std::string(s.substr(b, e - b));
}

ParsedRef split_ref(std::string_view ref) {
    const std::string s = trim(ref);
    ParsedRef out;
    const auto open = s.find('(');
    if (open == std::string::npos) {
        out.name = s;
        return out;
    }
    if (s.back() != ')') {
        throw ConfigError("kernel reference '" + s + "' has unbalanced parentheses");
    }
    out.name = trim(std::string_view(s).substr(0, open));
    const std::string body = s.substr(open + 1, s.size() - open - 2);
    int depth = 0;
    std::size_t start = 0;
    auto flush = [&](std::size_t end) {
        const std::string item = trim(std::string_view(body).substr(start, end - start));
        if (item.empty()) {
            return;
        }
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("kernel argument '" + item + "' must be key=value");
        }
        out.args[trim(std::string_view(item).substr(0, eq))] = trim(std::string_view(item).substr(eq + 1));
    };
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (body[i] == '(') {
            ++depth;
        } else if (body[i] == ')') {
            --depth;
        } else if (body[i] == ',' && depth == 0) {
            flush(i);
            start = i + 1;
        }
    }
    if (depth != 0) {
        throw ConfigError("kernel reference '" + s + "' has unbalanced parentheses");
    }
    flush(body.size());
    return out;
}

double number_arg(const ParsedRef& r, const std::string& key) {
    const auto it = r.args.find(key);
    if (it == r.args.end()) {
        throw ConfigError("kernel '" + r.name + "' requires argument '" + key + "'");
    }
    try {
        std::size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size()) {
            throw std::invalid_argument("trailing characters");
        }
        return v;
    } catch (const std::exception&) {
        throw ConfigError("kernel argument " + key + "='" + it->second + "' is not a number");
    }
}

void expect_args(const ParsedRef& r, std::initializer_list<const char*> keys) {
    for (const auto& [k, v] : r.args) {
        bool known = false;
        for (const char* key : keys) {
            known = known || k == key;
        }
        if (!known) {
            throw ConfigError("kernel '" + r.name + "' does not take argument '" + k + "'");
        }
    }
}

}  // namespace

Kernel parse_kernel(std::string_view ref) {
    const ParsedRef r = split_ref(ref);
    try {
        if (r.name == "gaussian") {
            expect_args(r, {"eps"});
            return catalogue::gaussian(r.args.count("eps") ? number_arg(r, "eps") : 1.0);
        }
        if (r.name == "gaussian_deriv") {
            expect_args(r, {"l", "eps"});
            const double l = number_arg(r, "l");
            if (l != std::floor(l)) {
                throw ConfigError("gaussian_deriv order l must be an integer");
            }
            return catalogue::gaussian_deriv(static_cast<int>(l), r.args.count("eps") ? number_arg(r, "eps") : 1.0);
        }
        if (r.name == "affine_gaussian") {
            expect_args(r, {});
            return catalogue::affine_gaussian();
        }
        if (r.name == "bump") {
            expect_args(r, {});
            return catalogue::bump();
        }
        if (r.name == "bump_deriv") {
            expect_args(r, {});
            return catalogue::bump_deriv();
        }
        if (r.name == "cauchy") {
            expect_args(r, {});
            return catalogue::cauchy();
        }
        if (r.name == "zero") {
            expect_args(r, {});
            return catalogue::zero();
        }
        if (r.name == "truncated") {
            expect_args(r, {"kernel", "lo", "hi"});
            const auto it = r.args.find("kernel");
            if (it == r.args.end()) {
                throw ConfigError("truncated requires argument 'kernel'");
            }
            return catalogue::truncated(parse_kernel(it->second), number_arg(r, "lo"), number_arg(r, "hi"));
        }
        if (r.name == "antiderivative") {
            expect_args(r, {"kernel"});
            const auto it = r.args.find("kernel");
            if (it == r.args.end()) {
                throw ConfigError("antiderivative requires argument 'kernel'");
            }
            return antiderivative(parse_kernel(it->second));
        }
    } catch (const DomainError& e) {
        throw ConfigError(std::string("invalid kernel reference: ") + e.what());
    }
    throw ConfigError("unknown kernel '" + r.name + "'");
}

KernelIntegral integrate_over(const Kernel& k, const std::function<double(double)>& f, double growth) {
    switch (k.decay().kind) {
        case DecayClass::Kind::compact: {
            const double lo = k.support().lo;
            const double hi = k.support().hi;
            if (lo < 0.0 && hi > 0.0) {
                const auto a = quad::adaptive(f, lo, 0.0, 0.5 * kCompactAbsTol);
                const auto b = quad::adaptive(f, 0.0, hi, 0.5 * kCompactAbsTol);
                return {a.value + b.value, a.error + b.error};
            }
            const auto r = quad::adaptive(f, lo, hi, kCompactAbsTol);
            return {r.value, r.error};
        }
        case DecayClass::Kind::gaussian: {
            const double sd = k.decay().parameter;
            const double inner = 8.0 * sd;
            const double outer = kMollifierCutoff * sd;
            const double tol = 0.25 * kWholeLineAbsTol;
            const std::array<std::pair<double, double>, 4> pieces{
                {{-outer, -inner}, {-inner, 0.0}, {0.0, inner}, {inner, outer}}};
            double value = 0.0;
            double error = 0.0;
            for (const auto& [a, b] : pieces) {
                const auto r = quad::adaptive(f, a, b, tol);
                value += r.value;
                error += r.error;
            }
            return {value, error};
        }
        case DecayClass::Kind::polynomial: {
            const double p = k.decay().parameter;
            if (!(p - growth > 1.0)) {
                std::ostringstream os;
                os << "integral over kernel '" << k.name() << "' diverges: decay |x|^-" << p << " against growth |x|^"
                   << growth;
                throw IntegrabilityError(os.str());
            }
            const auto right = quad::half_line(f, 0.0, 1e-10);
            const auto left = quad::half_line([&](double x) { return f(-x); }, 0.0, 1e-10);
            return {right.value + left.value, right.error + left.error};
        }
    }
    return {0.0, 0.0};
}

Kernel antiderivative(const Kernel& k) {
    if (k.primitive()) {
        const Kernel& p = *k.primitive();
        if (p.support().compact) {
            return p;
        }
    }
    if (!k.support().compact) {
        throw DomainError("antiderivative requires a compactly supported kernel");
    }
    const auto mu = integrate_over(k, [&](double x) { return k(x); });
    if (std::abs(mu.value) > kZeroEnergyTolerance) {
        std::ostringstream os;
        os << "antiderivative requires zero energy, but mu = " << mu.value;
        throw DomainError(os.str());
    }

    constexpr int kCells = 1024;
    const double lo = k.support().lo;
    const double hi = k.support().hi;
    const double width = (hi - lo) / kCells;
    auto cumulative = std::make_shared<std::vector<double>>(kCells + 1, 0.0);
    const Kernel base = k;
    for (int c = 0; c < kCells; ++c) {
        const double a = lo + c * width;
        (*cumulative)[c + 1] = (*cumulative)[c] + quad::gauss_legendre10([&](double x) { return base(x); }, a, a + width);
    }
    auto eval = [base, cumulative, lo, hi, width](int j, double x) -> double {
        if (j > 0) {
            return base.deriv(j - 1, x);
        }
        if (x <= lo || x >= hi) {
            return 0.0;
        }
        const int c = std::min(kCells - 1, static_cast<int>((x - lo) / width));
        const double a = lo + c * width;
        return (*cumulative)[c] + quad::gauss_legendre10([&](double y) { return base(y); }, a, x);
    };
    return Kernel("antiderivative(kernel=" + k.name() + ")", k.max_derivative_order() + 1, k.support(), k.decay(),
                  std::move(eval));
}

KernelMoments compute_moments(const Kernel& k, std::span<const double> kappas, std::span<const int> ells) {
    KernelMoments m;
    auto track = [&](const KernelIntegral& r) {
        m.achieved_error = std::max(m.achieved_error, r.error);
        return r.value;
    };
    m.mu = track(integrate_over(k, [&](double x) { return k(x); }));
    m.zero_energy = std::abs(m.mu) <= kZeroEnergyTolerance;
    try {
        m.mu_tilde = track(integrate_over(k, [&](double x) { return x * k(x); }, 1.0));
    } catch (const IntegrabilityError&) {
        m.mu_tilde.reset();
    }
    for (double kappa : kappas) {
        if (!(kappa >= 0.0)) {
            throw DomainError("weight exponent kappa must be nonnegative");
        }
        m.weighted_l1[kappa] = track(integrate_over(
            k, [&](double x) { return std::pow(1.0 + std::abs(x), kappa) * std::abs(k(x)); }, kappa));
    }
    for (int ell : ells) {
        if (ell > k.max_derivative_order()) {
            throw CapabilityError("moment request exceeds kernel derivative order");
        }
        const double sq = track(integrate_over(k, [&](double x) {
            const double d = k.deriv(ell, x);
            return d * d;
        }));
        m.l2_of_deriv[ell] = std::sqrt(std::max(sq, 0.0));
    }
    return m;
}

}  // namespace fbmlt
