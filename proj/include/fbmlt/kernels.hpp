#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fbmlt {

/// Probabilists' Hermite polynomial He_q with exact integer coefficients
/// (coefficients[k] multiplies x^k).
struct HermitePoly {
    int order = 0;
    std::vector<std::int64_t> coefficients;

    /// Built from He_{q+1} = x He_q - q He_{q-1}; exact for q <= 20.
    static HermitePoly of(int q);
    double operator()(double x) const;
};

/// He_q(x) by the three-term recurrence.
double hermite_eval(int q, double x);

struct MollifierSpec {
    double epsilon;
    int order;
};

/// |x|/sqrt(eps) beyond which mollifier derivatives are returned as exactly 0.
inline constexpr double kMollifierCutoff = 40.0;

/// l-th derivative of the N(0, eps) density:
/// eps^{-(l+1)/2} (-1)^l He_l(x/sqrt(eps)) phi(x/sqrt(eps)).
double mollifier_deriv(const MollifierSpec& spec, double x);

struct Support {
    bool compact = false;
    double lo = 0.0;
    double hi = 0.0;

    static Support whole_line() { return {}; }
    static Support interval(double lo, double hi) { return {true, lo, hi}; }
};

struct DecayClass {
    enum class Kind { gaussian, polynomial, compact };
    Kind kind = Kind::compact;
    /// gaussian: standard deviation of the envelope; polynomial: exponent p in |g| ~ |x|^{-p}.
    double parameter = 0.0;
};

/// Test function g together with closed-form weak derivatives g^{(0..r)}.
class Kernel {
public:
    using DerivativeFn = std::function<double(int order, double x)>;

    Kernel(std::string name, int max_derivative_order, Support support, DecayClass decay, DerivativeFn eval);

    const std::string& name() const noexcept { return name_; }
    int max_derivative_order() const noexcept { return max_order_; }
    const Support& support() const noexcept { return support_; }
    const DecayClass& decay() const noexcept { return decay_; }

    double operator()(double x) const { return eval_(0, x); }
    /// j-th weak derivative; throws CapabilityError if j exceeds the available order.
    double deriv(int j, double x) const;

    /// g^{(j)} as a kernel of its own. Its derivatives forward to this kernel, so
    /// derivative_kernel(j).deriv(i, x) == deriv(i + j, x) bit for bit.
    Kernel derivative_kernel(int j) const;
    Kernel renamed(std::string name) const;

    /// Closed-form primitive, when this kernel was produced by derivative_kernel(1).
    const std::shared_ptr<const Kernel>& primitive() const noexcept { return primitive_; }

private:
    std::string name_;
    int max_order_;
    Support support_;
    DecayClass decay_;
    DerivativeFn eval_;
    std::shared_ptr<const Kernel> primitive_;
};

double kernel_deriv(const Kernel& k, int j, double x);

namespace catalogue {

/// phi_eps, the N(0, eps) density.
Kernel gaussian(double eps);
/// phi_eps^{(l)}.
Kernel gaussian_deriv(int l, double eps);
/// (x + 1) phi_1(x); both mu[g] and mu[x g] equal 1.
Kernel affine_gaussian();
/// exp(-1/(1-x^2)) on (-1, 1).
Kernel bump();
/// Derivative of bump(); its primitive is bump().
Kernel bump_deriv();
/// 1/(pi (1 + x^2)), polynomial decay p = 2.
Kernel cauchy();
/// Identically zero.
Kernel zero();
/// k restricted to [lo, hi]; only order 0 is offered (the cut creates jumps).
Kernel truncated(const Kernel& k, double lo, double hi);

}  // namespace catalogue

/// Parses references such as "bump", "gaussian(eps=0.5)", "gaussian_deriv(l=1,eps=1)",
/// "affine_gaussian", "truncated(kernel=gaussian_deriv(l=1,eps=1),lo=-8,hi=8)".
Kernel parse_kernel(std::string_view ref);

/// F(x) = integral of k over (-inf, x]. Requires compact support and zero energy.
Kernel antiderivative(const Kernel& k);

struct KernelMoments {
    double mu = 0.0;
    /// Absent when x g(x) is not absolutely integrable.
    std::optional<double> mu_tilde;
    std::map<double, double> weighted_l1;
    std::map<int, double> l2_of_deriv;
    bool zero_energy = false;
    /// Largest quadrature error estimate among the computed quantities.
    double achieved_error = 0.0;
};

inline constexpr double kZeroEnergyTolerance = 1e-9;
inline const std::vector<double> kDefaultKappas{0.1, 0.25, 0.49};

/// Integral of f over the kernel's effective domain (compact support, Gaussian
/// cutoff, or the whole line for polynomial decay).
struct KernelIntegral {
    double value;
    double error;
};
KernelIntegral integrate_over(const Kernel& k, const std::function<double(double)>& f, double growth = 0.0);

KernelMoments compute_moments(const Kernel& k, std::span<const double> kappas, std::span<const int> ells);

}  // namespace fbmlt
