#include "fbmlt/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <map>
#include <mutex>

#include "fbmlt/errors.hpp"

namespace fbmlt::quad {

const GaussHermiteRule& gauss_hermite(int order) {
    if (order < 1) {
        throw DomainError("Gauss-Hermite order must be positive");
    }
    static std::mutex mutex;
    static std::map<int, GaussHermiteRule> cache;
    std::lock_guard lock(mutex);
    if (auto it = cache.find(order); it != cache.end()) {
        return it->second;
    }
    // Jacobi matrix of the monic probabilists' Hermite recurrence He_{k+1} = x He_k - k He_{k-1}.
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
    Eigen::VectorXd sub(order > 1 ? order - 1 : 1);
    for (int k = 1; k < order; ++k) {
        sub(k - 1) = std::sqrt(static_cast<double>(k));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub.head(order - 1), Eigen::ComputeEigenvectors);
    GaussHermiteRule rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    for (int i = 0; i < order; ++i) {
        rule.nodes[i] = es.eigenvalues()(i);
        const double v0 = es.eigenvectors()(0, i);
        rule.weights[i] = v0 * v0;
    }
    // symmetrize against eigen-solver rounding
    for (int i = 0; i < order / 2; ++i) {
        const int j = order - 1 - i;
        const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        rule.weights[i] = rule.weights[j] = w;
    }
    if (order % 2 == 1) {
        rule.nodes[order / 2] = 0.0;
    }
    return cache.emplace(order, std::move(rule)).first->second;
}

Result adaptive(const std::function<double(double)>& f, double a, double b, double abs_tol, double rel_tol,
                unsigned max_depth) {
    if (a == b) {
        return {};
    }
    double error = 0.0;
    double l1 = 0.0;
    // boost's tolerance is relative to the L1 norm; convert the absolute target.
    const double first = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        f, a, b, max_depth, std::max(rel_tol, 1e-15), &error, &l1);
    if (error <= std::max(abs_tol, rel_tol * l1)) {
        return {first, error};
    }
    const double rel = l1 > 0.0 ? std::max(abs_tol / l1, 1e-15) : 1e-15;
    const double value =
        boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, max_depth, rel, &error, &l1);
    return {value, error};
}

Result half_line(const std::function<double(double)>& f, double a, double tol) {
    boost::math::quadrature::exp_sinh<double> integrator;
    double error = 0.0;
    double l1 = 0.0;
    const double value = integrator.integrate([&](double x) { return f(x); }, a,
                                              std::numeric_limits<double>::infinity(), tol, &error, &l1);
    return {value, error};
}

double gauss_legendre10(const std::function<double(double)>& f, double a, double b) {
    return boost::math::quadrature::gauss<double, 10>::integrate(f, a, b);
}

double compensated_sum(const std::vector<double>& terms) {
    double sum = 0.0;
    double c = 0.0;
    for (double t : terms) {
        const double s = sum + t;
        if (std::abs(sum) >= std::abs(t)) {
            c += (sum - s) + t;
        } else {
            c += (t - s) + sum;
        }
        sum = s;
    }
    return sum + c;
}

}  // namespace fbmlt::quad
