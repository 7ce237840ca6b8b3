#pragma once

// Independent reference implementations used as test oracles. They share no
// code with the library beyond the container types.

#include "cbo/types.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <vector>

namespace oracle {

using big = boost::multiprecision::cpp_bin_float_50;

// Unshifted weighted mean in 50-digit arithmetic.
inline cbo::Vector consensus(const cbo::Matrix& y, const cbo::Vector& e, double alpha) {
    const auto n = y.rows(), d = y.cols();
    std::vector<big> num(static_cast<std::size_t>(d), big(0));
    big den = 0;
    for (cbo::Index i = 0; i < n; ++i) {
        big w = exp(-big(alpha) * big(e[i]));
        den += w;
        for (cbo::Index k = 0; k < d; ++k) num[static_cast<std::size_t>(k)] += w * big(y(i, k));
    }
    cbo::Vector out(d);
    for (cbo::Index k = 0; k < d; ++k) out[k] = static_cast<double>(num[static_cast<std::size_t>(k)] / den);
    return out;
}

inline double cs_eval(const cbo::Matrix& A, const cbo::Vector& b, double mu, double p, const cbo::Vector& x) {
    double sq = 0.0;
    for (cbo::Index r = 0; r < A.rows(); ++r) {
        double acc = 0.0;
        for (cbo::Index c = 0; c < A.cols(); ++c) acc += A(r, c) * x[c];
        acc -= b[r];
        sq += acc * acc;
    }
    double pen = 0.0;
    for (cbo::Index c = 0; c < x.size(); ++c) pen += std::pow(std::fabs(x[c]), p);
    return 0.5 * sq + mu * pen;
}

inline double lyapunov(const cbo::Matrix& X, const cbo::Matrix& Y, const cbo::Vector& xs) {
    double s = 0.0;
    for (cbo::Index i = 0; i < X.rows(); ++i) {
        for (cbo::Index k = 0; k < X.cols(); ++k) {
            const double a = X(i, k) - xs[k];
            const double b = Y(i, k) - X(i, k);
            s += a * a + b * b;
        }
    }
    return s / (2.0 * static_cast<double>(X.rows()));
}

inline double w2_sq(const cbo::Matrix& X, const cbo::Matrix& Y, const cbo::Vector& xs) {
    double s = 0.0;
    for (cbo::Index i = 0; i < X.rows(); ++i) {
        for (cbo::Index k = 0; k < X.cols(); ++k) {
            const double a = X(i, k) - xs[k];
            const double b = Y(i, k) - xs[k];
            s += a * a + b * b;
        }
    }
    return s / static_cast<double>(X.rows());
}

// Term-by-term evaluation of the mass-decay rate with lambda = (l1, l2, l3),
// sigma = (s1, s2, s3).
inline double mass_decay_p(const double lam[3], const double sig[3], double r, double B, double c, int d,
                           double C_grad) {
    const double Cu = std::max(r / 2 + B, C_grad * d * r / 2);
    const double ct = 2 * c - 1;
    double total = 0;
    for (int i = 0; i < 3; ++i) {
        if (lam[i] <= 0) continue;
        const double a = 2 * lam[i] * Cu * std::sqrt(c) / (std::pow(1 - c, 2) * (r / 2));
        const double b = sig[i] * sig[i] * Cu * Cu / (std::pow(1 - c, 4) * (r / 2) * (r / 2));
        const double e = 4 * lam[i] * lam[i] / (ct * sig[i] * sig[i]);
        const double mult = (i == 0 || i == 2) ? 2.0 : 1.0;
        total += mult * (a + b + e);
        if (i == 1) total += sig[1] * sig[1] * c / std::pow(1 - c, 4);
    }
    return d * total;
}

inline double rel_err(const cbo::Vector& a, const cbo::Vector& b) {
    const double scale = std::max(a.norm(), b.norm());
    return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

}  // namespace oracle
