#pragma once

// Test-only reference computations, deliberately independent of the library's
// implementation paths.

#include <cmath>
#include <complex>
#include <functional>

#include "formctrl/controls.hpp"
#include "formctrl/linops.hpp"
#include "formctrl/rng.hpp"
#include "formctrl/system.hpp"

namespace oracles {

using formctrl::Complex;
using formctrl::Matrix;
using formctrl::Rng;
using formctrl::ScaleFrame;
using formctrl::Vector;

inline Vector random_vector(Rng& rng, int dim) {
    Vector v(dim);
    for (int i = 0; i < dim; ++i) v(i) = Complex(rng.normal(), rng.normal());
    return v;
}

inline Matrix random_matrix(Rng& rng, int dim) {
    Matrix m(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) m(i, j) = Complex(rng.normal(), rng.normal());
    return m;
}

inline Matrix random_hermitian(Rng& rng, int dim) {
    Matrix g = random_matrix(rng, dim);
    return 0.5 * (g + g.adjoint().eval());
}

inline Matrix random_psd(Rng& rng, int dim, double shift = 0.0) {
    Matrix g = random_matrix(rng, dim);
    return (g.adjoint() * g + shift * Matrix::Identity(dim, dim)).eval();
}

/// Randomized from-below estimate of sup |<Psi, V Phi>| / (|Psi|_+ |Phi|_+):
/// plain random pairs, plus alternating-ascent refinement from random starts
/// (for fixed Phi the optimal Psi is a0^{-1} V Phi, and symmetrically).
inline double pairing_sup(const Matrix& v, const ScaleFrame& frame, Rng& rng,
                          int plain_pairs = 10000, int starts = 20, int sweeps = 60) {
    const Matrix a0_inv = frame.a0_inv_sqrt().mat() * frame.a0_inv_sqrt().mat();
    const int dim = frame.dim();
    auto ratio = [&](const Vector& psi, const Vector& phi) {
        const double denom = frame.plus_norm(psi) * frame.plus_norm(phi);
        if (denom == 0.0) return 0.0;
        return std::abs(psi.dot(v * phi)) / denom;
    };
    double best = 0.0;
    for (int i = 0; i < plain_pairs; ++i)
        best = std::max(best, ratio(random_vector(rng, dim), random_vector(rng, dim)));
    for (int s = 0; s < starts; ++s) {
        Vector phi = random_vector(rng, dim);
        Vector psi = random_vector(rng, dim);
        for (int it = 0; it < sweeps; ++it) {
            Vector psi_new = a0_inv * (v * phi);
            if (psi_new.norm() > 0) psi = psi_new;
            Vector phi_new = a0_inv * (v.adjoint() * psi);
            if (phi_new.norm() > 0) phi = phi_new;
        }
        best = std::max(best, ratio(psi, phi));
    }
    return best;
}

/// Matrix exponential of a general square matrix by scaling and squaring with
/// a long Taylor series; reference path with no eigendecomposition involved.
inline Matrix expm_taylor(const Matrix& a) {
    const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();  // inf-norm bound
    int squarings = 0;
    double scale = 1.0;
    while (norm * scale > 0.25) {
        scale *= 0.5;
        ++squarings;
    }
    const Matrix b = a * scale;
    Matrix term = Matrix::Identity(a.rows(), a.cols());
    Matrix sum = term;
    for (int k = 1; k <= 30; ++k) {
        term = (term * b / static_cast<double>(k)).eval();
        sum += term;
        if (term.cwiseAbs().maxCoeff() < 1e-18) break;
    }
    for (int k = 0; k < squarings; ++k) sum = (sum * sum).eval();
    return sum;
}

/// Midpoint-rule quadrature with a fixed (large) number of points.
inline double midpoint_integral(const std::function<double(double)>& f, double a, double b,
                                long points) {
    const double h = (b - a) / static_cast<double>(points);
    double total = 0.0;
    for (long i = 0; i < points; ++i) total += f(a + (static_cast<double>(i) + 0.5) * h);
    return total * h;
}

/// exp(-i H T) by many Cayley steps: unitary, second order, and free of any
/// eigendecomposition, so it cross-checks the exponential path.
inline Matrix cayley_steps(const Matrix& hamiltonian, double duration, long steps) {
    const Eigen::Index dim = hamiltonian.rows();
    const double h = duration / static_cast<double>(steps);
    const Matrix id = Matrix::Identity(dim, dim);
    const Matrix half = Complex(0.0, 0.5 * h) * hamiltonian;
    const Matrix step = (id + half).fullPivLu().solve(id - half);
    Matrix u = id;
    for (long i = 0; i < steps; ++i) u = (step * u).eval();
    return u;
}

/// Random piecewise-constant schedule with values inside the given box.
inline formctrl::ControlSchedule random_pc_schedule(Rng& rng, double horizon, int segments,
                                                    const formctrl::ControlBox& box) {
    std::vector<double> bp{0.0};
    std::vector<double> gaps;
    double total = 0.0;
    for (int j = 0; j < segments; ++j) {
        gaps.push_back(rng.uniform(0.35, 1.0));
        total += gaps.back();
    }
    for (int j = 0; j < segments; ++j) bp.push_back(bp.back() + gaps[j] * horizon / total);
    bp.back() = horizon;
    std::vector<std::vector<double>> vals;
    for (int j = 0; j < segments; ++j) {
        std::vector<double> u;
        for (const auto& [lo, hi] : box) u.push_back(rng.uniform(lo, hi));
        vals.push_back(std::move(u));
    }
    return formctrl::ControlSchedule::piecewise_constant(std::move(bp), std::move(vals));
}

}  // namespace oracles
