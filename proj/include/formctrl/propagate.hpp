#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include "formctrl/controls.hpp"
#include "formctrl/linops.hpp"
#include "formctrl/system.hpp"

namespace formctrl {

struct PropagatorMeta {
    std::string integrator;
    double tol = 0.0;
    int steps = 0;
};

/// Unitary U(t, s) together with how it was produced.
struct Propagator {
    Matrix u;
    double t = 0.0;
    double s = 0.0;
    PropagatorMeta meta;
};

inline double unitarity_defect(const Matrix& u) {
    return (u.adjoint() * u - Matrix::Identity(u.rows(), u.cols())).norm();
}

/// Projects onto the unitary group when roundoff has accumulated past 1e-9.
inline void enforce_unitary(Matrix& u) {
    if (unitarity_defect(u) <= 1e-9) return;
    std::cerr << "[formctrl] warning: polar cleanup of a drifting propagator (defect "
              << unitarity_defect(u) << ")\n";
    Eigen::BDCSVD<Matrix> svd(u, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u = svd.matrixU() * svd.matrixV().adjoint();
}

/// Eigendecomposition cache for assembled operators, keyed by the control
/// vector bytes. One cache serves one system; inserts are idempotent so
/// concurrent readers are safe.
class ExpCache {
public:
    const EigenSystem& get(const FormLinearSystem& system, const Eigen::VectorXd& u) {
        std::string key(reinterpret_cast<const char*>(u.data()),
                        static_cast<std::size_t>(u.size()) * sizeof(double));
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = entries_.find(key);
            if (it != entries_.end()) return it->second;
        }
        EigenSystem es = eigh(assemble(system, u));
        std::lock_guard<std::mutex> lock(mutex_);
        return entries_.emplace(std::move(key), std::move(es)).first->second;
    }

private:
    std::mutex mutex_;
    std::map<std::string, EigenSystem> entries_;
};

namespace detail {

inline Matrix exp_minus_i(const EigenSystem& es, double duration) {
    Vector phases(es.evals.size());
    for (Eigen::Index i = 0; i < phases.size(); ++i)
        phases(i) = std::exp(Complex(0.0, -duration * es.evals(i)));
    return es.evecs * phases.asDiagonal() * es.evecs.adjoint();
}

// One fourth-order Magnus step over [a, a+h] with two Gauss nodes:
//   G = (h/2)(H1 + H2) + (sqrt(3) h^2 / 12) i [H1, H2],   U = exp(-i G).
inline Matrix magnus4_step(const std::function<Matrix(double)>& hamiltonian, double a, double h) {
    static const double kGaussOffset = std::sqrt(3.0) / 6.0;
    const Matrix h1 = hamiltonian(a + (0.5 - kGaussOffset) * h);
    const Matrix h2 = hamiltonian(a + (0.5 + kGaussOffset) * h);
    Matrix g = 0.5 * h * (h1 + h2);
    const Matrix comm = h1 * h2 - h2 * h1;
    g += Complex(0.0, std::sqrt(3.0) * h * h / 12.0) * comm;
    return exp_minus_i(eigh(HermitianMatrix(std::move(g))), 1.0);
}

}  // namespace detail

inline constexpr double kStepFloor = 1e-8;

/// Adaptive Magnus propagation of a time-dependent Hermitian generator over
/// [a, b]. Step control is by Richardson comparison of one step against two
/// half steps; the half-step composition is kept. Throws when the requested
/// tolerance would need steps below 1e-8.
inline Matrix propagate_generator(const std::function<Matrix(double)>& hamiltonian, double a,
                                  double b, double tol, int* steps_taken = nullptr) {
    if (!(b >= a)) throw std::invalid_argument("propagate_generator: reversed interval");
    const Eigen::Index dim = hamiltonian(a).rows();
    Matrix u = Matrix::Identity(dim, dim);
    if (b == a) return u;
    const double span = b - a;
    double t = a;
    double h = span;
    int steps = 0;
    while (t < b - 1e-14 * span) {
        h = std::min(h, b - t);
        if (h < kStepFloor) {
            std::ostringstream os;
            os << "propagate_generator: step size " << h << " fell below the floor " << kStepFloor
               << " at t = " << t << " (tolerance " << tol << " unachievable)";
            throw std::runtime_error(os.str());
        }
        const Matrix whole = detail::magnus4_step(hamiltonian, t, h);
        const Matrix first = detail::magnus4_step(hamiltonian, t, 0.5 * h);
        const Matrix halves = detail::magnus4_step(hamiltonian, t + 0.5 * h, 0.5 * h) * first;
        const double err = (whole - halves).norm() / 15.0;
        // The proportional budget is floored at the roundoff level of the
        // Richardson estimate, which otherwise stalls the refinement loop.
        const double tol_step =
            std::max(tol * h / span, 1e-14 * std::sqrt(static_cast<double>(dim)));
        if (err <= tol_step) {
            u = halves * u;
            t += h;
            ++steps;
            h = (err < 1e-3 * tol_step) ? 2.0 * h
                                        : h * std::min(2.0, 0.9 * std::pow(tol_step / err, 0.2));
        } else {
            h *= std::max(0.1, 0.9 * std::pow(tol_step / err, 0.2));
        }
    }
    enforce_unitary(u);
    if (steps_taken) *steps_taken = steps;
    return u;
}

/// Exact propagator for a piecewise-constant schedule: the ordered product of
/// segment exponentials, eigendecomposed once per distinct control value.
/// U(s, t) with s > t is the adjoint of U(t, s).
inline Propagator propagate_pc(const FormLinearSystem& system, const ControlSchedule& schedule,
                               double t, double s, ExpCache* cache = nullptr) {
    if (schedule.schedule_class() != ScheduleClass::piecewise_constant)
        throw std::invalid_argument("propagate_pc: schedule must be piecewise_constant");
    if (schedule.channels() != system.channels())
        throw std::invalid_argument("propagate_pc: channel count mismatch");
    if (t == s)
        return {Matrix::Identity(system.dim(), system.dim()), t, s, {"segment_exponentials"}};
    if (t < s) {
        Propagator fwd = propagate_pc(system, schedule, s, t, cache);
        return {fwd.u.adjoint(), t, s, fwd.meta};
    }
    const auto& bp = schedule.breakpoints();
    if (s < -1e-12 || t > schedule.horizon() + 1e-12)
        throw std::invalid_argument("propagate_pc: interval outside the schedule horizon");

    Matrix u = Matrix::Identity(system.dim(), system.dim());
    int pieces = 0;
    ExpCache local;
    ExpCache& exp_cache = cache ? *cache : local;
    for (int j = 0; j + 1 < static_cast<int>(bp.size()); ++j) {
        const double a = std::max(bp[j], s), b = std::min(bp[j + 1], t);
        if (b <= a) continue;
        const Eigen::VectorXd uval = schedule.evaluate_in(j, 0.5 * (a + b));
        u = (detail::exp_minus_i(exp_cache.get(system, uval), b - a) * u).eval();
        ++pieces;
    }
    enforce_unitary(u);
    return {std::move(u), t, s, {"segment_exponentials", 0.0, pieces}};
}

/// Adaptive Magnus propagator for schedules that are C2 (or better) on the
/// interiors of their segments; stepping restarts at every breakpoint and the
/// per-segment results compose like the piecewise-constant case.
inline Propagator propagate_smooth(const FormLinearSystem& system, const ControlSchedule& schedule,
                                   double t, double s, double tol = 1e-10) {
    if (schedule.channels() != system.channels())
        throw std::invalid_argument("propagate_smooth: channel count mismatch");
    if (t == s)
        return {Matrix::Identity(system.dim(), system.dim()), t, s, {"magnus4_adaptive", tol}};
    if (t < s) {
        Propagator fwd = propagate_smooth(system, schedule, s, t, tol);
        return {fwd.u.adjoint(), t, s, fwd.meta};
    }
    const auto& bp = schedule.breakpoints();
    if (s < -1e-12 || t > schedule.horizon() + 1e-12)
        throw std::invalid_argument("propagate_smooth: interval outside the schedule horizon");

    Matrix u = Matrix::Identity(system.dim(), system.dim());
    int total_steps = 0;
    for (int j = 0; j + 1 < static_cast<int>(bp.size()); ++j) {
        const double a = std::max(bp[j], s), b = std::min(bp[j + 1], t);
        if (b <= a) continue;
        const auto hamiltonian = [&, j](double tau) {
            return assemble(system, schedule.evaluate_in(j, tau)).mat();
        };
        int steps = 0;
        const double tol_piece = tol * (b - a) / (t - s);
        u = (propagate_generator(hamiltonian, a, b, tol_piece, &steps) * u).eval();
        total_steps += steps;
    }
    enforce_unitary(u);
    return {std::move(u), t, s, {"magnus4_adaptive", tol, total_steps}};
}

/// Dispatch on the schedule class.
inline Propagator propagate(const FormLinearSystem& system, const ControlSchedule& schedule,
                            double t, double s, double tol = 1e-10, ExpCache* cache = nullptr) {
    if (schedule.schedule_class() == ScheduleClass::piecewise_constant)
        return propagate_pc(system, schedule, t, s, cache);
    return propagate_smooth(system, schedule, t, s, tol);
}

/// Rotating-frame conjugation e^{i t h0} U(t,s) e^{-i s h0}.
inline Propagator interaction_picture(const Propagator& prop, const FormLinearSystem& system) {
    if (prop.u.rows() != system.dim())
        throw std::invalid_argument("interaction_picture: dimension mismatch");
    const ScaleFrame& frame = system.frame();
    Matrix rotated = frame.drift_unitary(-prop.t) * prop.u * frame.drift_unitary(prop.s);
    enforce_unitary(rotated);
    PropagatorMeta meta = prop.meta;
    meta.integrator += "+interaction_picture";
    return {std::move(rotated), prop.t, prop.s, std::move(meta)};
}

/// U(t,s) phi with a norm-preservation check at 1e-10 relative.
inline Vector evolve_state(const FormLinearSystem& system, const ControlSchedule& schedule,
                           const Vector& phi, double t, double s, double tol = 1e-10,
                           ExpCache* cache = nullptr) {
    if (phi.size() != system.dim())
        throw std::invalid_argument("evolve_state: dimension mismatch");
    const double norm_in = phi.norm();
    if (!(norm_in > 0.0)) throw std::invalid_argument("evolve_state: zero initial state");
    Vector out = propagate(system, schedule, t, s, tol, cache).u * phi;
    if (std::abs(out.norm() - norm_in) > 1e-10 * norm_in)
        throw std::runtime_error("evolve_state: norm not preserved");
    return out;
}

}  // namespace formctrl
