#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "formctrl/controls.hpp"
#include "formctrl/linops.hpp"
#include "formctrl/quadrature.hpp"

namespace formctrl {

using ControlBox = std::vector<std::pair<double, double>>;

namespace detail {

inline void check_box(const ControlBox& box) {
    for (std::size_t i = 0; i < box.size(); ++i) {
        const auto& [lo, hi] = box[i];
        if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) {
            std::ostringstream os;
            os << "control box coordinate " << i << " is not a bounded interval";
            throw std::invalid_argument(os.str());
        }
    }
}

/// All distinct vertices of the box; the smallest eigenvalue of an affine
/// Hermitian family is concave in u, so box minima are attained here.
inline std::vector<Eigen::VectorXd> box_vertices(const ControlBox& box) {
    const int p = static_cast<int>(box.size());
    if (p > 20)
        throw std::invalid_argument("control box has too many vertices (more than 2^20)");
    std::vector<Eigen::VectorXd> vertices;
    const std::uint64_t count = 1ULL << p;
    for (std::uint64_t mask = 0; mask < count; ++mask) {
        Eigen::VectorXd u(p);
        for (int i = 0; i < p; ++i)
            u(i) = (mask >> i) & 1 ? box[static_cast<std::size_t>(i)].second
                                   : box[static_cast<std::size_t>(i)].first;
        vertices.push_back(std::move(u));
    }
    std::sort(vertices.begin(), vertices.end(),
              [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
                  for (Eigen::Index i = 0; i < a.size(); ++i) {
                      if (a(i) < b(i)) return true;
                      if (a(i) > b(i)) return false;
                  }
                  return false;
              });
    vertices.erase(std::unique(vertices.begin(), vertices.end(),
                               [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
                                   return (a - b).cwiseAbs().maxCoeff() == 0.0;
                               }),
                   vertices.end());
    return vertices;
}

inline Matrix assemble_raw(const HermitianMatrix& h0, const std::vector<HermitianMatrix>& hs,
                           const Eigen::VectorXd& u) {
    Matrix sum = h0.mat();
    for (Eigen::Index i = 0; i < u.size(); ++i)
        sum += u(i) * hs[static_cast<std::size_t>(i)].mat();
    return sum;
}

inline double lower_bound_raw(const HermitianMatrix& h0, const std::vector<HermitianMatrix>& hs,
                              const ControlBox& box) {
    double min_eig = std::numeric_limits<double>::infinity();
    for (const Eigen::VectorXd& v : box_vertices(box))
        min_eig = std::min(min_eig, eigvalsh(assemble_raw(h0, hs, v)).minCoeff());
    return std::max(0.0, -min_eig);
}

}  // namespace detail

/// Drift h0, interaction operators, bounded control box, a uniform lower
/// bound m valid across the box, and the reference scale built from h0 + m + 1.
class FormLinearSystem {
public:
    static FormLinearSystem create(HermitianMatrix h0, std::vector<HermitianMatrix> interactions,
                                   ControlBox control_box) {
        detail::check_box(control_box);
        check_shapes(h0, interactions, control_box);
        const double m = detail::lower_bound_raw(h0, interactions, control_box);
        return FormLinearSystem(std::move(h0), std::move(interactions), std::move(control_box), m);
    }

    /// Same, but with a caller-supplied m. The box-vertex invariant is verified.
    static FormLinearSystem with_bound(HermitianMatrix h0,
                                       std::vector<HermitianMatrix> interactions,
                                       ControlBox control_box, double m) {
        detail::check_box(control_box);
        check_shapes(h0, interactions, control_box);
        const double needed = detail::lower_bound_raw(h0, interactions, control_box);
        if (needed > m + 1e-10) {
            std::ostringstream os;
            os << "FormLinearSystem: m = " << m << " is not a lower bound over the box (needs "
               << needed << ")";
            throw std::invalid_argument(os.str());
        }
        return FormLinearSystem(std::move(h0), std::move(interactions), std::move(control_box), m);
    }

    int dim() const { return h0_.dim(); }
    int channels() const { return static_cast<int>(interactions_.size()); }
    const HermitianMatrix& h0() const { return h0_; }
    const std::vector<HermitianMatrix>& interactions() const { return interactions_; }
    const ControlBox& control_box() const { return box_; }
    double m() const { return m_; }
    const ScaleFrame& frame() const { return frame_; }

    void check_in_box(const Eigen::VectorXd& u, double tol = 1e-9) const {
        if (u.size() != channels())
            throw std::invalid_argument("control vector length does not match channel count");
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            const auto& [lo, hi] = box_[static_cast<std::size_t>(i)];
            if (u(i) < lo - tol || u(i) > hi + tol) {
                std::ostringstream os;
                os << "control coordinate " << i << " = " << u(i) << " outside the box [" << lo
                   << ", " << hi << "]";
                throw std::invalid_argument(os.str());
            }
        }
    }

private:
    FormLinearSystem(HermitianMatrix h0, std::vector<HermitianMatrix> interactions,
                     ControlBox box, double m)
        : h0_(std::move(h0)),
          interactions_(std::move(interactions)),
          box_(std::move(box)),
          m_(m),
          frame_(h0_, m_) {}

    static void check_shapes(const HermitianMatrix& h0,
                             const std::vector<HermitianMatrix>& interactions,
                             const ControlBox& box) {
        if (interactions.size() != box.size())
            throw std::invalid_argument("one control interval is required per interaction");
        for (const HermitianMatrix& h : interactions)
            if (h.dim() != h0.dim())
                throw std::invalid_argument("interaction dimension does not match the drift");
    }

    HermitianMatrix h0_;
    std::vector<HermitianMatrix> interactions_;
    ControlBox box_;
    double m_;
    ScaleFrame frame_;
};

/// h0 + sum_i u_i H_i for u inside the control box (tolerance 1e-9).
inline HermitianMatrix assemble(const FormLinearSystem& system, const Eigen::VectorXd& u) {
    system.check_in_box(u);
    return HermitianMatrix(detail::assemble_raw(system.h0(), system.interactions(), u));
}

/// The valid uniform lower bound max(0, -min vertex eigenvalue).
inline double lower_bound(const FormLinearSystem& system) {
    return detail::lower_bound_raw(system.h0(), system.interactions(), system.control_box());
}

/// Shifted operator A(u) = h0 + sum u_i H_i + (m+1), positive definite whenever
/// m really bounds the family.
inline HermitianMatrix shifted_operator(const FormLinearSystem& system, const Eigen::VectorXd& u) {
    Matrix a = detail::assemble_raw(system.h0(), system.interactions(), u) +
               (system.m() + 1.0) * Matrix::Identity(system.dim(), system.dim());
    return HermitianMatrix(std::move(a));
}

/// Norm-equivalence constant between the u-dependent scales and the reference
/// scale, certified on the given samples: max over u of
/// max(|A(u)^{1/2} a0^{-1/2}|, |a0^{1/2} A(u)^{-1/2}|). A heuristic for the
/// whole box; certificates record the sample set that produced it.
inline double equivalence_constant(const FormLinearSystem& system,
                                   std::span<const Eigen::VectorXd> samples) {
    const Matrix& inv_sqrt = system.frame().a0_inv_sqrt().mat();
    double c = 1.0;
    for (const Eigen::VectorXd& u : samples) {
        system.check_in_box(u);
        const HermitianMatrix a = shifted_operator(system, u);
        // With T = A(u)^{1/2} a0^{-1/2} and B = a0^{-1/2} A(u) a0^{-1/2},
        // |T|^2 = lambda_max(B) and |T^{-1}|^2 = 1 / lambda_min(B).
        const RealVector pencil = eigvalsh(inv_sqrt * a.mat() * inv_sqrt);
        const double lo = pencil.minCoeff(), hi = pencil.maxCoeff();
        if (lo <= 0.0) {
            std::ostringstream os;
            os << "equivalence_constant: A(u) not positive definite (pencil eigenvalue " << lo
               << "); the lower bound m looks wrong";
            throw std::invalid_argument(os.str());
        }
        c = std::max({c, std::sqrt(hi), 1.0 / std::sqrt(lo)});
    }
    return c;
}

namespace detail {

inline double radical_inverse(std::uint64_t base, std::uint64_t index) {
    double inv_base = 1.0 / static_cast<double>(base), inv = inv_base, result = 0.0;
    while (index > 0) {
        result += static_cast<double>(index % base) * inv;
        index /= base;
        inv *= inv_base;
    }
    return result;
}

}  // namespace detail

/// Low-discrepancy samples inside the box (Halton sequence, first p primes).
inline std::vector<Eigen::VectorXd> halton_samples(const ControlBox& box, int count) {
    static constexpr std::uint64_t primes[20] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                                                 31, 37, 41, 43, 47, 53, 59, 61, 67, 71};
    const int p = static_cast<int>(box.size());
    if (p > 20) throw std::invalid_argument("halton_samples: more than 20 channels");
    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int k = 1; k <= count; ++k) {
        Eigen::VectorXd u(p);
        for (int i = 0; i < p; ++i) {
            const auto& [lo, hi] = box[static_cast<std::size_t>(i)];
            u(i) = lo + (hi - lo) * detail::radical_inverse(primes[i],
                                                            static_cast<std::uint64_t>(k));
        }
        out.push_back(std::move(u));
    }
    return out;
}

/// Default sample set for the equivalence constant: box vertices plus 64
/// Halton points.
inline std::vector<Eigen::VectorXd> default_constant_samples(const FormLinearSystem& system,
                                                             int halton_count = 64) {
    std::vector<Eigen::VectorXd> samples = detail::box_vertices(system.control_box());
    for (auto& u : halton_samples(system.control_box(), halton_count))
        samples.push_back(std::move(u));
    return samples;
}

/// Control values visited by a schedule: segment constants for the
/// piecewise-constant case, a fixed per-segment grid otherwise.
inline std::vector<Eigen::VectorXd> schedule_value_samples(const ControlSchedule& schedule,
                                                           int per_segment = 9) {
    std::vector<Eigen::VectorXd> out;
    const auto& bp = schedule.breakpoints();
    for (int j = 0; j + 1 < static_cast<int>(bp.size()); ++j) {
        if (schedule.segments()[j].is_constant()) {
            out.push_back(schedule.evaluate(0.5 * (bp[j] + bp[j + 1])));
            continue;
        }
        for (int k = 0; k < per_segment; ++k) {
            const double frac = (k + 0.5) / per_segment;
            out.push_back(schedule.evaluate(bp[j] + frac * (bp[j + 1] - bp[j])));
        }
    }
    return out;
}

/// Summed L1 norms, over smooth segments, of the derivative of the Hamiltonian
/// form: sum_j int_{I_j} |sum_i f_i'(t) H_i|_{+,-} dt. Exactly zero for
/// piecewise-constant schedules.
inline double derivative_bound_M(const FormLinearSystem& system, const ControlSchedule& schedule,
                                 double tol = 1e-8) {
    if (schedule.channels() != system.channels())
        throw std::invalid_argument("derivative_bound_M: channel count mismatch");
    if (schedule.schedule_class() == ScheduleClass::piecewise_constant) return 0.0;
    for (const Segment& seg : schedule.segments())
        for (const ChannelFunction& f : seg.fns)
            if (!f.deriv)
                throw std::invalid_argument("derivative_bound_M: missing derivative evaluator");
    // Weighted interactions are fixed; only the coefficients vary in time, and
    // with one channel the integrand factorizes into |f'(t)| times a constant.
    const Matrix& s_inv = system.frame().a0_inv_sqrt().mat();
    std::vector<Matrix> weighted;
    for (const HermitianMatrix& h : system.interactions())
        weighted.push_back(s_inv * h.mat() * s_inv);
    const double single_norm =
        system.channels() == 1 ? hermitian_spectral_norm(weighted[0]) : 0.0;

    const auto& bp = schedule.breakpoints();
    const double tol_each = tol / static_cast<double>(bp.size());
    double total = 0.0;
    for (int j = 0; j + 1 < static_cast<int>(bp.size()); ++j) {
        const auto integrand = [&, j](double t) {
            const Eigen::VectorXd du = schedule.derivative_in(j, t);
            if (system.channels() == 1) return std::abs(du(0)) * single_norm;
            Matrix v = du(0) * weighted[0];
            for (int i = 1; i < system.channels(); ++i)
                v += du(i) * weighted[static_cast<std::size_t>(i)];
            return hermitian_spectral_norm(v);
        };
        total += adaptive_simpson(integrand, bp[j], bp[j + 1], tol_each);
    }
    return total;
}

/// L = c^11 exp(4 c^2 M).
inline double stability_constant_L(double c, double M) {
    if (c < 1.0 - 1e-12) throw std::invalid_argument("stability_constant_L: c must be >= 1");
    if (M < 0.0) throw std::invalid_argument("stability_constant_L: M must be >= 0");
    return std::pow(c, 11) * std::exp(4.0 * c * c * M);
}

/// The smaller constant c^8 exp(2 c^2 M) available when the coefficients are
/// globally C2; reported alongside L but never used as the pass threshold.
inline double stability_constant_c2(double c, double M) {
    if (c < 1.0 - 1e-12) throw std::invalid_argument("stability_constant_c2: c must be >= 1");
    if (M < 0.0) throw std::invalid_argument("stability_constant_c2: M must be >= 0");
    return std::pow(c, 8) * std::exp(2.0 * c * c * M);
}

struct SystemConstants {
    double m = 0.0;
    double c = 1.0;
    double M = 0.0;
    double L = 1.0;
    double L_c2 = 1.0;

    static SystemConstants make(double m, double c, double M) {
        SystemConstants k;
        k.m = m;
        k.c = c;
        k.M = M;
        k.L = stability_constant_L(c, M);
        k.L_c2 = stability_constant_c2(c, M);
        return k;
    }
};

/// Constants covering a set of schedules on one system: c is certified on box
/// vertices, 64 Halton points and every control value the schedules visit;
/// M is the largest derivative budget among the schedules.
inline SystemConstants compute_constants(const FormLinearSystem& system,
                                         std::span<const ControlSchedule* const> schedules,
                                         int halton_count = 64) {
    std::vector<Eigen::VectorXd> samples = default_constant_samples(system, halton_count);
    double M = 0.0;
    for (const ControlSchedule* s : schedules) {
        for (auto& u : schedule_value_samples(*s)) samples.push_back(std::move(u));
        M = std::max(M, derivative_bound_M(system, *s));
    }
    const double c = equivalence_constant(system, samples);
    return SystemConstants::make(system.m(), c, M);
}

inline SystemConstants compute_constants(const FormLinearSystem& system,
                                         std::initializer_list<const ControlSchedule*> schedules,
                                         int halton_count = 64) {
    return compute_constants(
        system, std::span<const ControlSchedule* const>(schedules.begin(), schedules.size()),
        halton_count);
}

}  // namespace formctrl
