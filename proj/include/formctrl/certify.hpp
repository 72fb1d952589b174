#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "formctrl/controls.hpp"
#include "formctrl/linops.hpp"
#include "formctrl/propagate.hpp"
#include "formctrl/quadrature.hpp"
#include "formctrl/rng.hpp"
#include "formctrl/serialize.hpp"
#include "formctrl/system.hpp"

namespace formctrl {

enum class CertificateKind {
    resolvent_lipschitz,
    propagator_growth_plus,
    propagator_growth_minus,
    stability_main,
    stability_formlinear,
    strong_convergence,
};

inline std::string to_string(CertificateKind k) {
    switch (k) {
        case CertificateKind::resolvent_lipschitz: return "resolvent_lipschitz";
        case CertificateKind::propagator_growth_plus: return "propagator_growth_plus";
        case CertificateKind::propagator_growth_minus: return "propagator_growth_minus";
        case CertificateKind::stability_main: return "stability_main";
        case CertificateKind::stability_formlinear: return "stability_formlinear";
        case CertificateKind::strong_convergence: return "strong_convergence";
    }
    return "unknown";
}

inline constexpr double kCertificateSlack = 1e-8;

/// One verified inequality: pass iff lhs <= rhs up to 1e-8 * max(1, rhs) of
/// slack, which absorbs integrator and quadrature tolerances. The provenance
/// block carries whatever is needed to recompute rhs from the constants.
struct StabilityCertificate {
    CertificateKind kind;
    double lhs = 0.0;
    double rhs = 0.0;
    SystemConstants constants;
    double margin = 0.0;
    bool pass = false;
    json provenance;
};

inline StabilityCertificate make_certificate(CertificateKind kind, double lhs, double rhs,
                                             const SystemConstants& constants, json provenance) {
    StabilityCertificate cert;
    cert.kind = kind;
    cert.lhs = lhs;
    cert.rhs = rhs;
    cert.constants = constants;
    cert.margin = rhs - lhs;
    cert.pass = cert.margin >= -kCertificateSlack * std::max(1.0, rhs);
    cert.provenance = std::move(provenance);
    return cert;
}

inline json certificate_to_json(const StabilityCertificate& c) {
    return json{{"kind", to_string(c.kind)},
                {"lhs", c.lhs},
                {"rhs", c.rhs},
                {"margin", c.margin},
                {"pass", c.pass},
                {"constants", constants_to_json(c.constants)},
                {"slack", kCertificateSlack},
                {"provenance", c.provenance}};
}

// --- resolvent Lipschitz ------------------------------------------------------

/// |A(u1)^{-1} - A(u2)^{-1}|_{-,+} <= c^4 |H(u1) - H(u2)|_{+,-}.
inline StabilityCertificate check_resolvent_lipschitz(const FormLinearSystem& system,
                                                      const Eigen::VectorXd& u1,
                                                      const Eigen::VectorXd& u2, double c) {
    const HermitianMatrix a1 = shifted_operator(system, u1);
    const HermitianMatrix a2 = shifted_operator(system, u2);
    const Matrix inv1 = hermitian_power(a1, -1.0).mat();
    const Matrix inv2 = hermitian_power(a2, -1.0).mat();
    const double lhs = norm_minus_plus(inv1 - inv2, system.frame());
    const Matrix diff = assemble(system, u1).mat() - assemble(system, u2).mat();
    const double rhs = std::pow(c, 4) * norm_plus_minus(diff, system.frame());
    json prov{{"u1", std::vector<double>(u1.data(), u1.data() + u1.size())},
              {"u2", std::vector<double>(u2.data(), u2.data() + u2.size())},
              {"h_diff_norm", rhs / std::pow(c, 4)}};
    SystemConstants constants = SystemConstants::make(system.m(), c, 0.0);
    return make_certificate(CertificateKind::resolvent_lipschitz, lhs, rhs, constants,
                            std::move(prov));
}

// --- instantaneous derivative norm --------------------------------------------

/// C(t) = |A(u(t))^{-1/2} (sum_i u_i'(t) H_i) A(u(t))^{-1/2}|, the equivalent
/// form that avoids differentiating A^{-1} numerically.
inline double instantaneous_C(const FormLinearSystem& system, const ControlSchedule& schedule,
                              double t) {
    if (schedule.at_breakpoint(t))
        throw std::invalid_argument("instantaneous_C: t lies on a breakpoint");
    const Eigen::VectorXd u = schedule.evaluate(t);
    const Eigen::VectorXd du = schedule.derivative(t);
    const HermitianMatrix a = shifted_operator(system, u);
    const Matrix s = hermitian_power(a, -0.5).mat();
    Matrix v = Matrix::Zero(system.dim(), system.dim());
    for (int i = 0; i < system.channels(); ++i)
        v += du(i) * system.interactions()[static_cast<std::size_t>(i)].mat();
    return spectral_norm(s * v * s);
}

/// Integral of C over [s, t], split at breakpoints and evaluated on the
/// continuous extension of each segment.
inline double integral_C(const FormLinearSystem& system, const ControlSchedule& schedule,
                         double s, double t, double tol = 1e-9) {
    if (!(t >= s)) throw std::invalid_argument("integral_C: reversed interval");
    if (schedule.schedule_class() == ScheduleClass::piecewise_constant) return 0.0;
    const auto& bp = schedule.breakpoints();
    double total = 0.0;
    const double tol_each = tol / static_cast<double>(bp.size());
    for (int j = 0; j + 1 < static_cast<int>(bp.size()); ++j) {
        const double a = std::max(bp[j], s), b = std::min(bp[j + 1], t);
        if (b <= a) continue;
        const auto integrand = [&, j](double tau) {
            const Eigen::VectorXd u = schedule.evaluate_in(j, tau);
            const Eigen::VectorXd du = schedule.derivative_in(j, tau);
            const HermitianMatrix op = shifted_operator(system, u);
            const Matrix w = hermitian_power(op, -0.5).mat();
            Matrix v = Matrix::Zero(system.dim(), system.dim());
            for (int i = 0; i < system.channels(); ++i)
                v += du(i) * system.interactions()[static_cast<std::size_t>(i)].mat();
            return spectral_norm(w * v * w);
        };
        total += adaptive_simpson(integrand, a, b, tol_each);
    }
    return total;
}

// --- propagator growth ----------------------------------------------------------

/// Growth of the instantaneous scale norms along a trajectory of the shifted
/// generator A(u(.)) = H(u(.)) + m + 1 (realized through the phase relation
/// with the physical propagator):
///   |Phi(t)|_{+,t} <= e^{(3/2) int C} |phi|_{+,s},
///   |Phi(t)|_{-,t} <= e^{(1/2) int C} |phi|_{-,s}.
inline std::pair<StabilityCertificate, StabilityCertificate> check_propagator_growth(
    const FormLinearSystem& system, const ControlSchedule& schedule, const Vector& phi, double t,
    double s, const SystemConstants& constants, double tol = 1e-10) {
    if (!(s < t)) throw std::invalid_argument("check_propagator_growth: requires s < t");
    if (!(phi.norm() > 0.0)) throw std::invalid_argument("check_propagator_growth: zero state");
    const Propagator u_phys = propagate(system, schedule, t, s, tol);
    const Complex shift_phase = std::exp(Complex(0.0, (system.m() + 1.0) * (t - s)));
    const Vector phi_t = shift_phase * (u_phys.u * phi);

    const HermitianMatrix a_t = shifted_operator(system, schedule.evaluate(t));
    const HermitianMatrix a_s = shifted_operator(system, schedule.evaluate(s));
    const double int_c = integral_C(system, schedule, s, t);

    const double lhs_plus = weighted_norm(phi_t, a_t, NormSign::plus);
    const double rhs_plus =
        std::exp(1.5 * int_c) * weighted_norm(phi, a_s, NormSign::plus);
    const double lhs_minus = weighted_norm(phi_t, a_t, NormSign::minus);
    const double rhs_minus =
        std::exp(0.5 * int_c) * weighted_norm(phi, a_s, NormSign::minus);

    json prov{{"t", t},
              {"s", s},
              {"int_C", int_c},
              {"schedule_class", to_string(schedule.schedule_class())},
              {"integrator", u_phys.meta.integrator}};
    return {make_certificate(CertificateKind::propagator_growth_plus, lhs_plus, rhs_plus,
                             constants, prov),
            make_certificate(CertificateKind::propagator_growth_minus, lhs_minus, rhs_minus,
                             constants, prov)};
}

// --- main stability bound -------------------------------------------------------

/// Checks that the supplied constants actually cover the hypotheses for the
/// given schedules; throws naming the violated assumption.
inline void verify_constants_cover(const FormLinearSystem& system,
                                   const std::vector<const ControlSchedule*>& schedules,
                                   const SystemConstants& constants) {
    std::vector<std::string> violated;
    if (std::abs(constants.m - system.m()) > 1e-12) violated.push_back("A1 (lower bound m)");
    std::vector<Eigen::VectorXd> samples;
    bool inside = true;
    for (const ControlSchedule* s : schedules)
        for (auto& u : schedule_value_samples(*s)) {
            try {
                system.check_in_box(u);
            } catch (const std::invalid_argument&) {
                inside = false;
            }
            samples.push_back(std::move(u));
        }
    if (!inside) violated.push_back("A1 (control leaves the box)");
    if (inside) {
        const double c_needed = equivalence_constant(system, samples);
        if (c_needed > constants.c * (1.0 + 1e-9)) violated.push_back("A3 (norm equivalence)");
    }
    for (const ControlSchedule* s : schedules)
        if (derivative_bound_M(system, *s) > constants.M + 1e-8)
            violated.push_back("A4 (derivative budget)");
    if (!violated.empty()) {
        std::ostringstream os;
        os << "constants do not cover the schedules; violated:";
        for (const std::string& v : violated) os << " " << v << ";";
        throw std::invalid_argument(os.str());
    }
}

/// Certifies |U_j(T,0) - U_k(T,0)|_{+,-} <= L * int_0^T |H_j - H_k|_{+,-} dtau
/// and carries the coefficient-space bound L * sum_i |H_i|_{+,-} |f_ji - f_ki|_L1
/// alongside; pass is judged against the tighter integral form.
inline StabilityCertificate certify_stability(const FormLinearSystem& system,
                                              const ControlSchedule& schedule_j,
                                              const ControlSchedule& schedule_k,
                                              const SystemConstants& constants,
                                              double tol = 1e-10, ExpCache* cache = nullptr) {
    if (std::abs(schedule_j.horizon() - schedule_k.horizon()) > 1e-12)
        throw std::invalid_argument("certify_stability: mismatched horizons");
    verify_constants_cover(system, {&schedule_j, &schedule_k}, constants);
    const double horizon = schedule_j.horizon();

    const Matrix u_j = propagate(system, schedule_j, horizon, 0.0, tol, cache).u;
    const Matrix u_k = propagate(system, schedule_k, horizon, 0.0, tol, cache).u;
    const double lhs = norm_plus_minus(u_j - u_k, system.frame());

    // Precompute the weighted interactions; the integrand is then a Hermitian
    // pencil in the coefficient difference (a plain scalar for one channel).
    const Matrix& s_inv = system.frame().a0_inv_sqrt().mat();
    std::vector<Matrix> weighted;
    std::vector<double> weighted_norms;
    for (const HermitianMatrix& h : system.interactions()) {
        weighted.push_back(s_inv * h.mat() * s_inv);
        weighted_norms.push_back(hermitian_spectral_norm(weighted.back()));
    }

    const std::vector<double> knots =
        merge_breakpoints(schedule_j.breakpoints(), schedule_k.breakpoints());
    double integral = 0.0;
    for (std::size_t seg = 0; seg + 1 < knots.size(); ++seg) {
        const double mid = 0.5 * (knots[seg] + knots[seg + 1]);
        const int sj = schedule_j.segment_index(mid), sk = schedule_k.segment_index(mid);
        const auto integrand = [&, sj, sk](double tau) {
            const Eigen::VectorXd delta =
                schedule_j.evaluate_in(sj, tau) - schedule_k.evaluate_in(sk, tau);
            if (system.channels() == 1) return std::abs(delta(0)) * weighted_norms[0];
            Matrix v = delta(0) * weighted[0];
            for (int i = 1; i < system.channels(); ++i)
                v += delta(i) * weighted[static_cast<std::size_t>(i)];
            return hermitian_spectral_norm(v);
        };
        integral += adaptive_simpson(integrand, knots[seg], knots[seg + 1],
                                     1e-9 / static_cast<double>(knots.size()));
    }
    const double rhs_main = constants.L * integral;

    const Eigen::VectorXd l1 = l1_distance(schedule_j, schedule_k);
    json norms = json::array(), l1s = json::array();
    double formlinear_sum = 0.0;
    for (int i = 0; i < system.channels(); ++i) {
        const double hn = weighted_norms[static_cast<std::size_t>(i)];
        formlinear_sum += hn * l1(i);
        norms.push_back(hn);
        l1s.push_back(l1(i));
    }
    const double rhs_formlinear = constants.L * formlinear_sum;

    json prov{{"T", horizon},
              {"integral_h_diff", integral},
              {"rhs_formlinear", rhs_formlinear},
              {"interaction_norms", std::move(norms)},
              {"l1_distances", std::move(l1s)},
              {"schedule_j", to_string(schedule_j.schedule_class())},
              {"schedule_k", to_string(schedule_k.schedule_class())},
              {"integrator_tol", tol}};
    return make_certificate(CertificateKind::stability_main, lhs, rhs_main, constants,
                            std::move(prov));
}

/// The coefficient-space view of the same data as a standalone certificate.
inline StabilityCertificate as_formlinear_certificate(const StabilityCertificate& main_cert) {
    if (main_cert.kind != CertificateKind::stability_main)
        throw std::invalid_argument("as_formlinear_certificate: wrong input kind");
    return make_certificate(CertificateKind::stability_formlinear, main_cert.lhs,
                            main_cert.provenance.at("rhs_formlinear").get<double>(),
                            main_cert.constants, main_cert.provenance);
}

// --- strong convergence -----------------------------------------------------------

/// Operator-norm gaps of a propagator sequence against a reference, per-probe
/// state errors, and a randomized check of the pairing inequality
/// |<Psi, (U_n - U_ref) Phi>| <= |Psi|_+ |Phi|_+ gap_n.
inline json strong_convergence_gap(const Propagator& u_ref,
                                   const std::vector<Propagator>& u_seq,
                                   const std::vector<Vector>& probes, const ScaleFrame& frame,
                                   std::uint64_t seed = 7, int pairing_trials = 1000) {
    json gaps = json::array(), probe_errors = json::array();
    int violations = 0;
    Rng rng(seed);
    double max_ratio = 0.0;
    for (const Propagator& u_n : u_seq) {
        if (u_n.u.rows() != u_ref.u.rows())
            throw std::invalid_argument("strong_convergence_gap: dimension mismatch");
        if (std::abs(u_n.t - u_ref.t) > 1e-12 || std::abs(u_n.s - u_ref.s) > 1e-12)
            throw std::invalid_argument("strong_convergence_gap: mismatched (t, s)");
        const Matrix diff = u_n.u - u_ref.u;
        const double gap = norm_plus_minus(diff, frame);
        gaps.push_back(gap);
        json row = json::array();
        for (const Vector& phi : probes) row.push_back((diff * phi).norm());
        probe_errors.push_back(std::move(row));
        for (int trial = 0; trial < pairing_trials; ++trial) {
            Vector psi(frame.dim()), phi(frame.dim());
            for (int i = 0; i < frame.dim(); ++i) {
                psi(i) = Complex(rng.normal(), rng.normal());
                phi(i) = Complex(rng.normal(), rng.normal());
            }
            const double lhs = std::abs(psi.dot(diff * phi));
            const double rhs = frame.plus_norm(psi) * frame.plus_norm(phi) * gap;
            if (lhs > rhs * (1.0 + 1e-9) + 1e-15) ++violations;
            if (rhs > 0.0) max_ratio = std::max(max_ratio, lhs / rhs);
        }
    }
    return json{{"kind", "strong_convergence"}, {"gaps", std::move(gaps)},
                {"probe_errors", std::move(probe_errors)},
                {"pairing_trials_per_step", pairing_trials},
                {"pairing_violations", violations},
                {"pairing_max_ratio", max_ratio},
                {"seed", seed}};
}

}  // namespace formctrl
