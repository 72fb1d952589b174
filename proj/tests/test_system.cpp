#include <catch2/catch_amalgamated.hpp>

#include "formctrl/system.hpp"

#include <cmath>

#include "formctrl/models.hpp"
#include "oracles.hpp"

using namespace formctrl;
using Catch::Approx;

namespace {

Eigen::VectorXd uvec(std::initializer_list<double> vals) {
    Eigen::VectorXd u(static_cast<Eigen::Index>(vals.size()));
    Eigen::Index i = 0;
    for (double v : vals) u(i++) = v;
    return u;
}

HermitianMatrix diag(std::initializer_list<double> vals) {
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(vals.size()),
                            static_cast<Eigen::Index>(vals.size()));
    Eigen::Index i = 0;
    for (double v : vals) {
        m(i, i) = v;
        ++i;
    }
    return HermitianMatrix(std::move(m));
}

}  // namespace

TEST_CASE("assemble drift-only and identity coupling", "[system]") {
    const FormLinearSystem sys = FormLinearSystem::create(
        diag({0.0, 1.0}), {HermitianMatrix::identity(2)}, {{-2.0, 2.0}});
    CHECK((assemble(sys, uvec({0.0})).mat() - sys.h0().mat()).cwiseAbs().maxCoeff() == 0.0);

    const Matrix expect = sys.h0().mat() + 2.0 * Matrix::Identity(2, 2);
    CHECK((assemble(sys, uvec({2.0})).mat() - expect).cwiseAbs().maxCoeff() < 1e-15);

    REQUIRE_THROWS_WITH(assemble(sys, uvec({2.5})),
                        Catch::Matchers::ContainsSubstring("coordinate 0"));
}

TEST_CASE("assemble on the oscillator reproduces the ladder entry", "[system]") {
    const FormLinearSystem sys = models::harmonic_oscillator(8, 1.0);
    const HermitianMatrix h = assemble(sys, uvec({0.5}));
    CHECK(std::real(h.mat()(0, 1)) == Approx(0.5 / std::sqrt(2.0)).margin(1e-12));
    CHECK(std::real(h.mat()(0, 1)) == Approx(0.35355339).margin(5e-9));
}

TEST_CASE("assemble is affine in the control", "[system][property]") {
    Rng rng(3);
    const FormLinearSystem sys = models::random_system(6, 2, 77);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::VectorXd u = uvec({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
        const Eigen::VectorXd v = uvec({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)});
        const double alpha = rng.uniform();
        const Matrix lhs = assemble(sys, (alpha * u + (1.0 - alpha) * v).eval()).mat();
        const Matrix rhs = alpha * assemble(sys, u).mat() + (1.0 - alpha) * assemble(sys, v).mat();
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("lower_bound on hand-checkable systems", "[system]") {
    const FormLinearSystem drift_only =
        FormLinearSystem::create(diag({0.0, 2.0}), {}, {});
    CHECK(lower_bound(drift_only) == 0.0);

    const FormLinearSystem two = FormLinearSystem::create(
        diag({0.0, 1.0}), {diag({1.0, 0.0})}, {{-2.0, 2.0}});
    CHECK(lower_bound(two) == Approx(2.0).margin(1e-12));
    CHECK(two.m() == Approx(2.0).margin(1e-12));
}

TEST_CASE("lower_bound dominates random box samples on the oscillator", "[system][property]") {
    const FormLinearSystem sys = models::harmonic_oscillator(32, 1.0);
    const double vertex_bound = lower_bound(sys);
    Rng rng(12345);
    double worst = 0.0;
    for (int trial = 0; trial < 10000; ++trial) {
        const Eigen::VectorXd u = uvec({rng.uniform(-1.0, 1.0)});
        const double min_eig =
            eigh(detail::assemble_raw(sys.h0(), sys.interactions(), u)).evals.minCoeff();
        worst = std::max(worst, -min_eig);
    }
    CHECK(vertex_bound + 1e-10 >= worst);
}

TEST_CASE("equivalence_constant trivial and scalar cases", "[system]") {
    const FormLinearSystem sys = models::harmonic_oscillator(6, 1.0);
    const std::vector<Eigen::VectorXd> zero{uvec({0.0})};
    CHECK(equivalence_constant(sys, zero) == Approx(1.0).margin(1e-12));

    // Scalar system: h0 = 0, H1 = 1, box [0, 3]; A(3) = 4, A(0) = 1 = a0.
    const FormLinearSystem scalar = FormLinearSystem::create(
        HermitianMatrix(Matrix::Zero(1, 1)), {HermitianMatrix::identity(1)}, {{0.0, 3.0}});
    REQUIRE(scalar.m() == 0.0);
    const std::vector<Eigen::VectorXd> samples{uvec({0.0}), uvec({3.0})};
    CHECK(equivalence_constant(scalar, samples) == Approx(2.0).margin(1e-12));
}

TEST_CASE("equivalence_constant stabilizes under grid refinement", "[system]") {
    const FormLinearSystem sys = models::harmonic_oscillator(32, 1.0);
    std::vector<Eigen::VectorXd> coarse = detail::box_vertices(sys.control_box());
    for (auto& u : halton_samples(sys.control_box(), 64)) coarse.push_back(u);
    std::vector<Eigen::VectorXd> fine = detail::box_vertices(sys.control_box());
    for (auto& u : halton_samples(sys.control_box(), 256)) fine.push_back(u);
    const double c_coarse = equivalence_constant(sys, coarse);
    const double c_fine = equivalence_constant(sys, fine);
    CHECK(c_coarse >= 1.0);
    CHECK(c_fine >= c_coarse - 1e-12);  // monotone under sample inclusion
    CHECK(std::abs(c_fine - c_coarse) / c_coarse < 0.05);
}

TEST_CASE("per-sample norm equivalence holds with the certified constant",
          "[system][property]") {
    const FormLinearSystem sys = models::harmonic_oscillator(12, 1.0);
    const std::vector<Eigen::VectorXd> samples = default_constant_samples(sys, 16);
    const double c = equivalence_constant(sys, samples);
    Rng rng(8);
    for (const Eigen::VectorXd& u : samples) {
        const HermitianMatrix a = shifted_operator(sys, u);
        for (int k = 0; k < 3; ++k) {
            const Vector phi = oracles::random_vector(rng, sys.dim());
            const double ref = sys.frame().plus_norm(phi);
            const double local = weighted_norm(phi, a, NormSign::plus);
            CHECK(ref <= c * local * (1.0 + 1e-10));
            CHECK(local <= c * ref * (1.0 + 1e-10));
        }
    }
}

TEST_CASE("derivative_bound_M vanishes for piecewise-constant schedules", "[system]") {
    const FormLinearSystem sys = models::harmonic_oscillator(8, 1.0);
    const ControlSchedule pc =
        ControlSchedule::piecewise_constant({0.0, 1.0, 2.0}, {{0.3}, {-0.3}});
    CHECK(derivative_bound_M(sys, pc) == 0.0);
}

TEST_CASE("derivative_bound_M with a constant integrand", "[system]") {
    // h0 = 0 (2x2), H1 = diag(2, 1), box [0, 1]: m = 0, a0 = 1, and the
    // weighted norm of H1 is 2. A unit-slope channel then integrates to 2.
    const FormLinearSystem sys = FormLinearSystem::create(
        HermitianMatrix(Matrix::Zero(2, 2)), {diag({2.0, 1.0})}, {{0.0, 1.0}});
    REQUIRE(sys.m() == 0.0);
    const ControlSchedule lin({0.0, 1.0}, {Segment::linear({1.0}, {0.0})},
                              ScheduleClass::piecewise_c2);
    CHECK(norm_plus_minus(sys.interactions()[0].mat(), sys.frame()) == Approx(2.0).margin(1e-12));
    CHECK(derivative_bound_M(sys, lin) == Approx(2.0).margin(1e-8));
}

TEST_CASE("derivative_bound_M matches dense midpoint quadrature on a mollified schedule",
          "[system]") {
    const FormLinearSystem sys = models::harmonic_oscillator(8, 1.0);
    const ControlSchedule pc =
        ControlSchedule::piecewise_constant({0.0, 1.0, 2.0}, {{0.2}, {0.9}});
    const ControlSchedule m = mollify(pc, {0.15, RampKind::quintic});
    const double adaptive = derivative_bound_M(sys, m);
    const double hnorm = norm_plus_minus(sys.interactions()[0].mat(), sys.frame());
    const double oracle = oracles::midpoint_integral(
        [&](double t) { return std::abs(m.derivative(t)(0)) * hnorm; }, 0.0, 2.0, 100000);
    CHECK(adaptive == Approx(oracle).epsilon(1e-6));
    // Monotone ramp: the budget is |jump| * |H1|_{+,-} for every delta.
    CHECK(adaptive == Approx(0.7 * hnorm).margin(1e-8));
}

TEST_CASE("stability_constant_L explicit values", "[system]") {
    CHECK(stability_constant_L(1.0, 0.0) == 1.0);
    CHECK(stability_constant_L(1.0, 0.7) == Approx(std::exp(4.0 * 0.7)).epsilon(1e-14));
    CHECK(stability_constant_L(2.0, 0.0) == Approx(2048.0).epsilon(1e-14));
    REQUIRE_THROWS_AS(stability_constant_L(0.5, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(stability_constant_L(1.0, -1.0), std::invalid_argument);
}

TEST_CASE("SystemConstants ties L to c and M", "[system]") {
    const SystemConstants k = SystemConstants::make(0.5, 1.3, 0.2);
    CHECK(k.L == Approx(std::pow(1.3, 11) * std::exp(4.0 * 1.3 * 1.3 * 0.2)).epsilon(1e-12));
    CHECK(k.L_c2 == Approx(std::pow(1.3, 8) * std::exp(2.0 * 1.3 * 1.3 * 0.2)).epsilon(1e-12));
    CHECK(k.L_c2 <= k.L);
}

TEST_CASE("compute_constants covers the schedules it is given", "[system]") {
    const FormLinearSystem sys = models::harmonic_oscillator(8, 1.0);
    const ControlSchedule pc =
        ControlSchedule::piecewise_constant({0.0, 1.0, 2.0}, {{0.2}, {0.9}});
    const ControlSchedule m = mollify(pc, {0.2, RampKind::quintic});
    const SystemConstants k = compute_constants(sys, {&pc, &m});
    CHECK(k.m == sys.m());
    CHECK(k.c >= 1.0);
    CHECK(k.M >= derivative_bound_M(sys, m) - 1e-10);
    CHECK(k.L == Approx(stability_constant_L(k.c, k.M)).epsilon(1e-12));
}
