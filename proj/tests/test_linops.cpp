#include <catch2/catch_amalgamated.hpp>

#include "formctrl/linops.hpp"

#include <complex>

#include "oracles.hpp"

using namespace formctrl;
using Catch::Approx;

namespace {

HermitianMatrix diag2(double a, double b) {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return HermitianMatrix(m);
}

}  // namespace

TEST_CASE("HermitianMatrix rejects non-Hermitian input", "[linops]") {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 1) = Complex(1.0, 0.0);
    m(1, 0) = Complex(2.0, 0.0);
    REQUIRE_THROWS_AS(HermitianMatrix(m), std::invalid_argument);
    REQUIRE_NOTHROW(HermitianMatrix(Matrix::Zero(3, 3)));
}

TEST_CASE("hermitian_power fixed points and diagonal case", "[linops]") {
    const HermitianMatrix id = HermitianMatrix::identity(4);
    CHECK((hermitian_power(id, 0.5).mat() - id.mat()).cwiseAbs().maxCoeff() < 1e-14);

    const HermitianMatrix d = diag2(4.0, 9.0);
    const HermitianMatrix root = hermitian_power(d, 0.5);
    CHECK(std::real(root.mat()(0, 0)) == Approx(2.0).margin(1e-12));
    CHECK(std::real(root.mat()(1, 1)) == Approx(3.0).margin(1e-12));
    CHECK(std::abs(root.mat()(0, 1)) < 1e-12);
}

TEST_CASE("hermitian_power square root squares back to the input", "[linops]") {
    Rng rng(42);
    const Matrix a = oracles::random_psd(rng, 8, 0.1);
    const HermitianMatrix h(a);
    const HermitianMatrix root = hermitian_power(h, 0.5);
    const Matrix back = root.mat() * root.mat();
    const double rel = spectral_norm(back - h.mat()) / spectral_norm(h.mat());
    CHECK(rel < 1e-10);

    const HermitianMatrix inv = hermitian_power(h, -1.0);
    CHECK(spectral_norm(inv.mat() * h.mat() - Matrix::Identity(8, 8)) < 1e-9);
}

TEST_CASE("hermitian_power rejects indefinite input for negative exponents", "[linops]") {
    const HermitianMatrix ind = diag2(1.0, -2.0);
    REQUIRE_THROWS_WITH(hermitian_power(ind, -0.5),
                        Catch::Matchers::ContainsSubstring("smallest eigenvalue"));
}

TEST_CASE("weighted_norm basics", "[linops]") {
    const HermitianMatrix id = HermitianMatrix::identity(3);
    Vector zero = Vector::Zero(3);
    CHECK(weighted_norm(zero, id, NormSign::plus) == 0.0);

    Rng rng(7);
    Vector phi = oracles::random_vector(rng, 3);
    CHECK(weighted_norm(phi, id, NormSign::plus) == Approx(phi.norm()).margin(1e-12));
    CHECK(weighted_norm(phi, id, NormSign::minus) == Approx(phi.norm()).margin(1e-12));

    const HermitianMatrix d = diag2(4.0, 1.0);
    Vector e0 = Vector::Zero(2);
    e0(0) = 1.0;
    CHECK(weighted_norm(e0, d, NormSign::plus) == Approx(2.0).margin(1e-12));

    Vector wrong = Vector::Zero(5);
    REQUIRE_THROWS_AS(weighted_norm(wrong, d, NormSign::plus), std::invalid_argument);
}

TEST_CASE("norm_plus_minus cancels the frame weights on a0", "[linops]") {
    Rng rng(11);
    const Matrix h0 = oracles::random_psd(rng, 6);
    const ScaleFrame frame(HermitianMatrix(h0), 0.5);
    CHECK(norm_plus_minus(frame.a0().mat(), frame) == Approx(1.0).margin(1e-10));
    CHECK(norm_plus_minus(Matrix::Zero(6, 6), frame) == 0.0);
}

TEST_CASE("norm_plus_minus matches the randomized pairing sup", "[linops]") {
    Rng rng(2024);
    const Matrix h0 = oracles::random_psd(rng, 12);
    const ScaleFrame frame(HermitianMatrix(h0), 0.0);
    const Matrix v = oracles::random_hermitian(rng, 12);
    const double value = norm_plus_minus(v, frame);
    const double sup = oracles::pairing_sup(v, frame, rng);
    CHECK(sup <= value * (1.0 + 1e-9));
    CHECK(value - sup < 0.02 * value);
}

TEST_CASE("norm_minus_plus weights cancel and diagonal case", "[linops]") {
    // Frame with a0 = diag(2, 5): h0 = diag(1, 4), m = 0.
    const ScaleFrame frame(diag2(1.0, 4.0), 0.0);
    const Matrix a0_inv = hermitian_power(frame.a0(), -1.0).mat();
    CHECK(norm_minus_plus(a0_inv, frame) == Approx(1.0).margin(1e-10));
    CHECK(norm_minus_plus(Matrix::Zero(2, 2), frame) == 0.0);
    // a0^{-2} pulled back: a0^{1/2} a0^{-2} a0^{1/2} = a0^{-1}, largest entry 1/2.
    CHECK(norm_minus_plus((a0_inv * a0_inv).eval(), frame) == Approx(0.5).margin(1e-10));
}

TEST_CASE("norm hierarchy: minus <= plain <= plus", "[linops][property]") {
    Rng rng(5);
    for (int trial = 0; trial < 25; ++trial) {
        const int dim = 2 + static_cast<int>(rng.next_u64() % 7);
        const Matrix h0 = oracles::random_psd(rng, dim);
        const ScaleFrame frame(HermitianMatrix(h0), rng.uniform(0.0, 2.0));
        const Vector phi = oracles::random_vector(rng, dim);
        const double plain = phi.norm();
        CHECK(frame.minus_norm(phi) <= plain + 1e-12);
        CHECK(plain <= frame.plus_norm(phi) + 1e-12);
    }
}

TEST_CASE("duality between the two operator norms", "[linops][property]") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        const int dim = 3 + static_cast<int>(rng.next_u64() % 6);
        const ScaleFrame frame(HermitianMatrix(oracles::random_psd(rng, dim)), 0.0);
        const Matrix v = oracles::random_matrix(rng, dim);
        const Matrix a0_inv = hermitian_power(frame.a0(), -1.0).mat();
        const double lhs = norm_plus_minus(v, frame);
        const double rhs = norm_minus_plus((a0_inv * v * a0_inv).eval(), frame);
        CHECK(lhs == Approx(rhs).margin(1e-10 * std::max(1.0, lhs)));
    }
}

TEST_CASE("ScaleFrame rejects an insufficient lower bound", "[linops]") {
    // h0 has eigenvalue -2; with m = 0 the frame operator dips below 1.
    REQUIRE_THROWS_AS(ScaleFrame(diag2(-2.0, 3.0), 0.0), std::invalid_argument);
    REQUIRE_NOTHROW(ScaleFrame(diag2(-2.0, 3.0), 2.0));
}

TEST_CASE("spectral_norm agrees with singular values on known cases", "[linops]") {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 1) = 3.0;  // nilpotent, largest singular value 3
    CHECK(spectral_norm(m) == Approx(3.0).margin(1e-12));
    CHECK(spectral_norm(Matrix::Zero(4, 4)) == 0.0);
}
