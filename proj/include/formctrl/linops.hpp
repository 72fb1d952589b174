#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include "formctrl/rng.hpp"

namespace formctrl {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kEigenvalueClamp = 1e-14;

/// Dense Hermitian matrix. The constructor rejects anything whose defect
/// ‖A − A†‖_max exceeds 1e-12 relative to the largest entry, then stores the
/// exactly symmetrized part so downstream eigensolvers see a clean operator.
class HermitianMatrix {
public:
    explicit HermitianMatrix(Matrix entries) {
        if (entries.rows() != entries.cols())
            throw std::invalid_argument("HermitianMatrix: matrix must be square");
        if (entries.rows() == 0) throw std::invalid_argument("HermitianMatrix: empty matrix");
        const double scale = entries.cwiseAbs().maxCoeff();
        const double defect = (entries - entries.adjoint().eval()).cwiseAbs().maxCoeff();
        if (scale > 0.0 && defect > kHermitianTol * scale) {
            std::ostringstream os;
            os << "HermitianMatrix: not Hermitian (defect " << defect << ", scale " << scale
               << ")";
            throw std::invalid_argument(os.str());
        }
        mat_ = 0.5 * (entries + entries.adjoint().eval());
    }

    static HermitianMatrix identity(int dim) {
        return HermitianMatrix(Matrix::Identity(dim, dim));
    }

    static HermitianMatrix zero(int dim) { return HermitianMatrix(Matrix::Zero(dim, dim)); }

    int dim() const { return static_cast<int>(mat_.rows()); }
    const Matrix& mat() const { return mat_; }

private:
    Matrix mat_;
};

struct EigenSystem {
    RealVector evals;  // ascending
    Matrix evecs;      // columns
};

inline EigenSystem eigh(const Matrix& hermitian) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitian);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("eigh: eigendecomposition failed");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

inline EigenSystem eigh(const HermitianMatrix& a) { return eigh(a.mat()); }

inline RealVector eigvalsh(const Matrix& hermitian) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitian, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("eigvalsh: eigendecomposition failed");
    return solver.eigenvalues();
}

/// Spectral norm of a (known) Hermitian matrix: the largest |eigenvalue|.
inline double hermitian_spectral_norm(const Matrix& m) {
    if (m.rows() == 0) return 0.0;
    const RealVector evals = eigvalsh(m);
    return std::max(std::abs(evals(0)), std::abs(evals(evals.size() - 1)));
}

/// A^exponent for exponent in {-1, -1/2, 1/2, 1} via eigendecomposition.
/// Negative exponents require positive definiteness; eigenvalues that are
/// positive but below 1e-14 are clamped there with a warning on stderr.
inline HermitianMatrix hermitian_power(const HermitianMatrix& a, double exponent) {
    if (exponent != 1.0 && exponent != 0.5 && exponent != -0.5 && exponent != -1.0)
        throw std::invalid_argument("hermitian_power: exponent must be one of {-1,-1/2,1/2,1}");
    if (exponent == 1.0) return a;

    EigenSystem es = eigh(a);
    const double lo = es.evals.minCoeff();
    const double scale = std::max(std::abs(es.evals.maxCoeff()), std::abs(lo));
    if (exponent < 0.0 && lo <= 0.0) {
        std::ostringstream os;
        os << "hermitian_power: matrix not positive definite for exponent " << exponent
           << " (smallest eigenvalue " << lo << ")";
        throw std::invalid_argument(os.str());
    }
    RealVector powered(es.evals.size());
    bool clamped = false;
    for (Eigen::Index i = 0; i < es.evals.size(); ++i) {
        double lambda = es.evals(i);
        if (exponent < 0.0 && lambda < kEigenvalueClamp) {
            lambda = kEigenvalueClamp;
            clamped = true;
        }
        if (exponent == 0.5 && lambda < 0.0) {
            // Roundoff-level negatives only; anything real is an error.
            if (lambda < -kHermitianTol * std::max(1.0, scale)) {
                std::ostringstream os;
                os << "hermitian_power: negative eigenvalue " << lambda << " for square root";
                throw std::invalid_argument(os.str());
            }
            lambda = 0.0;
        }
        powered(i) = std::pow(lambda, exponent);
    }
    if (clamped)
        std::cerr << "[formctrl] warning: hermitian_power clamped eigenvalues below "
                  << kEigenvalueClamp << "\n";
    Matrix result = es.evecs * powered.asDiagonal() * es.evecs.adjoint();
    return HermitianMatrix(0.5 * (result + result.adjoint().eval()));
}

/// Largest singular value. Full SVD below dim 128, power iteration on M†M
/// with a 1e-12 relative residual above.
inline double spectral_norm(const Matrix& m) {
    if (m.rows() == 0 || m.cols() == 0) return 0.0;
    if (m.rows() < 128 && m.cols() < 128) {
        Eigen::BDCSVD<Matrix> svd(m);
        return svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
    }
    // Power iteration with a deterministic start vector.
    Rng rng(0x5eed5eedULL);
    Vector v(m.cols());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = Complex(rng.normal(), rng.normal());
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < 20000; ++it) {
        Vector w = m.adjoint() * (m * v);
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        w /= norm;
        lambda = norm;
        const double residual = (m.adjoint() * (m * w) - lambda * w).norm();
        v = w;
        if (residual <= 1e-12 * std::max(1.0, lambda)) break;
    }
    return std::sqrt(lambda);
}

enum class NormSign { plus, minus };

/// ‖op^{±1/2} φ‖ for a positive definite weight operator.
inline double weighted_norm(const Vector& phi, const HermitianMatrix& frame_op, NormSign sign) {
    if (phi.size() != frame_op.dim())
        throw std::invalid_argument("weighted_norm: dimension mismatch");
    const HermitianMatrix w = hermitian_power(frame_op, sign == NormSign::plus ? 0.5 : -0.5);
    return (w.mat() * phi).norm();
}

/// Reference scale built from the drift: a0 = h0 + (m+1)·1 with its cached
/// ±1/2 powers. Hosts the norms ‖·‖₊, ‖·‖₋ and the weights behind ‖·‖₊,₋ and
/// ‖·‖₋,₊. a0 must be ≥ 1 up to 1e-10; construction verifies the cached powers
/// against a0 itself.
class ScaleFrame {
public:
    ScaleFrame(const HermitianMatrix& h0, double m)
        : m_(m),
          a0_(HermitianMatrix(h0.mat() + (m + 1.0) * Matrix::Identity(h0.dim(), h0.dim()))),
          a0_sqrt_(HermitianMatrix::identity(h0.dim())),
          a0_inv_sqrt_(HermitianMatrix::identity(h0.dim())) {
        if (m < 0.0) throw std::invalid_argument("ScaleFrame: m must be nonnegative");
        eigen_ = eigh(a0_);
        const double lo = eigen_.evals.minCoeff();
        if (lo < 1.0 - 1e-10) {
            std::ostringstream os;
            os << "ScaleFrame: a0 must satisfy a0 >= 1 (smallest eigenvalue " << lo
               << "); lower bound m is too small";
            throw std::invalid_argument(os.str());
        }
        a0_sqrt_ = from_eigenpairs([](double x) { return std::sqrt(x); });
        a0_inv_sqrt_ = from_eigenpairs([](double x) { return 1.0 / std::sqrt(x); });
        check_cached_powers();
    }

    int dim() const { return a0_.dim(); }
    double m() const { return m_; }
    const HermitianMatrix& a0() const { return a0_; }
    const HermitianMatrix& a0_sqrt() const { return a0_sqrt_; }
    const HermitianMatrix& a0_inv_sqrt() const { return a0_inv_sqrt_; }
    const RealVector& a0_eigenvalues() const { return eigen_.evals; }
    const Matrix& a0_eigenvectors() const { return eigen_.evecs; }

    double plus_norm(const Vector& phi) const {
        check_dim(phi.size());
        return (a0_sqrt_.mat() * phi).norm();
    }
    double minus_norm(const Vector& phi) const {
        check_dim(phi.size());
        return (a0_inv_sqrt_.mat() * phi).norm();
    }

    /// e^{-i t h0}; h0 shares the eigenbasis of a0 with eigenvalues shifted by m+1.
    Matrix drift_unitary(double t) const {
        Vector phases(eigen_.evals.size());
        for (Eigen::Index i = 0; i < phases.size(); ++i) {
            const double lambda = eigen_.evals(i) - (m_ + 1.0);
            phases(i) = std::exp(Complex(0.0, -t * lambda));
        }
        return eigen_.evecs * phases.asDiagonal() * eigen_.evecs.adjoint();
    }

private:
    template <class F>
    HermitianMatrix from_eigenpairs(F&& f) const {
        RealVector vals(eigen_.evals.size());
        for (Eigen::Index i = 0; i < vals.size(); ++i) vals(i) = f(eigen_.evals(i));
        Matrix r = eigen_.evecs * vals.asDiagonal() * eigen_.evecs.adjoint();
        return HermitianMatrix(0.5 * (r + r.adjoint().eval()));
    }

    void check_cached_powers() const {
        const Matrix& s = a0_sqrt_.mat();
        const double scale = spectral_norm(a0_.mat());
        if (spectral_norm(s * s - a0_.mat()) > 1e-10 * scale)
            throw std::runtime_error("ScaleFrame: a0_sqrt^2 does not reproduce a0");
        const Matrix id = Matrix::Identity(dim(), dim());
        if (spectral_norm(s * a0_inv_sqrt_.mat() - id) > 1e-10)
            throw std::runtime_error("ScaleFrame: a0_sqrt * a0_inv_sqrt is not the identity");
    }

    void check_dim(Eigen::Index n) const {
        if (n != dim()) throw std::invalid_argument("ScaleFrame: dimension mismatch");
    }

    double m_;
    HermitianMatrix a0_;
    HermitianMatrix a0_sqrt_;
    HermitianMatrix a0_inv_sqrt_;
    EigenSystem eigen_;
};

/// Norm of V as a map H+ -> H-: the spectral norm of a0^{-1/2} V a0^{-1/2}.
inline double norm_plus_minus(const Matrix& v, const ScaleFrame& frame) {
    if (v.rows() != frame.dim() || v.cols() != frame.dim())
        throw std::invalid_argument("norm_plus_minus: dimension mismatch");
    const Matrix& s = frame.a0_inv_sqrt().mat();
    return spectral_norm(s * v * s);
}

/// Norm of V as a map H- -> H+: the spectral norm of a0^{1/2} V a0^{1/2}.
inline double norm_minus_plus(const Matrix& v, const ScaleFrame& frame) {
    if (v.rows() != frame.dim() || v.cols() != frame.dim())
        throw std::invalid_argument("norm_minus_plus: dimension mismatch");
    const Matrix& s = frame.a0_sqrt().mat();
    return spectral_norm(s * v * s);
}

}  // namespace formctrl
