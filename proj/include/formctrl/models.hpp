#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "formctrl/linops.hpp"
#include "formctrl/rng.hpp"
#include "formctrl/system.hpp"

namespace formctrl {
namespace models {

/// Truncated harmonic oscillator with dipole coupling: h0 = diag(k + 1/2),
/// X tridiagonal with X_{k,k+1} = sqrt((k+1)/2), H1 = coupling * X. A second
/// channel, when requested, couples through X^2. Control box [-1,1]^p.
inline FormLinearSystem harmonic_oscillator(int dim, double coupling = 1.0, int channels = 1) {
    if (dim < 2) throw std::invalid_argument("harmonic_oscillator: dim must be at least 2");
    if (channels < 1 || channels > 2)
        throw std::invalid_argument("harmonic_oscillator: channels must be 1 or 2");
    Matrix h0 = Matrix::Zero(dim, dim);
    for (int k = 0; k < dim; ++k) h0(k, k) = k + 0.5;
    Matrix x = Matrix::Zero(dim, dim);
    for (int k = 0; k + 1 < dim; ++k) x(k, k + 1) = x(k + 1, k) = std::sqrt((k + 1) / 2.0);
    std::vector<HermitianMatrix> interactions;
    interactions.emplace_back(coupling * x);
    if (channels == 2) interactions.emplace_back(coupling * (x * x).eval());
    ControlBox box(static_cast<std::size_t>(channels), {-1.0, 1.0});
    // Rayleigh-Ritz: truncation can only raise eigenvalues, and the continuum
    // ground energy is (1 - u^2)/2 >= 0 on the box, so m = 0 is valid.
    return FormLinearSystem::with_bound(HermitianMatrix(std::move(h0)), std::move(interactions),
                                        std::move(box), 0.0);
}

/// Particle in a box with dipole coupling, units hbar = 2m = L = 1 so the
/// levels are k^2 pi^2. The dipole matrix has 1/2 on the diagonal and
/// -8kl / (pi^2 (k^2-l^2)^2) where k-l is odd.
inline FormLinearSystem particle_in_box(int dim, double coupling = 1.0) {
    if (dim < 2) throw std::invalid_argument("particle_in_box: dim must be at least 2");
    const double pi = std::numbers::pi;
    Matrix h0 = Matrix::Zero(dim, dim);
    Matrix x = Matrix::Zero(dim, dim);
    for (int i = 0; i < dim; ++i) {
        const double k = i + 1.0;
        h0(i, i) = k * k * pi * pi;
        x(i, i) = 0.5;
        for (int j = 0; j < dim; ++j) {
            if (i == j) continue;
            const double l = j + 1.0;
            const int diff = (i - j);
            if (diff % 2 != 0) {
                const double denom = (k * k - l * l);
                x(i, j) = -8.0 * k * l / (pi * pi * denom * denom);
            }
        }
    }
    std::vector<HermitianMatrix> interactions;
    interactions.emplace_back(coupling * x);
    return FormLinearSystem::with_bound(HermitianMatrix(std::move(h0)), std::move(interactions),
                                        {{-1.0, 1.0}}, 0.0);
}

/// Seeded random instance: drift with superlinear level growth
/// lambda_k = k^1.5 (1 + 0.1 jitter), sorted ascending, and interactions
/// h0^{1/2} W h0^{1/2} / p with W a weight-tempered random Hermitian of unit
/// spectral norm. The h0 sandwich keeps h0 + sum u_i H_i >= 0 on [-1,1]^p, so
/// m = 0, and the tempering makes the weighted tails decay fast.
inline FormLinearSystem random_system(int dim, int channels, std::uint64_t seed) {
    if (dim < 2) throw std::invalid_argument("random_system: dim must be at least 2");
    if (channels < 1) throw std::invalid_argument("random_system: need at least one channel");
    Rng rng(derive_seed(seed, 0));

    std::vector<double> levels(static_cast<std::size_t>(dim));
    for (int k = 0; k < dim; ++k)
        levels[static_cast<std::size_t>(k)] =
            std::pow(static_cast<double>(k + 1), 1.5) * (1.0 + 0.1 * rng.uniform());
    std::sort(levels.begin(), levels.end());
    for (int k = 0; k + 1 < dim; ++k)
        if (levels[static_cast<std::size_t>(k + 1)] <= levels[static_cast<std::size_t>(k)])
            levels[static_cast<std::size_t>(k + 1)] =
                std::nextafter(levels[static_cast<std::size_t>(k)],
                               std::numeric_limits<double>::infinity());
    Matrix h0 = Matrix::Zero(dim, dim);
    for (int k = 0; k < dim; ++k) h0(k, k) = levels[static_cast<std::size_t>(k)];

    RealVector root_h0(dim), taper(dim);
    for (int k = 0; k < dim; ++k) {
        root_h0(k) = std::sqrt(levels[static_cast<std::size_t>(k)]);
        taper(k) = 1.0 / (1.0 + levels[static_cast<std::size_t>(k)]);
    }

    std::vector<HermitianMatrix> interactions;
    for (int ch = 0; ch < channels; ++ch) {
        Rng channel_rng(derive_seed(seed, static_cast<std::uint64_t>(ch + 1)));
        Matrix g(dim, dim);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j)
                g(i, j) = Complex(channel_rng.normal(), channel_rng.normal());
        Matrix w = 0.5 * (g + g.adjoint().eval());
        w = (taper.asDiagonal() * w * taper.asDiagonal()).eval();
        w /= spectral_norm(w);
        Matrix h = root_h0.asDiagonal() * w * root_h0.asDiagonal();
        h /= static_cast<double>(channels);
        interactions.emplace_back(0.5 * (h + h.adjoint().eval()));
    }
    ControlBox box(static_cast<std::size_t>(channels), {-1.0, 1.0});
    // <phi, (h0 + sum u_i H_i) phi> = |psi|^2 (1 + sum u_i <W_i> / p) >= 0 with
    // psi = h0^{1/2} phi, so m = 0 holds across the box by construction.
    return FormLinearSystem::with_bound(HermitianMatrix(std::move(h0)), std::move(interactions),
                                        std::move(box), 0.0);
}

}  // namespace models
}  // namespace formctrl
