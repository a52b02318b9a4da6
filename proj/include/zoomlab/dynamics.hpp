#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "zoomlab/common.hpp"
#include "zoomlab/rng.hpp"

namespace zoomlab {

// Which slot the control occupies in the one-step map.
enum class PlantForm {
    AdditiveControl,  // x+ = f(x,w) + u
    AdditiveNoise,    // x+ = f(x) + u + w
    ControlInF,       // x+ = f(x,u) + w
};

/// Control map kappa with |f(x, kappa(z))|_inf <= a * |x - z|_inf and kappa(0) = 0.
/// The decoder emits kappa(x_hat) directly; see contraction_certificate_check.
struct ContractionCertificate {
    double a = 0.0;
    std::function<Vec(const Vec&)> kappa;
};

struct SystemModel {
    std::string name;
    int dim = 1;
    PlantForm form = PlantForm::AdditiveNoise;

    // One-step map with all three arguments spelled out; the form tag records
    // which slots are additive.
    std::function<Vec(const Vec& x, const Vec& u, const Vec& w)> f;

    // Jacobian of the state-to-successor map (control held fixed), row-major
    // dim x dim. Empty -> central finite differences.
    std::function<std::vector<double>(const Vec& x, const Vec& w)> jacobian;

    // Declared bounds on log2|det J| in bits; +-infinity when unknown.
    double l1_bits = -std::numeric_limits<double>::infinity();
    double m1_bits = std::numeric_limits<double>::infinity();

    // True when J depends on the noise realization (forces the inner
    // noise average in the entropy-rate bound).
    bool jacobian_depends_on_noise = false;

    // Per-coordinate standard deviations of the zero-mean Gaussian noise.
    Vec noise_sigma;

    std::optional<ContractionCertificate> certificate;
};

/// One-step successor for the model's form tag.
Vec step(const SystemModel& model, const Vec& x, const Vec& u, const Vec& w);

/// log2 |det J(f)(x, w)| in bits. Throws ConfigError on a singular Jacobian
/// (violates the standing invertibility assumption).
double log_jacobian(const SystemModel& model, const Vec& x, const Vec& w);

/// Central finite-difference Jacobian of the state map, step 1e-6 * (1 + |x_j|).
std::vector<double> finite_difference_jacobian(const SystemModel& model, const Vec& x,
                                               const Vec& w);

/// log2 |det A| via LU with partial pivoting; returns -inf for singular A.
double log2_abs_det(std::vector<double> a, int n);

// ---- catalog ---------------------------------------------------------------

/// x+ = A x + u + w with diagonal A.
SystemModel linear_model(const Vec& diag);

/// x+ = b (x + 0.5 sin x) + u + w, coordinatewise; certificate a = 1.5 b with
/// kappa(z) = -b (z + 0.5 sin z).
SystemModel benchmark_model(int dim, double b);

/// Scalar x+ = c x + 0.5 sin x + u + w; expanding for c > 1.5.
SystemModel expanding_model(double c);

SystemModel make_model(const std::string& name, int dim, double gain, const Vec& diag);

// ---- validation ------------------------------------------------------------

struct ModelCheckReport {
    bool jacobian_consistent = true;   // analytic vs finite differences
    double max_jacobian_rel_err = 0.0;
    bool invertible_spot_check = true; // |det J| > 0 at sampled points
    bool log_jacobian_within_declared_bounds = true;
};

/// Spot checks at `samples` random (x, w) pairs drawn from the given stream.
ModelCheckReport validate_model(const SystemModel& model, NoiseStream& rng, int samples);

struct CertificateCheck {
    double worst_ratio = 0.0;  // max |f(x,kappa(z))|_inf / |x-z|_inf
    double kappa_at_zero = 0.0;
    bool holds = false;        // worst_ratio <= a + 1e-9 and kappa(0) = 0
};

/// Samples `pairs` random (x, z) and checks the contraction inequality.
CertificateCheck contraction_certificate_check(const SystemModel& model, NoiseStream& rng,
                                               int pairs, double span = 20.0);

}  // namespace zoomlab
