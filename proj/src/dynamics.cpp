#include "zoomlab/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace zoomlab {

namespace {

void check_dim(const SystemModel& model, const Vec& v, const char* what) {
    if (static_cast<int>(v.size()) != model.dim)
        throw ConfigError(std::string("dimension mismatch for ") + what + ": got " +
                          std::to_string(v.size()) + ", model has " + std::to_string(model.dim));
}

}  // namespace

Vec step(const SystemModel& model, const Vec& x, const Vec& u, const Vec& w) {
    check_dim(model, x, "state");
    check_dim(model, u, "control");
    check_dim(model, w, "noise");
    return model.f(x, u, w);
}

double log2_abs_det(std::vector<double> a, int n) {
    // LU with partial pivoting, accumulating log2 of pivot magnitudes.
    double log2det = 0.0;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        double best = std::abs(a[static_cast<size_t>(col) * n + col]);
        for (int r = col + 1; r < n; ++r) {
            double v = std::abs(a[static_cast<size_t>(r) * n + col]);
            if (v > best) {
                best = v;
                piv = r;
            }
        }
        if (best == 0.0) return -std::numeric_limits<double>::infinity();
        if (piv != col)
            for (int c = 0; c < n; ++c)
                std::swap(a[static_cast<size_t>(piv) * n + c], a[static_cast<size_t>(col) * n + c]);
        const double pivot = a[static_cast<size_t>(col) * n + col];
        log2det += std::log2(std::abs(pivot));
        for (int r = col + 1; r < n; ++r) {
            const double factor = a[static_cast<size_t>(r) * n + col] / pivot;
            if (factor == 0.0) continue;
            for (int c = col; c < n; ++c)
                a[static_cast<size_t>(r) * n + c] -= factor * a[static_cast<size_t>(col) * n + c];
        }
    }
    return log2det;
}

std::vector<double> finite_difference_jacobian(const SystemModel& model, const Vec& x,
                                               const Vec& w) {
    const int n = model.dim;
    const Vec u(static_cast<size_t>(n), 0.0);
    std::vector<double> jac(static_cast<size_t>(n) * n, 0.0);
    Vec xp = x, xm = x;
    for (int j = 0; j < n; ++j) {
        const double h = 1e-6 * (1.0 + std::abs(x[static_cast<size_t>(j)]));
        xp[static_cast<size_t>(j)] = x[static_cast<size_t>(j)] + h;
        xm[static_cast<size_t>(j)] = x[static_cast<size_t>(j)] - h;
        const Vec fp = model.f(xp, u, w);
        const Vec fm = model.f(xm, u, w);
        for (int i = 0; i < n; ++i)
            jac[static_cast<size_t>(i) * n + j] =
                (fp[static_cast<size_t>(i)] - fm[static_cast<size_t>(i)]) / (2.0 * h);
        xp[static_cast<size_t>(j)] = x[static_cast<size_t>(j)];
        xm[static_cast<size_t>(j)] = x[static_cast<size_t>(j)];
    }
    return jac;
}

double log_jacobian(const SystemModel& model, const Vec& x, const Vec& w) {
    check_dim(model, x, "state");
    const std::vector<double> jac =
        model.jacobian ? model.jacobian(x, w) : finite_difference_jacobian(model, x, w);
    const double v = log2_abs_det(jac, model.dim);
    if (std::isinf(v) && v < 0)
        throw ConfigError("singular Jacobian at sampled point: model invalid (f not invertible)");
    return v;
}

SystemModel linear_model(const Vec& diag) {
    SystemModel m;
    m.name = "linear";
    m.dim = static_cast<int>(diag.size());
    m.form = PlantForm::AdditiveNoise;
    m.noise_sigma.assign(diag.size(), 1.0);
    double sum = 0.0, amax = 0.0;
    for (double d : diag) {
        if (d == 0.0) throw ConfigError("linear_model: zero diagonal entry is not invertible");
        sum += std::log2(std::abs(d));
        amax = std::max(amax, std::abs(d));
    }
    m.l1_bits = m.m1_bits = sum;
    m.f = [diag](const Vec& x, const Vec& u, const Vec& w) {
        Vec r(x.size());
        for (size_t i = 0; i < x.size(); ++i) r[i] = diag[i] * x[i] + u[i] + w[i];
        return r;
    };
    const int n = m.dim;
    m.jacobian = [diag, n](const Vec&, const Vec&) {
        std::vector<double> jac(static_cast<size_t>(n) * n, 0.0);
        for (int i = 0; i < n; ++i) jac[static_cast<size_t>(i) * n + i] = diag[static_cast<size_t>(i)];
        return jac;
    };
    ContractionCertificate cert;
    cert.a = amax;
    cert.kappa = [diag](const Vec& z) {
        Vec r(z.size());
        for (size_t i = 0; i < z.size(); ++i) r[i] = -diag[i] * z[i];
        return r;
    };
    m.certificate = cert;
    return m;
}

SystemModel benchmark_model(int dim, double b) {
    if (dim < 1) throw ConfigError("benchmark_model: dimension must be >= 1");
    if (b <= 0.0) throw ConfigError("benchmark_model: gain b must be > 0");
    SystemModel m;
    m.name = "benchmark";
    m.dim = dim;
    m.form = PlantForm::ControlInF;
    m.noise_sigma.assign(static_cast<size_t>(dim), 1.0);
    // slope of x + 0.5 sin x lies in [0.5, 1.5]
    m.l1_bits = dim * std::log2(0.5 * b);
    m.m1_bits = dim * std::log2(1.5 * b);
    m.f = [b](const Vec& x, const Vec& u, const Vec& w) {
        Vec r(x.size());
        for (size_t i = 0; i < x.size(); ++i)
            r[i] = b * (x[i] + 0.5 * std::sin(x[i])) + u[i] + w[i];
        return r;
    };
    const int n = dim;
    m.jacobian = [b, n](const Vec& x, const Vec&) {
        std::vector<double> jac(static_cast<size_t>(n) * n, 0.0);
        for (int i = 0; i < n; ++i)
            jac[static_cast<size_t>(i) * n + i] = b * (1.0 + 0.5 * std::cos(x[static_cast<size_t>(i)]));
        return jac;
    };
    ContractionCertificate cert;
    cert.a = 1.5 * b;
    cert.kappa = [b](const Vec& z) {
        Vec r(z.size());
        for (size_t i = 0; i < z.size(); ++i) r[i] = -b * (z[i] + 0.5 * std::sin(z[i]));
        return r;
    };
    m.certificate = cert;
    return m;
}

SystemModel expanding_model(double c) {
    if (c <= 1.5) throw ConfigError("expanding_model: need c > 1.5 so that inf f' > 1");
    SystemModel m;
    m.name = "expanding";
    m.dim = 1;
    m.form = PlantForm::AdditiveNoise;
    m.noise_sigma.assign(1, 1.0);
    m.l1_bits = std::log2(c - 0.5);
    m.m1_bits = std::log2(c + 0.5);
    m.f = [c](const Vec& x, const Vec& u, const Vec& w) {
        return Vec{c * x[0] + 0.5 * std::sin(x[0]) + u[0] + w[0]};
    };
    m.jacobian = [c](const Vec& x, const Vec&) {
        return std::vector<double>{c + 0.5 * std::cos(x[0])};
    };
    return m;
}

SystemModel make_model(const std::string& name, int dim, double gain, const Vec& diag) {
    if (name == "linear") {
        if (!diag.empty()) return linear_model(diag);
        return linear_model(Vec(static_cast<size_t>(dim), gain));
    }
    if (name == "benchmark") return benchmark_model(dim, gain);
    if (name == "expanding") return expanding_model(gain);
    throw ConfigError("unknown model name: " + name);
}

ModelCheckReport validate_model(const SystemModel& model, NoiseStream& rng, int samples) {
    ModelCheckReport rep;
    const int n = model.dim;
    for (int s = 0; s < samples; ++s) {
        Vec x(static_cast<size_t>(n)), w(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            x[static_cast<size_t>(i)] = 10.0 * (2.0 * rng.uniform01() - 1.0);
            w[static_cast<size_t>(i)] = rng.standard_gaussian();
        }
        const std::vector<double> jac =
            model.jacobian ? model.jacobian(x, w) : finite_difference_jacobian(model, x, w);
        const double lj = log2_abs_det(jac, n);
        if (std::isinf(lj) && lj < 0) rep.invertible_spot_check = false;
        if (lj < model.l1_bits - 1e-9 || lj > model.m1_bits + 1e-9)
            rep.log_jacobian_within_declared_bounds = false;
        if (model.jacobian) {
            const std::vector<double> fd = finite_difference_jacobian(model, x, w);
            double num = 0.0, den = 0.0;
            for (size_t k = 0; k < jac.size(); ++k) {
                num = std::max(num, std::abs(jac[k] - fd[k]));
                den = std::max(den, std::abs(jac[k]));
            }
            const double rel = num / std::max(den, 1e-300);
            rep.max_jacobian_rel_err = std::max(rep.max_jacobian_rel_err, rel);
            if (rel > 1e-5) rep.jacobian_consistent = false;
        }
    }
    return rep;
}

CertificateCheck contraction_certificate_check(const SystemModel& model, NoiseStream& rng,
                                               int pairs, double span) {
    if (!model.certificate) throw ConfigError("model has no contraction certificate");
    const auto& cert = *model.certificate;
    const int n = model.dim;
    const Vec zero(static_cast<size_t>(n), 0.0);

    CertificateCheck out;
    out.kappa_at_zero = linf_norm(cert.kappa(zero));
    for (int s = 0; s < pairs; ++s) {
        Vec x(static_cast<size_t>(n)), z(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            x[static_cast<size_t>(i)] = span * (2.0 * rng.uniform01() - 1.0);
            z[static_cast<size_t>(i)] = span * (2.0 * rng.uniform01() - 1.0);
        }
        const double dist = linf_norm(x - z);
        if (dist < 1e-12) continue;
        // |f(x, kappa(z))|_inf with the noise slot zeroed.
        const Vec fx = model.f(x, cert.kappa(z), zero);
        out.worst_ratio = std::max(out.worst_ratio, linf_norm(fx) / dist);
    }
    out.holds = out.worst_ratio <= cert.a + 1e-9 && out.kappa_at_zero == 0.0;
    return out;
}

}  // namespace zoomlab
