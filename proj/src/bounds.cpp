#include "zoomlab/bounds.hpp"

#include <cmath>
#include <sstream>

#include "zoomlab/rng.hpp"

namespace zoomlab {

JacobianRateEstimate jacobian_entropy_rate(const SystemModel& model,
                                           const std::vector<Trajectory>& trajectories,
                                           uint64_t seed, int inner_draws) {
    if (trajectories.empty()) throw ConfigError("jacobian_entropy_rate: no trajectories");
    const Vec sigma = model.noise_sigma.empty() ? Vec(static_cast<size_t>(model.dim), 1.0)
                                                : model.noise_sigma;
    const Vec zero(static_cast<size_t>(model.dim), 0.0);

    JacobianRateEstimate est;
    double sum = 0.0, sumsq = 0.0;
    size_t reps = 0;
    for (size_t r = 0; r < trajectories.size(); ++r) {
        const Trajectory& traj = trajectories[r];
        const int64_t n = traj.steps();
        if (n < 2) throw ConfigError("jacobian_entropy_rate: trajectory too short");
        NoiseStream inner(derive_seed(seed, r), sigma);
        // tail half of the horizon approximates the running average's limit
        const int64_t t0 = n / 2;
        double rep_sum = 0.0;
        int64_t rep_n = 0;
        for (int64_t t = t0; t <= n; ++t) {
            const Vec x = traj.state_at(t);
            double v;
            if (model.jacobian_depends_on_noise) {
                v = 0.0;
                for (int d = 0; d < inner_draws; ++d)
                    v += log_jacobian(model, x, inner.gaussian_vector());
                v /= static_cast<double>(inner_draws);
            } else {
                v = log_jacobian(model, x, zero);
            }
            rep_sum += v;
            ++rep_n;
        }
        const double rep_mean = rep_sum / static_cast<double>(rep_n);
        sum += rep_mean;
        sumsq += rep_mean * rep_mean;
        est.states_visited += rep_n;
        ++reps;
    }
    est.v_hat = sum / static_cast<double>(reps);
    if (reps > 1) {
        const double var =
            (sumsq - sum * sum / static_cast<double>(reps)) / static_cast<double>(reps - 1);
        est.standard_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(reps));
    }
    return est;
}

double linear_rate_bound(const std::vector<std::complex<double>>& eigenvalues) {
    double sum = 0.0;
    for (const auto& lambda : eigenvalues) {
        const double mag = std::abs(lambda);
        if (mag > 1.0) sum += std::log2(mag);
    }
    return sum;
}

double sufficiency_threshold(const SystemModel& model) {
    if (!model.certificate)
        throw ConfigError("sufficiency_threshold: model carries no contraction certificate");
    return model.dim * std::log2(std::abs(model.certificate->a)) + 1.0;
}

BoundReport verdicts(const BoundInputs& in) {
    BoundReport rep;
    rep.v_hat = in.v_hat;
    rep.v_hat_se = in.v_hat_se;
    rep.l_inf = in.l_inf;
    rep.m_sup = in.m_sup;
    rep.capacity = in.capacity;
    rep.linear_bound = in.linear_bound;
    rep.has_linear_bound = in.has_linear_bound;
    rep.sufficiency_threshold = in.sufficiency;
    rep.has_sufficiency = in.has_sufficiency;
    rep.codec_rate_bits = in.codec_rate_bits;
    rep.rate_condition_ok = in.rate_condition_ok;

    rep.ams_necessary_ok = in.capacity >= in.l_inf;
    rep.phr_necessary_ok = in.capacity >= in.v_hat;
    rep.sufficiency_ok = in.has_sufficiency && in.capacity > in.sufficiency;
    return rep;
}

std::string BoundReport::to_text() const {
    std::ostringstream os;
    os.precision(6);
    os << "bound report\n";
    os << "  C (capacity)              : " << capacity << " bits/use\n";
    os << "  V_hat (empirical)         : " << v_hat << " +- " << v_hat_se << " bits/step\n";
    os << "  L_inf                     : " << l_inf << " bits\n";
    os << "  M_sup                     : " << m_sup << " bits\n";
    if (has_linear_bound)
        os << "  sum log2|lambda| (unstab.): " << linear_bound << " bits\n";
    if (has_sufficiency)
        os << "  N log2|a| + 1             : " << sufficiency_threshold << " bits\n";
    if (codec_rate_bits > 0.0) {
        os << "  codec rate log2(K^N+1)    : " << codec_rate_bits << " bits/step\n";
        os << "  2^R' > |a|/alpha          : " << (rate_condition_ok ? "holds" : "fails") << "\n";
    }
    os << "  C >= L_inf (AMS necessary): "
       << (ams_necessary_ok ? "satisfied" : "violated") << "\n";
    os << "  C >= V_hat (PHR necessary): "
       << (phr_necessary_ok ? "satisfied" : "violated") << "\n";
    if (has_sufficiency)
        os << "  C >  N log2|a|+1 (suff.)  : "
           << (sufficiency_ok ? "satisfied" : "violated") << "\n";
    return os.str();
}

std::string BoundReport::to_json() const {
    std::ostringstream os;
    os.precision(17);
    os << "{\n"
       << "  \"v_hat\": " << v_hat << ",\n"
       << "  \"v_hat_se\": " << v_hat_se << ",\n"
       << "  \"v_hat_kind\": \"empirical\",\n"
       << "  \"l_inf\": " << l_inf << ",\n"
       << "  \"m_sup\": " << m_sup << ",\n"
       << "  \"linear_bound\": " << (has_linear_bound ? linear_bound : 0.0) << ",\n"
       << "  \"has_linear_bound\": " << (has_linear_bound ? "true" : "false") << ",\n"
       << "  \"sufficiency_threshold\": " << (has_sufficiency ? sufficiency_threshold : 0.0)
       << ",\n"
       << "  \"has_sufficiency\": " << (has_sufficiency ? "true" : "false") << ",\n"
       << "  \"capacity\": " << capacity << ",\n"
       << "  \"codec_rate_bits\": " << codec_rate_bits << ",\n"
       << "  \"rate_condition_ok\": " << (rate_condition_ok ? "true" : "false") << ",\n"
       << "  \"ams_necessary_ok\": " << (ams_necessary_ok ? "true" : "false") << ",\n"
       << "  \"phr_necessary_ok\": " << (phr_necessary_ok ? "true" : "false") << ",\n"
       << "  \"sufficiency_ok\": " << (sufficiency_ok ? "true" : "false") << "\n"
       << "}\n";
    return os.str();
}

}  // namespace zoomlab
