#pragma once

#include <complex>
#include <string>
#include <vector>

#include "zoomlab/dynamics.hpp"
#include "zoomlab/trajectory.hpp"

namespace zoomlab {

/// Every rate bound in one place, with the capacity they are compared against.
/// V_hat is an empirical quantity (occupation-measure average), flagged as such.
struct BoundReport {
    double v_hat = 0.0;          // bits/step
    double v_hat_se = 0.0;       // replication standard error
    double l_inf = 0.0;          // inf log2|J| (bits)
    double m_sup = 0.0;          // sup log2|J| (bits)
    double linear_bound = 0.0;   // sum over |lambda|>1 of log2|lambda|; linear models
    bool has_linear_bound = false;
    double sufficiency_threshold = 0.0;  // N log2|a| + 1
    bool has_sufficiency = false;
    double capacity = 0.0;       // channel capacity C (bits/use)
    double codec_rate_bits = 0.0;       // log2(K^N + 1); 0 without a zoom codec
    bool rate_condition_ok = false;     // 2^{R'} > |a|/alpha

    bool ams_necessary_ok = false;      // C >= L_inf
    bool phr_necessary_ok = false;      // C >= V_hat
    bool sufficiency_ok = false;        // C >  N log2|a| + 1

    std::string to_text() const;
    std::string to_json() const;
};

struct JacobianRateEstimate {
    double v_hat = 0.0;
    double standard_error = 0.0;
    int64_t states_visited = 0;
};

/// Time-and-replication average of log2|det J| along trajectories, with fresh
/// noise draws for the inner nu-average when J depends on the noise. The lim inf
/// is approximated by the tail half of each horizon (burn-in discarded).
JacobianRateEstimate jacobian_entropy_rate(const SystemModel& model,
                                           const std::vector<Trajectory>& trajectories,
                                           uint64_t seed = 2024, int inner_draws = 16);

/// Sum of log2|lambda_i| over unstable eigenvalues; 0 when all are stable.
double linear_rate_bound(const std::vector<std::complex<double>>& eigenvalues);

/// N log2|a| + 1 from the model's contraction certificate.
double sufficiency_threshold(const SystemModel& model);

struct BoundInputs {
    double v_hat = 0.0;
    double v_hat_se = 0.0;
    double l_inf = 0.0;
    double m_sup = 0.0;
    double capacity = 0.0;
    double linear_bound = 0.0;
    bool has_linear_bound = false;
    double sufficiency = 0.0;
    bool has_sufficiency = false;
    double codec_rate_bits = 0.0;
    bool rate_condition_ok = false;
};

/// Assembles the report; each verdict is a pure comparison of the inputs.
BoundReport verdicts(const BoundInputs& inputs);

}  // namespace zoomlab
