#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace recsyn {

struct LossPoint {
    double tokens = 0.0;  // D
    double loss = 0.0;    // L
};

struct LossCurve {
    std::vector<LossPoint> points;  // strictly increasing in tokens
    double model_size = 0.0;        // N, raw parameter count
    std::string label;

    void validate() const;
};

enum class FitObjective { squared, huber };

struct FitOptions {
    FitObjective objective = FitObjective::squared;
    double huber_delta = 0.01;
    bool log_transform = false;  // fit ln(value), for curves given as perplexity
};

/// L(D) = L_inf + A * D^-alpha with 0 <= L_inf <= min L and A >= 0.
struct PerModelFit {
    double L_inf = 0.0;
    double A = 0.0;
    double alpha = 0.0;
    double rmse = 0.0;
    bool alpha_identifiable = true;
    std::vector<std::string> flags;

    double predict(double tokens) const;
};

/// L(N, D) = E + A * N^-alpha + B * D^-beta with every coefficient >= 0.
struct JointScalingFit {
    double E = 0.0;
    double A = 0.0;
    double alpha = 0.0;
    double B = 0.0;
    double beta = 0.0;
    double rmse = 0.0;
    bool alpha_identifiable = true;
    bool beta_identifiable = true;
    std::vector<std::string> flags;

    double predict(double model_size, double tokens) const;
};

/// Needs >= 4 points. Never throws on a flat or rising curve; such fits carry flags instead.
PerModelFit fit_per_model(const LossCurve& curve, const FitOptions& options = {});

/// Needs >= 3 distinct model sizes with >= 4 points each.
JointScalingFit fit_joint(const std::vector<LossCurve>& curves, const FitOptions& options = {});

struct Tradeoff {
    double alpha_A = 0.0;
    double beta_B = 0.0;
};

Tradeoff tradeoff_coefficients(const JointScalingFit& fit);

struct Allocation {
    double N = 0.0;
    double D = 0.0;
    double loss = 0.0;
};

/// Minimizes the joint law subject to 6 N D = C. The optimum satisfies
/// alpha A N^-alpha = beta B D^-beta, solved exactly in log N.
Allocation compute_optimal_allocation(const JointScalingFit& fit, double compute);

/// 2^(1 / beta): data growth that halves the data-dependent term.
double data_multiplier_for_half_loss(double beta);

/// Delimited text with a header naming model_params, tokens, loss, or JSON-lines rows with
/// the same keys. One curve per distinct model_params, ordered by size.
std::vector<LossCurve> load_curves(const std::filesystem::path& path);
std::vector<LossCurve> parse_curves_csv(const std::string& content);
std::vector<LossCurve> parse_curves_jsonl(const std::string& content);
void save_curves_csv(const std::vector<LossCurve>& curves, const std::filesystem::path& path);

std::string per_model_fit_json(const PerModelFit& fit, const LossCurve& curve);
std::string joint_fit_json(const JointScalingFit& fit);

}  // namespace recsyn
