#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sigstop/models.hpp"
#include "sigstop/regression.hpp"
#include "sigstop/signature.hpp"

namespace sigstop {

/// How path batches are turned into regression features: the lift fed to the
/// signature, the normalization radius, and the scaling of the state
/// coordinates fed to the Laguerre polynomials.
struct FeatureMap {
    BasisSpec basis;
    double normalize_R = 0.0;        // 0 = raw signatures
    double lift_scale = 1.0;         // scales the state column inside the lift
    double payoff_lift_scale = 1.0;  // scales the payoff letter inside the lift
    std::vector<double> state_scale; // per state coordinate, empty = ones

    int alphabet() const { return basis.include_payoff_letter ? 3 : 2; }
    std::size_t feature_count() const { return basis.feature_count(alphabet()); }
};

/// Per-path, per-exercise-date regression data extracted from a batch.
/// Features are stored in float32; payoffs stay double.
struct FeatureTable {
    long n_paths = 0;
    int n_dates = 0;     // N+1
    int n_features = 0;  // D_feat
    std::vector<double> exercise_times;
    std::vector<float> features;  // M x (N+1) x D_feat
    std::vector<double> z;        // M x (N+1)

    const float* feature_row(long i, int n) const {
        return features.data() +
               (static_cast<std::size_t>(i) * n_dates + n) * static_cast<std::size_t>(n_features);
    }
    double payoff(long i, int n) const { return z[static_cast<std::size_t>(i) * n_dates + n]; }

    void allocate(long paths, int dates, int feats);
};

/// Builds feature rows for batch paths [row0, row0+count) into table rows
/// [table_row0, ...). Exercise dates must lie on the batch grid.
void fill_feature_table(FeatureTable& table, long table_row0, const PathBatch& batch, long row0,
                        long count, const FeatureMap& map,
                        std::span<const std::size_t> exercise_idx);

FeatureTable build_feature_table(const PathBatch& batch, const FeatureMap& map,
                                 std::span<const double> exercise_times);

/// Frozen exercise rule: one coefficient vector per date n = 0..N-1 over the
/// feature family; stop at t_n when Z_{t_n} >= features . beta_n (ties stop),
/// always stop at t_N.
struct RegressionPolicy {
    FeatureMap map;
    std::vector<double> exercise_times;
    Eigen::MatrixXd coeffs;  // N x D_feat
    bool in_the_money_only = false;
};

struct FitReport {
    double train_estimate = 0.0;  // in-sample value, max(Z_0, mean stopped)
    double train_stderr = 0.0;
    std::vector<int> skipped_dates;  // no in-the-money paths, regression skipped
};

struct LowerBoundResult {
    double estimate = 0.0;
    double std_error = 0.0;
    std::vector<double> stopped_payoffs;
    RegressionPolicy policy;
};

/// Backward-induction fit on a feature table; svd_tol is the relative
/// singular-value cutoff of the regressions.
RegressionPolicy fit_policy(const FeatureTable& table, const FeatureMap& map, bool in_the_money_only,
                            double svd_tol = 1e-10, FitReport* report = nullptr);

/// Spec-shaped overload: per-path signature streams are sampled at the
/// exercise dates and the table is built on the fly (test-scale sizes).
RegressionPolicy fit_policy(const PathBatch& train, const std::vector<SignatureStream>& streams,
                            std::span<const double> exercise_times, const FeatureMap& map,
                            bool in_the_money_only, double svd_tol = 1e-10,
                            FitReport* report = nullptr);

/// Applies the frozen comparisons to fresh paths; estimate is
/// max(Z_{t_0}, mean stopped payoff), stderr the sample error of the mean.
LowerBoundResult evaluate_policy(const RegressionPolicy& policy, const FeatureTable& fresh);
LowerBoundResult evaluate_policy(const RegressionPolicy& policy, const PathBatch& fresh,
                                 const std::vector<SignatureStream>& streams);

/// Per-path stopped payoffs only (chunk-wise evaluation building block).
void stopped_payoffs(const RegressionPolicy& policy, const FeatureTable& table,
                     std::span<double> out);

/// Versioned text serialization; doubles are written as hex floats so the
/// round trip is bit-exact.
void save_policy(const RegressionPolicy& policy, std::ostream& os);
RegressionPolicy load_policy(std::istream& is);

}  // namespace sigstop
