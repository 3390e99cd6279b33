#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace sigstop {

struct FbmConfig {
    double hurst = 0.5;
    double horizon = 1.0;   // years
    int fine_steps = 100;   // J
    long n_paths = 1000;    // M
    std::uint64_t seed = 1;

    void validate() const;
};

struct RBergomiConfig {
    double hurst = 0.07;
    double eta = 1.9;
    double rho = -0.9;
    double xi0 = 0.09;  // initial forward variance
    double rate = 0.05;
    double spot = 100.0;
    double horizon = 1.0;
    int fine_steps = 48;
    long n_paths = 1000;
    std::uint64_t seed = 1;

    void validate() const;
};

/// M sample paths of the state on a fine grid, the driving Brownian
/// increments, and the discounted payoff path Z.
struct PathBatch {
    std::vector<double> times;   // J+1 grid times
    long n_paths = 0;
    int state_dim = 0;           // d
    int noise_dim = 0;           // m (0 when increments were not stored)
    std::vector<double> states;  // M x (J+1) x d
    std::vector<double> noise;   // M x J x m
    std::vector<double> payoff;  // M x (J+1)
    long resampled_paths = 0;    // paths regenerated after an overflow flag

    int steps() const { return static_cast<int>(times.size()) - 1; }

    double state(long i, std::size_t j, int c) const {
        return states[(static_cast<std::size_t>(i) * times.size() + j) * state_dim + c];
    }
    double& state(long i, std::size_t j, int c) {
        return states[(static_cast<std::size_t>(i) * times.size() + j) * state_dim + c];
    }
    double increment(long i, std::size_t j, int b) const {
        return noise[(static_cast<std::size_t>(i) * static_cast<std::size_t>(steps()) + j) * noise_dim + b];
    }
    double& increment(long i, std::size_t j, int b) {
        return noise[(static_cast<std::size_t>(i) * static_cast<std::size_t>(steps()) + j) * noise_dim + b];
    }
    double z(long i, std::size_t j) const { return payoff[static_cast<std::size_t>(i) * times.size() + j]; }
    double& z(long i, std::size_t j) { return payoff[static_cast<std::size_t>(i) * times.size() + j]; }

    void allocate(long paths, std::size_t points, int d, int m);
};

/// fBm covariance E[X_s X_t] = (|s|^2H + |t|^2H - |t-s|^2H)/2.
double fbm_covariance(double s, double t, double hurst);

/// Var V_t of the Volterra process V_t = int_0^t (t-s)^(H-1/2) dW_s.
double volterra_variance(double t, double hurst);
/// Cov(V_t, V_u), evaluated by quadrature off the diagonal.
double volterra_covariance(double t, double u, double hurst);
/// Cov(V_t, W_b - W_a) for a <= b.
double volterra_brownian_covariance(double t, double a, double b, double hurst);

/// Cholesky with the retry policy: on failure add 1e-12 trace/n to the
/// diagonal, up to 3 times, then throw.
Eigen::MatrixXd cholesky_with_jitter(Eigen::MatrixXd cov);

/// Exact-in-law fBm sampler: one Cholesky factorization per configuration,
/// then any sub-range of paths can be generated independently.
class FbmSampler {
public:
    explicit FbmSampler(const FbmConfig& cfg);

    const std::vector<double>& times() const { return times_; }
    const FbmConfig& config() const { return cfg_; }

    /// Simulate paths [path0, path0+count) into batch rows [row0, ...).
    /// Results for a given path index never depend on the range split.
    void simulate_into(PathBatch& batch, long row0, long path0, long count, bool want_noise) const;
    PathBatch make_batch(long count, bool want_noise) const;

private:
    FbmConfig cfg_;
    std::vector<double> times_;
    Eigen::MatrixXd chol_;  // J x J lower factor of cov(X_{s_1..s_J})
};

/// Exact-in-law rough Bergomi sampler: joint Gaussian (Brownian increments,
/// Volterra values) by Cholesky, then v via the stochastic exponential and
/// the price by log-Euler on the fine grid. States are (X, v).
class RBergomiSampler {
public:
    explicit RBergomiSampler(const RBergomiConfig& cfg);

    const std::vector<double>& times() const { return times_; }
    const RBergomiConfig& config() const { return cfg_; }

    void simulate_into(PathBatch& batch, long row0, long path0, long count, bool want_noise) const;
    PathBatch make_batch(long count, bool want_noise) const;

private:
    RBergomiConfig cfg_;
    std::vector<double> times_;
    Eigen::MatrixXd chol_;           // 2J x 2J lower factor of (dW, V)
    std::vector<double> var_comp_;   // eta^2/2 Var(V_{s_j}) drift compensator
};

PathBatch simulate_fbm(const FbmConfig& cfg);
PathBatch simulate_rbergomi(const RBergomiConfig& cfg);

/// Z_{s_j} = exp(-r s_j) max(strike - X_{s_j}, 0) from state column 0.
void payoff_put(PathBatch& batch, double strike, double rate);

/// Binary dump: 32-byte header (magic "SIGSTOP1", u32 M, u32 J, u32 d,
/// f64 H, 4 pad bytes), then states as row-major f64. CSV fallback writes
/// one "path,time,state..." row per grid point.
void dump_batch_binary(const PathBatch& batch, double hurst, std::ostream& os);
void dump_batch_csv(const PathBatch& batch, std::ostream& os);
PathBatch read_batch_binary(std::istream& is, double* hurst_out = nullptr);

}  // namespace sigstop
