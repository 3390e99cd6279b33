#include "sigstop/models.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "sigstop/parallel.hpp"
#include "sigstop/rng.hpp"

namespace sigstop {

namespace {
constexpr long kSimChunk = 2048;

std::vector<double> uniform_grid(double horizon, int steps) {
    std::vector<double> t(static_cast<std::size_t>(steps) + 1);
    for (int j = 0; j <= steps; ++j) t[static_cast<std::size_t>(j)] = horizon * j / steps;
    return t;
}
}  // namespace

void FbmConfig::validate() const {
    if (!(hurst > 0.0 && hurst < 1.0)) throw std::invalid_argument("FbmConfig: hurst outside (0,1)");
    if (!(horizon > 0.0)) throw std::invalid_argument("FbmConfig: horizon must be positive");
    if (fine_steps < 1) throw std::invalid_argument("FbmConfig: fine_steps < 1");
    if (n_paths < 1) throw std::invalid_argument("FbmConfig: n_paths < 1");
}

void RBergomiConfig::validate() const {
    if (!(hurst > 0.0 && hurst < 1.0)) throw std::invalid_argument("RBergomiConfig: hurst outside (0,1)");
    if (!(rho >= -1.0 && rho <= 1.0)) throw std::invalid_argument("RBergomiConfig: rho outside [-1,1]");
    if (!(xi0 > 0.0)) throw std::invalid_argument("RBergomiConfig: xi0 must be positive");
    if (!(spot > 0.0)) throw std::invalid_argument("RBergomiConfig: spot must be positive");
    if (!(horizon > 0.0)) throw std::invalid_argument("RBergomiConfig: horizon must be positive");
    if (eta < 0.0) throw std::invalid_argument("RBergomiConfig: eta must be non-negative");
    if (fine_steps < 1) throw std::invalid_argument("RBergomiConfig: fine_steps < 1");
    if (n_paths < 1) throw std::invalid_argument("RBergomiConfig: n_paths < 1");
}

void PathBatch::allocate(long paths, std::size_t points, int d, int m) {
    n_paths = paths;
    state_dim = d;
    noise_dim = m;
    states.assign(static_cast<std::size_t>(paths) * points * d, 0.0);
    payoff.assign(static_cast<std::size_t>(paths) * points, 0.0);
    noise.assign(m > 0 ? static_cast<std::size_t>(paths) * (points - 1) * m : 0, 0.0);
}

double fbm_covariance(double s, double t, double hurst) {
    if (s < 0.0 || t < 0.0) throw std::invalid_argument("fbm_covariance: negative time");
    const double h2 = 2.0 * hurst;
    return 0.5 * (std::pow(s, h2) + std::pow(t, h2) - std::pow(std::abs(t - s), h2));
}

double volterra_variance(double t, double hurst) {
    return std::pow(t, 2.0 * hurst) / (2.0 * hurst);
}

double volterra_covariance(double t, double u, double hurst) {
    if (t < u) std::swap(t, u);
    if (u <= 0.0) return 0.0;
    if (t == u) return volterra_variance(t, hurst);
    // int_0^u (u-s)^(H-1/2) (t-s)^(H-1/2) ds with w = (u-s)^(H+1/2):
    // the substitution absorbs the endpoint singularity at s = u.
    const double gamma = hurst + 0.5;
    const double delta = t - u;
    const double inv_gamma = 1.0 / gamma;
    const double expo = hurst - 0.5;
    boost::math::quadrature::tanh_sinh<double> integrator;
    const double value = integrator.integrate(
        [&](double w) { return std::pow(delta + std::pow(w, inv_gamma), expo); }, 0.0,
        std::pow(u, gamma), 1e-12);
    return inv_gamma * value;
}

double volterra_brownian_covariance(double t, double a, double b, double hurst) {
    if (a > b) throw std::invalid_argument("volterra_brownian_covariance: a > b");
    const double gamma = hurst + 0.5;
    const double lo = std::min(a, t), hi = std::min(b, t);
    if (hi <= lo) return 0.0;
    return (std::pow(t - lo, gamma) - std::pow(t - hi, gamma)) / gamma;
}

Eigen::MatrixXd cholesky_with_jitter(Eigen::MatrixXd cov) {
    const double jitter = 1e-12 * cov.trace() / static_cast<double>(cov.rows());
    for (int attempt = 0; attempt <= 3; ++attempt) {
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() == Eigen::Success) return llt.matrixL();
        if (attempt == 3) break;
        cov.diagonal().array() += jitter;
    }
    throw std::runtime_error("cholesky_with_jitter: factorization failed after jitter retries");
}

FbmSampler::FbmSampler(const FbmConfig& cfg) : cfg_(cfg), times_(uniform_grid(cfg.horizon, cfg.fine_steps)) {
    cfg.validate();
    const int J = cfg.fine_steps;
    Eigen::MatrixXd cov(J, J);
    for (int i = 0; i < J; ++i)
        for (int j = 0; j <= i; ++j) {
            const double c = fbm_covariance(times_[static_cast<std::size_t>(i) + 1],
                                            times_[static_cast<std::size_t>(j) + 1], cfg.hurst);
            cov(i, j) = c;
            cov(j, i) = c;
        }
    chol_ = cholesky_with_jitter(std::move(cov));
}

PathBatch FbmSampler::make_batch(long count, bool want_noise) const {
    PathBatch batch;
    batch.times = times_;
    batch.allocate(count, times_.size(), 1, want_noise ? 1 : 0);
    return batch;
}

void FbmSampler::simulate_into(PathBatch& batch, long row0, long path0, long count, bool want_noise) const {
    const int J = cfg_.fine_steps;
    const double sqrt_dt = std::sqrt(cfg_.horizon / J);
    parallel_chunks(static_cast<std::size_t>(count), kSimChunk, [&](std::size_t b, std::size_t e) {
        Eigen::VectorXd z(J), x(J);
        for (std::size_t k = b; k < e; ++k) {
            const long row = row0 + static_cast<long>(k);
            CounterRng rng(cfg_.seed, static_cast<std::uint64_t>(path0 + static_cast<long>(k)));
            for (int j = 0; j < J; ++j) z(j) = rng.next_normal();
            x.noalias() = chol_.triangularView<Eigen::Lower>() * z;
            batch.state(row, 0, 0) = 0.0;
            batch.z(row, 0) = 0.0;
            for (int j = 0; j < J; ++j) {
                batch.state(row, static_cast<std::size_t>(j) + 1, 0) = x(j);
                batch.z(row, static_cast<std::size_t>(j) + 1) = x(j);  // reward is the process itself
                if (want_noise) batch.increment(row, static_cast<std::size_t>(j), 0) = sqrt_dt * z(j);
            }
        }
    });
}

PathBatch simulate_fbm(const FbmConfig& cfg) {
    FbmSampler sampler(cfg);
    PathBatch batch = sampler.make_batch(cfg.n_paths, true);
    sampler.simulate_into(batch, 0, 0, cfg.n_paths, true);
    return batch;
}

RBergomiSampler::RBergomiSampler(const RBergomiConfig& cfg)
    : cfg_(cfg), times_(uniform_grid(cfg.horizon, cfg.fine_steps)) {
    cfg.validate();
    const int J = cfg.fine_steps;
    const double dt = cfg.horizon / J;
    const double H = cfg.hurst;

    // Joint Gaussian vector (dW_1..dW_J, V_{s_1}..V_{s_J}).
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(2 * J, 2 * J);
    for (int j = 0; j < J; ++j) cov(j, j) = dt;
    std::vector<std::pair<int, int>> vv;
    vv.reserve(static_cast<std::size_t>(J) * (J + 1) / 2);
    for (int k = 0; k < J; ++k)
        for (int l = 0; l <= k; ++l) vv.emplace_back(k, l);
    parallel_chunks(vv.size(), 256, [&](std::size_t b, std::size_t e) {
        for (std::size_t idx = b; idx < e; ++idx) {
            const auto [k, l] = vv[idx];
            const double c = volterra_covariance(times_[static_cast<std::size_t>(k) + 1],
                                                 times_[static_cast<std::size_t>(l) + 1], H);
            cov(J + k, J + l) = c;
            cov(J + l, J + k) = c;
        }
    });
    for (int k = 0; k < J; ++k)
        for (int j = 0; j < J; ++j) {
            const double c = volterra_brownian_covariance(times_[static_cast<std::size_t>(k) + 1],
                                                          times_[static_cast<std::size_t>(j)],
                                                          times_[static_cast<std::size_t>(j) + 1], H);
            cov(J + k, j) = c;
            cov(j, J + k) = c;
        }
    chol_ = cholesky_with_jitter(std::move(cov));

    var_comp_.resize(static_cast<std::size_t>(J) + 1);
    for (int j = 0; j <= J; ++j)
        var_comp_[static_cast<std::size_t>(j)] =
            0.5 * cfg.eta * cfg.eta * volterra_variance(times_[static_cast<std::size_t>(j)], H);
}

PathBatch RBergomiSampler::make_batch(long count, bool want_noise) const {
    PathBatch batch;
    batch.times = times_;
    batch.allocate(count, times_.size(), 2, want_noise ? 2 : 0);
    return batch;
}

void RBergomiSampler::simulate_into(PathBatch& batch, long row0, long path0, long count,
                                    bool want_noise) const {
    const int J = cfg_.fine_steps;
    const double dt = cfg_.horizon / J;
    const double sqrt_dt = std::sqrt(dt);
    const double rho_c = std::sqrt(1.0 - cfg_.rho * cfg_.rho);
    constexpr double kOverflowCap = 1e100;
    std::vector<long> resampled(static_cast<std::size_t>((count + kSimChunk - 1) / kSimChunk), 0);

    parallel_chunks(static_cast<std::size_t>(count), kSimChunk, [&](std::size_t b, std::size_t e) {
        Eigen::VectorXd z(2 * J), g(2 * J), db(J);
        for (std::size_t k = b; k < e; ++k) {
            const long row = row0 + static_cast<long>(k);
            const auto path_id = static_cast<std::uint64_t>(path0 + static_cast<long>(k));
            for (int retry = 0;; ++retry) {
                CounterRng rng(cfg_.seed, path_id);
                rng.skip(static_cast<std::uint64_t>(retry) * (1ULL << 32));
                for (int j = 0; j < 2 * J; ++j) z(j) = rng.next_normal();
                for (int j = 0; j < J; ++j) db(j) = sqrt_dt * rng.next_normal();
                g.noalias() = chol_.triangularView<Eigen::Lower>() * z;

                bool ok = true;
                double log_x = std::log(cfg_.spot);
                batch.state(row, 0, 0) = cfg_.spot;
                batch.state(row, 0, 1) = cfg_.xi0;
                for (int j = 0; j < J; ++j) {
                    const double v_left = batch.state(row, static_cast<std::size_t>(j), 1);
                    const double dw = g(j);
                    log_x += (cfg_.rate - 0.5 * v_left) * dt +
                             std::sqrt(v_left) * (cfg_.rho * dw + rho_c * db(j));
                    const double x = std::exp(log_x);
                    const double v = cfg_.xi0 * std::exp(cfg_.eta * g(J + j) -
                                                         var_comp_[static_cast<std::size_t>(j) + 1]);
                    if (!std::isfinite(x) || !std::isfinite(v) || v > kOverflowCap || x > kOverflowCap) {
                        ok = false;
                        break;
                    }
                    batch.state(row, static_cast<std::size_t>(j) + 1, 0) = x;
                    batch.state(row, static_cast<std::size_t>(j) + 1, 1) = v;
                    if (want_noise) {
                        batch.increment(row, static_cast<std::size_t>(j), 0) = dw;
                        batch.increment(row, static_cast<std::size_t>(j), 1) = db(j);
                    }
                }
                if (ok) {
                    if (retry > 0) resampled[b / kSimChunk] += retry;
                    break;
                }
                if (retry >= 100)
                    throw std::runtime_error("RBergomiSampler: path kept overflowing after resampling");
            }
        }
    });
    long total = 0;
    for (long r : resampled) total += r;
    batch.resampled_paths += total;
}

PathBatch simulate_rbergomi(const RBergomiConfig& cfg) {
    RBergomiSampler sampler(cfg);
    PathBatch batch = sampler.make_batch(cfg.n_paths, true);
    sampler.simulate_into(batch, 0, 0, cfg.n_paths, true);
    if (batch.resampled_paths * 10000 >= cfg.n_paths)
        throw std::runtime_error("simulate_rbergomi: more than 0.01% of paths were resampled");
    return batch;
}

void payoff_put(PathBatch& batch, double strike, double rate) {
    const std::size_t points = batch.times.size();
    parallel_chunks(static_cast<std::size_t>(batch.n_paths), kSimChunk, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i)
            for (std::size_t j = 0; j < points; ++j) {
                const double x = batch.state(static_cast<long>(i), j, 0);
                batch.z(static_cast<long>(i), j) =
                    std::exp(-rate * batch.times[j]) * std::max(strike - x, 0.0);
            }
    });
}

void dump_batch_binary(const PathBatch& batch, double hurst, std::ostream& os) {
    char header[32] = {};
    std::memcpy(header, "SIGSTOP1", 8);
    const auto m = static_cast<std::uint32_t>(batch.n_paths);
    const auto j = static_cast<std::uint32_t>(batch.steps());
    const auto d = static_cast<std::uint32_t>(batch.state_dim);
    std::memcpy(header + 8, &m, 4);
    std::memcpy(header + 12, &j, 4);
    std::memcpy(header + 16, &d, 4);
    std::memcpy(header + 20, &hurst, 8);
    os.write(header, sizeof(header));
    os.write(reinterpret_cast<const char*>(batch.states.data()),
             static_cast<std::streamsize>(batch.states.size() * sizeof(double)));
}

void dump_batch_csv(const PathBatch& batch, std::ostream& os) {
    char buf[64];
    for (long i = 0; i < batch.n_paths; ++i)
        for (std::size_t j = 0; j < batch.times.size(); ++j) {
            os << i << ',' << batch.times[j];
            for (int c = 0; c < batch.state_dim; ++c) {
                std::snprintf(buf, sizeof(buf), "%.17g", batch.state(i, j, c));
                os << ',' << buf;
            }
            os << '\n';
        }
}

PathBatch read_batch_binary(std::istream& is, double* hurst_out) {
    char header[32];
    is.read(header, sizeof(header));
    if (!is || std::memcmp(header, "SIGSTOP1", 8) != 0)
        throw std::runtime_error("read_batch_binary: bad magic");
    std::uint32_t m = 0, j = 0, d = 0;
    double hurst = 0.0;
    std::memcpy(&m, header + 8, 4);
    std::memcpy(&j, header + 12, 4);
    std::memcpy(&d, header + 16, 4);
    std::memcpy(&hurst, header + 20, 8);
    if (hurst_out) *hurst_out = hurst;
    PathBatch batch;
    batch.times.resize(j + 1);  // grid not stored; caller re-derives times if needed
    batch.allocate(m, j + 1, static_cast<int>(d), 0);
    is.read(reinterpret_cast<char*>(batch.states.data()),
            static_cast<std::streamsize>(batch.states.size() * sizeof(double)));
    if (!is) throw std::runtime_error("read_batch_binary: truncated payload");
    return batch;
}

}  // namespace sigstop
