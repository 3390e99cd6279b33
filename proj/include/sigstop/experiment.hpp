#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace sigstop {

/// Raised for malformed configuration files (CLI exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flat key = value configuration with section headers; every model
/// parameter of the shipped experiments has a named key.
struct ExperimentConfig {
    // [model]
    std::string model;  // "fbm" | "rbergomi"
    std::vector<double> hursts;   // fbm: one table row per H
    std::vector<double> strikes;  // rbergomi: one table row per strike
    double hurst = 0.07;          // rbergomi H
    double eta = 1.9;
    double rho = -0.9;
    double xi0 = 0.09;
    double rate = 0.05;
    double spot = 100.0;
    double horizon = 1.0;

    // [grids]
    int n_exercise = 100;  // N
    int fine_steps = 100;  // J, multiple of N

    // [primal]
    int primal_sig_level = 4;
    int primal_poly_degree = 0;
    long primal_train = 200000;
    long primal_eval = 200000;
    int itm_mode = -1;  // -1 auto (off for fbm, on for rbergomi), 0 off, 1 on
    double primal_normalize_R = 4.0;  // 0 disables normalization

    // [dual]
    int dual_sig_level = 4;
    bool dual_payoff_letter = false;
    int dual_poly_degree = 0;
    long dual_train = 5000;
    long dual_eval = 100000;
    double lp_tol = 1e-7;
    int lp_max_iter = 200;
    double dual_normalize_R = 4.0;

    // [seeds]
    std::uint64_t seed_train = 1;
    std::uint64_t seed_eval = 2;

    // [output]
    std::string out_csv;
    bool timing = false;  // real wall time in the CSV seconds column

    void validate() const;  // throws ConfigError
};

ExperimentConfig parse_config(std::istream& is);
ExperimentConfig parse_config_file(const std::string& path);

/// One experiment row; emitted to CSV only when both legs completed.
struct PriceInterval {
    double key = 0.0;  // H for fbm, strike for rbergomi
    double lower = 0.0, lower_se = 0.0;
    double upper = 0.0, upper_se = 0.0;
    int K_p = 0, K_d = 0, J = 0, N = 0;
    long M_train_p = 0, M_eval_p = 0, M_train_d = 0, M_eval_d = 0;
    double seconds = 0.0;
    bool ok = false;
    std::string error;
};

/// CSV schema, fixed: header then one line per completed row.
extern const char* kCsvHeader;
void write_csv(const std::vector<PriceInterval>& rows, bool timing, std::ostream& os);

/// fit -> resimulate -> evaluate for both legs, one row per H (resp. strike).
/// A failing leg aborts its row with a logged reason; other rows continue.
std::vector<PriceInterval> run_fbm_table(const ExperimentConfig& cfg, std::ostream& log);
std::vector<PriceInterval> run_rbergomi_table(const ExperimentConfig& cfg, std::ostream& log);

/// Tiny-size invariant suite (< 60 s): algebra identities, model moments,
/// LP-vs-oracle, martingale means, determinism. Prints one line per property.
bool run_selftest(std::ostream& os);

}  // namespace sigstop
