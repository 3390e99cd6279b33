#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "sigstop/lp.hpp"
#include "sigstop/models.hpp"
#include "sigstop/primal.hpp"
#include "sigstop/signature.hpp"

namespace sigstop {

/// Discrete martingales M^(i),r,b at the exercise dates: column (r,b) is the
/// left-point Euler integral of integrand r (a signature coordinate or a
/// Laguerre product of the states) against Brownian component b. Column n=0
/// is identically zero.
struct MartingaleBasis {
    long n_paths = 0;
    int n_dates = 0;      // N+1
    int n_integrands = 0; // per Brownian component
    int noise_dim = 0;    // m
    std::vector<double> exercise_times;
    std::vector<double> values;  // M x (N+1) x (m * n_integrands)
    std::vector<double> z;       // M x (N+1)

    int n_cols() const { return n_integrands * noise_dim; }
    void allocate(long paths, int dates, int integrands, int m);
};

/// Builds basis rows for batch paths [row0, row0+count) into the table rows
/// [table_row0, ...). The batch must carry noise increments.
void fill_martingale_basis(MartingaleBasis& basis, long table_row0, const PathBatch& batch,
                           long row0, long count, const FeatureMap& map,
                           std::span<const std::size_t> exercise_idx);

MartingaleBasis build_martingale_basis(const PathBatch& batch, const FeatureMap& map,
                                       std::span<const double> exercise_times);

/// Spec-shaped overload taking precomputed signature streams (test scale).
MartingaleBasis build_martingale_basis(const PathBatch& batch,
                                       const std::vector<SignatureStream>& streams,
                                       const FeatureMap& map,
                                       std::span<const double> exercise_times);

LpInstance assemble_lp(const MartingaleBasis& basis);

struct UpperBoundResult {
    double estimate = 0.0;
    double std_error = 0.0;
    std::vector<double> pathwise_max;  // per path max_n (Z - M^lambda)
};

/// Per-path max_n (Z_{t_n} - M^lambda_{t_n}) on fresh paths (chunk building
/// block); the batch must carry noise increments.
void pathwise_dual_gaps(const DualCoefficients& coeffs, const PathBatch& batch, long row0,
                        long count, const FeatureMap& map,
                        std::span<const std::size_t> exercise_idx, std::span<double> out);

UpperBoundResult evaluate_upper(const DualCoefficients& coeffs, const PathBatch& fresh,
                                const FeatureMap& map, std::span<const double> exercise_times);

/// Versioned text serialization, bit-exact round trip (hex floats).
void save_dual(const DualCoefficients& coeffs, const FeatureMap& map, int noise_dim,
               std::ostream& os);
void load_dual(std::istream& is, DualCoefficients& coeffs, FeatureMap& map, int& noise_dim);

}  // namespace sigstop
