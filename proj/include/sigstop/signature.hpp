#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "sigstop/tensor.hpp"

namespace sigstop {

/// Sampled path on a fine grid: strictly increasing times s_0=0 < ... < s_J,
/// one row of `cols` state columns per time point (row-major).
struct PathGrid {
    std::vector<double> times;
    std::vector<double> values;
    int cols = 0;

    PathGrid() = default;
    PathGrid(std::vector<double> t, std::vector<double> v, int c);

    std::size_t points() const { return times.size(); }
    std::span<const double> row(std::size_t j) const {
        return {values.data() + j * static_cast<std::size_t>(cols), static_cast<std::size_t>(cols)};
    }
    double& at(std::size_t j, int c) { return values[j * static_cast<std::size_t>(cols) + c]; }
    double at(std::size_t j, int c) const { return values[j * static_cast<std::size_t>(cols) + c]; }

    void validate() const;  // throws on non-increasing times / shape mismatch
};

/// Prepends the time coordinate as column 1, so letter 1 is time.
PathGrid lift_time_augmented(const PathGrid& path);

/// Columns (t, X..., Z): time-augmented lift with the sampled payoff path
/// appended as the last letter.
PathGrid lift_payoff_augmented(const PathGrid& path, std::span<const double> payoff_values);

/// Truncated signatures of the piecewise-linear path over [0, s_j] for every
/// grid index j, built by Chen's relation. When `normalize_R` is set the
/// stored entries are normalized onto the ball of radius R; the raw tensors
/// still drive the recursion so Chen consistency is preserved.
struct SignatureStream {
    int level = 0;
    int alphabet_size = 0;
    bool normalized = false;
    std::vector<TruncatedTensor> sigs;
};

SignatureStream signature_stream(const PathGrid& path, int level,
                                 std::optional<double> normalize_R = std::nullopt);

/// Stream entries at the given exercise times, which must lie on the grid
/// exactly (no interpolation).
std::vector<TruncatedTensor> sample_at(const SignatureStream& stream,
                                       std::span<const double> grid_times,
                                       std::span<const double> exercise_times);

/// Indices j with grid_times[j] == exercise time; throws on misalignment.
std::vector<std::size_t> align_exercise_indices(std::span<const double> grid_times,
                                                std::span<const double> exercise_times);

/// CSV dump of a stream: one row per grid index, D columns in word order.
void dump_stream_csv(const SignatureStream& stream, std::ostream& os);

/// Incremental Chen stepper over one path; the workhorse behind
/// signature_stream and the chunked feature/martingale builders.
class SignatureWalker {
public:
    SignatureWalker(const PathGrid& path, int level);

    /// Advance one grid segment; returns false once the end is reached.
    bool step();
    std::size_t position() const { return pos_; }
    const TruncatedTensor& raw() const { return sig_; }
    /// Current signature, normalized into the R-ball when R is set.
    const TruncatedTensor& current(std::optional<double> normalize_R);

private:
    const PathGrid* path_;
    TruncatedTensor sig_;
    TruncatedTensor step_exp_;
    TruncatedTensor view_;
    std::vector<double> incr_;
    std::vector<double> scratch_;
    std::size_t pos_ = 0;
    bool view_dirty_ = true;
};

}  // namespace sigstop
