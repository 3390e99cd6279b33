#include "sigstop/signature.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace sigstop {

PathGrid::PathGrid(std::vector<double> t, std::vector<double> v, int c)
    : times(std::move(t)), values(std::move(v)), cols(c) {
    validate();
}

void PathGrid::validate() const {
    if (times.empty()) throw std::invalid_argument("PathGrid: empty time grid");
    if (cols < 1) throw std::invalid_argument("PathGrid: need at least one column");
    if (values.size() != times.size() * static_cast<std::size_t>(cols))
        throw std::invalid_argument("PathGrid: row count does not match time grid");
    for (std::size_t j = 1; j < times.size(); ++j)
        if (!(times[j] > times[j - 1]))
            throw std::invalid_argument("PathGrid: times must be strictly increasing");
}

PathGrid lift_time_augmented(const PathGrid& path) {
    path.validate();
    PathGrid out;
    out.times = path.times;
    out.cols = path.cols + 1;
    out.values.resize(path.points() * static_cast<std::size_t>(out.cols));
    for (std::size_t j = 0; j < path.points(); ++j) {
        out.at(j, 0) = path.times[j];
        for (int c = 0; c < path.cols; ++c) out.at(j, c + 1) = path.at(j, c);
    }
    return out;
}

PathGrid lift_payoff_augmented(const PathGrid& path, std::span<const double> payoff_values) {
    if (payoff_values.size() != path.points())
        throw std::invalid_argument("lift_payoff_augmented: payoff length != grid points");
    PathGrid lifted = lift_time_augmented(path);
    PathGrid out;
    out.times = path.times;
    out.cols = lifted.cols + 1;
    out.values.resize(path.points() * static_cast<std::size_t>(out.cols));
    for (std::size_t j = 0; j < path.points(); ++j) {
        for (int c = 0; c < lifted.cols; ++c) out.at(j, c) = lifted.at(j, c);
        out.at(j, lifted.cols) = payoff_values[j];
    }
    return out;
}

SignatureWalker::SignatureWalker(const PathGrid& path, int level)
    : path_(&path),
      sig_(TruncatedTensor::unit(path.cols, level)),
      step_exp_(path.cols, level),
      view_(sig_),
      incr_(static_cast<std::size_t>(path.cols)) {
    if (level < 1) throw std::invalid_argument("SignatureWalker: level must be >= 1");
    path.validate();
}

bool SignatureWalker::step() {
    if (pos_ + 1 >= path_->points()) return false;
    const auto prev = path_->row(pos_);
    const auto next = path_->row(pos_ + 1);
    for (std::size_t c = 0; c < incr_.size(); ++c) incr_[c] = next[c] - prev[c];
    tensor_exp_into(step_exp_, incr_);
    concat_product_inplace(sig_, step_exp_, scratch_);
    ++pos_;
    view_dirty_ = true;
    return true;
}

const TruncatedTensor& SignatureWalker::current(std::optional<double> normalize_R) {
    if (!normalize_R) return sig_;
    if (view_dirty_) {
        view_ = sig_;
        normalize_inplace(view_, *normalize_R);
        view_dirty_ = false;
    }
    return view_;
}

SignatureStream signature_stream(const PathGrid& path, int level, std::optional<double> normalize_R) {
    SignatureStream out;
    out.level = level;
    out.alphabet_size = path.cols;
    out.normalized = normalize_R.has_value();
    out.sigs.reserve(path.points());

    SignatureWalker walker(path, level);
    out.sigs.push_back(walker.current(normalize_R));
    while (walker.step()) out.sigs.push_back(walker.current(normalize_R));
    return out;
}

std::vector<std::size_t> align_exercise_indices(std::span<const double> grid_times,
                                                std::span<const double> exercise_times) {
    std::vector<std::size_t> idx;
    idx.reserve(exercise_times.size());
    std::size_t j = 0;
    for (double t : exercise_times) {
        while (j < grid_times.size() && grid_times[j] < t) ++j;
        if (j >= grid_times.size() || grid_times[j] != t)
            throw std::invalid_argument("exercise time not on the fine grid (no interpolation)");
        idx.push_back(j);
    }
    return idx;
}

std::vector<TruncatedTensor> sample_at(const SignatureStream& stream,
                                       std::span<const double> grid_times,
                                       std::span<const double> exercise_times) {
    if (stream.sigs.size() != grid_times.size())
        throw std::invalid_argument("sample_at: stream length != grid length");
    const auto idx = align_exercise_indices(grid_times, exercise_times);
    std::vector<TruncatedTensor> out;
    out.reserve(idx.size());
    for (auto j : idx) out.push_back(stream.sigs[j]);
    return out;
}

void dump_stream_csv(const SignatureStream& stream, std::ostream& os) {
    char buf[64];
    for (const auto& sig : stream.sigs) {
        const auto c = sig.coeffs();
        for (std::size_t i = 0; i < c.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", c[i]);
            os << buf << (i + 1 < c.size() ? ',' : '\n');
        }
    }
}

}  // namespace sigstop
