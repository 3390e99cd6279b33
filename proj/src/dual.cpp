#include "sigstop/dual.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "sigstop/parallel.hpp"

namespace sigstop {

namespace {
constexpr long kChunk = 512;

void write_hex(std::ostream& os, double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%a", v);
    os << buf;
}

double read_hex(std::istream& is) {
    std::string tok;
    if (!(is >> tok)) throw std::runtime_error("dual file: truncated number");
    return std::strtod(tok.c_str(), nullptr);
}

// Shared walker loop: at every fine-grid step the integrand vector is
// evaluated at the left endpoint and integrated against each Brownian
// increment; `snapshot` is called at every exercise date.
template <typename Snapshot, typename Accumulate>
void walk_path(const PathBatch& batch, long path, const FeatureMap& map,
               std::span<const std::size_t> exercise_idx, PathGrid& lifted,
               std::vector<double>& integrand, std::vector<double>& state, Snapshot&& snapshot,
               Accumulate&& accumulate) {
    const int e = map.alphabet();
    const int arity = map.basis.state_arity;
    for (std::size_t j = 0; j < batch.times.size(); ++j) {
        lifted.at(j, 0) = batch.times[j];
        lifted.at(j, 1) = map.lift_scale * batch.state(path, j, 0);
        if (e == 3) lifted.at(j, 2) = map.payoff_lift_scale * batch.z(path, j);
    }
    std::optional<double> R;
    if (map.normalize_R > 0.0) R = map.normalize_R;

    SignatureWalker walker(lifted, map.basis.sig_level);
    int date = 0;
    for (;;) {
        const std::size_t pos = walker.position();
        if (date < static_cast<int>(exercise_idx.size()) &&
            exercise_idx[static_cast<std::size_t>(date)] == pos) {
            snapshot(date, pos);
            ++date;
        }
        if (pos + 1 >= batch.times.size()) break;
        for (int c = 0; c < arity; ++c)
            state[static_cast<std::size_t>(c)] =
                batch.state(path, pos, c) *
                (map.state_scale.empty() ? 1.0 : map.state_scale[static_cast<std::size_t>(c)]);
        build_features(walker.current(R), {state.data(), static_cast<std::size_t>(arity)}, map.basis,
                       integrand);
        accumulate(pos, integrand);
        walker.step();
    }
    if (date != static_cast<int>(exercise_idx.size()))
        throw std::logic_error("walk_path: exercise dates not exhausted");
}

}  // namespace

void MartingaleBasis::allocate(long paths, int dates, int integrands, int m) {
    n_paths = paths;
    n_dates = dates;
    n_integrands = integrands;
    noise_dim = m;
    values.assign(static_cast<std::size_t>(paths) * dates * integrands * m, 0.0);
    z.assign(static_cast<std::size_t>(paths) * dates, 0.0);
}

void fill_martingale_basis(MartingaleBasis& basis, long table_row0, const PathBatch& batch,
                           long row0, long count, const FeatureMap& map,
                           std::span<const std::size_t> exercise_idx) {
    if (batch.noise_dim < 1)
        throw std::invalid_argument("fill_martingale_basis: batch carries no Brownian increments");
    const int m = batch.noise_dim;
    const int D = static_cast<int>(map.feature_count());
    const int n_dates = static_cast<int>(exercise_idx.size());
    if (basis.n_integrands != D || basis.noise_dim != m || basis.n_dates != n_dates)
        throw std::invalid_argument("fill_martingale_basis: basis shape mismatch");

    parallel_chunks(static_cast<std::size_t>(count), kChunk, [&](std::size_t cb, std::size_t ce) {
        PathGrid lifted;
        lifted.times = batch.times;
        lifted.cols = map.alphabet();
        lifted.values.resize(batch.times.size() * static_cast<std::size_t>(lifted.cols));
        std::vector<double> integrand(static_cast<std::size_t>(D));
        std::vector<double> state(static_cast<std::size_t>(std::max(map.basis.state_arity, 1)));
        std::vector<double> acc(static_cast<std::size_t>(m) * D);

        for (std::size_t k = cb; k < ce; ++k) {
            const long bi = row0 + static_cast<long>(k);
            const long ti = table_row0 + static_cast<long>(k);
            std::fill(acc.begin(), acc.end(), 0.0);
            walk_path(
                batch, bi, map, exercise_idx, lifted, integrand, state,
                [&](int date, std::size_t pos) {
                    double* dst = basis.values.data() +
                                  (static_cast<std::size_t>(ti) * n_dates + date) * acc.size();
                    std::copy(acc.begin(), acc.end(), dst);
                    basis.z[static_cast<std::size_t>(ti) * n_dates + date] = batch.z(bi, pos);
                },
                [&](std::size_t pos, const std::vector<double>& f) {
                    for (int b = 0; b < m; ++b) {
                        const double dw = batch.increment(bi, pos, b);
                        double* a = acc.data() + static_cast<std::size_t>(b) * D;
                        for (int r = 0; r < D; ++r) a[r] += f[static_cast<std::size_t>(r)] * dw;
                    }
                });
        }
    });
}

MartingaleBasis build_martingale_basis(const PathBatch& batch, const FeatureMap& map,
                                       std::span<const double> exercise_times) {
    const auto idx = align_exercise_indices(batch.times, exercise_times);
    MartingaleBasis basis;
    basis.exercise_times.assign(exercise_times.begin(), exercise_times.end());
    basis.allocate(batch.n_paths, static_cast<int>(idx.size()),
                   static_cast<int>(map.feature_count()), batch.noise_dim);
    fill_martingale_basis(basis, 0, batch, 0, batch.n_paths, map, idx);
    return basis;
}

MartingaleBasis build_martingale_basis(const PathBatch& batch,
                                       const std::vector<SignatureStream>& streams,
                                       const FeatureMap& map,
                                       std::span<const double> exercise_times) {
    if (static_cast<long>(streams.size()) != batch.n_paths)
        throw std::invalid_argument("build_martingale_basis: one stream per path required");
    if (batch.noise_dim < 1)
        throw std::invalid_argument("build_martingale_basis: batch carries no Brownian increments");
    const auto idx = align_exercise_indices(batch.times, exercise_times);
    const int m = batch.noise_dim;
    const int D = static_cast<int>(map.feature_count());
    const int n_dates = static_cast<int>(idx.size());

    MartingaleBasis basis;
    basis.exercise_times.assign(exercise_times.begin(), exercise_times.end());
    basis.allocate(batch.n_paths, n_dates, D, m);

    std::optional<double> R;
    if (map.normalize_R > 0.0) R = map.normalize_R;
    std::vector<double> integrand(static_cast<std::size_t>(D));
    std::vector<double> state(static_cast<std::size_t>(std::max(map.basis.state_arity, 1)));
    std::vector<double> acc(static_cast<std::size_t>(m) * D);

    for (long i = 0; i < batch.n_paths; ++i) {
        const auto& stream = streams[static_cast<std::size_t>(i)];
        if (stream.sigs.size() != batch.times.size())
            throw std::invalid_argument("build_martingale_basis: stream length mismatch");
        std::fill(acc.begin(), acc.end(), 0.0);
        int date = 0;
        for (std::size_t pos = 0; pos < batch.times.size(); ++pos) {
            if (date < n_dates && idx[static_cast<std::size_t>(date)] == pos) {
                double* dst =
                    basis.values.data() + (static_cast<std::size_t>(i) * n_dates + date) * acc.size();
                std::copy(acc.begin(), acc.end(), dst);
                basis.z[static_cast<std::size_t>(i) * n_dates + date] = batch.z(i, pos);
                ++date;
            }
            if (pos + 1 >= batch.times.size()) break;
            for (int c = 0; c < map.basis.state_arity; ++c)
                state[static_cast<std::size_t>(c)] =
                    batch.state(i, pos, c) *
                    (map.state_scale.empty() ? 1.0 : map.state_scale[static_cast<std::size_t>(c)]);
            TruncatedTensor sig = stream.sigs[pos];
            if (R && !stream.normalized) normalize_inplace(sig, *R);
            build_features(sig, {state.data(), static_cast<std::size_t>(map.basis.state_arity)},
                           map.basis, integrand);
            for (int b = 0; b < m; ++b) {
                const double dw = batch.increment(i, pos, b);
                double* a = acc.data() + static_cast<std::size_t>(b) * D;
                for (int r = 0; r < D; ++r) a[r] += integrand[static_cast<std::size_t>(r)] * dw;
            }
        }
    }
    return basis;
}

LpInstance assemble_lp(const MartingaleBasis& basis) {
    return assemble_lp(basis.z, basis.values, basis.n_paths, basis.n_dates, basis.n_cols());
}

void pathwise_dual_gaps(const DualCoefficients& coeffs, const PathBatch& batch, long row0,
                        long count, const FeatureMap& map,
                        std::span<const std::size_t> exercise_idx, std::span<double> out) {
    if (batch.noise_dim < 1)
        throw std::invalid_argument("pathwise_dual_gaps: batch carries no Brownian increments");
    const int m = batch.noise_dim;
    const int D = static_cast<int>(map.feature_count());
    if (coeffs.lambda.size() != static_cast<Eigen::Index>(m) * D)
        throw std::invalid_argument("pathwise_dual_gaps: lambda size does not match basis");
    if (out.size() != static_cast<std::size_t>(count))
        throw std::invalid_argument("pathwise_dual_gaps: output size mismatch");

    parallel_chunks(static_cast<std::size_t>(count), kChunk, [&](std::size_t cb, std::size_t ce) {
        PathGrid lifted;
        lifted.times = batch.times;
        lifted.cols = map.alphabet();
        lifted.values.resize(batch.times.size() * static_cast<std::size_t>(lifted.cols));
        std::vector<double> integrand(static_cast<std::size_t>(D));
        std::vector<double> state(static_cast<std::size_t>(std::max(map.basis.state_arity, 1)));

        for (std::size_t k = cb; k < ce; ++k) {
            const long bi = row0 + static_cast<long>(k);
            double mart = 0.0;
            double best = -std::numeric_limits<double>::infinity();
            walk_path(
                batch, bi, map, exercise_idx, lifted, integrand, state,
                [&](int, std::size_t pos) { best = std::max(best, batch.z(bi, pos) - mart); },
                [&](std::size_t pos, const std::vector<double>& f) {
                    for (int b = 0; b < m; ++b) {
                        const double dw = batch.increment(bi, pos, b);
                        const double* lam = coeffs.lambda.data() + static_cast<std::size_t>(b) * D;
                        double dot = 0.0;
                        for (int r = 0; r < D; ++r) dot += f[static_cast<std::size_t>(r)] * lam[r];
                        mart += dot * dw;
                    }
                });
            out[k] = best;
        }
    });
}

UpperBoundResult evaluate_upper(const DualCoefficients& coeffs, const PathBatch& fresh,
                                const FeatureMap& map, std::span<const double> exercise_times) {
    const auto idx = align_exercise_indices(fresh.times, exercise_times);
    UpperBoundResult res;
    res.pathwise_max.resize(static_cast<std::size_t>(fresh.n_paths));
    pathwise_dual_gaps(coeffs, fresh, 0, fresh.n_paths, map, idx, res.pathwise_max);
    double sum = 0.0;
    for (double v : res.pathwise_max) sum += v;
    res.estimate = sum / static_cast<double>(fresh.n_paths);
    if (fresh.n_paths > 1) {
        double ss = 0.0;
        for (double v : res.pathwise_max) ss += (v - res.estimate) * (v - res.estimate);
        res.std_error = std::sqrt(ss / (static_cast<double>(fresh.n_paths) - 1.0) /
                                  static_cast<double>(fresh.n_paths));
    }
    return res;
}

void save_dual(const DualCoefficients& coeffs, const FeatureMap& map, int noise_dim,
               std::ostream& os) {
    os << "sigstop-dual v1\n";
    os << "sig_level " << map.basis.sig_level << '\n';
    os << "payoff_letter " << (map.basis.include_payoff_letter ? 1 : 0) << '\n';
    os << "poly_degree " << map.basis.poly_degree << '\n';
    os << "state_arity " << map.basis.state_arity << '\n';
    os << "noise_dim " << noise_dim << '\n';
    os << "normalize_R ";
    write_hex(os, map.normalize_R);
    os << "\nlift_scale ";
    write_hex(os, map.lift_scale);
    os << ' ';
    write_hex(os, map.payoff_lift_scale);
    os << "\nstate_scale " << map.state_scale.size();
    for (double s : map.state_scale) {
        os << ' ';
        write_hex(os, s);
    }
    os << "\nobjective ";
    write_hex(os, coeffs.objective_train);
    os << "\nlambda " << coeffs.lambda.size() << '\n';
    for (Eigen::Index r = 0; r < coeffs.lambda.size(); ++r) {
        write_hex(os, coeffs.lambda(r));
        os << '\n';
    }
}

void load_dual(std::istream& is, DualCoefficients& coeffs, FeatureMap& map, int& noise_dim) {
    std::string word, version;
    is >> word >> version;
    if (word != "sigstop-dual" || version != "v1")
        throw std::runtime_error("load_dual: unknown file version");
    auto expect = [&](const char* key) {
        is >> word;
        if (word != key) throw std::runtime_error(std::string("load_dual: expected key ") + key);
    };
    int flag = 0;
    expect("sig_level");
    is >> map.basis.sig_level;
    expect("payoff_letter");
    is >> flag;
    map.basis.include_payoff_letter = flag != 0;
    expect("poly_degree");
    is >> map.basis.poly_degree;
    expect("state_arity");
    is >> map.basis.state_arity;
    expect("noise_dim");
    is >> noise_dim;
    expect("normalize_R");
    map.normalize_R = read_hex(is);
    expect("lift_scale");
    map.lift_scale = read_hex(is);
    map.payoff_lift_scale = read_hex(is);
    expect("state_scale");
    std::size_t n = 0;
    is >> n;
    map.state_scale.resize(n);
    for (auto& s : map.state_scale) s = read_hex(is);
    expect("objective");
    coeffs.objective_train = read_hex(is);
    expect("lambda");
    Eigen::Index len = 0;
    is >> len;
    coeffs.lambda.resize(len);
    for (Eigen::Index r = 0; r < len; ++r) coeffs.lambda(r) = read_hex(is);
    if (!is) throw std::runtime_error("load_dual: truncated file");
}

}  // namespace sigstop
