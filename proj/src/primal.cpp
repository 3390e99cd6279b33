#include "sigstop/primal.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "sigstop/parallel.hpp"

namespace sigstop {

namespace {
constexpr long kChunk = 1024;

void write_hex(std::ostream& os, double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%a", v);
    os << buf;
}

double read_hex(std::istream& is) {
    std::string tok;
    if (!(is >> tok)) throw std::runtime_error("policy file: truncated number");
    return std::strtod(tok.c_str(), nullptr);
}

}  // namespace

void FeatureTable::allocate(long paths, int dates, int feats) {
    n_paths = paths;
    n_dates = dates;
    n_features = feats;
    features.assign(static_cast<std::size_t>(paths) * dates * feats, 0.0f);
    z.assign(static_cast<std::size_t>(paths) * dates, 0.0);
}

void fill_feature_table(FeatureTable& table, long table_row0, const PathBatch& batch, long row0,
                        long count, const FeatureMap& map,
                        std::span<const std::size_t> exercise_idx) {
    const int n_dates = static_cast<int>(exercise_idx.size());
    const auto n_feat = static_cast<std::size_t>(table.n_features);
    if (table.n_dates != n_dates || n_feat != map.feature_count())
        throw std::invalid_argument("fill_feature_table: table shape mismatch");
    const int e = map.alphabet();
    const int arity = map.basis.state_arity;
    if (arity > batch.state_dim)
        throw std::invalid_argument("fill_feature_table: state arity exceeds batch state dim");

    parallel_chunks(static_cast<std::size_t>(count), kChunk, [&](std::size_t cb, std::size_t ce) {
        PathGrid lifted;
        lifted.times = batch.times;
        lifted.cols = e;
        lifted.values.resize(batch.times.size() * static_cast<std::size_t>(e));
        std::vector<double> fbuf(n_feat);
        std::vector<double> state(static_cast<std::size_t>(std::max(arity, 1)));
        std::optional<double> R;
        if (map.normalize_R > 0.0) R = map.normalize_R;

        for (std::size_t k = cb; k < ce; ++k) {
            const long bi = row0 + static_cast<long>(k);
            for (std::size_t j = 0; j < batch.times.size(); ++j) {
                lifted.at(j, 0) = batch.times[j];
                lifted.at(j, 1) = map.lift_scale * batch.state(bi, j, 0);
                if (e == 3) lifted.at(j, 2) = map.payoff_lift_scale * batch.z(bi, j);
            }
            SignatureWalker walker(lifted, map.basis.sig_level);
            const long ti = table_row0 + static_cast<long>(k);
            int date = 0;
            for (;;) {
                const std::size_t pos = walker.position();
                if (date < n_dates && exercise_idx[static_cast<std::size_t>(date)] == pos) {
                    for (int c = 0; c < arity; ++c)
                        state[static_cast<std::size_t>(c)] =
                            batch.state(bi, pos, c) *
                            (map.state_scale.empty() ? 1.0 : map.state_scale[static_cast<std::size_t>(c)]);
                    build_features(walker.current(R), {state.data(), static_cast<std::size_t>(arity)},
                                   map.basis, fbuf);
                    float* dst = table.features.data() +
                                 (static_cast<std::size_t>(ti) * n_dates + date) * n_feat;
                    for (std::size_t f = 0; f < n_feat; ++f) dst[f] = static_cast<float>(fbuf[f]);
                    table.z[static_cast<std::size_t>(ti) * n_dates + date] = batch.z(bi, pos);
                    ++date;
                }
                if (!walker.step()) break;
            }
            if (date != n_dates)
                throw std::logic_error("fill_feature_table: exercise dates not exhausted");
        }
    });
}

FeatureTable build_feature_table(const PathBatch& batch, const FeatureMap& map,
                                 std::span<const double> exercise_times) {
    const auto idx = align_exercise_indices(batch.times, exercise_times);
    FeatureTable table;
    table.exercise_times.assign(exercise_times.begin(), exercise_times.end());
    table.allocate(batch.n_paths, static_cast<int>(idx.size()),
                   static_cast<int>(map.feature_count()));
    fill_feature_table(table, 0, batch, 0, batch.n_paths, map, idx);
    return table;
}

namespace {

FeatureTable table_from_streams(const PathBatch& batch, const std::vector<SignatureStream>& streams,
                                std::span<const double> exercise_times, const FeatureMap& map) {
    if (static_cast<long>(streams.size()) != batch.n_paths)
        throw std::invalid_argument("fit_policy: one stream per path required");
    const auto idx = align_exercise_indices(batch.times, exercise_times);
    FeatureTable table;
    table.exercise_times.assign(exercise_times.begin(), exercise_times.end());
    table.allocate(batch.n_paths, static_cast<int>(idx.size()),
                   static_cast<int>(map.feature_count()));
    const int arity = map.basis.state_arity;
    std::vector<double> fbuf(map.feature_count());
    std::vector<double> state(static_cast<std::size_t>(std::max(arity, 1)));
    std::optional<double> R;
    if (map.normalize_R > 0.0) R = map.normalize_R;
    for (long i = 0; i < batch.n_paths; ++i) {
        const auto& stream = streams[static_cast<std::size_t>(i)];
        if (stream.sigs.size() != batch.times.size())
            throw std::invalid_argument("fit_policy: stream length mismatch");
        for (int n = 0; n < table.n_dates; ++n) {
            const std::size_t pos = idx[static_cast<std::size_t>(n)];
            for (int c = 0; c < arity; ++c)
                state[static_cast<std::size_t>(c)] =
                    batch.state(i, pos, c) *
                    (map.state_scale.empty() ? 1.0 : map.state_scale[static_cast<std::size_t>(c)]);
            TruncatedTensor sig = stream.sigs[pos];
            if (R && !stream.normalized) normalize_inplace(sig, *R);
            build_features(sig, {state.data(), static_cast<std::size_t>(arity)}, map.basis, fbuf);
            float* dst = table.features.data() +
                         (static_cast<std::size_t>(i) * table.n_dates + n) * map.feature_count();
            for (std::size_t f = 0; f < fbuf.size(); ++f) dst[f] = static_cast<float>(fbuf[f]);
            table.z[static_cast<std::size_t>(i) * table.n_dates + n] = batch.z(i, pos);
        }
    }
    return table;
}

struct MeanStd {
    double mean = 0.0;
    double std_error = 0.0;
};

MeanStd mean_and_stderr(std::span<const double> xs) {
    MeanStd out;
    if (xs.empty()) return out;
    double s = 0.0;
    for (double x : xs) s += x;
    out.mean = s / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - out.mean) * (x - out.mean);
        out.std_error = std::sqrt(ss / (static_cast<double>(xs.size()) - 1.0) /
                                  static_cast<double>(xs.size()));
    }
    return out;
}

}  // namespace

RegressionPolicy fit_policy(const FeatureTable& table, const FeatureMap& map, bool in_the_money_only,
                            double svd_tol, FitReport* report) {
    const long M = table.n_paths;
    const int n_dates = table.n_dates;
    const int D = table.n_features;
    if (n_dates < 2) throw std::invalid_argument("fit_policy: need at least two exercise dates");
    if (M < 1) throw std::invalid_argument("fit_policy: empty training table");

    RegressionPolicy policy;
    policy.map = map;
    policy.exercise_times = table.exercise_times;
    policy.in_the_money_only = in_the_money_only;
    policy.coeffs = Eigen::MatrixXd::Zero(n_dates - 1, D);

    // stopped[i] = Z at the current stopping date of path i (starts at t_N).
    std::vector<double> stopped(static_cast<std::size_t>(M));
    for (long i = 0; i < M; ++i) stopped[static_cast<std::size_t>(i)] = table.payoff(i, n_dates - 1);

    std::vector<long> rows;
    rows.reserve(static_cast<std::size_t>(M));
    for (int n = n_dates - 2; n >= 0; --n) {
        rows.clear();
        for (long i = 0; i < M; ++i)
            if (!in_the_money_only || table.payoff(i, n) > 0.0) rows.push_back(i);
        if (rows.empty()) {
            if (report) report->skipped_dates.push_back(n);
            continue;  // continuation assumed at this date
        }
        Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), D);
        Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const float* src = table.feature_row(rows[r], n);
            for (int f = 0; f < D; ++f) A(static_cast<Eigen::Index>(r), f) = src[f];
            y(static_cast<Eigen::Index>(r)) = stopped[static_cast<std::size_t>(rows[r])];
        }
        const auto ls = least_squares(A, y, svd_tol);
        policy.coeffs.row(n) = ls.beta.transpose();

        // Z >= psi stops (ties stop); only compared paths may stop.
        const Eigen::VectorXd psi = A * ls.beta;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const long i = rows[r];
            if (table.payoff(i, n) >= psi(static_cast<Eigen::Index>(r)))
                stopped[static_cast<std::size_t>(i)] = table.payoff(i, n);
        }
    }

    if (report) {
        const auto ms = mean_and_stderr(stopped);
        report->train_estimate = std::max(table.payoff(0, 0), ms.mean);
        report->train_stderr = ms.std_error;
    }
    return policy;
}

RegressionPolicy fit_policy(const PathBatch& train, const std::vector<SignatureStream>& streams,
                            std::span<const double> exercise_times, const FeatureMap& map,
                            bool in_the_money_only, double svd_tol, FitReport* report) {
    const FeatureTable table = table_from_streams(train, streams, exercise_times, map);
    return fit_policy(table, map, in_the_money_only, svd_tol, report);
}

void stopped_payoffs(const RegressionPolicy& policy, const FeatureTable& table,
                     std::span<double> out) {
    const long M = table.n_paths;
    const int n_dates = table.n_dates;
    const int D = table.n_features;
    if (policy.coeffs.cols() != D || policy.coeffs.rows() != n_dates - 1)
        throw std::invalid_argument("stopped_payoffs: policy/table basis mismatch");
    if (out.size() != static_cast<std::size_t>(M))
        throw std::invalid_argument("stopped_payoffs: output size mismatch");

    parallel_chunks(static_cast<std::size_t>(M), kChunk, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const long ip = static_cast<long>(i);
            double value = table.payoff(ip, n_dates - 1);
            for (int n = 0; n < n_dates - 1; ++n) {
                const double zn = table.payoff(ip, n);
                if (policy.in_the_money_only && !(zn > 0.0)) continue;
                const float* f = table.feature_row(ip, n);
                double psi = 0.0;
                for (int c = 0; c < D; ++c) psi += policy.coeffs(n, c) * f[c];
                if (zn >= psi) {
                    value = zn;
                    break;
                }
            }
            out[i] = value;
        }
    });
}

LowerBoundResult evaluate_policy(const RegressionPolicy& policy, const FeatureTable& fresh) {
    LowerBoundResult res;
    res.policy = policy;
    res.stopped_payoffs.resize(static_cast<std::size_t>(fresh.n_paths));
    stopped_payoffs(policy, fresh, res.stopped_payoffs);
    const auto ms = mean_and_stderr(res.stopped_payoffs);
    res.estimate = std::max(fresh.payoff(0, 0), ms.mean);
    res.std_error = ms.std_error;
    return res;
}

LowerBoundResult evaluate_policy(const RegressionPolicy& policy, const PathBatch& fresh,
                                 const std::vector<SignatureStream>& streams) {
    const FeatureTable table = table_from_streams(fresh, streams, policy.exercise_times, policy.map);
    return evaluate_policy(policy, table);
}

void save_policy(const RegressionPolicy& p, std::ostream& os) {
    os << "sigstop-policy v1\n";
    os << "sig_level " << p.map.basis.sig_level << '\n';
    os << "payoff_letter " << (p.map.basis.include_payoff_letter ? 1 : 0) << '\n';
    os << "poly_degree " << p.map.basis.poly_degree << '\n';
    os << "state_arity " << p.map.basis.state_arity << '\n';
    os << "itm_only " << (p.in_the_money_only ? 1 : 0) << '\n';
    os << "normalize_R ";
    write_hex(os, p.map.normalize_R);
    os << "\nlift_scale ";
    write_hex(os, p.map.lift_scale);
    os << ' ';
    write_hex(os, p.map.payoff_lift_scale);
    os << "\nstate_scale " << p.map.state_scale.size();
    for (double s : p.map.state_scale) {
        os << ' ';
        write_hex(os, s);
    }
    os << "\ndates " << p.exercise_times.size();
    for (double t : p.exercise_times) {
        os << ' ';
        write_hex(os, t);
    }
    os << "\ncoeffs " << p.coeffs.rows() << ' ' << p.coeffs.cols() << '\n';
    for (Eigen::Index r = 0; r < p.coeffs.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.coeffs.cols(); ++c) {
            if (c) os << ' ';
            write_hex(os, p.coeffs(r, c));
        }
        os << '\n';
    }
}

RegressionPolicy load_policy(std::istream& is) {
    std::string word, version;
    is >> word >> version;
    if (word != "sigstop-policy" || version != "v1")
        throw std::runtime_error("load_policy: unknown file version");
    RegressionPolicy p;
    auto expect = [&](const char* key) {
        is >> word;
        if (word != key) throw std::runtime_error(std::string("load_policy: expected key ") + key);
    };
    int flag = 0;
    expect("sig_level");
    is >> p.map.basis.sig_level;
    expect("payoff_letter");
    is >> flag;
    p.map.basis.include_payoff_letter = flag != 0;
    expect("poly_degree");
    is >> p.map.basis.poly_degree;
    expect("state_arity");
    is >> p.map.basis.state_arity;
    expect("itm_only");
    is >> flag;
    p.in_the_money_only = flag != 0;
    expect("normalize_R");
    p.map.normalize_R = read_hex(is);
    expect("lift_scale");
    p.map.lift_scale = read_hex(is);
    p.map.payoff_lift_scale = read_hex(is);
    expect("state_scale");
    std::size_t n = 0;
    is >> n;
    p.map.state_scale.resize(n);
    for (auto& s : p.map.state_scale) s = read_hex(is);
    expect("dates");
    is >> n;
    p.exercise_times.resize(n);
    for (auto& t : p.exercise_times) t = read_hex(is);
    expect("coeffs");
    Eigen::Index rows = 0, cols = 0;
    is >> rows >> cols;
    p.coeffs.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) p.coeffs(r, c) = read_hex(is);
    if (!is) throw std::runtime_error("load_policy: truncated file");
    return p;
}

}  // namespace sigstop
