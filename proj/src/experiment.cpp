#include "sigstop/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "sigstop/dual.hpp"
#include "sigstop/models.hpp"
#include "sigstop/parallel.hpp"
#include "sigstop/primal.hpp"
#include "sigstop/rng.hpp"

namespace sigstop {

const char* kCsvHeader =
    "key,lower,lower_se,upper,upper_se,K_p,K_d,J,N,M_train_p,M_eval_p,M_train_d,M_eval_d,seconds";

namespace {

constexpr long kDriverChunk = 4096;

// Seed roles for the four legs of a row. Train and eval roles derive from
// the two distinct user seeds, so the evaluation batches stay independent
// of the batches anything was fitted on.
enum SeedRole : std::uint64_t { kPrimalLeg = 1, kDualLeg = 2 };

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

struct RawConfig {
    std::map<std::string, std::map<std::string, std::string>> sections;

    const std::string* find(const std::string& sec, const std::string& key) const {
        auto sit = sections.find(sec);
        if (sit == sections.end()) return nullptr;
        auto kit = sit->second.find(key);
        return kit == sit->second.end() ? nullptr : &kit->second;
    }
    std::string require(const std::string& sec, const std::string& key) const {
        const auto* v = find(sec, key);
        if (!v) throw ConfigError("missing config key [" + sec + "] " + key);
        return *v;
    }
    double get_double(const std::string& sec, const std::string& key, double dflt) const {
        const auto* v = find(sec, key);
        if (!v) return dflt;
        try {
            return std::stod(*v);
        } catch (...) {
            throw ConfigError("bad number for [" + sec + "] " + key + ": " + *v);
        }
    }
    long get_long(const std::string& sec, const std::string& key, long dflt) const {
        const auto* v = find(sec, key);
        if (!v) return dflt;
        try {
            return std::stol(*v);
        } catch (...) {
            throw ConfigError("bad integer for [" + sec + "] " + key + ": " + *v);
        }
    }
    std::vector<double> get_list(const std::string& sec, const std::string& key) const {
        std::vector<double> out;
        const auto* v = find(sec, key);
        if (!v) return out;
        std::istringstream ss(*v);
        std::string tok;
        while (ss >> tok) {
            try {
                out.push_back(std::stod(tok));
            } catch (...) {
                throw ConfigError("bad list entry for [" + sec + "] " + key + ": " + tok);
            }
        }
        return out;
    }
};

RawConfig parse_raw(std::istream& is) {
    RawConfig raw;
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("unterminated section header at line " +
                                                      std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key = value at line " + std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("empty key at line " + std::to_string(lineno));
        raw.sections[section][key] = val;
    }
    return raw;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (model != "fbm" && model != "rbergomi")
        throw ConfigError("model type must be fbm or rbergomi, got '" + model + "'");
    if (model == "fbm" && hursts.empty()) throw ConfigError("fbm model needs a non-empty H list");
    if (model == "rbergomi" && strikes.empty())
        throw ConfigError("rbergomi model needs a non-empty strikes list");
    for (double h : hursts)
        if (!(h > 0.0 && h < 1.0)) throw ConfigError("H values must lie in (0,1)");
    if (n_exercise < 1 || fine_steps < 1) throw ConfigError("N and J must be positive");
    if (fine_steps % n_exercise != 0) throw ConfigError("J must be divisible by N");
    if (primal_train < 100 || primal_eval < 100 || dual_train < 100 || dual_eval < 100)
        throw ConfigError("all sample counts must be at least 100");
    if (seed_train == seed_eval) throw ConfigError("train and eval seeds must be distinct");
    if (primal_sig_level < 1 || dual_sig_level < 1) throw ConfigError("signature levels must be >= 1");
    if (!(lp_tol > 0.0)) throw ConfigError("lp_tol must be positive");
    if (primal_normalize_R != 0.0 && !(primal_normalize_R > 1.0))
        throw ConfigError("primal normalize_R must be 0 (off) or > 1");
    if (dual_normalize_R != 0.0 && !(dual_normalize_R > 1.0))
        throw ConfigError("dual normalize_R must be 0 (off) or > 1");
}

ExperimentConfig parse_config(std::istream& is) {
    const RawConfig raw = parse_raw(is);
    ExperimentConfig cfg;
    cfg.model = raw.require("model", "type");
    cfg.hursts = raw.get_list("model", "H");
    cfg.strikes = raw.get_list("model", "strikes");
    if (cfg.model == "rbergomi") {
        if (cfg.hursts.size() > 1) throw ConfigError("rbergomi expects a single H");
        cfg.hurst = cfg.hursts.empty() ? cfg.hurst : cfg.hursts.front();
        cfg.hursts.clear();
    }
    cfg.eta = raw.get_double("model", "eta", cfg.eta);
    cfg.rho = raw.get_double("model", "rho", cfg.rho);
    cfg.xi0 = raw.get_double("model", "xi0", cfg.xi0);
    cfg.rate = raw.get_double("model", "r", cfg.rate);
    cfg.spot = raw.get_double("model", "x0", cfg.spot);
    cfg.horizon = raw.get_double("model", "T", cfg.horizon);

    cfg.n_exercise = static_cast<int>(raw.get_long("grids", "N", cfg.n_exercise));
    cfg.fine_steps = static_cast<int>(raw.get_long("grids", "J", cfg.fine_steps));

    cfg.primal_sig_level = static_cast<int>(raw.get_long("primal", "K_p", cfg.primal_sig_level));
    cfg.primal_poly_degree =
        static_cast<int>(raw.get_long("primal", "poly_degree", cfg.primal_poly_degree));
    cfg.primal_train = raw.get_long("primal", "M_train", cfg.primal_train);
    cfg.primal_eval = raw.get_long("primal", "M_eval", cfg.primal_eval);
    if (const auto* v = raw.find("primal", "itm_only")) {
        if (*v == "auto")
            cfg.itm_mode = -1;
        else if (*v == "on" || *v == "1")
            cfg.itm_mode = 1;
        else if (*v == "off" || *v == "0")
            cfg.itm_mode = 0;
        else
            throw ConfigError("itm_only must be auto, on or off");
    }
    cfg.primal_normalize_R = raw.get_double("primal", "normalize_R", cfg.primal_normalize_R);

    cfg.dual_sig_level = static_cast<int>(raw.get_long("dual", "K_d", cfg.dual_sig_level));
    cfg.dual_payoff_letter = raw.get_long("dual", "use_payoff_letter",
                                          cfg.dual_payoff_letter ? 1 : 0) != 0;
    cfg.dual_poly_degree = static_cast<int>(raw.get_long("dual", "poly_degree", cfg.dual_poly_degree));
    cfg.dual_train = raw.get_long("dual", "M_train", cfg.dual_train);
    cfg.dual_eval = raw.get_long("dual", "M_eval", cfg.dual_eval);
    cfg.lp_tol = raw.get_double("dual", "lp_tol", cfg.lp_tol);
    cfg.lp_max_iter = static_cast<int>(raw.get_long("dual", "lp_max_iter", cfg.lp_max_iter));
    cfg.dual_normalize_R = raw.get_double("dual", "normalize_R", cfg.dual_normalize_R);

    cfg.seed_train = static_cast<std::uint64_t>(raw.get_long("seeds", "train", 1));
    cfg.seed_eval = static_cast<std::uint64_t>(raw.get_long("seeds", "eval", 2));

    if (const auto* v = raw.find("output", "csv")) cfg.out_csv = *v;
    cfg.timing = raw.get_long("output", "timing", 0) != 0;

    cfg.validate();
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    return parse_config(is);
}

void write_csv(const std::vector<PriceInterval>& rows, bool timing, std::ostream& os) {
    os << kCsvHeader << '\n';
    char buf[512];
    for (const auto& r : rows) {
        if (!r.ok) continue;
        std::snprintf(buf, sizeof(buf), "%g,%.6f,%.6f,%.6f,%.6f,%d,%d,%d,%d,%ld,%ld,%ld,%ld,%.3f\n",
                      r.key, r.lower, r.lower_se, r.upper, r.upper_se, r.K_p, r.K_d, r.J, r.N,
                      r.M_train_p, r.M_eval_p, r.M_train_d, r.M_eval_d, timing ? r.seconds : 0.0);
        os << buf;
    }
}

namespace {

struct MeanStd {
    double mean = 0.0, se = 0.0;
};

MeanStd mean_se(const std::vector<double>& xs) {
    MeanStd out;
    if (xs.empty()) return out;
    double s = 0.0;
    for (double x : xs) s += x;
    out.mean = s / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - out.mean) * (x - out.mean);
        out.se = std::sqrt(ss / (static_cast<double>(xs.size()) - 1.0) / static_cast<double>(xs.size()));
    }
    return out;
}

std::vector<double> exercise_times_from_grid(const std::vector<double>& grid, int n_exercise) {
    const int stride = (static_cast<int>(grid.size()) - 1) / n_exercise;
    std::vector<double> times(static_cast<std::size_t>(n_exercise) + 1);
    for (int n = 0; n <= n_exercise; ++n)
        times[static_cast<std::size_t>(n)] = grid[static_cast<std::size_t>(n) * stride];
    return times;
}

// Simulates paths chunk by chunk, applies `prepare` (payoff etc.), and hands
// each chunk batch to `consume(batch, global_path0, count)`.
template <typename Sampler, typename Prepare, typename Consume>
void for_each_chunk(const Sampler& sampler, long total, bool want_noise, Prepare&& prepare,
                    Consume&& consume) {
    for (long path0 = 0; path0 < total; path0 += kDriverChunk) {
        const long count = std::min<long>(kDriverChunk, total - path0);
        PathBatch batch = sampler.make_batch(count, want_noise);
        sampler.simulate_into(batch, 0, path0, count, want_noise);
        prepare(batch);
        consume(batch, path0, count);
    }
}

struct RowRecipe {
    FeatureMap primal_map;
    FeatureMap dual_map;
    bool itm_only = false;
    std::vector<double> exercise_times;
    std::vector<std::size_t> exercise_idx;
};

// The shared fit -> resimulate -> evaluate pipeline for one table row.
template <typename Sampler, typename Prepare>
PriceInterval run_row(const ExperimentConfig& cfg, double key, const Sampler& train_p,
                      const Sampler& eval_p, const Sampler& train_d, const Sampler& eval_d,
                      const RowRecipe& recipe, Prepare&& prepare, std::ostream& log) {
    PriceInterval row;
    row.key = key;
    row.K_p = cfg.primal_sig_level;
    row.K_d = cfg.dual_sig_level;
    row.J = cfg.fine_steps;
    row.N = cfg.n_exercise;
    row.M_train_p = cfg.primal_train;
    row.M_eval_p = cfg.primal_eval;
    row.M_train_d = cfg.dual_train;
    row.M_eval_d = cfg.dual_eval;

    const auto t0 = std::chrono::steady_clock::now();
    const int n_dates = cfg.n_exercise + 1;

    // Primal fit.
    FeatureTable table;
    table.exercise_times = recipe.exercise_times;
    table.allocate(cfg.primal_train, n_dates,
                   static_cast<int>(recipe.primal_map.feature_count()));
    for_each_chunk(train_p, cfg.primal_train, false, prepare,
                   [&](const PathBatch& batch, long path0, long count) {
                       fill_feature_table(table, path0, batch, 0, count, recipe.primal_map,
                                          recipe.exercise_idx);
                   });
    FitReport report;
    RegressionPolicy policy = fit_policy(table, recipe.primal_map, recipe.itm_only, 1e-10, &report);
    for (int n : report.skipped_dates)
        log << "  [primal] no in-the-money paths at date " << n << ", regression skipped\n";
    log << "  [primal] in-sample value " << report.train_estimate << "\n";
    const double z0 = table.payoff(0, 0);
    table = FeatureTable();  // release ~GB-scale storage before evaluation

    // Primal evaluation on fresh paths.
    std::vector<double> stopped(static_cast<std::size_t>(cfg.primal_eval));
    for_each_chunk(eval_p, cfg.primal_eval, false, prepare,
                   [&](const PathBatch& batch, long path0, long count) {
                       FeatureTable chunk;
                       chunk.exercise_times = recipe.exercise_times;
                       chunk.allocate(count, n_dates,
                                      static_cast<int>(recipe.primal_map.feature_count()));
                       fill_feature_table(chunk, 0, batch, 0, count, recipe.primal_map,
                                          recipe.exercise_idx);
                       stopped_payoffs(policy, chunk,
                                       {stopped.data() + path0, static_cast<std::size_t>(count)});
                   });
    const auto low = mean_se(stopped);
    row.lower = std::max(z0, low.mean);
    row.lower_se = low.se;
    log << "  [primal] lower bound " << row.lower << " (se " << row.lower_se << ")\n";

    // Dual fit: martingale basis on its own training batch, then the LP.
    PathBatch dual_batch = train_d.make_batch(cfg.dual_train, true);
    train_d.simulate_into(dual_batch, 0, 0, cfg.dual_train, true);
    prepare(dual_batch);
    MartingaleBasis basis;
    basis.exercise_times = recipe.exercise_times;
    basis.allocate(cfg.dual_train, n_dates, static_cast<int>(recipe.dual_map.feature_count()),
                   dual_batch.noise_dim);
    fill_martingale_basis(basis, 0, dual_batch, 0, cfg.dual_train, recipe.dual_map,
                          recipe.exercise_idx);
    dual_batch = PathBatch();
    const LpInstance lp = assemble_lp(basis);
    DualCoefficients coeffs = solve_lp(lp, cfg.lp_tol, cfg.lp_max_iter);
    log << "  [dual] LP objective " << coeffs.objective_train << " after " << coeffs.iterations
        << " iterations (gap " << coeffs.gap << (coeffs.converged ? ")" : ", NOT CONVERGED)") << "\n";
    basis = MartingaleBasis();

    // Dual evaluation on fresh paths.
    std::vector<double> gaps(static_cast<std::size_t>(cfg.dual_eval));
    for_each_chunk(eval_d, cfg.dual_eval, true, prepare,
                   [&](const PathBatch& batch, long path0, long count) {
                       pathwise_dual_gaps(coeffs, batch, 0, count, recipe.dual_map,
                                          recipe.exercise_idx,
                                          {gaps.data() + path0, static_cast<std::size_t>(count)});
                   });
    const auto up = mean_se(gaps);
    row.upper = up.mean;
    row.upper_se = up.se;
    log << "  [dual] upper bound " << row.upper << " (se " << row.upper_se << ")\n";

    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    row.ok = true;
    return row;
}

}  // namespace

std::vector<PriceInterval> run_fbm_table(const ExperimentConfig& cfg, std::ostream& log) {
    cfg.validate();
    std::vector<PriceInterval> rows;
    for (double H : cfg.hursts) {
        log << "fbm row H=" << H << "\n";
        PriceInterval row;
        row.key = H;
        try {
            FbmConfig base;
            base.hurst = H;
            base.horizon = cfg.horizon;
            base.fine_steps = cfg.fine_steps;
            base.n_paths = 1;

            auto with_seed = [&](std::uint64_t s) {
                FbmConfig c = base;
                c.seed = s;
                return c;
            };
            const FbmSampler train_p(with_seed(derive_seed(cfg.seed_train, kPrimalLeg)));
            const FbmSampler eval_p(with_seed(derive_seed(cfg.seed_eval, kPrimalLeg)));
            const FbmSampler train_d(with_seed(derive_seed(cfg.seed_train, kDualLeg)));
            const FbmSampler eval_d(with_seed(derive_seed(cfg.seed_eval, kDualLeg)));

            RowRecipe recipe;
            recipe.primal_map.basis = {cfg.primal_sig_level, false, cfg.primal_poly_degree,
                                       cfg.primal_poly_degree > 0 ? 1 : 0};
            recipe.primal_map.normalize_R = cfg.primal_normalize_R;
            recipe.primal_map.state_scale = {};
            recipe.dual_map.basis = {cfg.dual_sig_level, cfg.dual_payoff_letter,
                                     cfg.dual_poly_degree, cfg.dual_poly_degree > 0 ? 1 : 0};
            recipe.dual_map.normalize_R = cfg.dual_normalize_R;
            recipe.itm_only = cfg.itm_mode == 1;  // auto = off: the reward is signed
            recipe.exercise_times = exercise_times_from_grid(train_p.times(), cfg.n_exercise);
            recipe.exercise_idx = align_exercise_indices(train_p.times(), recipe.exercise_times);

            row = run_row(cfg, H, train_p, eval_p, train_d, eval_d, recipe,
                          [](PathBatch&) {}, log);
        } catch (const std::exception& ex) {
            row.ok = false;
            row.error = ex.what();
            log << "  row H=" << H << " FAILED: " << ex.what() << "\n";
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<PriceInterval> run_rbergomi_table(const ExperimentConfig& cfg, std::ostream& log) {
    cfg.validate();
    std::vector<PriceInterval> rows;

    RBergomiConfig base;
    base.hurst = cfg.hurst;
    base.eta = cfg.eta;
    base.rho = cfg.rho;
    base.xi0 = cfg.xi0;
    base.rate = cfg.rate;
    base.spot = cfg.spot;
    base.horizon = cfg.horizon;
    base.fine_steps = cfg.fine_steps;
    base.n_paths = 1;

    // The Gaussian factor is strike-independent: build the four leg samplers
    // once and share them across rows.
    std::optional<RBergomiSampler> train_p, eval_p, train_d, eval_d;
    try {
        auto with_seed = [&](std::uint64_t s) {
            RBergomiConfig c = base;
            c.seed = s;
            return c;
        };
        train_p.emplace(with_seed(derive_seed(cfg.seed_train, kPrimalLeg)));
        eval_p.emplace(with_seed(derive_seed(cfg.seed_eval, kPrimalLeg)));
        train_d.emplace(with_seed(derive_seed(cfg.seed_train, kDualLeg)));
        eval_d.emplace(with_seed(derive_seed(cfg.seed_eval, kDualLeg)));
    } catch (const std::exception& ex) {
        log << "rbergomi sampler construction FAILED: " << ex.what() << "\n";
        for (double strike : cfg.strikes) {
            PriceInterval row;
            row.key = strike;
            row.error = ex.what();
            rows.push_back(std::move(row));
        }
        return rows;
    }

    for (double strike : cfg.strikes) {
        log << "rbergomi row strike=" << strike << "\n";
        PriceInterval row;
        row.key = strike;
        try {
            RowRecipe recipe;
            recipe.primal_map.basis = {cfg.primal_sig_level, false, cfg.primal_poly_degree,
                                       cfg.primal_poly_degree > 0 ? 2 : 0};
            recipe.primal_map.normalize_R = cfg.primal_normalize_R;
            recipe.primal_map.lift_scale = 1.0 / cfg.spot;
            recipe.dual_map.basis = {cfg.dual_sig_level, cfg.dual_payoff_letter,
                                     cfg.dual_poly_degree, cfg.dual_poly_degree > 0 ? 2 : 0};
            recipe.dual_map.normalize_R = cfg.dual_normalize_R;
            recipe.dual_map.lift_scale = 1.0 / cfg.spot;
            recipe.dual_map.payoff_lift_scale = 1.0 / cfg.spot;
            if (strike > 0.0) {
                recipe.primal_map.state_scale = {1.0 / strike, 1.0 / cfg.xi0};
                recipe.dual_map.state_scale = {1.0 / strike, 1.0 / cfg.xi0};
            } else {
                recipe.primal_map.state_scale = {1.0 / cfg.spot, 1.0 / cfg.xi0};
                recipe.dual_map.state_scale = {1.0 / cfg.spot, 1.0 / cfg.xi0};
            }
            recipe.itm_only = cfg.itm_mode != 0;  // auto = on for put payoffs
            recipe.exercise_times = exercise_times_from_grid(train_p->times(), cfg.n_exercise);
            recipe.exercise_idx = align_exercise_indices(train_p->times(), recipe.exercise_times);

            auto prepare = [&](PathBatch& batch) { payoff_put(batch, strike, cfg.rate); };
            row = run_row(cfg, strike, *train_p, *eval_p, *train_d, *eval_d, recipe, prepare, log);
        } catch (const std::exception& ex) {
            row.ok = false;
            row.error = ex.what();
            log << "  row strike=" << strike << " FAILED: " << ex.what() << "\n";
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace sigstop
