#include "homsum/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "homsum/combinatorics.hpp"
#include "homsum/gammacalc.hpp"
#include "homsum/lindeberg.hpp"
#include "homsum/rng.hpp"
#include "homsum/simulate.hpp"
#include "homsum/svg.hpp"

namespace homsum {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CheckRow identity_row(std::string check, std::string id, double lhs, double rhs, double tol) {
    const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
    const double residual = std::abs(lhs - rhs) / scale;
    return {std::move(check), std::move(id), lhs, rhs, residual, tol, residual <= tol};
}

CheckRow bound_row(std::string check, std::string id, double lhs, double rhs, double tol) {
    const double residual = lhs - rhs;
    const bool pass = residual <= tol * std::max({1.0, std::abs(lhs), std::abs(rhs)});
    return {std::move(check), std::move(id), lhs, rhs, residual, tol, pass};
}

SymmetricKernel nonzero_random_kernel(int q, int n, double density, std::mt19937_64& rng) {
    for (;;) {
        auto f = random_kernel(q, n, density, rng);
        if (f.nnz() > 0) return f;
    }
}

// Gaussian and gamma laws, including shapes below 1/2.
VariableSpec random_calculus_law(std::mt19937_64& rng) {
    static constexpr double kShapes[] = {0.3, 0.5, 1.0, 2.0, 5.0};
    std::uniform_int_distribution<int> pick(0, 10);
    const int c = pick(rng);
    if (c < 3) return VariableSpec::gaussian();
    const double nu = kShapes[c % 5];
    return c < 7 ? VariableSpec::gamma_plus(nu) : VariableSpec::gamma_minus(nu);
}

// Symmetric scale mixture of normals, S^2 in {1/2, 3/2}: unit variance, zero
// odd moments, E[X^4] = 3.75.
VariableSpec scale_mixture_law() {
    std::vector<double> m(kMaxMomentOrder + 1, 0.0);
    double dfact = 1.0;  // (k-1)!!
    for (int k = 0; k <= kMaxMomentOrder; k += 2) {
        if (k >= 2) dfact *= k - 1;
        m[k] = dfact * 0.5 * (std::pow(0.5, k / 2) + std::pow(1.5, k / 2));
    }
    return VariableSpec::custom(m);
}

int uniform(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

}  // namespace

void write_checks(std::ostream& out, const std::vector<CheckRow>& rows) {
    out << kCheckHeader << '\n';
    for (const auto& r : rows)
        out << r.check << ',' << r.case_id << ',' << fmt(r.lhs) << ',' << fmt(r.rhs) << ',' << fmt(r.residual) << ','
            << fmt(r.tolerance) << ',' << (r.pass ? 1 : 0) << '\n';
}

std::vector<CheckRow> identity_suite(const CorpusSettings& corpus, std::uint64_t seed, unsigned threads) {
    std::vector<CheckRow> rows;
    const int max_q = std::min(corpus.max_degree, 3);
    MomentOptions mopts;
    mopts.threads = threads;

    for (int c = 0; c < corpus.pairs; ++c) {
        auto rng = block_stream(seed, 0x100000 + c);
        const int p = uniform(rng, 1, max_q), q = uniform(rng, 1, max_q);
        const int n = uniform(rng, std::max(p, q) + 1, std::max(corpus.max_dim, std::max(p, q) + 1));
        const auto f = nonzero_random_kernel(p, n, 0.6, rng), g = nonzero_random_kernel(q, n, 0.6, rng);
        const auto r = nr_identity_check(f, g);
        rows.push_back(identity_row("product-formula", "pair" + std::to_string(c), r.lhs, r.rhs, 1e-9));
    }

    const int ctx_dim = std::min(corpus.max_dim, 6);
    for (int c = 0; c < corpus.contexts; ++c) {
        auto rng = block_stream(seed, 0x200000 + c);
        const int p = uniform(rng, 1, max_q), q = uniform(rng, 1, max_q);
        const int n = uniform(rng, std::max(p, q) + 1, std::max(ctx_dim, std::max(p, q) + 1));
        std::vector<VariableSpec> laws;
        for (int i = 0; i < n; ++i) laws.push_back(random_calculus_law(rng));
        const GammaCalcContext ctx(laws);
        const auto f = nonzero_random_kernel(p, n, 0.6, rng), g = nonzero_random_kernel(q, n, 0.6, rng);
        const std::string id = "ctx" + std::to_string(c);

        const auto energy = var_Jk(ctx, f, g);
        CompensatedSum total;
        for (double e : energy) total += e;
        const SymmetricKernel* fgfg[] = {&f, &g, &f, &g};
        rows.push_back(identity_row("chaos-grading", id, total.value(), product_moment(fgfg, laws, mopts), 1e-9));
        rows.push_back(identity_row("top-level-energy", id, energy[p + q], top_level_energy(ctx, f, g), 1e-9));
        const double efg = p == q ? factorial(p) * inner(f, g) : 0.0;
        const double mean_gamma = gamma_mean(ctx, f, g);
        rows.push_back(identity_row("carre-du-champ-mean", id, mean_gamma, 0.5 * (p + q) * efg, 1e-9));
    }

    for (int c = 0; c < corpus.kernels; ++c) {
        auto rng = block_stream(seed, 0x300000 + c);
        const int q = uniform(rng, 1, max_q);
        const int n = uniform(rng, q + 1, std::max(corpus.max_dim, q + 1));
        const auto f = nonzero_random_kernel(q, n, 0.6, rng);
        std::normal_distribution<double> normal;
        double worst = 0.0, q_at = 0.0, uv_at = 0.0;
        std::vector<double> w(n);
        for (int draw = 0; draw < 100; ++draw) {
            for (auto& v : w) v = normal(rng);
            const int i = uniform(rng, 0, n - 1);
            const auto s = uv_split(f, w, i);
            const double direct = f.evaluate(w), split = s.u + w[i] * s.v;
            const double res = std::abs(direct - split) / std::max(1.0, std::abs(direct));
            if (res >= worst) {
                worst = res;
                q_at = direct;
                uv_at = split;
            }
        }
        rows.push_back({"uv-split", "kernel" + std::to_string(c), uv_at, q_at, worst, 1e-12, worst <= 1e-12});
    }
    return rows;
}

std::vector<CheckRow> inequality_suite(const CorpusSettings& corpus, std::uint64_t seed, unsigned threads) {
    std::vector<CheckRow> rows;
    const int max_q = std::min(corpus.max_degree, 3);
    const int ctx_dim = std::min(corpus.max_dim, 6);
    MomentOptions mopts;
    mopts.threads = threads;
    constexpr double tol = 1e-10;
    for (int c = 0; c < corpus.kernels; ++c) {
        auto rng = block_stream(seed, 0x400000 + c);
        const int p = uniform(rng, 1, max_q), q = uniform(rng, 1, max_q);
        const int n = uniform(rng, std::max(p, q) + 1, std::max(ctx_dim, std::max(p, q) + 1));
        std::vector<VariableSpec> laws;
        for (int i = 0; i < n; ++i) laws.push_back(random_calculus_law(rng));
        const GammaCalcContext ctx(laws);
        const auto f = nonzero_random_kernel(p, n, 0.6, rng), g = nonzero_random_kernel(q, n, 0.6, rng);
        const std::string id = "case" + std::to_string(c);

        const double k4 = kappa4(f, laws, mopts);
        rows.push_back(bound_row("kappa4-nonnegative", id, -k4, 0.0, 1e-12));

        const auto z = zheng_inequalities_check(ctx, f, g, mopts);
        rows.push_back(bound_row("chaos-variance", id, z.variance.lhs, z.variance.rhs, tol));
        rows.push_back(bound_row("chaos-covariance", id, z.covariance.lhs, z.covariance.rhs, tol));

        const auto key = key_inequalities_check(ctx, f, g);
        rows.push_back(bound_row("top-energy-lower", id, key.top_energy.lhs, key.top_energy.rhs, tol));
        if (key.has_cross) rows.push_back(bound_row("top-energy-cross", id, key.cross.lhs, key.cross.rhs, tol));

        const auto off = offdiag_tensor_bound_check(f);
        rows.push_back(bound_row("offdiag-mass", id, off.lhs, off.rhs, tol));

        // Transfer chain under each coordinate condition.
        const std::pair<TransferCondition, VariableSpec> conditions[] = {
            {TransferCondition::A, uniform(rng, 0, 1) ? VariableSpec::gaussian() : scale_mixture_law()},
            {TransferCondition::B, VariableSpec::poisson(std::pow(2.0, uniform(rng, -1, 2)))},
            {TransferCondition::C, VariableSpec::gamma_plus(std::pow(2.0, uniform(rng, -2, 2)))},
        };
        for (const auto& [cond, law] : conditions) {
            if (p < 2) break;
            const std::vector<VariableSpec> iid(n, law);
            const auto chain = transfer_inequality_check(f, iid, cond, mopts);
            const std::string name = cond == TransferCondition::A   ? "transfer-A"
                                     : cond == TransferCondition::B ? "transfer-B"
                                                                    : "transfer-C";
            rows.push_back(bound_row(name + "-influence", id, chain.max_influence, chain.max_contraction, tol));
            rows.push_back(bound_row(name + "-contraction", id, chain.max_contraction, chain.kappa_term, tol));
        }

        if (p == 2) {
            const auto dj = dejong_q2_fourth_moment(f, laws);
            rows.push_back(bound_row("quadratic-fourth-moment", id, std::abs(dj.fourth_moment - 6.0 * dj.g5),
                                     dj.g1 + 18.0 * dj.g2 + 12.0 * std::abs(dj.g3) + 24.0 * std::abs(dj.g4), tol));
        }
    }
    return rows;
}

namespace {

struct Settings {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> mc;
    unsigned threads = default_thread_count();
    std::string out_dir;
    std::string format = "csv";
    bool verbose = false;
    // kappa4 and psi-norm
    std::string kernel_path;
    std::string law = "gaussian";
    double alpha = 1.0;
    double power = 1.0;
};

ExperimentConfig effective_config(const Settings& s, bool required) {
    ExperimentConfig c;
    if (!s.config_path.empty()) {
        if (!std::filesystem::exists(s.config_path)) throw ConfigError("config file not found: " + s.config_path);
        c = load_config(s.config_path);
    } else if (required) {
        throw ConfigError("this subcommand needs --config PATH");
    }
    if (s.seed) c.seed = *s.seed;
    if (s.mc) c.mc = *s.mc;
    if (!s.out_dir.empty()) c.output = s.out_dir;
    if (!c.threads) c.threads = s.threads;
    return c;
}

std::string output_path(const ExperimentConfig& c, const std::string& name) {
    std::filesystem::create_directories(c.output);
    return (std::filesystem::path(c.output) / name).string();
}

int report_checks(const std::vector<CheckRow>& rows, const std::string& path, bool verbose, std::ostream& out) {
    {
        std::ofstream f(path);
        if (!f) throw ConfigError("cannot write " + path);
        write_checks(f, rows);
    }
    std::map<std::string, std::pair<int, int>> tally;
    std::map<std::string, double> worst;
    std::vector<std::string> order;
    for (const auto& r : rows) {
        if (!tally.count(r.check)) order.push_back(r.check);
        auto& t = tally[r.check];
        ++t.second;
        t.first += r.pass;
        worst[r.check] = std::max(worst[r.check], r.residual);
        if (verbose)
            out << (r.pass ? "  ok   " : "  FAIL ") << r.check << ' ' << r.case_id << " residual " << fmt(r.residual)
                << '\n';
    }
    bool all = true;
    for (const auto& name : order) {
        const auto [pass, total] = tally[name];
        all = all && pass == total;
        out << (pass == total ? "PASS " : "FAIL ") << name << ": " << pass << "/" << total << " max residual "
            << fmt(worst[name]) << '\n';
    }
    out << "wrote " << path << '\n';
    return all ? 0 : 2;
}

std::uint64_t fnv(std::uint64_t h, const std::string& s) {
    for (unsigned char ch : s) h = (h ^ ch) * 0x100000001b3ull;
    return h;
}

int cmd_kappa4(const Settings& s, std::ostream& out) {
    SymmetricKernel f(1, 1);
    std::vector<VariableSpec> laws;
    if (!s.kernel_path.empty()) {
        if (!std::filesystem::exists(s.kernel_path)) throw ConfigError("kernel file not found: " + s.kernel_path);
        f = load_kernel(s.kernel_path);
        laws.assign(f.dim(), VariableSpec::parse(s.law));
    } else {
        const auto c = effective_config(s, true);
        const auto system = build_system(c);
        f = system.kernel(0);
        laws = system.coordinates();
    }
    std::uint64_t key = fnv(0xcbf29ce484222325ull, std::to_string(f.content_hash()));
    for (const auto& l : laws) key = fnv(key, l.to_string() + ";");
    std::filesystem::path cache;
    if (const char* dir = std::getenv("HOMSUM_CACHE_DIR"); dir && *dir) {
        char name[64];
        std::snprintf(name, sizeof name, "kappa4-%016llx.txt", static_cast<unsigned long long>(key));
        cache = std::filesystem::path(dir) / name;
        std::ifstream in(cache);
        double cached;
        if (in >> cached) {
            out << "kappa4 = " << fmt(cached) << " (cached)\n";
            return 0;
        }
    }
    MomentOptions opts;
    opts.threads = s.threads;
    const double k4 = kappa4(f, laws, opts);
    if (!cache.empty()) {
        std::filesystem::create_directories(cache.parent_path());
        std::ofstream(cache) << fmt(k4) << '\n';
    }
    out << "kappa4 = " << fmt(k4) << '\n';
    return 0;
}

int cmd_psi_norm(const Settings& s, std::ostream& out) {
    const auto law = VariableSpec::parse(s.law);
    const double norm = s.power == 1.0 ? psi_alpha_norm(law, s.alpha) : psi_norm_of_power(law, s.power, s.alpha);
    out << "psi_" << fmt(s.alpha) << " norm of |" << law.to_string() << "|^" << fmt(s.power) << " = " << fmt(norm)
        << '\n';
    return 0;
}

std::vector<HomSumSystem> systems_of(const ExperimentConfig& c) {
    std::vector<HomSumSystem> out;
    if (c.ladder.empty())
        out.push_back(build_system(c));
    else
        for (int n : c.ladder) out.push_back(build_system(c, n));
    return out;
}

BoundOptions bound_options(const ExperimentConfig& c) {
    BoundOptions b;
    b.moments.threads = *c.threads;
    b.mc = c.mc;
    b.seed = c.seed;
    return b;
}

int cmd_bound(const Settings& s, std::ostream& out) {
    const auto c = effective_config(s, true);
    const auto systems = systems_of(c);
    std::vector<ResultRecord> records;
    for (const auto& system : systems) {
        const auto start = std::chrono::steady_clock::now();
        auto b = bound_options(c);
        b.seed = splitmix64(c.seed ^ static_cast<std::uint64_t>(system.dim()));
        const auto rates = bound_rates(system, c.alpha, b);
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        const double nan = std::numeric_limits<double>::quiet_NaN();
        records.push_back(make_record(c.id, system, c.mc, c.seed, {nan, nan}, rates, ms));
        out << "N=" << system.dim() << " d=" << system.size() << " delta0=" << fmt(rates.delta0)
            << " delta1=" << fmt(rates.delta1) << " delta_n=" << fmt(rates.delta_n)
            << " composite=" << fmt(rates.composite) << (rates.kappa4_estimated ? " (kappa4 sampled)" : "") << '\n';
    }
    const auto path = output_path(c, "bound.csv");
    std::ofstream f(path);
    write_records(f, records);
    out << "wrote " << path << '\n';
    return 0;
}

DistanceEstimate distance_of(const ExperimentConfig& c, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                             std::uint64_t seed) {
    if (c.distance.estimator == "max") return kolmogorov_max_stat(a, b);
    OrthantOptions o;
    o.anchor_cap = c.distance.anchor_cap;
    o.diagonal_anchors = c.distance.diagonal_anchors;
    o.seed = seed;
    return kolmogorov_orthant(a, b, o);
}

int cmd_simulate(const Settings& s, std::ostream& out) {
    const auto c = effective_config(s, true);
    std::vector<ResultRecord> records;
    for (const auto& system : systems_of(c)) {
        const auto start = std::chrono::steady_clock::now();
        const std::uint64_t base = splitmix64(c.seed ^ static_cast<std::uint64_t>(system.dim()));
        const auto qs = sample_Q(system, c.mc, splitmix64(base + 1), *c.threads);
        const auto factor = gaussian_factor(system.target());
        if (factor.flagged)
            out << "warning: target covariance has eigenvalue " << fmt(factor.min_eigenvalue) << ", clipped\n";
        const auto zs = sample_gaussian(factor, c.mc, splitmix64(base + 2), *c.threads);
        const auto dist = distance_of(c, qs, zs, splitmix64(base + 3));
        auto b = bound_options(c);
        b.seed = splitmix64(base + 4);
        const auto rates = bound_rates(system, c.alpha, b);
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        records.push_back(make_record(c.id, system, c.mc, c.seed, dist, rates, ms));
        out << "N=" << system.dim() << " d=" << system.size() << " distance=" << fmt(dist.estimate) << " +- "
            << fmt(dist.se) << " composite=" << fmt(rates.composite) << '\n';
    }
    const auto path = output_path(c, "simulate.csv");
    std::ofstream f(path);
    write_records(f, records);
    out << "wrote " << path << '\n';
    return 0;
}

int cmd_study(const Settings& s, std::ostream& out) {
    const auto c = effective_config(s, true);
    if (c.ladder.size() < 4) throw ConfigError("study needs a ladder with at least four sizes");
    const auto systems = systems_of(c);
    StudyOptions o;
    o.mc = c.mc;
    o.seed = c.seed;
    o.alpha = c.alpha;
    o.threads = *c.threads;
    o.orthant.anchor_cap = c.distance.anchor_cap;
    o.orthant.diagonal_anchors = c.distance.diagonal_anchors;
    o.max_statistic = c.distance.estimator == "max";
    o.bounds = bound_options(c);
    const auto study = rate_conformance_study(systems, o);
    std::vector<ResultRecord> records;
    for (std::size_t i = 0; i < systems.size(); ++i) {
        const auto& p = study.points[i];
        records.push_back(make_record(c.id, systems[i], c.mc, c.seed, p.distance, p.rates, p.wall_ms));
        out << "N=" << p.n << " d=" << p.d << " distance=" << fmt(p.distance.estimate) << " +- "
            << fmt(p.distance.se) << " composite=" << fmt(p.rates.composite) << '\n';
    }
    const auto path = output_path(c, "study.csv");
    {
        std::ofstream f(path);
        write_records(f, records);
    }
    out << "slope=" << fmt(study.slope) << " fitted_C=" << fmt(study.fitted_constant) << '\n';
    out << (study.monotone ? "PASS " : "FAIL ") << "monotone distance along the ladder\n";
    out << (study.within_fitted ? "PASS " : "FAIL ") << "distance <= fitted C * composite\n";
    out << "wrote " << path << '\n';
    if (s.format == "csv+svg") {
        PlotSeries dist{"distance", {}, {}}, rate{"composite rate", {}, {}};
        for (const auto& p : study.points) {
            dist.x.push_back(p.n);
            dist.y.push_back(p.distance.estimate);
            rate.x.push_back(p.n);
            rate.y.push_back(p.rates.composite);
        }
        const auto svg = output_path(c, "study.svg");
        write_loglog_svg(svg, {dist, rate}, c.id, "N", "value");
        out << "wrote " << svg << '\n';
    }
    return study.monotone && study.within_fitted ? 0 : 2;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Exact and Monte Carlo checks for Gaussian approximation of homogeneous sums"};
    app.require_subcommand(1);
    app.fallthrough();
    Settings s;
    app.add_option("--config", s.config_path, "Experiment config (JSON). Defaults: mc=100000, alpha=1, "
                                              "output=out, exact-Gram target, orthant distance with 2000 anchors");
    app.add_option("--seed", s.seed, "Override the config seed");
    app.add_option("--mc", s.mc, "Override the Monte Carlo size");
    app.add_option("--threads", s.threads, "Worker threads (default: hardware count)")->check(CLI::PositiveNumber);
    app.add_option("--out", s.out_dir, "Output directory (default: config output)");
    app.add_option("--format", s.format, "csv or csv+svg")->check(CLI::IsMember({"csv", "csv+svg"}));
    app.add_flag("-v,--verbose", s.verbose, "Print every check");

    auto* ids = app.add_subcommand("verify-identities", "Exact identity suite over a random corpus");
    auto* ineq = app.add_subcommand("verify-inequalities", "Exact inequality suite over a random corpus");
    auto* k4 = app.add_subcommand("kappa4", "Exact fourth cumulant of one kernel");
    k4->add_option("--kernel", s.kernel_path, "Kernel file");
    k4->add_option("--law", s.law, "Coordinate law: gaussian | gamma+:<nu> | gamma-:<nu> | poisson:<lambda> | "
                                   "rademacher | twopoint:<a>,<b>,<p>");
    auto* bound = app.add_subcommand("bound", "Evaluate the rate functionals of a system");
    auto* sim = app.add_subcommand("simulate", "Sample distance to the Gaussian target");
    auto* study = app.add_subcommand("study", "Rate conformance study along the ladder");
    auto* psi = app.add_subcommand("psi-norm", "psi_alpha norm of a coordinate law");
    psi->add_option("--law", s.law, "Coordinate law");
    psi->add_option("--alpha", s.alpha, "Orlicz exponent")->check(CLI::PositiveNumber);
    psi->add_option("--power", s.power, "Norm of |X|^power")->check(CLI::PositiveNumber);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }

    try {
        if (ids->parsed() || ineq->parsed()) {
            const auto c = effective_config(s, false);
            const bool identities = ids->parsed();
            const auto rows = identities ? identity_suite(c.corpus, c.seed, *c.threads)
                                         : inequality_suite(c.corpus, c.seed, *c.threads);
            return report_checks(rows, output_path(c, identities ? "identities.csv" : "inequalities.csv"), s.verbose,
                                 out);
        }
        if (k4->parsed()) return cmd_kappa4(s, out);
        if (bound->parsed()) return cmd_bound(s, out);
        if (sim->parsed()) return cmd_simulate(s, out);
        if (study->parsed()) return cmd_study(s, out);
        if (psi->parsed()) return cmd_psi_norm(s, out);
    } catch (const std::exception& e) {
        // Argument, config, domain and cap errors are usage errors.
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace homsum
