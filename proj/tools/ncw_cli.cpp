// Command-line front end: photocounting and homodyne nonclassicality tests,
// LP oracle cross-checks, CSV emission, and reproducibility manifests.

#include <CLI11.hpp>
#include <json.hpp>

#include <ncw/geometry.hpp>
#include <ncw/sampling.hpp>
#include <ncw/states.hpp>
#include <ncw/tight_photocount.hpp>
#include <ncw/uhd.hpp>

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace ncw;
using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNonclassical = 2;
constexpr int kExitUsage = 64;

std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string iso_timestamp() {
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

std::uint64_t default_seed() {
    if (const char* env = std::getenv("NCW_SEED")) {
        try {
            return std::stoull(env);
        } catch (...) {
            throw CLI::ValidationError("NCW_SEED", "must be a 64-bit unsigned integer");
        }
    }
    return 0;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

struct ScanSpec {
    std::string name;
    double start = 0.0, stop = 0.0;
    int count = 1;
};

ScanSpec parse_scan(const std::string& s) {
    ScanSpec sc;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--scan", "expected name=start:stop:count");
    sc.name = s.substr(0, eq);
    const std::string rest = s.substr(eq + 1);
    const auto c1 = rest.find(':'), c2 = rest.rfind(':');
    if (c1 == std::string::npos || c2 == c1)
        throw CLI::ValidationError("--scan", "expected name=start:stop:count");
    try {
        sc.start = std::stod(rest.substr(0, c1));
        sc.stop = std::stod(rest.substr(c1 + 1, c2 - c1 - 1));
        sc.count = std::stoi(rest.substr(c2 + 1));
    } catch (...) {
        throw CLI::ValidationError("--scan", "expected name=start:stop:count");
    }
    if (sc.count < 1) throw CLI::ValidationError("--scan", "count must be >= 1");
    return sc;
}

det::DetectorModel parse_detector(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos)
        throw CLI::ValidationError("--detector", "expected click:N or pnr:N");
    const std::string kind = s.substr(0, colon);
    int n = 0;
    try {
        n = std::stoi(s.substr(colon + 1));
    } catch (...) {
        throw CLI::ValidationError("--detector", "expected click:N or pnr:N");
    }
    if (n < 1) throw CLI::ValidationError("--detector", "N must be >= 1");
    if (kind == "click") return det::click(n);
    if (kind == "pnr") return det::pnr(n);
    throw CLI::ValidationError("--detector", "unknown kind '" + kind + "'");
}

struct StateFlags {
    std::string state = "coherent:1.0";
    double r = 0.0;
    double phase = std::numbers::pi;
    double eta = 1.0;
};

states::StateSpec make_state(const StateFlags& f, double alpha0_override,
                             bool has_override) {
    const auto colon = f.state.find(':');
    const std::string kind = f.state.substr(0, colon == std::string::npos ? f.state.size() : colon);
    auto arg = [&]() -> double {
        if (colon == std::string::npos)
            throw CLI::ValidationError("--state", "'" + kind + "' needs a parameter, e.g. " +
                                                      kind + ":1.0");
        try {
            return std::stod(f.state.substr(colon + 1));
        } catch (...) {
            throw CLI::ValidationError("--state", "bad parameter in '" + f.state + "'");
        }
    };
    try {
        if (kind == "fock") return states::fock_with_loss(static_cast<int>(arg()), f.eta);
        if (kind == "coherent") {
            const double a0 = has_override ? alpha0_override : arg();
            return states::coherent(a0, f.eta);
        }
        if (kind == "sq-coh") {
            const double a0 = has_override ? alpha0_override
                                           : (colon == std::string::npos ? 0.0 : arg());
            return states::squeezed_coherent(a0, f.r, f.phase, f.eta);
        }
        if (kind == "sq-vac") return states::squeezed_coherent(0.0, f.r, f.phase, f.eta);
    } catch (const std::invalid_argument& e) {
        throw CLI::ValidationError("--state", e.what());
    }
    throw CLI::ValidationError("--state", "unknown state '" + kind +
                                              "' (fock:n, coherent:a, sq-coh[:a], sq-vac)");
}

double state_alpha0(const states::StateSpec& s) { return s.alpha0.real(); }

struct OutputSink {
    std::string out_path;  // empty = stdout
    std::string csv;

    void row(const std::string& line) { csv += line + "\n"; }

    int finish(const std::string& command, const json& config, std::uint64_t seed) const {
        json manifest;
        manifest["command"] = command;
        manifest["config"] = config;
        manifest["seed"] = seed;
        manifest["version"] = kVersion;
        manifest["timestamp"] = iso_timestamp();
        char checksum[32];
        std::snprintf(checksum, sizeof(checksum), "%016llx",
                      static_cast<unsigned long long>(fnv1a(csv)));
        manifest["outputs"] = json::array(
            {{{"file", out_path.empty() ? "stdout" : out_path}, {"fnv1a64", checksum}}});
        if (out_path.empty()) {
            std::cout << csv;
            std::cerr << manifest.dump(2) << "\n";
        } else {
            std::ofstream f(out_path, std::ios::binary);
            if (!f) {
                std::cerr << "error: cannot write " << out_path << "\n";
                return kExitError;
            }
            f << csv;
            std::ofstream mf(out_path + ".manifest.json", std::ios::binary);
            if (!mf) {
                std::cerr << "error: cannot write manifest\n";
                return kExitError;
            }
            mf << manifest.dump(2) << "\n";
        }
        return kExitOk;
    }
};

// ---------------------------------------------------------------- photocount

struct PhotocountResult {
    double margin = 0.0;
    std::vector<double> nodes;
    double tau = 0.0;
};

// N=2: best of the tangent family (grid plus golden-section polish).
PhotocountResult best_margin_two(const det::DetectorModel& dm, const Eigen::VectorXd& P) {
    auto margin = [&](double t) {
        try {
            auto tf = tight::lambda_n2(dm, t);
            return P.head(2).dot(tf.lambda) - tf.rhs;
        } catch (const tight::degeneracy_error&) {
            return -std::numeric_limits<double>::infinity();
        }
    };
    const int n_grid = 2001;
    double best = -P[1], best_t = -1.0;  // downward direction covers the flat facet
    for (int i = 1; i < n_grid; ++i) {
        const double t = static_cast<double>(i) / n_grid;
        const double v = margin(t);
        if (v > best) {
            best = v;
            best_t = t;
        }
    }
    if (best_t >= 0.0) {
        const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
        double a = std::max(1e-9, best_t - 1.0 / n_grid), b = std::min(1.0 - 1e-9, best_t + 1.0 / n_grid);
        double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
        double f1 = margin(c1), f2 = margin(c2);
        for (int it = 0; it < 70; ++it) {
            if (f1 > f2) {
                b = c2;
                c2 = c1;
                f2 = f1;
                c1 = b - gr * (b - a);
                f1 = margin(c1);
            } else {
                a = c1;
                c1 = c2;
                f1 = f2;
                c2 = a + gr * (b - a);
                f2 = margin(c2);
            }
        }
        if (std::max(f1, f2) > best) {
            best = std::max(f1, f2);
            best_t = 0.5 * (a + b);
        }
    }
    PhotocountResult r;
    r.margin = best;
    r.nodes = {best_t < 0.0 ? 1.0 : best_t};
    r.tau = r.nodes[0];
    return r;
}

int run_photocount(const StateFlags& sf, const std::string& det_str, int m_order,
                   std::optional<long> samples, const std::optional<std::string>& scan_str,
                   std::uint64_t seed, OutputSink& sink, const json& config) {
    const auto dm = parse_detector(det_str);
    int m = m_order;
    if (dm.n != 2) {
        if (m <= 0) m = (dm.n - 1) / 2;
        if (dm.n != 2 * m + 1)
            throw CLI::ValidationError("--detector", "need N = 2m+1 (or N = 2) for order m = " +
                                                         std::to_string(m));
    }

    std::vector<double> alphas;
    bool has_alpha = false;
    if (scan_str) {
        const auto sc = parse_scan(*scan_str);
        if (sc.name != "alpha0")
            throw CLI::ValidationError("--scan", "photocount-test scans alpha0 only");
        for (int i = 0; i < sc.count; ++i)
            alphas.push_back(sc.count == 1 ? sc.start
                                           : sc.start + (sc.stop - sc.start) * i / (sc.count - 1));
        has_alpha = true;
    } else {
        alphas.push_back(0.0);
    }

    std::string header = "alpha0,margin,std_error";
    const int n_nodes = dm.n == 2 ? 1 : m;
    for (int i = 1; i <= n_nodes; ++i) header += ",t_node" + std::to_string(i);
    header += ",tau,detector";
    sink.row(header);

    bool any_violation = false;
    std::uint64_t row_seed = seed;
    for (double a0 : alphas) {
        const auto s = make_state(sf, a0, has_alpha);
        const auto P = states::photocount_dist(s, dm);
        PhotocountResult res;
        if (dm.n == 2) {
            res = best_margin_two(dm, P);
        } else {
            const auto rep = tight::max_violation(P, dm, m);
            res.margin = rep.margin;
            res.nodes = rep.nodes;
            res.tau = rep.tau;
        }
        double margin = res.margin, std_error = 0.0;
        if (samples) {
            try {
                tight::TestFunction tf =
                    dm.n == 2 ? tight::lambda_n2(dm, res.nodes[0])
                              : tight::lambda_odd(dm, res.nodes, res.tau);
                const auto est = sampling::estimate_margin(
                    sampling::sample_counts(P, *samples, row_seed), tf);
                margin = est.value;
                std_error = est.std_error;
            } catch (const tight::degeneracy_error&) {
                // fall back to the analytic margin with zero error bar
            }
            ++row_seed;
        }
        if (margin > 0.0) any_violation = true;
        std::string line = fmt(has_alpha ? a0 : state_alpha0(s)) + "," + fmt(margin) + "," +
                           fmt(std_error);
        for (double t : res.nodes) line += "," + fmt(t);
        line += "," + fmt(res.tau) + "," + det_str;
        sink.row(line);
    }
    const int rc = sink.finish("photocount-test", config, seed);
    if (rc != kExitOk) return rc;
    return any_violation ? kExitNonclassical : kExitOk;
}

// ----------------------------------------------------------------------- uhd

int run_uhd(const StateFlags& sf, std::complex<double> gamma1, std::complex<double> gamma2,
            double xi, const std::optional<std::string>& scan_str,
            const std::optional<std::string>& boundary_csv, std::uint64_t seed,
            OutputSink& sink, const json& config) {
    if (std::abs(gamma2 - gamma1) < 1e-12)
        throw CLI::ValidationError("--gamma2", "the two settings must differ");

    std::vector<double> etas;
    if (scan_str) {
        const auto sc = parse_scan(*scan_str);
        if (sc.name != "eta") throw CLI::ValidationError("--scan", "uhd-test scans eta only");
        for (int i = 0; i < sc.count; ++i)
            etas.push_back(sc.count == 1 ? sc.start
                                         : sc.start + (sc.stop - sc.start) * i / (sc.count - 1));
    } else {
        etas.push_back(sf.eta);
    }

    sink.row("eta,P1,P2,verdict,violated_inequality,t_star");
    bool any_violation = false;
    std::vector<int> verdicts;
    for (double eta : etas) {
        if (!(eta > 0.0 && eta <= 1.0))
            throw CLI::ValidationError("--eta", "eta must be in (0,1]");
        StateFlags f = sf;
        f.eta = eta;
        const auto s = make_state(f, 0.0, false);
        // detection efficiency: lossy state probed at sqrt(eta) gamma, so the
        // effective half-distance shrinks to sqrt(eta) d
        const double se = std::sqrt(eta);
        const std::complex<double> g1 = se * gamma1, g2 = se * gamma2;
        const double d = 0.5 * std::abs(g2 - g1);
        if (!uhd::uhd_curvature_ok(d))
            std::cerr << "warning: d = " << d
                      << " exceeds 1/sqrt(2); the linear family is not guaranteed tight\n";
        // measured probabilities include the mode-mismatch factor; the verdict
        // uses the corrected values (the factors are known and divide out)
        const double gm1 = uhd::mismatch_factor(g1, 1.0, xi);
        const double gm2 = uhd::mismatch_factor(g2, 1.0, xi);
        const double p1m = states::uhd_click_prob(s, g1) * gm1;
        const double p2m = states::uhd_click_prob(s, g2) * gm2;
        const uhd::UhdPoint p{p1m / gm1, p2m / gm2};
        const auto tri = uhd::triangle_test(p, d);
        double t_star = 0.0;
        uhd::max_linear_margin_uhd(p, d, 8001, &t_star);
        const char* which = "none";
        switch (tri.violated) {
            case uhd::TriangleCase::SumTooSmall: which = "sum"; break;
            case uhd::TriangleCase::Side1TooLong: which = "side1"; break;
            case uhd::TriangleCase::Side2TooLong: which = "side2"; break;
            case uhd::TriangleCase::None: break;
        }
        if (tri.nonclassical) any_violation = true;
        verdicts.push_back(tri.nonclassical ? 1 : 0);
        sink.row(fmt(eta) + "," + fmt(p1m) + "," + fmt(p2m) + "," +
                 (tri.nonclassical ? "nonclassical" : "classical") + "," + which + "," +
                 fmt(t_star));
    }

    // report the crossover if the scan shows a single monotone flip
    if (verdicts.size() > 1) {
        int flips = 0;
        for (size_t i = 1; i < verdicts.size(); ++i)
            if (verdicts[i] != verdicts[i - 1]) ++flips;
        if (flips == 1) {
            auto verdict_at = [&](double eta) {
                StateFlags f = sf;
                f.eta = eta;
                const auto s = make_state(f, 0.0, false);
                const double se = std::sqrt(eta);
                const std::complex<double> g1 = se * gamma1, g2 = se * gamma2;
                const uhd::UhdPoint p{states::uhd_click_prob(s, g1),
                                      states::uhd_click_prob(s, g2)};
                return uhd::triangle_test(p, 0.5 * std::abs(g2 - g1)).nonclassical;
            };
            size_t k = 1;
            while (verdicts[k] == verdicts[k - 1]) ++k;
            double lo = etas[k - 1], hi = etas[k];
            while (hi - lo > 1e-4) {
                const double mid = 0.5 * (lo + hi);
                (verdict_at(mid) == static_cast<bool>(verdicts[k]) ? hi : lo) = mid;
            }
            std::cerr << "crossover eta* = " << fmt(0.5 * (lo + hi)) << "\n";
        }
    }

    if (boundary_csv) {
        const double d = 0.5 * std::abs(gamma2 - gamma1) * std::sqrt(etas.back());
        std::ofstream f(*boundary_csv, std::ios::binary);
        if (!f) {
            std::cerr << "error: cannot write " << *boundary_csv << "\n";
            return kExitError;
        }
        f << "t,P1,P2\n";
        for (int i = 0; i <= 2000; ++i) {
            const double t = -4.0 + 8.0 * i / 2000.0;
            const auto b = uhd::boundary_curve(t, d);
            f << fmt(t) << "," << fmt(b.p1) << "," << fmt(b.p2) << "\n";
        }
    }

    const int rc = sink.finish("uhd-test", config, seed);
    if (rc != kExitOk) return rc;
    return any_violation ? kExitNonclassical : kExitOk;
}

// -------------------------------------------------------------- oracle-check

int run_oracle(int n_det, const std::string& kind, long trials, std::uint64_t seed,
               OutputSink& sink, const json& config) {
    if (n_det != 2 && n_det != 3 && n_det != 5)
        throw CLI::ValidationError("--n-outcomes", "supported N: 2, 3 (full), 5 (one-way)");
    const auto dm = kind == "pnr" ? det::pnr(n_det) : det::click(n_det);
    if (kind != "pnr" && kind != "click")
        throw CLI::ValidationError("--kind", "expected click or pnr");

    std::vector<geom::Vector> samples;
    for (int i = 0; i < 4001; ++i)
        samples.push_back(det::q_vector(dm, static_cast<double>(i) / 4000.0));

    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> ex(1.0);
    const double band = 1e-7;
    long agree = 0, in_band = 0, disagree = 0;

    const auto grid = tight::make_curve_grid(dm, 4001);
    sink.row("trial,tight_margin,oracle_inside,decision");
    for (long trial = 0; trial < trials; ++trial) {
        Eigen::VectorXd P(dm.n + 1);
        double sum = 0.0;
        for (int i = 0; i <= dm.n; ++i) {
            P[i] = ex(rng);
            sum += P[i];
        }
        P /= sum;

        double tightm;
        if (n_det == 2) {
            tightm = best_margin_two(dm, P).margin;
        } else if (n_det == 3) {
            double best = -std::numeric_limits<double>::infinity();
            for (double tau : {0.0, 1.0}) {
                for (int i = 1; i < 401; ++i) {
                    try {
                        auto tf = tight::lambda_n3(dm, i / 401.0, tau, grid);
                        best = std::max(best, P.head(3).dot(tf.lambda) - tf.rhs);
                    } catch (const tight::degeneracy_error&) {
                    }
                }
            }
            tightm = best;
        } else {
            tightm = tight::max_violation(P, dm, 2, 2).margin;
        }

        std::string decision;
        if (std::abs(tightm) <= band) {
            ++in_band;
            decision = "band";
            sink.row(std::to_string(trial) + "," + fmt(tightm) + ",," + decision);
            continue;
        }
        const bool inside = geom::hull_membership(P.head(dm.n), samples, 1e-9).inside;
        bool match;
        if (n_det == 5) {
            // one-way implication: tight violation must imply oracle-outside
            match = tightm < 0.0 || !inside;
        } else {
            match = inside == (tightm < 0.0);
        }
        if (match)
            ++agree;
        else
            ++disagree;
        decision = match ? "agree" : "DISAGREE";
        sink.row(std::to_string(trial) + "," + fmt(tightm) + "," + (inside ? "1" : "0") + "," +
                 decision);
    }
    std::cerr << "oracle-check N=" << n_det << " " << kind << ": " << agree << " agree, "
              << in_band << " in band, " << disagree << " disagree\n";
    const int rc = sink.finish("oracle-check", config, seed);
    if (rc != kExitOk) return rc;
    return disagree == 0 ? kExitOk : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nonclassicality tests for photocounting and unbalanced homodyne detection"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out_path;
    app.add_option("--seed", seed, "RNG seed (default: NCW_SEED env var or 0)")
        ->each([&](const std::string&) { seed_given = true; });
    app.add_option("--out", out_path, "CSV output file (manifest goes to <out>.manifest.json)");

    StateFlags sf;
    std::string det_str = "click:2";
    int m_order = 0;
    std::optional<long> samples;
    std::optional<std::string> scan_str;
    long samples_val = 0;
    std::string scan_val;

    auto* pc = app.add_subcommand("photocount-test", "tight photocounting inequalities");
    pc->fallthrough();
    pc->add_option("--state", sf.state, "fock:n | coherent:a | sq-coh[:a] | sq-vac");
    pc->add_option("--r", sf.r, "squeezing magnitude");
    pc->add_option("--phase", sf.phase, "squeezing phase (default pi: antisqueezed x)");
    pc->add_option("--eta", sf.eta, "efficiency in (0,1]");
    pc->add_option("--detector", det_str, "click:N | pnr:N");
    pc->add_option("--m", m_order, "node count (default (N-1)/2)");
    auto* opt_samples = pc->add_option("--samples", samples_val, "finite-sample estimate size");
    auto* opt_scan = pc->add_option("--scan", scan_val, "alpha0=start:stop:count");

    std::vector<double> g1 = {-1.0 / std::sqrt(2.0), 0.0}, g2 = {1.0 / std::sqrt(2.0), 0.0};
    double xi = 1.0;
    std::string boundary_val;
    auto* ut = app.add_subcommand("uhd-test", "unbalanced homodyne triangle test");
    ut->fallthrough();
    ut->add_option("--state", sf.state, "fock:n | coherent:a | sq-coh[:a] | sq-vac");
    ut->add_option("--r", sf.r, "squeezing magnitude");
    ut->add_option("--phase", sf.phase, "squeezing phase (default pi: antisqueezed x)");
    ut->add_option("--eta", sf.eta, "detection efficiency in (0,1]");
    ut->add_option("--gamma1", g1, "first LO setting, re im")->expected(2);
    ut->add_option("--gamma2", g2, "second LO setting, re im")->expected(2);
    ut->add_option("--xi", xi, "mode overlap in (0,1]");
    auto* opt_uscan = ut->add_option("--scan", scan_val, "eta=start:stop:count");
    auto* opt_boundary = ut->add_option("--boundary-csv", boundary_val,
                                        "also write the classical boundary curve here");

    int n_det = 2;
    std::string kind = "click";
    long trials = 10000;
    auto* oc = app.add_subcommand("oracle-check", "tight verdicts vs LP hull membership");
    oc->fallthrough();
    oc->add_option("--n-outcomes", n_det, "detector N (2, 3 full equivalence; 5 one-way)");
    oc->add_option("--kind", kind, "click | pnr");
    oc->add_option("--trials", trials, "number of random distributions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (!seed_given) seed = default_seed();
        if (opt_samples->count() > 0) samples = samples_val;
        if (opt_scan->count() > 0 || opt_uscan->count() > 0) scan_str = scan_val;
        std::optional<std::string> boundary_csv;
        if (opt_boundary->count() > 0) boundary_csv = boundary_val;

        OutputSink sink;
        sink.out_path = out_path;
        json config;
        config["state"] = sf.state;
        config["r"] = sf.r;
        config["phase"] = sf.phase;
        config["eta"] = sf.eta;
        if (scan_str) config["scan"] = *scan_str;

        if (pc->parsed()) {
            config["detector"] = det_str;
            config["m"] = m_order;
            if (samples) config["samples"] = *samples;
            return run_photocount(sf, det_str, m_order, samples, scan_str, seed, sink, config);
        }
        if (ut->parsed()) {
            config["gamma1"] = g1;
            config["gamma2"] = g2;
            config["xi"] = xi;
            return run_uhd(sf, {g1[0], g1[1]}, {g2[0], g2[1]}, xi, scan_str, boundary_csv, seed,
                           sink, config);
        }
        config = json{{"n_outcomes", n_det}, {"kind", kind}, {"trials", trials}};
        return run_oracle(n_det, kind, trials, seed, sink, config);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
}
