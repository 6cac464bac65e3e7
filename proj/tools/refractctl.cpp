#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "refract/resolvent.hpp"
#include "refract/threshold.hpp"
#include "refract/verify.hpp"

using json = nlohmann::json;
using namespace refract;

namespace {

void reject_unknown(const json& obj, const std::vector<std::string>& allowed,
                    const std::string& path) {
    for (const auto& [key, _] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw std::runtime_error("unknown key '" + path + key + "'");
    }
}

JumpTerm parse_jump(const json& j, const std::string& path) {
    reject_unknown(j, {"side", "kind", "rate", "decay", "size"}, path);
    JumpTerm t;
    const std::string side = j.at("side").get<std::string>();
    if (side == "up")
        t.side = JumpSide::up;
    else if (side == "down")
        t.side = JumpSide::down;
    else
        throw std::runtime_error(path + "side must be 'up' or 'down'");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "exponential") {
        t.kind = JumpKind::exponential;
        t.decay = j.at("decay").get<double>();
    } else if (kind == "point_mass") {
        t.kind = JumpKind::point_mass;
        t.size = j.at("size").get<double>();
    } else {
        throw std::runtime_error(path + "kind must be 'exponential' or 'point_mass'");
    }
    t.rate = j.at("rate").get<double>();
    return t;
}

CostSpec parse_cost(const json& j, const std::string& path) {
    reject_unknown(j, {"name", "a", "b", "c", "slope", "intercept"}, path);
    const std::string name = j.at("name").get<std::string>();
    if (name == "quadratic")
        return CostSpec::quadratic(j.value("a", 1.0), j.value("b", 0.0),
                                   j.value("c", 0.0));
    if (name == "linear")
        return CostSpec::linear(j.at("slope").get<double>(), j.value("intercept", 0.0));
    throw std::runtime_error(path + "name must be 'quadratic' or 'linear'");
}

Strategy parse_strategy(const json& j, const std::string& path) {
    reject_unknown(j, {"type", "b", "rate"}, path);
    const std::string type = j.at("type").get<std::string>();
    if (type == "refraction") {
        if (j.at("b").is_string()) {
            const std::string s = j.at("b").get<std::string>();
            if (s == "inf") return Strategy::refraction(kInf);
            if (s == "-inf") return Strategy::refraction(-kInf);
            throw std::runtime_error(path + "b string must be 'inf' or '-inf'");
        }
        return Strategy::refraction(j.at("b").get<double>());
    }
    if (type == "constant") return Strategy::constant(j.at("rate").get<double>());
    throw std::runtime_error(path + "type must be 'refraction' or 'constant'");
}

struct Config {
    ProblemSpec spec;
    MonteCarloConfig mc;
    std::string task;
    json params;  // task-specific, already key-checked per task
    std::string out_dir = "out";
    json resolved;  // full echo with defaults
};

Config parse_config(const json& root) {
    reject_unknown(root, {"problem", "mc", "task", "task_params", "out"}, "");
    Config cfg;

    const json& p = root.at("problem");
    reject_unknown(p, {"gamma", "sigma", "jumps", "q", "beta", "alpha", "cost"},
                   "problem.");
    cfg.spec.model.gamma = p.value("gamma", 0.0);
    cfg.spec.model.sigma = p.value("sigma", 0.0);
    if (p.contains("jumps")) {
        int i = 0;
        for (const auto& jt : p.at("jumps"))
            cfg.spec.model.jumps.terms.push_back(
                parse_jump(jt, "problem.jumps[" + std::to_string(i++) + "]."));
    }
    cfg.spec.q = p.at("q").get<double>();
    cfg.spec.beta = p.at("beta").get<double>();
    cfg.spec.alpha = p.at("alpha").get<double>();
    cfg.spec.cost = parse_cost(p.at("cost"), "problem.cost.");
    cfg.spec.validate();

    const json m = root.value("mc", json::object());
    reject_unknown(m, {"n_paths", "dt", "horizon", "seed", "cert_theta"}, "mc.");
    cfg.mc.n_paths = m.value("n_paths", 10000L);
    cfg.mc.grid.dt = m.value("dt", 0.01);
    cfg.mc.grid.horizon = m.value("horizon", 10.0);
    cfg.mc.seed = m.value("seed", 0UL);
    cfg.mc.cert_theta = m.value("cert_theta", 0.0);
    cfg.mc.validate();

    cfg.task = root.at("task").get<std::string>();
    cfg.params = root.value("task_params", json::object());
    cfg.out_dir = root.value("out", std::string("out"));

    // Echo fully-resolved config into the manifest.
    json jumps = json::array();
    for (const auto& t : cfg.spec.model.jumps.terms) {
        json jt{{"side", t.side == JumpSide::up ? "up" : "down"},
                {"kind", t.kind == JumpKind::exponential ? "exponential" : "point_mass"},
                {"rate", t.rate}};
        if (t.kind == JumpKind::exponential)
            jt["decay"] = t.decay;
        else
            jt["size"] = t.size;
        jumps.push_back(jt);
    }
    cfg.resolved = {
        {"problem",
         {{"gamma", cfg.spec.model.gamma},
          {"sigma", cfg.spec.model.sigma},
          {"jumps", jumps},
          {"q", cfg.spec.q},
          {"beta", cfg.spec.beta},
          {"alpha", cfg.spec.alpha},
          {"cost", root.at("problem").at("cost")}}},
        {"mc",
         {{"n_paths", cfg.mc.n_paths},
          {"dt", cfg.mc.grid.dt},
          {"horizon", cfg.mc.grid.horizon},
          {"seed", cfg.mc.seed},
          {"cert_theta", cfg.mc.cert_theta}}},
        {"task", cfg.task},
        {"task_params", cfg.params},
        {"out", cfg.out_dir}};
    return cfg;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

struct ArtifactWriter {
    std::filesystem::path dir;
    std::map<std::string, std::string> hashes;

    void write(const std::string& name, const std::string& content) {
        std::ofstream out(dir / name, std::ios::binary);
        out << content;
        std::ostringstream h;
        h << std::hex << fnv1a(content);
        hashes[name] = h.str();
    }
};

SnModel sn_from_problem(const LevyModel& model) {
    for (const auto& t : model.jumps.terms)
        if (t.side == JumpSide::up)
            throw std::runtime_error("task requires a spectrally negative model");
    SnModel sn;
    sn.sigma = model.sigma;
    sn.drift = model.natural_drift();
    sn.down_jumps = model.jumps;
    return sn;
}

// rho(b) = v'_b(b) for the spectrally negative model, via the resolvent.
double sn_rho(const SnModel& sn, const ProblemSpec& spec, double b) {
    ResolventKernel k(sn, spec.q, b, spec.alpha);
    return resolvent_apply(k, [&](double y) { return spec.cost.fp(y); }, b);
}

double sn_threshold(const SnModel& sn, const ProblemSpec& spec, double tol) {
    double lo = -1.0, hi = 1.0;
    while (sn_rho(sn, spec, lo) > spec.beta) {
        hi = lo;
        lo *= 2.0;
        if (lo < -1e6) throw std::runtime_error("threshold bracket failed (low)");
    }
    while (sn_rho(sn, spec, hi) < spec.beta) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e6) throw std::runtime_error("threshold bracket failed (high)");
    }
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (sn_rho(sn, spec, mid) >= spec.beta ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

int run_task(const Config& cfg, ArtifactWriter& art) {
    const ProblemSpec& spec = cfg.spec;
    const MonteCarloConfig& mc = cfg.mc;
    const json& tp = cfg.params;

    if (cfg.task == "solve-threshold") {
        reject_unknown(tp, {"tol"}, "task_params.");
        const double tol = tp.value("tol", 1e-3);
        const auto res = solve_threshold(spec, mc, tol);
        std::ostringstream os;
        os << "b_star,bracket_lo,bracket_hi,iterations,residual,rho_se,b_se\n"
           << fmt(res.b_star) << "," << fmt(res.bracket_lo) << ","
           << fmt(res.bracket_hi) << "," << res.iterations << ","
           << fmt(res.residual) << "," << fmt(res.rho_se) << "," << fmt(res.b_se)
           << "\n";
        art.write("threshold.csv", os.str());
        return std::isfinite(res.b_star) && !res.has_bracket ? 1 : 0;
    }

    if (cfg.task == "rho-curve") {
        reject_unknown(tp, {"b_values"}, "task_params.");
        const auto bs = tp.at("b_values").get<std::vector<double>>();
        const auto curve = estimate_rho_curve(spec, bs, mc);
        std::ostringstream os;
        os << "b,rho_hat,se\n";
        for (std::size_t i = 0; i < bs.size(); ++i)
            os << fmt(curve.b_values[i]) << "," << fmt(curve.rho_hat[i]) << ","
               << fmt(curve.se[i]) << "\n";
        art.write("rho_curve.csv", os.str());
        return 0;
    }

    if (cfg.task == "value") {
        reject_unknown(tp, {"strategies", "x0_grid"}, "task_params.");
        const auto xs = tp.at("x0_grid").get<std::vector<double>>();
        std::ostringstream os;
        os << "strategy,x0,mean,se,tail_bound\n";
        int i = 0;
        for (const auto& sj : tp.at("strategies")) {
            const Strategy s =
                parse_strategy(sj, "task_params.strategies[" + std::to_string(i++) + "].");
            for (double x0 : xs) {
                const auto v = estimate_value(spec, s, x0, mc);
                os << s.name() << "," << fmt(x0) << "," << fmt(v.mean) << ","
                   << fmt(v.se) << "," << fmt(v.tail_bound) << "\n";
            }
        }
        art.write("values.csv", os.str());
        return 0;
    }

    if (cfg.task == "vprime") {
        reject_unknown(tp, {"b", "x0_grid"}, "task_params.");
        double b;
        if (tp.at("b").is_string()) {
            const std::string s = tp.at("b").get<std::string>();
            b = s == "inf" ? kInf : s == "-inf" ? -kInf : throw std::runtime_error(
                "task_params.b string must be 'inf' or '-inf'");
        } else {
            b = tp.at("b").get<double>();
        }
        std::ostringstream os;
        os << "x0,b,mean,se\n";
        for (double x0 : tp.at("x0_grid").get<std::vector<double>>()) {
            const auto v = estimate_value_derivative(spec, b, x0, mc);
            os << fmt(x0) << "," << fmt(b) << "," << fmt(v.mean) << "," << fmt(v.se)
               << "\n";
        }
        art.write("vprime.csv", os.str());
        return 0;
    }

    if (cfg.task == "compare") {
        reject_unknown(tp, {"b_star", "x0_grid", "rivals"}, "task_params.");
        std::vector<Strategy> rivals;
        int i = 0;
        for (const auto& rj : tp.at("rivals"))
            rivals.push_back(
                parse_strategy(rj, "task_params.rivals[" + std::to_string(i++) + "]."));
        const auto rep = compare_strategies(spec, tp.at("b_star").get<double>(),
                                            tp.at("x0_grid").get<std::vector<double>>(),
                                            rivals, mc);
        std::ostringstream os;
        os << "strategy,x0,mean,se,diff_vs_ref,diff_se,flagged\n";
        for (const auto& r : rep.rows)
            os << r.strategy << "," << fmt(r.x0) << "," << fmt(r.mean) << ","
               << fmt(r.se) << "," << fmt(r.diff_vs_ref) << "," << fmt(r.diff_se)
               << "," << (r.flagged ? 1 : 0) << "\n";
        art.write("comparison.csv", os.str());
        return rep.any_flagged ? 1 : 0;
    }

    if (cfg.task == "sandwich") {
        reject_unknown(tp, {"b_star", "x0", "eps"}, "task_params.");
        const auto rep =
            sandwich_check(spec, tp.at("b_star").get<double>(),
                           tp.at("x0").get<double>(), tp.at("eps").get<double>(), mc);
        std::ostringstream os;
        os << "eps,lower,mid,upper,lower_se,mid_se,upper_se,margin_low,margin_high,"
              "chain_holds\n"
           << fmt(rep.eps) << "," << fmt(rep.lower) << "," << fmt(rep.mid) << ","
           << fmt(rep.upper) << "," << fmt(rep.lower_se) << "," << fmt(rep.mid_se)
           << "," << fmt(rep.upper_se) << "," << fmt(rep.margin_low) << ","
           << fmt(rep.margin_high) << "," << (rep.chain_holds ? 1 : 0) << "\n";
        art.write("sandwich.csv", os.str());
        return rep.chain_holds ? 0 : 1;
    }

    if (cfg.task == "scale-table") {
        reject_unknown(tp, {"x_lo", "x_hi", "n"}, "task_params.");
        const SnModel sn = sn_from_problem(spec.model);
        const ScaleFn W(sn, spec.q, 0.0), WW(sn, spec.q, spec.alpha);
        const double lo = tp.value("x_lo", 0.0), hi = tp.value("x_hi", 10.0);
        const int n = tp.value("n", 101);
        std::ostringstream os;
        os << "x,W,Wp,WW,WWp\n";
        for (int i = 0; i < n; ++i) {
            const double x = lo + (hi - lo) * i / (n - 1);
            const auto w = W(x);
            const auto ww = WW(x);
            os << fmt(x) << "," << fmt(w.value) << "," << fmt(w.derivative) << ","
               << fmt(ww.value) << "," << fmt(ww.derivative) << "\n";
        }
        art.write("scale_table.csv", os.str());
        return 0;
    }

    if (cfg.task == "resolvent-table") {
        reject_unknown(tp, {"b", "x_lo", "x_hi", "nx", "y_lo", "y_hi", "ny"},
                       "task_params.");
        const SnModel sn = sn_from_problem(spec.model);
        const ResolventKernel k(sn, spec.q, tp.value("b", 0.0), spec.alpha);
        const double xlo = tp.value("x_lo", -1.0), xhi = tp.value("x_hi", 1.0);
        const double ylo = tp.value("y_lo", -3.0), yhi = tp.value("y_hi", 3.0);
        const int nx = tp.value("nx", 5), ny = tp.value("ny", 25);
        std::ostringstream os;
        os << "x,y,R,dRdx\n";
        for (int i = 0; i < nx; ++i) {
            const double x = nx == 1 ? xlo : xlo + (xhi - xlo) * i / (nx - 1);
            for (int j = 0; j < ny; ++j) {
                const double y = ny == 1 ? ylo : ylo + (yhi - ylo) * j / (ny - 1);
                os << fmt(x) << "," << fmt(y) << "," << fmt(k.density(x, y)) << ","
                   << fmt(k.density_dx(x, y)) << "\n";
            }
        }
        art.write("resolvent_table.csv", os.str());
        return 0;
    }

    if (cfg.task == "verify-hjb") {
        reject_unknown(tp, {"b_star", "span", "n", "tolerance"}, "task_params.");
        const SnModel sn = sn_from_problem(spec.model);
        const double tol = tp.value("tolerance", 1e-3);
        const double bs = tp.contains("b_star") ? tp.at("b_star").get<double>()
                                                : sn_threshold(sn, spec, 1e-10);
        const ResolventKernel k(sn, spec.q, bs, spec.alpha);
        auto fp = [&](double y) { return spec.cost.fp(y); };
        auto f = [&](double y) { return spec.cost.f(y); };
        auto ind = [&](double y) { return y > bs ? 1.0 : 0.0; };
        auto v = [&](double x) {
            return resolvent_apply(k, f, x) +
                   spec.alpha * spec.beta * resolvent_apply(k, ind, x);
        };
        auto v1 = [&](double x) { return resolvent_apply(k, fp, x); };
        auto v2 = [&](double x) {
            return resolvent_apply_dx(k, fp, x == bs ? x + 1e-9 : x);
        };
        const double span = tp.value("span", 3.0);
        const int n = tp.value("n", 41);
        std::vector<double> grid(n);
        for (int i = 0; i < n; ++i) grid[i] = bs - span + 2.0 * span * i / (n - 1);
        const auto mart = check_martingale_identities(spec, bs, v, v1, v2, grid, tol);
        const auto hjb = check_hjb_inequality(spec, v, v1, v2, grid, tol);
        std::ostringstream os;
        os << "x,branch,residual\n";
        for (std::size_t i = 0; i < mart.grid.size(); ++i)
            os << fmt(mart.grid[i]) << "," << mart.branch[i] << ","
               << fmt(mart.residuals[i]) << "\n";
        for (std::size_t i = 0; i < hjb.grid.size(); ++i)
            os << fmt(hjb.grid[i]) << ",hjb," << fmt(hjb.residuals[i]) << "\n";
        art.write("residuals.csv", os.str());
        return mart.pass && hjb.pass ? 0 : 1;
    }

    throw std::runtime_error("unknown task '" + cfg.task + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"refracted Levy control experiments"};
    std::string config_path, out_dir;
    long long seed_flag = -1;
    int threads = 1;
    app.add_option("--config", config_path, "config file (JSON)")->required();
    app.add_option("--out", out_dir, "output directory (overrides config)");
    app.add_option("--seed", seed_flag, "seed override");
    app.add_option("--threads", threads, "worker threads (orchestration is sequential)");
    CLI11_PARSE(app, argc, argv);

    try {
        std::ifstream in(config_path);
        if (!in) throw std::runtime_error("cannot open config: " + config_path);
        json root = json::parse(in);
        Config cfg = parse_config(root);
        if (!out_dir.empty()) cfg.out_dir = out_dir;

        // Seed priority: --seed flag, REFRACT_SEED env, config value.
        if (seed_flag >= 0) {
            cfg.mc.seed = static_cast<std::uint64_t>(seed_flag);
        } else if (const char* env = std::getenv("REFRACT_SEED")) {
            cfg.mc.seed = std::stoull(env);
        }
        cfg.resolved["mc"]["seed"] = cfg.mc.seed;

        std::filesystem::create_directories(cfg.out_dir);
        ArtifactWriter art{cfg.out_dir, {}};
        const int status = run_task(cfg, art);

        json manifest{{"config", cfg.resolved},
                      {"seed", cfg.mc.seed},
                      {"threads", threads},
                      {"exit_status", status},
                      {"artifacts", art.hashes}};
        std::ofstream mout(std::filesystem::path(cfg.out_dir) / "run_manifest.json");
        mout << manifest.dump(2) << "\n";
        return status;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
