#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kCtl = REFRACTCTL_PATH;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void spit(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

int run(const std::string& args) {
    const int rc = std::system((kCtl + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(rc);
}

fs::path work_dir() {
    const fs::path dir = fs::temp_directory_path() / "refractctl_test";
    fs::create_directories(dir);
    return dir;
}

// Deterministic case2 instance with b* = 2.
const char* kDetThreshold = R"({
  "problem": {
    "gamma": 1.0, "sigma": 0.0, "q": 1.0, "beta": 4.0, "alpha": 2.0,
    "cost": {"name": "quadratic", "a": 1.0}
  },
  "mc": {"n_paths": 16, "dt": 0.05, "horizon": 25.0, "seed": 5},
  "task": "solve-threshold",
  "task_params": {"tol": 1e-4}
})";

}  // namespace

TEST_CASE("solve-threshold produces b* = 2 on the deterministic config") {
    const auto dir = work_dir();
    spit(dir / "det.json", kDetThreshold);
    const auto out = dir / "out_det";
    REQUIRE(run("--config " + (dir / "det.json").string() + " --out " + out.string()) == 0);
    const std::string csv = slurp(out / "threshold.csv");
    // header + one record
    CHECK(csv.rfind("b_star,", 0) == 0);
    const auto nl = csv.find('\n');
    const auto comma = csv.find(',', nl + 1);
    const double b_star = std::stod(csv.substr(nl + 1, comma - nl - 1));
    CHECK(b_star == doctest::Approx(2.0).epsilon(1e-3));
    CHECK(fs::exists(out / "run_manifest.json"));
}

TEST_CASE("identical config and seed give byte-identical artifacts") {
    const auto dir = work_dir();
    spit(dir / "det.json", kDetThreshold);
    const auto out1 = dir / "rep1", out2 = dir / "rep2";
    REQUIRE(run("--config " + (dir / "det.json").string() + " --out " + out1.string()) == 0);
    REQUIRE(run("--config " + (dir / "det.json").string() + " --out " + out2.string()) == 0);
    CHECK(slurp(out1 / "threshold.csv") == slurp(out2 / "threshold.csv"));
    CHECK(slurp(out1 / "run_manifest.json") == slurp(out2 / "run_manifest.json"));
}

TEST_CASE("rho-curve with constant f' emits a constant column") {
    const auto dir = work_dir();
    spit(dir / "rho.json", R"({
      "problem": {
        "gamma": 1.0, "sigma": 0.0, "q": 1.0, "beta": 2.0, "alpha": 2.0,
        "cost": {"name": "linear", "slope": 3.0}
      },
      "mc": {"n_paths": 8, "dt": 0.1, "horizon": 25.0, "seed": 1},
      "task": "rho-curve",
      "task_params": {"b_values": [-1.0, 0.0, 2.0]}
    })");
    const auto out = dir / "out_rho";
    REQUIRE(run("--config " + (dir / "rho.json").string() + " --out " + out.string()) == 0);
    std::istringstream csv(slurp(out / "rho_curve.csv"));
    std::string line;
    std::getline(csv, line);  // header
    int rows = 0;
    while (std::getline(csv, line)) {
        const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
        const double rho = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
        CHECK(rho == doctest::Approx(3.0).epsilon(1e-8));
        ++rows;
    }
    CHECK(rows == 3);
}

TEST_CASE("unknown keys are rejected with a nonzero exit") {
    const auto dir = work_dir();
    spit(dir / "bad.json", R"({
      "problem": {
        "gamma": 1.0, "sigma": 0.0, "q": 1.0, "beta": 4.0, "alpha": 2.0,
        "typo_key": 1,
        "cost": {"name": "quadratic", "a": 1.0}
      },
      "task": "solve-threshold"
    })");
    CHECK(run("--config " + (dir / "bad.json").string() + " --out " +
              (dir / "out_bad").string()) == 2);

    spit(dir / "badtask.json", R"({
      "problem": {
        "gamma": 1.0, "sigma": 0.0, "q": 1.0, "beta": 4.0, "alpha": 2.0,
        "cost": {"name": "quadratic", "a": 1.0}
      },
      "task": "solve-threshold",
      "task_params": {"tol": 1e-4, "bogus": true}
    })");
    CHECK(run("--config " + (dir / "badtask.json").string() + " --out " +
              (dir / "out_badtask").string()) == 2);

    CHECK(run("--config " + (dir / "missing.json").string()) == 2);
}

TEST_CASE("seed override: flag beats environment beats config") {
    const auto dir = work_dir();
    spit(dir / "det.json", kDetThreshold);
    const auto out_env = dir / "out_env", out_flag = dir / "out_flag";

    ::setenv("REFRACT_SEED", "99", 1);
    REQUIRE(run("--config " + (dir / "det.json").string() + " --out " +
                out_env.string()) == 0);
    CHECK(slurp(out_env / "run_manifest.json").find("\"seed\": 99") != std::string::npos);

    REQUIRE(run("--config " + (dir / "det.json").string() + " --out " +
                out_flag.string() + " --seed 123") == 0);
    CHECK(slurp(out_flag / "run_manifest.json").find("\"seed\": 123") !=
          std::string::npos);
    ::unsetenv("REFRACT_SEED");
}

TEST_CASE("verify-hjb on the Brownian model exits 0 and writes residuals") {
    const auto dir = work_dir();
    spit(dir / "hjb.json", R"({
      "problem": {
        "gamma": 0.0, "sigma": 1.4142135623730951, "q": 1.0, "beta": 1.0, "alpha": 1.0,
        "cost": {"name": "quadratic", "a": 1.0}
      },
      "task": "verify-hjb",
      "task_params": {"span": 2.0, "n": 21, "tolerance": 1e-3}
    })");
    const auto out = dir / "out_hjb";
    REQUIRE(run("--config " + (dir / "hjb.json").string() + " --out " + out.string()) == 0);
    const std::string csv = slurp(out / "residuals.csv");
    CHECK(csv.rfind("x,branch,residual", 0) == 0);
}

TEST_CASE("value and vprime tasks emit the documented columns") {
    const auto dir = work_dir();
    spit(dir / "val.json", R"({
      "problem": {
        "gamma": 1.0, "sigma": 0.0, "q": 1.0, "beta": 4.0, "alpha": 2.0,
        "cost": {"name": "quadratic", "a": 1.0}
      },
      "mc": {"n_paths": 8, "dt": 0.05, "horizon": 25.0, "seed": 2},
      "task": "value",
      "task_params": {"strategies": [{"type": "refraction", "b": 2.0},
                                     {"type": "constant", "rate": 0.0}],
                      "x0_grid": [2.0]}
    })");
    const auto out = dir / "out_val";
    REQUIRE(run("--config " + (dir / "val.json").string() + " --out " + out.string()) == 0);
    std::istringstream values(slurp(out / "values.csv"));
    std::string line;
    std::getline(values, line);
    CHECK(line == "strategy,x0,mean,se,tail_bound");
    // first row: refraction at b*=2 started at 2 is worth 8
    std::getline(values, line);
    {
        const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
        const auto c3 = line.find(',', c2 + 1);
        CHECK(std::stod(line.substr(c2 + 1, c3 - c2 - 1)) ==
              doctest::Approx(8.0).epsilon(1e-6));
    }

    spit(dir / "vp.json", R"({
      "problem": {
        "gamma": 1.0, "sigma": 0.0, "q": 1.0, "beta": 4.0, "alpha": 2.0,
        "cost": {"name": "linear", "slope": 3.0}
      },
      "mc": {"n_paths": 8, "dt": 0.05, "horizon": 30.0, "seed": 2},
      "task": "vprime",
      "task_params": {"b": "inf", "x0_grid": [0.0, 1.0]}
    })");
    const auto out2 = dir / "out_vp";
    REQUIRE(run("--config " + (dir / "vp.json").string() + " --out " + out2.string()) == 0);
    std::istringstream vp(slurp(out2 / "vprime.csv"));
    std::getline(vp, line);
    CHECK(line == "x0,b,mean,se");
    while (std::getline(vp, line)) {
        const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
        const auto c3 = line.find(',', c2 + 1);
        CHECK(std::stod(line.substr(c2 + 1, c3 - c2 - 1)) ==
              doctest::Approx(3.0).epsilon(1e-9));
    }
}
