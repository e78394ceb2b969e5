// Drives the kehsim executable end to end.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path kScratch = fs::temp_directory_path() / "kehsim_cli_tests";

int run(const std::string& args) {
    const std::string cmd = std::string(KEHSIM_CLI) + " " + args + " >" +
                            (kScratch / "stdout.txt").string() + " 2>" +
                            (kScratch / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string strip_run(const std::string& manifest) {
    return manifest.substr(0, manifest.find("\nrun:"));
}

struct Scratch {
    Scratch() {
        fs::remove_all(kScratch);
        fs::create_directories(kScratch);
    }
};

}  // namespace

TEST_CASE("missing required key exits 1 and names the key") {
    Scratch s;
    std::ofstream(kScratch / "bad.yaml") << "profile:\n  amplitude_mvpp: 1000\n";
    CHECK(run("simulate --config " + (kScratch / "bad.yaml").string() + " --out-dir " +
              (kScratch / "o").string()) == 1);
    CHECK(slurp(kScratch / "stderr.txt").find("profile.frequency_hz") != std::string::npos);
}

TEST_CASE("bad flags and unknown keys exit 1") {
    Scratch s;
    CHECK(run("simulate --jobs 0") == 1);
    CHECK(run("simulate --override model.bogus=1 --out-dir " + (kScratch / "o").string()) == 1);
    CHECK(run("") == 1);
}

TEST_CASE("divergence exits 2") {
    Scratch s;
    CHECK(run("simulate --duration 1 --override profile.force_gain=1e306 --out-dir " +
              (kScratch / "o").string()) == 2);
    CHECK(slurp(kScratch / "stderr.txt").find("non-finite") != std::string::npos);
}

TEST_CASE("override switches topology and the manifest reproduces the run") {
    Scratch s;
    const fs::path a = kScratch / "a";
    const fs::path b = kScratch / "b";
    REQUIRE(run("simulate --duration 3 --override topology.kind=ConverterLess --out-dir " +
                a.string()) == 0);
    const std::string manifest = slurp(a / "manifest.yaml");
    CHECK(manifest.find("kind: ConverterLess") != std::string::npos);
    CHECK(manifest.find("command: simulate") != std::string::npos);
    CHECK(manifest.find("- trace.csv") != std::string::npos);

    REQUIRE(run("simulate --config " + (a / "manifest.yaml").string() + " --out-dir " +
                b.string()) == 0);
    CHECK(slurp(a / "trace.csv") == slurp(b / "trace.csv"));
    CHECK(slurp(a / "summary.yaml") == slurp(b / "summary.yaml"));
    CHECK(strip_run(manifest) == strip_run(slurp(b / "manifest.yaml")));
}

TEST_CASE("sweep writes one row per grid cell and compare reads it back") {
    Scratch s;
    const fs::path out = kScratch / "sweep";
    // Full default grid dimensions, shortened runs and a two-point threshold list.
    REQUIRE(run("sweep --duration 0.4 --override sim.transient_skip_s=0.2 "
                "--override tracker.sweep_grid_v=[1.0,1.2] --jobs 2 --out-dir " +
                out.string()) == 0);
    std::ifstream in(out / "sweep.csv");
    std::string line;
    int rows = -1;
    while (std::getline(in, line)) {
        ++rows;
    }
    CHECK(rows == 50);
    CHECK(fs::exists(out / "comparison.csv"));

    const fs::path cmp = kScratch / "cmp";
    REQUIRE(run("compare --from " + (out / "sweep.csv").string() + " --out-dir " + cmp.string()) ==
            0);
    CHECK(slurp(cmp / "comparison.csv") == slurp(out / "comparison.csv"));
    CHECK(slurp(kScratch / "stdout.txt").find("mean ratio at resonance") != std::string::npos);
}

TEST_CASE("iv-curve and mppt-study write their tables") {
    Scratch s;
    const fs::path iv = kScratch / "iv";
    REQUIRE(run("iv-curve --override iv.points=11 --override iv.settle_cycles=20 --out-dir " +
                iv.string()) == 0);
    CHECK(fs::exists(iv / "iv.csv"));
    CHECK(fs::exists(iv / "iv.dat"));

    const fs::path mp = kScratch / "mp";
    REQUIRE(run("mppt-study --duration 1 --override mppt.f_t_grid_hz=[5,50] "
                "--override tracker.sweep_grid_v=[1.0] --out-dir " +
                mp.string()) == 0);
    CHECK(fs::exists(mp / "tracking.csv"));
    CHECK(fs::exists(mp / "mpp_trace_5hz.csv"));
    CHECK(fs::exists(mp / "mpp_trace_50hz.csv"));
    CHECK(fs::exists(mp / "threshold_sweep.csv"));
}
