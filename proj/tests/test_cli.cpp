// End-to-end checks of the command-line tool.  Each case spawns the real
// binary (path injected by the build as BSCCS_CLI_PATH), captures its exit
// code and streams, and inspects the files it leaves behind.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    REQUIRE(out.good());
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "bsccs_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RunResult run_cli(const std::string& args, const fs::path& scratch) {
    const fs::path out_path = scratch / "stdout.txt";
    const fs::path err_path = scratch / "stderr.txt";
    const std::string cmd = std::string(BSCCS_CLI_PATH) + " " + args + " >" +
                            out_path.string() + " 2>" + err_path.string();
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    RunResult result;
    result.exit_code = WEXITSTATUS(status);
    result.out = slurp(out_path);
    result.err = slurp(err_path);
    return result;
}

// One subject, one drug: a quiet unexposed day then an exposed day with the
// only event.  The unpenalized estimate diverges; a unit-variance gaussian
// prior pulls it to the root of 1/(1+e^b) = b, about 0.4012.
const std::string kToy = "s1\t1\t0\t\ns1\t1\t1\td1\n";

std::string sim_args(const fs::path& out_dir, std::uint64_t seed) {
    std::ostringstream cmd;
    cmd << "simulate --output-dir " << out_dir.string()
        << " --subjects 60 --drugs 3 --true-beta 0.7,0,-0.4"
        << " --baseline-mean -3.5 --seed " << seed;
    return cmd.str();
}

} // namespace

TEST_CASE("fit writes a ridge estimate for the one-drug toy") {
    const auto dir = fresh_dir("fit_toy");
    write_file(dir / "data.tsv", kToy);

    const auto r = run_cli("fit --input " + (dir / "data.tsv").string() +
                               " --output-dir " + (dir / "out").string() +
                               " --prior normal --variance 1" +
                               " --epsilon 1e-9 --max-cycles 2000",
                           dir);
    CAPTURE(r.err);
    REQUIRE(r.exit_code == 0);
    REQUIRE(r.out.find("converged=1") != std::string::npos);

    std::istringstream coef(slurp(dir / "out" / "coefficients.tsv"));
    std::string line;
    REQUIRE(std::getline(coef, line));
    REQUIRE(line == "drug_id\tbeta_map");
    REQUIRE(std::getline(coef, line));
    REQUIRE(line.substr(0, 3) == "d1\t");
    REQUIRE_THAT(std::stod(line.substr(3)),
                 Catch::Matchers::WithinAbs(0.4012, 5e-4));
    REQUIRE(!std::getline(coef, line));
    REQUIRE(fs::exists(dir / "out" / "manifest.tsv"));
}

TEST_CASE("a tight double-exponential prior zeroes the toy coefficient") {
    const auto dir = fresh_dir("fit_lasso");
    write_file(dir / "data.tsv", kToy);

    const auto r = run_cli("fit --input " + (dir / "data.tsv").string() +
                               " --output-dir " + (dir / "out").string() +
                               " --prior laplace --variance 0.5",
                           dir);
    CAPTURE(r.err);
    REQUIRE(r.exit_code == 0);
    REQUIRE(slurp(dir / "out" / "coefficients.tsv") ==
            "drug_id\tbeta_map\nd1\t0\n");
}

TEST_CASE("a missing input file exits 1 and writes nothing") {
    const auto dir = fresh_dir("fit_missing");
    const auto r = run_cli("fit --input " + (dir / "absent.tsv").string() +
                               " --output-dir " + (dir / "out").string(),
                           dir);
    REQUIRE(r.exit_code == 1);
    REQUIRE(r.err.find("error:") != std::string::npos);
    REQUIRE(!fs::exists(dir / "out" / "coefficients.tsv"));
}

TEST_CASE("a rejected option value exits 1") {
    const auto dir = fresh_dir("fit_badflag");
    write_file(dir / "data.tsv", kToy);
    const auto r = run_cli("fit --input " + (dir / "data.tsv").string() +
                               " --prior cauchy",
                           dir);
    REQUIRE(r.exit_code == 1);
    REQUIRE(r.err.find("error:") != std::string::npos);
}

TEST_CASE("hitting the cycle cap without convergence exits 3") {
    const auto dir = fresh_dir("fit_cap");
    write_file(dir / "data.tsv", kToy);

    const auto r = run_cli("fit --input " + (dir / "data.tsv").string() +
                               " --output-dir " + (dir / "out").string() +
                               " --prior none --max-cycles 3",
                           dir);
    REQUIRE(r.exit_code == 3);
    REQUIRE(r.out.find("converged=0") != std::string::npos);
    REQUIRE(r.err.find("cycle cap") != std::string::npos);
    // the partial estimate is still written for inspection
    REQUIRE(fs::exists(dir / "out" / "coefficients.tsv"));
}

TEST_CASE("simulate is reproducible for a seed and differs across seeds") {
    const auto base = fresh_dir("simulate");
    const auto a = run_cli(sim_args(base / "a", 11), base);
    const auto b = run_cli(sim_args(base / "b", 11), base);
    const auto c = run_cli(sim_args(base / "c", 12), base);
    CAPTURE(a.err, b.err, c.err);
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    REQUIRE(c.exit_code == 0);
    REQUIRE(a.out.find("kept=") != std::string::npos);

    REQUIRE(slurp(base / "a" / "data.tsv") == slurp(base / "b" / "data.tsv"));
    REQUIRE(slurp(base / "a" / "truth.tsv") == slurp(base / "b" / "truth.tsv"));
    REQUIRE(slurp(base / "a" / "data.tsv") != slurp(base / "c" / "data.tsv"));

    std::istringstream truth(slurp(base / "a" / "truth.tsv"));
    std::string line;
    REQUIRE(std::getline(truth, line));
    REQUIRE(line == "drug_id\ttrue_beta");
    REQUIRE(std::getline(truth, line));
    REQUIRE(line.substr(0, 5) == "d000\t");
    REQUIRE(std::stod(line.substr(5)) == 0.7);
}

TEST_CASE("refitting the same file reproduces coefficients byte for byte") {
    const auto base = fresh_dir("fit_rerun");
    REQUIRE(run_cli(sim_args(base / "sim", 11), base).exit_code == 0);
    const std::string input = (base / "sim" / "data.tsv").string();

    const std::string flags = " --prior laplace --variance 0.5 --epsilon 1e-7";
    const auto r1 = run_cli("fit --input " + input + " --output-dir " +
                                (base / "out1").string() + flags,
                            base);
    const auto r2 = run_cli("fit --input " + input + " --output-dir " +
                                (base / "out2").string() + flags,
                            base);
    CAPTURE(r1.err, r2.err);
    REQUIRE(r1.exit_code == 0);
    REQUIRE(r2.exit_code == 0);
    REQUIRE(slurp(base / "out1" / "coefficients.tsv") ==
            slurp(base / "out2" / "coefficients.tsv"));
}

TEST_CASE("cross-validation writes a deterministic grid table") {
    const auto base = fresh_dir("cv");
    REQUIRE(run_cli(sim_args(base / "sim", 11), base).exit_code == 0);
    const std::string input = (base / "sim" / "data.tsv").string();

    const std::string flags =
        " --k 3 --grid 0.05,0.5 --seed 5 --epsilon 1e-6 --max-cycles 3000";
    const auto r1 = run_cli("cv --input " + input + " --output-dir " +
                                (base / "out1").string() + flags,
                            base);
    CAPTURE(r1.err);
    REQUIRE(r1.exit_code == 0);
    REQUIRE(r1.out.find("selected_variance=") != std::string::npos);

    std::istringstream table(slurp(base / "out1" / "cv.tsv"));
    std::string line;
    REQUIRE(std::getline(table, line));
    REQUIRE(line == "variance\tmean_predictive_ll\tfold_0\tfold_1\tfold_2");
    REQUIRE(std::getline(table, line));
    REQUIRE(std::stod(line.substr(0, line.find('\t'))) == 0.05);
    REQUIRE(std::getline(table, line));
    REQUIRE(std::stod(line.substr(0, line.find('\t'))) == 0.5);
    REQUIRE(!std::getline(table, line));

    // a second run, even with a worker pool, reproduces the table exactly
    const auto r2 = run_cli("cv --input " + input + " --output-dir " +
                                (base / "out2").string() + flags + " --threads 2",
                            base);
    CAPTURE(r2.err);
    REQUIRE(r2.exit_code == 0);
    REQUIRE(slurp(base / "out1" / "cv.tsv") == slurp(base / "out2" / "cv.tsv"));
}

TEST_CASE("cross-validation refuses a flat prior") {
    const auto base = fresh_dir("cv_flat");
    write_file(base / "data.tsv", kToy);
    const auto r = run_cli("cv --input " + (base / "data.tsv").string() +
                               " --output-dir " + (base / "out").string() +
                               " --prior none",
                           base);
    REQUIRE(r.exit_code == 1);
    REQUIRE(r.err.find("prior") != std::string::npos);
}

TEST_CASE("raw day intervals become constant-exposure eras") {
    const auto dir = fresh_dir("ingest");
    write_file(dir / "obs.tsv", "p\t0\t20\n");
    write_file(dir / "exp.tsv", "p\tA\t0\t10\np\tB\t5\t15\n");
    write_file(dir / "ev.tsv", "p\t7\n");

    const auto r = run_cli("ingest --observation " + (dir / "obs.tsv").string() +
                               " --exposures " + (dir / "exp.tsv").string() +
                               " --events " + (dir / "ev.tsv").string() +
                               " --output-dir " + (dir / "out").string(),
                           dir);
    CAPTURE(r.err);
    REQUIRE(r.exit_code == 0);
    REQUIRE(r.out.find("subjects=1") != std::string::npos);
    REQUIRE(r.out.find("dropped_intervals=0") != std::string::npos);
    REQUIRE(slurp(dir / "out" / "eras.tsv") ==
            "p\t5\t0\tA\np\t5\t1\tA B\np\t5\t0\tB\np\t5\t0\t\n");
}

TEST_CASE("an event outside the observation period is rejected") {
    const auto dir = fresh_dir("ingest_bad");
    write_file(dir / "obs.tsv", "p\t0\t20\n");
    write_file(dir / "exp.tsv", "p\tA\t0\t10\n");
    write_file(dir / "ev.tsv", "p\t25\n");

    const auto r = run_cli("ingest --observation " + (dir / "obs.tsv").string() +
                               " --exposures " + (dir / "exp.tsv").string() +
                               " --events " + (dir / "ev.tsv").string() +
                               " --output-dir " + (dir / "out").string(),
                           dir);
    REQUIRE(r.exit_code == 1);
    REQUIRE(r.err.find("'p'") != std::string::npos);
    REQUIRE(!fs::exists(dir / "out" / "eras.tsv"));
}

TEST_CASE("bootstrap tables are stable across reruns and thread counts") {
    const auto base = fresh_dir("bootstrap");
    REQUIRE(run_cli(sim_args(base / "sim", 11), base).exit_code == 0);
    const std::string input = (base / "sim" / "data.tsv").string();

    const std::string flags =
        " --replicates 5 --seed 3 --prior laplace --variance 0.5"
        " --epsilon 1e-6 --max-cycles 3000";
    const auto r1 = run_cli("bootstrap --input " + input + " --output-dir " +
                                (base / "out1").string() + flags,
                            base);
    CAPTURE(r1.err);
    REQUIRE(r1.exit_code == 0);

    const std::string intervals = slurp(base / "out1" / "intervals.tsv");
    std::istringstream table(intervals);
    std::string line;
    REQUIRE(std::getline(table, line));
    REQUIRE(line == "drug_id\tbeta_map\tci_lower\tci_upper\tp_hat");
    int rows = 0;
    while (std::getline(table, line)) {
        REQUIRE(line.substr(0, 2) == "d0");
        ++rows;
    }
    REQUIRE(rows == 3);
    REQUIRE(slurp(base / "out1" / "bootstrap.tsv")
                .find("drug_id\tbeta_map\tci_lower\tci_upper\tp_hat") == 0);

    const auto r2 = run_cli("bootstrap --input " + input + " --output-dir " +
                                (base / "out2").string() + flags + " --threads 2",
                            base);
    CAPTURE(r2.err);
    REQUIRE(r2.exit_code == 0);
    REQUIRE(intervals == slurp(base / "out2" / "intervals.tsv"));
    REQUIRE(slurp(base / "out1" / "bootstrap.tsv") ==
            slurp(base / "out2" / "bootstrap.tsv"));
}

TEST_CASE("bench reports the three update routes on a file input") {
    const auto base = fresh_dir("bench");
    REQUIRE(run_cli(sim_args(base / "sim", 11), base).exit_code == 0);

    const auto r = run_cli("bench --input " +
                               (base / "sim" / "data.tsv").string() +
                               " --output-dir " + (base / "out").string() +
                               " --partitions 2 --threads 2" +
                               " --epsilon 1e-4 --max-cycles 200",
                           base);
    CAPTURE(r.err);
    REQUIRE(r.exit_code == 0);
    REQUIRE(r.out.find("dense/sparse=") != std::string::npos);

    std::istringstream table(slurp(base / "out" / "bench.tsv"));
    std::string line;
    REQUIRE(std::getline(table, line));
    REQUIRE(line == "route\tseconds\tcycles\tconverged");
    REQUIRE(std::getline(table, line));
    REQUIRE(line.substr(0, 6) == "dense\t");
    REQUIRE(std::getline(table, line));
    REQUIRE(line.substr(0, 7) == "sparse\t");
    REQUIRE(std::getline(table, line));
    REQUIRE(line.substr(0, 9) == "parallel\t");
    REQUIRE(!std::getline(table, line));
}
