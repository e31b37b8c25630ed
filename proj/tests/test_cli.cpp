#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string binary_path() {
    const char* env = std::getenv("CONTILORA_BIN");
    REQUIRE_MESSAGE(env != nullptr, "CONTILORA_BIN must point at the CLI binary");
    return env;
}

struct CmdResult {
    int exit_code = -1;
    std::string output;
};

CmdResult run_cmd(const std::string& args) {
    const fs::path log = fs::temp_directory_path() / "contilora_cli_out.txt";
    const std::string cmd = binary_path() + " " + args + " > " + log.string() + " 2>&1";
    const int raw = std::system(cmd.c_str());
    CmdResult r;
    r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    std::ifstream is(log);
    std::stringstream ss;
    ss << is.rdbuf();
    r.output = ss.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE_MESSAGE(is.good(), "missing file: " << p.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_config(const fs::path& file, const fs::path& out_dir,
                  const std::string& strategies = "[\"sequential_ft\"]") {
    std::ofstream os(file);
    os << R"({"schema_version":1,"suite":"regression","n_tasks":2,)"
       << R"("strategies":)" << strategies << R"(,"seeds":[0],)"
       << R"("train_size":96,"eval_size":32,)"
       << R"("output_dir":")" << out_dir.string() << R"(",)"
       << R"("train":{"epochs_per_task":3,"learning_rate":0.005,"lora_rank":2,)"
       << R"("stage2_fraction":0.5,"lambda_orth":1.0,"batch_size":32}})";
}

}  // namespace

TEST_CASE("missing config exits with usage code and names the path") {
    const CmdResult r = run_cmd("run /definitely/not/here.json");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("/definitely/not/here.json") != std::string::npos);
}

TEST_CASE("unknown subcommand is a usage error") {
    const CmdResult r = run_cmd("frobnicate");
    CHECK(r.exit_code == 2);
}

TEST_CASE("run executes a small grid and writes consolidated metrics") {
    const fs::path dir = scratch_dir("contilora_cli_run");
    const fs::path cfg = dir / "config.json";
    const fs::path out = dir / "out";
    write_config(cfg, out, R"(["sequential_ft","aod_svd"])");

    const CmdResult r = run_cmd("run " + cfg.string());
    CHECK_MESSAGE(r.exit_code == 0, r.output);
    CHECK(fs::exists(out / "metrics.json"));
    const std::string metrics = slurp(out / "metrics.json");
    CHECK(metrics.find("\"aod_svd\"") != std::string::npos);
    CHECK(metrics.find("\"sequential_ft\"") != std::string::npos);
    for (const char* strat : {"sequential_ft", "aod_svd"}) {
        const fs::path cell = out / "order_default" / strat / "seed_0";
        CHECK(fs::exists(cell / "perf_matrix.csv"));
        CHECK(fs::exists(cell / "task_0" / "manifest.json"));
        CHECK(fs::exists(cell / "task_1" / "manifest.json"));
    }

    SUBCASE("rerunning the same config reproduces metrics byte for byte") {
        const std::string first = slurp(out / "metrics.json");
        const std::string first_perf =
            slurp(out / "order_default" / "aod_svd" / "seed_0" / "perf_matrix.csv");
        const CmdResult again = run_cmd("run --force " + cfg.string());
        CHECK_MESSAGE(again.exit_code == 0, again.output);
        CHECK(slurp(out / "metrics.json") == first);
        CHECK(slurp(out / "order_default" / "aod_svd" / "seed_0" / "perf_matrix.csv") ==
              first_perf);
    }

    SUBCASE("a non-empty output dir is refused without --force") {
        const CmdResult refuse = run_cmd("run " + cfg.string());
        CHECK(refuse.exit_code == 2);
    }

    SUBCASE("analyze emits similarity matrices and curves for every cell") {
        const CmdResult an = run_cmd("analyze " + out.string() + " --rank 2");
        CHECK_MESSAGE(an.exit_code == 0, an.output);
        const fs::path analysis = out / "order_default" / "aod_svd" / "seed_0" / "analysis";
        for (const char* f : {"similarity_A.csv", "similarity_B.csv", "energy_curve.csv",
                              "reconstruction_curve.csv"}) {
            CHECK(fs::exists(analysis / f));
        }
        // Diagonal of a similarity matrix starts at 1.
        const std::string sim = slurp(analysis / "similarity_A.csv");
        CHECK(sim.rfind("1", 0) == 0);

        // Re-running analyze is idempotent.
        const std::string before = slurp(analysis / "similarity_B.csv");
        const CmdResult an2 = run_cmd("analyze " + out.string() + " --rank 2");
        CHECK(an2.exit_code == 0);
        CHECK(slurp(analysis / "similarity_B.csv") == before);
    }

    SUBCASE("report aggregates runs into means and deviations") {
        const CmdResult rep = run_cmd("report " + out.string());
        CHECK_MESSAGE(rep.exit_code == 0, rep.output);
        CHECK(fs::exists(out / "report.csv"));
        const std::string csv = slurp(out / "report.csv");
        CHECK(csv.find("order,strategy,n,last_mean") != std::string::npos);
        CHECK(csv.find("default,aod_svd,1,") != std::string::npos);
        CHECK(rep.output.find("aod_svd") != std::string::npos);
    }
}

TEST_CASE("report computes the sample statistics across directories") {
    const fs::path dir = scratch_dir("contilora_cli_report");
    // Two synthetic run dirs holding one cell each with last = 1 and 3.
    for (int i = 0; i < 2; ++i) {
        const fs::path rd = dir / ("run_" + std::to_string(i));
        fs::create_directories(rd);
        std::ofstream os(rd / "metrics.json");
        os << R"({"schema_version":1,"suite":"regression","n_tasks":2,"cells":[)"
           << R"({"order":"default","strategy":"aod_svd","seed":)" << i
           << R"(,"last":)" << (1 + 2 * i) << R"(,"avg":0.5,"bwt":-0.25}]})";
    }
    const CmdResult rep =
        run_cmd("report " + (dir / "run_0").string() + " " + (dir / "run_1").string());
    CHECK_MESSAGE(rep.exit_code == 0, rep.output);
    const std::string csv = slurp(dir / "run_0" / "report.csv");
    // mean 2, sample std sqrt(2).
    CHECK(csv.find("default,aod_svd,2,2,1.4142135623730951") != std::string::npos);
}

TEST_CASE("report on a directory without metrics is a usage error") {
    const fs::path dir = scratch_dir("contilora_cli_empty");
    const CmdResult rep = run_cmd("report " + dir.string());
    CHECK(rep.exit_code == 2);
}
