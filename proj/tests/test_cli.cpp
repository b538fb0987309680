#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

using namespace std;

namespace {

const std::string kBin = MIOVS_BIN;

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() / "miovs_cli_test";
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const {
        return (path / name).string();
    }
};

int run(const std::string& args) {
    const std::string cmd = kBin + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

std::vector<char> slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f);
    return std::vector<char>(std::istreambuf_iterator<char>(f), {});
}

}  // namespace

TEST_CASE("cli pipeline: generate, train, evaluate, infer, bench, validate") {
    TempDir dir;
    const std::string config = dir.file("tiny.cfg");
    {
        std::ofstream f(config);
        f << "# micro configuration for the pipeline test\n"
          << "model.n1 = 8\n"
          << "model.branch_hidden = 8,8\n"
          << "model.trunk_hidden = 8,8\n"
          << "model.dropout_rate = 0.1\n"
          << "train.max_epochs = 2\n"
          << "train.patience = 2\n";
    }
    const std::string ds = dir.file("tiny.miods");
    const std::string ds2 = dir.file("tiny2.miods");
    const std::string ck = dir.file("tiny.miock");
    const std::string cv = dir.file("tiny.cv.json");

    // deterministic generation: same flags, byte-identical files
    REQUIRE(run("generate --samples 12 --seed 7 --mesh-nodes 64 --out " + ds +
                " --config " + config) == 0);
    REQUIRE(run("generate --samples 12 --seed 7 --mesh-nodes 64 --out " + ds2 +
                " --config " + config) == 0);
    CHECK(slurp(ds) == slurp(ds2));

    // train twice: identical reports
    REQUIRE(run("train --dataset " + ds + " --out " + ck + " --report " + cv +
                " --folds 2 --seed 3 --config " + config) == 0);
    const auto cv_bytes = slurp(cv);
    REQUIRE(run("train --dataset " + ds + " --out " + ck + " --report " + cv +
                " --folds 2 --seed 3 --config " + config) == 0);
    CHECK(slurp(cv) == cv_bytes);

    {
        std::ifstream f(cv);
        nlohmann::json j;
        f >> j;
        CHECK(j["report_type"] == "cv_report");
        CHECK(j["fold_val_mse"].size() == 2);
        CHECK(j["test_indices"].size() == 3);  // 12 samples, 80/20 split
        CHECK(j["config"]["model.branch_hidden"] == "8,8");
    }

    const std::string eval_out = dir.file("eval.json");
    REQUIRE(run("evaluate --model " + ck + " --dataset " + ds + " --report " +
                cv + " --out " + eval_out) == 0);
    {
        std::ifstream f(eval_out);
        nlohmann::json j;
        f >> j;
        CHECK(j["report_type"] == "eval_report");
        CHECK(j["quantities"]["T"]["relative_l2_percent_per_sample"].size() == 3);
        // smoke: both finite
        CHECK(j["quantities"]["k"]["relative_l2_percent_summary"]["mean"]
                  .is_number());
    }

    // infer twice: identical CSV; mesh rebuilt from the checkpoint alone
    const std::string csv1 = dir.file("fields1.csv");
    const std::string csv2 = dir.file("fields2.csv");
    REQUIRE(run("infer --model " + ck + " --p-max 600 --t-in 564 --v-in 4.5 "
                "--out " + csv1 + " --config " + config) == 0);
    REQUIRE(run("infer --model " + ck + " --p-max 600 --t-in 564 --v-in 4.5 "
                "--out " + csv2 + " --config " + config) == 0);
    CHECK(slurp(csv1) == slurp(csv2));
    {
        std::ifstream f(csv1);
        std::string header;
        std::getline(f, header);
        CHECK(header == "x,y,T,v,k");
        std::size_t rows = 0;
        std::string line;
        while (std::getline(f, line)) {
            ++rows;
            CHECK(line.find("nan") == std::string::npos);
            CHECK(line.find("inf") == std::string::npos);
        }
        CHECK(rows == 69);  // lattice size 11 keeps 69 nodes
    }

    const std::string bench_out = dir.file("bench.json");
    REQUIRE(run("bench --model " + ck + " --dataset " + ds +
                " --iters 100 --out " + bench_out) == 0);
    {
        std::ifstream f(bench_out);
        nlohmann::json j;
        f >> j;
        CHECK(j["iters"] == 100);
        const double mean = j["forward_mean_ms"].get<double>();
        const double p50 = j["forward_p50_ms"].get<double>();
        const double p99 = j["forward_p99_ms"].get<double>();
        CHECK(mean > 0.0);
        CHECK(p50 <= mean);
        CHECK(mean <= p99 + 0.5);  // slack for a lone scheduler spike
        CHECK(j["machine"].get<std::string>().find("kernels=") !=
              std::string::npos);
    }

    CHECK(run("validate") == 0);
    const std::string nu_out = dir.file("nusselt.json");
    CHECK(run("validate --out " + nu_out) == 0);
    {
        std::ifstream f(nu_out);
        nlohmann::json j;
        f >> j;
        CHECK(j["report_type"] == "nusselt_report");
        CHECK(j["margin_percent"].get<double>() <= 1.0);
    }
}

TEST_CASE("desk-scale generation finishes within its budget") {
    TempDir dir;
    const std::string ds = dir.file("desk.miods");
    const auto t0 = std::chrono::steady_clock::now();
    REQUIRE(run("generate --samples 300 --seed 42 --mesh-nodes 200 --out " + ds) == 0);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    CHECK(secs < 10.0);
    CHECK(std::filesystem::file_size(ds) > 0);
}

TEST_CASE("cli errors exit nonzero") {
    TempDir dir;
    CHECK(run("train --dataset " + dir.file("missing.miods") + " --out " +
              dir.file("x.miock")) != 0);
    CHECK(run("generate --samples 0 --out " + dir.file("x.miods")) != 0);
    CHECK(run("nonsense") != 0);
}
