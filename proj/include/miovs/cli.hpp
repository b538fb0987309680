#pragma once

#include <cstdint>
#include <string>

#include "miovs/model.hpp"
#include "miovs/oracle.hpp"
#include "miovs/report_json.hpp"
#include "miovs/training.hpp"

namespace miovs {

/// Effective run configuration: built-in defaults, overridden by the
/// optional flat key=value config file, overridden by command-line flags.
struct RunConfig {
    GeometrySpec geom;
    FluidProperties props;
    SampleRanges ranges;
    ModelConfig model;
    TrainConfig train;
    std::size_t axial_resolution = kDefaultAxialResolution;
};

/// Parses a flat key=value file ('#' comments allowed). Unknown keys are
/// hard errors. An empty path returns the defaults.
RunConfig load_run_config(const std::string& config_path);

/// Every effective setting as ordered key/value pairs, for report provenance.
ConfigEcho config_echo(const RunConfig& cfg);

struct GenerateArgs {
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    std::size_t mesh_nodes = 1733;
    std::string out;
    RunConfig cfg;
};

struct TrainArgs {
    std::string dataset;
    std::string out;
    std::string report;  // defaults to out + ".cv.json"
    RunConfig cfg;       // train.k_folds / train.seed already carry the flags
};

struct EvaluateArgs {
    std::string model;
    std::string dataset;
    std::string report;  // training report holding the test indices
    std::string out;
};

struct InferArgs {
    std::string model;
    double p_max = 0.0;
    double t_in = 0.0;
    double v_in = 0.0;
    std::string out;
    std::string dataset;  // optional mesh source; otherwise rebuilt from geometry
    RunConfig cfg;
};

struct BenchArgs {
    std::string model;
    std::string dataset;
    std::size_t iters = 100;
    std::string out;  // optional JSON report
};

struct ValidateArgs {
    RunConfig cfg;
    std::string out;  // optional JSON report
};

int cmd_generate(const GenerateArgs& args);
int cmd_train(const TrainArgs& args);
int cmd_evaluate(const EvaluateArgs& args);
int cmd_infer(const InferArgs& args);
int cmd_bench(const BenchArgs& args);
int cmd_validate(const ValidateArgs& args);

/// CPU model, thread count and kernel backend, for report provenance.
std::string machine_descriptor();

}  // namespace miovs
