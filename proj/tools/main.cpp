#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "miovs/cli.hpp"

using namespace miovs;

int main(int argc, char** argv) {
    CLI::App app{"miovs: operator-network virtual sensing for PWR subchannels"};
    app.require_subcommand(1);

    std::string config_path;

    // generate
    auto* gen = app.add_subcommand(
        "generate", "Generate a dataset from the reduced-order model");
    GenerateArgs gen_args;
    gen->add_option("--samples", gen_args.samples, "Number of samples")->required();
    gen->add_option("--seed", gen_args.seed, "Generation seed")->default_val(0);
    gen->add_option("--mesh-nodes", gen_args.mesh_nodes,
                    "Target node count on the center plane")
        ->default_val(1733);
    gen->add_option("--out", gen_args.out, "Output dataset path")->required();
    gen->add_option("--config", config_path, "Flat key=value config file");

    // train
    auto* train = app.add_subcommand(
        "train", "Cross-validate and train a model on a dataset");
    TrainArgs train_args;
    std::size_t folds = 5;
    std::uint64_t train_seed = 0;
    train->add_option("--dataset", train_args.dataset, "Dataset path")->required();
    train->add_option("--out", train_args.out, "Checkpoint output path")->required();
    train->add_option("--report", train_args.report,
                      "Training report path (default: <out>.cv.json)");
    train->add_option("--folds", folds, "Cross-validation folds")->default_val(5);
    train->add_option("--seed", train_seed, "Training seed")->default_val(0);
    train->add_option("--config", config_path, "Flat key=value config file");

    // evaluate
    auto* eval = app.add_subcommand(
        "evaluate", "Evaluate a checkpoint on the stored test split");
    EvaluateArgs eval_args;
    eval->add_option("--model", eval_args.model, "Checkpoint path")->required();
    eval->add_option("--dataset", eval_args.dataset, "Dataset path")->required();
    eval->add_option("--report", eval_args.report,
                     "Training report holding the test indices")
        ->required();
    eval->add_option("--out", eval_args.out, "Evaluation report output path")
        ->default_val("eval_report.json");

    // infer
    auto* infer = app.add_subcommand(
        "infer", "Predict the center-plane fields for one operating point");
    InferArgs infer_args;
    infer->add_option("--model", infer_args.model, "Checkpoint path")->required();
    infer->add_option("--p-max", infer_args.p_max, "Peak rod heat flux [kW/m^2]")
        ->required();
    infer->add_option("--t-in", infer_args.t_in, "Inlet temperature [K]")
        ->required();
    infer->add_option("--v-in", infer_args.v_in, "Inlet velocity [m/s]")
        ->required();
    infer->add_option("--out", infer_args.out, "Output CSV path")->required();
    infer->add_option("--dataset", infer_args.dataset,
                      "Optional dataset supplying the mesh");
    infer->add_option("--config", config_path, "Flat key=value config file");

    // bench
    auto* bench = app.add_subcommand(
        "bench", "Time the forward pass against the reduced-order model");
    BenchArgs bench_args;
    bench->add_option("--model", bench_args.model, "Checkpoint path")->required();
    bench->add_option("--dataset", bench_args.dataset, "Dataset path")->required();
    bench->add_option("--iters", bench_args.iters, "Timed iterations")
        ->default_val(100);
    bench->add_option("--out", bench_args.out, "Optional JSON report path");

    // validate
    auto* validate = app.add_subcommand(
        "validate", "Check the reduced-order model against the heat-transfer "
                    "correlation and the entrance-length bound");
    ValidateArgs validate_args;
    validate->add_option("--out", validate_args.out, "Optional JSON report path");
    validate->add_option("--config", config_path, "Flat key=value config file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            gen_args.cfg = load_run_config(config_path);
            return cmd_generate(gen_args);
        }
        if (train->parsed()) {
            train_args.cfg = load_run_config(config_path);
            train_args.cfg.train.k_folds = folds;
            train_args.cfg.train.seed = train_seed;
            return cmd_train(train_args);
        }
        if (eval->parsed()) {
            return cmd_evaluate(eval_args);
        }
        if (infer->parsed()) {
            infer_args.cfg = load_run_config(config_path);
            return cmd_infer(infer_args);
        }
        if (bench->parsed()) {
            return cmd_bench(bench_args);
        }
        if (validate->parsed()) {
            validate_args.cfg = load_run_config(config_path);
            return cmd_validate(validate_args);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
