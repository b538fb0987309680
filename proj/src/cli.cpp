#include "miovs/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "miovs/kernels.hpp"
#include "miovs/parallel.hpp"
#include "miovs/storage.hpp"

namespace miovs {

namespace {

constexpr std::uint64_t kTrainTestSplitTag = 500;

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// console output; the JSON reports keep full precision
std::string fmt6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string fmt_list(const std::vector<std::size_t>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) s.push_back(',');
        s += std::to_string(xs[i]);
    }
    return s;
}

std::vector<std::size_t> parse_size_list(const std::string& text,
                                         const std::string& key) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stoul(item));
        } catch (const std::exception&) {
            throw std::runtime_error("config: cannot parse '" + item + "' in " + key);
        }
    }
    if (out.empty()) {
        throw std::runtime_error("config: empty list for " + key);
    }
    return out;
}

}  // namespace

RunConfig load_run_config(const std::string& config_path) {
    RunConfig cfg;
    if (config_path.empty()) return cfg;

    std::ifstream f(config_path);
    if (!f) {
        throw std::runtime_error("cannot open config file: " + config_path);
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(config_path + ":" + std::to_string(line_no) +
                                     ": expected key=value");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        auto as_double = [&] { return std::stod(value); };
        auto as_size = [&] { return static_cast<std::size_t>(std::stoul(value)); };

        if (key == "geometry.pitch") cfg.geom.pitch = as_double();
        else if (key == "geometry.rod_diameter") cfg.geom.rod_diameter = as_double();
        else if (key == "geometry.length") cfg.geom.length = as_double();
        else if (key == "fluid.density") cfg.props.density = as_double();
        else if (key == "fluid.viscosity") cfg.props.dynamic_viscosity = as_double();
        else if (key == "fluid.specific_heat") cfg.props.specific_heat = as_double();
        else if (key == "fluid.conductivity") cfg.props.thermal_conductivity = as_double();
        else if (key == "ranges.pmax_min") cfg.ranges.pmax_min = as_double();
        else if (key == "ranges.pmax_max") cfg.ranges.pmax_max = as_double();
        else if (key == "ranges.tin_min") cfg.ranges.tin_min = as_double();
        else if (key == "ranges.tin_max") cfg.ranges.tin_max = as_double();
        else if (key == "ranges.vin_min") cfg.ranges.vin_min = as_double();
        else if (key == "ranges.vin_max") cfg.ranges.vin_max = as_double();
        else if (key == "model.n1") cfg.model.n1 = as_size();
        else if (key == "model.branch_hidden") cfg.model.branch_hidden = parse_size_list(value, key);
        else if (key == "model.trunk_hidden") cfg.model.trunk_hidden = parse_size_list(value, key);
        else if (key == "model.dropout_rate") cfg.model.dropout_rate = as_double();
        else if (key == "train.learning_rate") cfg.train.learning_rate = as_double();
        else if (key == "train.l2_lambda") cfg.train.l2_lambda = as_double();
        else if (key == "train.max_epochs") cfg.train.max_epochs = as_size();
        else if (key == "train.patience") cfg.train.patience = as_size();
        else if (key == "train.batch_size") cfg.train.batch_size = as_size();
        else if (key == "train.k_folds") cfg.train.k_folds = as_size();
        else if (key == "oracle.n_z") cfg.axial_resolution = as_size();
        else {
            throw std::runtime_error(config_path + ":" + std::to_string(line_no) +
                                     ": unknown key '" + key + "'");
        }
    }
    return cfg;
}

ConfigEcho config_echo(const RunConfig& cfg) {
    ConfigEcho e;
    e.emplace_back("geometry.pitch", fmt(cfg.geom.pitch));
    e.emplace_back("geometry.rod_diameter", fmt(cfg.geom.rod_diameter));
    e.emplace_back("geometry.length", fmt(cfg.geom.length));
    e.emplace_back("fluid.density", fmt(cfg.props.density));
    e.emplace_back("fluid.viscosity", fmt(cfg.props.dynamic_viscosity));
    e.emplace_back("fluid.specific_heat", fmt(cfg.props.specific_heat));
    e.emplace_back("fluid.conductivity", fmt(cfg.props.thermal_conductivity));
    e.emplace_back("ranges.pmax_min", fmt(cfg.ranges.pmax_min));
    e.emplace_back("ranges.pmax_max", fmt(cfg.ranges.pmax_max));
    e.emplace_back("ranges.tin_min", fmt(cfg.ranges.tin_min));
    e.emplace_back("ranges.tin_max", fmt(cfg.ranges.tin_max));
    e.emplace_back("ranges.vin_min", fmt(cfg.ranges.vin_min));
    e.emplace_back("ranges.vin_max", fmt(cfg.ranges.vin_max));
    e.emplace_back("model.n1", std::to_string(cfg.model.n1));
    e.emplace_back("model.branch_hidden", fmt_list(cfg.model.branch_hidden));
    e.emplace_back("model.trunk_hidden", fmt_list(cfg.model.trunk_hidden));
    e.emplace_back("model.dropout_rate", fmt(cfg.model.dropout_rate));
    e.emplace_back("train.learning_rate", fmt(cfg.train.learning_rate));
    e.emplace_back("train.l2_lambda", fmt(cfg.train.l2_lambda));
    e.emplace_back("train.max_epochs", std::to_string(cfg.train.max_epochs));
    e.emplace_back("train.patience", std::to_string(cfg.train.patience));
    e.emplace_back("train.batch_size", std::to_string(cfg.train.batch_size));
    e.emplace_back("train.k_folds", std::to_string(cfg.train.k_folds));
    e.emplace_back("train.seed", std::to_string(cfg.train.seed));
    e.emplace_back("oracle.n_z", std::to_string(cfg.axial_resolution));
    return e;
}

std::string machine_descriptor() {
    std::string cpu = "unknown cpu";
    std::ifstream f("/proc/cpuinfo");
    std::string line;
    while (std::getline(f, line)) {
        if (line.rfind("model name", 0) == 0) {
            const auto colon = line.find(':');
            if (colon != std::string::npos) {
                cpu = line.substr(colon + 2);
            }
            break;
        }
    }
    return cpu + ", " + std::to_string(std::thread::hardware_concurrency()) +
           " hw threads, kernels=" + kernels::active().name +
           ", workers=" + std::to_string(worker_count());
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

int cmd_generate(const GenerateArgs& args) {
    if (args.samples == 0) {
        throw std::runtime_error("generate: --samples must be >= 1");
    }
    const RunConfig& cfg = args.cfg;
    const double t0 = now_ms();
    const CenterPlaneMesh mesh =
        generate_mesh(cfg.geom, args.mesh_nodes, cfg.geom.length / 2.0);
    const Dataset ds = generate_dataset(args.samples, args.seed, cfg.geom,
                                        cfg.props, mesh, cfg.ranges, cfg.model.n1);
    write_dataset(args.out, ds);
    const double t1 = now_ms();

    std::cout << "wrote " << args.out << "\n"
              << "  samples: " << args.samples << " (seed " << args.seed << ")\n"
              << "  mesh nodes: " << mesh.size() << " (target " << args.mesh_nodes
              << ")\n"
              << "  flux sensors per sample: " << cfg.model.n1 << "\n"
              << "  ranges: P_max [" << cfg.ranges.pmax_min << ", "
              << cfg.ranges.pmax_max << "] kW/m^2, T_in [" << cfg.ranges.tin_min
              << ", " << cfg.ranges.tin_max << "] K, v_in [" << cfg.ranges.vin_min
              << ", " << cfg.ranges.vin_max << "] m/s\n"
              << "  wall clock: " << (t1 - t0) / 1000.0 << " s ("
              << (t1 - t0) / static_cast<double>(args.samples)
              << " ms per sample)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int cmd_train(const TrainArgs& args) {
    RunConfig cfg = args.cfg;
    const Dataset data = read_dataset(args.dataset);

    ModelConfig model_cfg = cfg.model;
    model_cfg.n1 = data.n1();
    model_cfg.n_nodes = data.mesh.size();
    model_cfg.validate();

    const auto [train_idx, test_idx] = split_train_test(
        data.size(), 0.8,
        RandomStream(cfg.train.seed).derive(kTrainTestSplitTag).seed());

    std::cout << "dataset: " << data.size() << " samples, N = " << data.mesh.size()
              << ", split " << train_idx.size() << " train / " << test_idx.size()
              << " test\n"
              << "cross-validation: " << cfg.train.k_folds << " folds, lr "
              << cfg.train.learning_rate << ", l2 " << cfg.train.l2_lambda
              << ", batch " << cfg.train.batch_size << ", patience "
              << cfg.train.patience << ", max epochs " << cfg.train.max_epochs
              << "\n";

    const CVReport cv = cross_validate(data, train_idx, cfg.train, model_cfg);
    for (std::size_t f = 0; f < cv.fold_val_mse.size(); ++f) {
        std::cout << "  fold " << f + 1 << ": best val MSE "
                  << fmt6(cv.fold_val_mse[f]) << " after " << cv.fold_epochs[f]
                  << " epochs (" << cv.fold_stop_reasons[f] << ")\n";
    }
    std::cout << "validation MSE: " << fmt6(cv.mean_val_mse) << " +- "
              << fmt6(cv.std_val_mse) << "\n";

    std::cout << "training final model on the full training partition\n";
    const TrainResult final_model =
        train_final(data, train_idx, cfg.train, model_cfg);
    std::cout << "  best val loss " << fmt6(final_model.best_val_loss)
              << " at epoch " << final_model.best_epoch << " of "
              << final_model.epochs_run << " (" << final_model.stop_reason
              << ")\n";

    write_checkpoint(args.out, final_model.params);
    const std::string report_path =
        args.report.empty() ? args.out + ".cv.json" : args.report;
    write_cv_report(report_path, cv, test_idx, &final_model, config_echo(cfg));
    std::cout << "wrote " << args.out << " and " << report_path << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

int cmd_evaluate(const EvaluateArgs& args) {
    const ModelParams params = read_checkpoint(args.model);
    const Dataset data = read_dataset(args.dataset);

    std::ifstream f(args.report);
    if (!f) {
        throw std::runtime_error("cannot open training report: " + args.report);
    }
    nlohmann::json j;
    f >> j;
    if (!j.contains("test_indices")) {
        throw std::runtime_error("training report " + args.report +
                                 " has no test_indices");
    }
    std::vector<std::size_t> test_idx;
    for (const auto& v : j["test_indices"]) {
        test_idx.push_back(v.get<std::size_t>());
    }
    for (std::size_t idx : test_idx) {
        if (idx >= data.size()) {
            throw std::runtime_error("test index " + std::to_string(idx) +
                                     " out of range for dataset of size " +
                                     std::to_string(data.size()));
        }
    }

    const EvalReport report = evaluate(params, data, test_idx);
    ConfigEcho echo;
    echo.emplace_back("model", args.model);
    echo.emplace_back("dataset", args.dataset);
    echo.emplace_back("test_samples", std::to_string(test_idx.size()));
    write_eval_report(args.out, report, echo);

    static const char* kNames[3] = {"T", "v", "k"};
    std::cout << "test metrics over " << test_idx.size() << " samples:\n";
    for (int q = 0; q < 3; ++q) {
        std::cout << "  " << kNames[q] << ": relative L2 "
                  << fmt6(report.rel_l2_summary[q].mean) << " % +- "
                  << fmt6(report.rel_l2_summary[q].stddev) << " (median "
                  << fmt6(report.rel_l2_summary[q].q50) << "), MSE "
                  << fmt6(report.mse_summary[q].mean) << "\n";
    }
    std::cout << "wrote " << args.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------

int cmd_infer(const InferArgs& args) {
    const RunConfig& cfg = args.cfg;
    const ModelParams params = read_checkpoint(args.model);

    CenterPlaneMesh mesh;
    if (!args.dataset.empty()) {
        mesh = read_dataset(args.dataset).mesh;
        if (mesh.size() != params.config.n_nodes) {
            throw std::runtime_error(
                "dataset mesh has " + std::to_string(mesh.size()) +
                " nodes but the checkpoint expects " +
                std::to_string(params.config.n_nodes));
        }
    } else {
        mesh = mesh_for_node_count(cfg.geom, params.config.n_nodes,
                                   cfg.geom.length / 2.0);
    }

    if (!inputs_within_ranges(args.p_max, args.t_in, args.v_in, cfg.ranges)) {
        std::cerr << "warning: inputs outside the training ranges; prediction is "
                     "an extrapolation\n";
    }

    InputSample sample;
    sample.p_rod = sample_heat_flux(args.p_max, params.config.n1, cfg.geom.length);
    sample.t_in = args.t_in;
    sample.v_in = args.v_in;

    const double t0 = now_ms();
    const FieldSnapshot fields = predict(params, sample, mesh);
    const double t1 = now_ms();

    std::ofstream out(args.out, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open output file: " + args.out);
    }
    out << "x,y,T,v,k\n";
    for (std::size_t i = 0; i < mesh.size(); ++i) {
        out << fmt(mesh.x[i]) << ',' << fmt(mesh.y[i]) << ',' << fmt(fields.T[i])
            << ',' << fmt(fields.v[i]) << ',' << fmt(fields.k[i]) << '\n';
    }
    if (!out) {
        throw std::runtime_error("failed to write output file: " + args.out);
    }

    std::cout << "wrote " << args.out << " (" << mesh.size() << " nodes)\n"
              << "inference wall clock: " << (t1 - t0) << " ms\n";
    return 0;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

int cmd_bench(const BenchArgs& args) {
    if (args.iters == 0) {
        throw std::runtime_error("bench: --iters must be >= 1");
    }
    const ModelParams params = read_checkpoint(args.model);
    const Dataset data = read_dataset(args.dataset);
    if (data.mesh.size() != params.config.n_nodes) {
        throw std::runtime_error("bench: dataset mesh does not match checkpoint");
    }
    const InputSample& sample = data.samples[0];

    for (int w = 0; w < 3; ++w) {
        (void)predict(params, sample, data.mesh);
    }
    std::vector<double> times(args.iters);
    for (std::size_t i = 0; i < args.iters; ++i) {
        const double t0 = now_ms();
        (void)predict(params, sample, data.mesh);
        times[i] = now_ms() - t0;
    }

    BenchReport report;
    report.iters = args.iters;
    report.mean_ms = 0.0;
    for (double t : times) report.mean_ms += t;
    report.mean_ms /= static_cast<double>(args.iters);
    std::sort(times.begin(), times.end());
    auto quantile = [&times](double p) {
        const double pos = p * static_cast<double>(times.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        if (lo + 1 >= times.size()) return times.back();
        return times[lo] + (pos - lo) * (times[lo + 1] - times[lo]);
    };
    report.p50_ms = quantile(0.50);
    report.p99_ms = quantile(0.99);

    GeometrySpec geom;
    geom.pitch = data.pitch;
    geom.rod_diameter = data.rod_diameter;
    geom.length = data.length;
    const FluidProperties props;
    const double t0 = now_ms();
    (void)synthesize_fields(sample, geom, props, data.mesh);
    report.oracle_ms = now_ms() - t0;
    report.speedup = report.oracle_ms / report.mean_ms;
    report.machine = machine_descriptor();

    std::cout << "forward pass over " << args.iters << " runs (N = "
              << data.mesh.size() << "):\n"
              << "  mean " << report.mean_ms << " ms, p50 " << report.p50_ms
              << " ms, p99 " << report.p99_ms << " ms\n"
              << "one reduced-order field synthesis: " << report.oracle_ms
              << " ms\n"
              << "speedup vs reduced-order model: " << report.speedup << "x\n"
              << "note: the reference ground truth here is an analytic "
                 "reduced-order model, not a CFD solver; this ratio is not "
                 "comparable to published CFD-based speedups\n"
              << "machine: " << report.machine << "\n";

    if (!args.out.empty()) {
        ConfigEcho echo;
        echo.emplace_back("model", args.model);
        echo.emplace_back("dataset", args.dataset);
        write_bench_report(args.out, report, echo);
        std::cout << "wrote " << args.out << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

int cmd_validate(const ValidateArgs& args) {
    const RunConfig& cfg = args.cfg;
    cfg.geom.validate();
    cfg.props.validate();

    const double d_h = cfg.geom.hydraulic_diameter();
    const double psi = 1.130 * cfg.geom.p_over_d() - 0.2609;
    std::cout << "geometry: pitch " << cfg.geom.pitch << " m, rod "
              << cfg.geom.rod_diameter << " m, length " << cfg.geom.length
              << " m\n"
              << "  hydraulic diameter " << fmt6(d_h) << " m, P/D "
              << fmt6(cfg.geom.p_over_d()) << ", correlation factor psi "
              << fmt6(psi) << "\n"
              << "fluid: Pr " << fmt6(cfg.props.prandtl()) << "\n";

    // Correlation round trip at the reference condition: v = 3.5 m/s,
    // mid-range heat flux, 564 K inlet.
    InputSample ref;
    ref.p_rod = sample_heat_flux(
        0.5 * (cfg.ranges.pmax_min + cfg.ranges.pmax_max), cfg.model.n1,
        cfg.geom.length);
    ref.t_in = 564.0;
    ref.v_in = 3.5;
    const AxialProfile profile =
        axial_profiles(ref, cfg.geom, cfg.props, cfg.axial_resolution);
    const NusseltReport report = nusselt_roundtrip(profile, cfg.geom, cfg.props);

    std::cout << "correlation round trip at v = 3.5 m/s (n_z = "
              << cfg.axial_resolution << "):\n"
              << "  Re " << fmt6(report.reynolds) << ", h_avg " << fmt6(report.h_avg)
              << " W/(m^2 K)\n"
              << "  Nu_avg " << fmt6(report.nu_avg) << " vs correlation "
              << fmt6(report.nu_weisman) << " -> margin "
              << fmt6(report.margin_percent) << " %\n";
    const bool roundtrip_ok = report.margin_percent <= 1.0;
    std::cout << (roundtrip_ok ? "PASS" : "FAIL")
              << " correlation round trip (margin <= 1%)\n";

    // Entrance length across the inlet-velocity range.
    bool entrance_ok = true;
    std::cout << "entrance length sweep (" << cfg.ranges.vin_min << " .. "
              << cfg.ranges.vin_max << " m/s):\n";
    for (int i = 0; i < 10; ++i) {
        const double v = cfg.ranges.vin_min +
                         (cfg.ranges.vin_max - cfg.ranges.vin_min) * i / 9.0;
        const double re = reynolds(cfg.geom, cfg.props, v);
        const double l = entrance_length(re, d_h);
        entrance_ok = entrance_ok && l < cfg.geom.length;
        std::cout << "  v = " << fmt6(v) << " m/s: Re = " << fmt6(re)
                  << ", Z_L = " << fmt6(entrance_length_number(re))
                  << ", L = " << fmt6(l) << " m\n";
    }
    std::cout << (entrance_ok ? "PASS" : "FAIL")
              << " entrance length (L < " << cfg.geom.length
              << " m across the velocity range)\n";

    if (!args.out.empty()) {
        write_nusselt_report(args.out, report, config_echo(cfg));
        std::cout << "wrote " << args.out << "\n";
    }

    if (!roundtrip_ok || !entrance_ok) {
        std::cerr << "error: validation checks failed\n";
        return 1;
    }
    return 0;
}

}  // namespace miovs
