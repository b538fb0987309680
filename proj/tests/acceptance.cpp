// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Budget-sensitive criteria print their wall-clock time.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck_common.hpp"
#include "miovs/cli.hpp"
#include "miovs/kernels.hpp"
#include "miovs/model.hpp"
#include "miovs/parallel.hpp"
#include "miovs/oracle.hpp"
#include "miovs/report_json.hpp"
#include "miovs/storage.hpp"
#include "miovs/training.hpp"

using namespace miovs;

namespace {

int g_failures = 0;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] %d: %s (%s)\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(double v, const char* spec = "%.4g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

// ---------------------------------------------------------------------------

void criterion_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    int cases = 0;
    for (std::uint64_t seed : {11ull, 22ull, 33ull}) {
        testing::GradCheckCase c = testing::random_tiny_case(seed, false);
        ModelParams params = testing::params_for_case(c, seed * 7 + 1);
        worst = std::max(worst, testing::gradcheck_max_rel_err(params, c));
        ++cases;
    }
    for (std::uint64_t seed : {44ull, 55ull, 66ull}) {
        testing::GradCheckCase c = testing::random_tiny_case(seed, true);
        ModelParams params = testing::params_for_case(c, seed * 7 + 1);
        worst = std::max(worst, testing::gradcheck_max_rel_err(params, c));
        ++cases;
    }
    const double secs = seconds_since(t0);
    report(1, "analytic gradients vs central finite differences",
           worst < 1e-5 && secs < 60.0,
           std::to_string(cases) + " tiny configs, max rel err " + fmt(worst) +
               ", " + fmt(secs, "%.1f") + " s");
}

// Shared by criteria 2 and 3.
Dataset desk_scale_dataset() {
    const GeometrySpec geom;
    const FluidProperties props;
    const CenterPlaneMesh mesh = generate_mesh(geom, 200, geom.length / 2.0);
    return generate_dataset(300, 42, geom, props, mesh, SampleRanges{}, 100);
}

void criterion_desk_scale(const Dataset& data) {
    const auto t0 = std::chrono::steady_clock::now();

    TrainConfig cfg;
    cfg.learning_rate = 0.001;
    cfg.l2_lambda = 1e-8;
    cfg.batch_size = 1;
    cfg.patience = 10;
    cfg.max_epochs = 100;
    cfg.seed = 42;

    ModelConfig model_cfg;  // table architecture at the desk-scale node count
    model_cfg.n1 = data.n1();
    model_cfg.n_nodes = data.mesh.size();

    const auto [train_idx, test_idx] = split_train_test(
        data.size(), 0.8, RandomStream(cfg.seed).derive(500).seed());
    const TrainResult trained = train_final(data, train_idx, cfg, model_cfg);
    const EvalReport eval = evaluate(trained.params, data, test_idx);

    const double rel_T = eval.rel_l2_summary[0].mean;
    const double rel_v = eval.rel_l2_summary[1].mean;
    const double rel_k = eval.rel_l2_summary[2].mean;
    const double secs = seconds_since(t0);

    const bool thresholds = rel_T <= 1.0 && rel_v <= 3.0 && rel_k <= 5.0;
    const bool ordering = rel_T < rel_v && rel_v < rel_k;
    const bool val_improved =
        trained.best_val_loss < trained.val_history.front();
    const bool in_budget = secs < 900.0;

    std::ostringstream d;
    d << "N=" << data.mesh.size() << ", " << train_idx.size() << "/"
      << test_idx.size() << " split, epochs " << trained.epochs_run << " ("
      << trained.stop_reason << "), mean rel L2 % T=" << fmt(rel_T)
      << " v=" << fmt(rel_v) << " k=" << fmt(rel_k)
      << " (need <=1, <=3, <=5 and T<v<k), best val "
      << fmt(trained.best_val_loss) << " < first-epoch val "
      << fmt(trained.val_history.front()) << ", " << fmt(secs, "%.0f") << " s";
    report(2, "desk-scale end-to-end learning",
           thresholds && ordering && val_improved && in_budget, d.str());
}

void criterion_cv_protocol(const Dataset& data) {
    const auto t0 = std::chrono::steady_clock::now();

    bool partitions_ok = true;
    for (std::uint64_t seed = 0; seed < 100 && partitions_ok; ++seed) {
        RandomStream stream(seed);
        const auto folds = partition_folds(data.size(), 5, stream);
        std::set<std::size_t> seen;
        std::size_t lo = data.size(), hi = 0;
        for (const auto& f : folds) {
            lo = std::min(lo, f.size());
            hi = std::max(hi, f.size());
            for (std::size_t idx : f) {
                partitions_ok = partitions_ok && idx < data.size() &&
                                seen.insert(idx).second;
            }
        }
        partitions_ok =
            partitions_ok && seen.size() == data.size() && hi - lo <= 1;
    }

    TrainConfig cfg;
    cfg.learning_rate = 0.001;
    cfg.l2_lambda = 1e-8;
    cfg.patience = 10;
    cfg.max_epochs = 1;  // protocol and determinism check, not convergence
    cfg.seed = 42;
    ModelConfig model_cfg;
    model_cfg.n1 = data.n1();
    model_cfg.n_nodes = data.mesh.size();

    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), 0);
    const CVReport a = cross_validate(data, all, cfg, model_cfg);
    const CVReport b = cross_validate(data, all, cfg, model_cfg);

    const bool bit_identical = a.fold_val_mse == b.fold_val_mse &&
                               a.mean_val_mse == b.mean_val_mse &&
                               a.std_val_mse == b.std_val_mse &&
                               a.fold_epochs == b.fold_epochs;

    // serialized reports byte-identical as well
    const std::string p1 = (std::filesystem::temp_directory_path() /
                            "miovs_acc_cv_a.json").string();
    const std::string p2 = (std::filesystem::temp_directory_path() /
                            "miovs_acc_cv_b.json").string();
    write_cv_report(p1, a, {}, nullptr, {});
    write_cv_report(p2, b, {}, nullptr, {});
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    const std::string s1((std::istreambuf_iterator<char>(f1)), {});
    const std::string s2((std::istreambuf_iterator<char>(f2)), {});
    const bool files_identical = !s1.empty() && s1 == s2;
    std::remove(p1.c_str());
    std::remove(p2.c_str());

    std::ostringstream d;
    d << "100-seed partition property "
      << (partitions_ok ? "holds" : "violated") << "; validation MSE "
      << fmt(a.mean_val_mse) << " +- " << fmt(a.std_val_mse) << " over "
      << a.fold_val_mse.size() << " folds; rerun bit-identical="
      << (bit_identical && files_identical ? "yes" : "no") << "; "
      << fmt(seconds_since(t0), "%.0f") << " s";
    report(3, "cross-validation protocol",
           partitions_ok && bit_identical && files_identical &&
               a.fold_val_mse.size() == 5,
           d.str());
}

void criterion_roundtrip() {
    const GeometrySpec geom;
    const FluidProperties props;
    InputSample ref;
    ref.p_rod = sample_heat_flux(600.0, 100, geom.length);
    ref.t_in = 564.0;
    ref.v_in = 3.5;

    std::vector<double> margins;
    for (std::size_t n_z : {16u, 32u, 64u, 128u, 256u}) {
        const AxialProfile p = axial_profiles(ref, geom, props, n_z);
        margins.push_back(nusselt_roundtrip(p, geom, props).margin_percent);
    }
    bool decreasing = true;
    for (std::size_t i = 1; i < margins.size(); ++i) {
        decreasing = decreasing && margins[i] < margins[i - 1];
    }
    const double at_default = margins.back();  // n_z = 256 is the default

    std::ostringstream d;
    d << "margins % at n_z 16..256: ";
    for (double m : margins) d << fmt(m) << " ";
    d << "(default " << fmt(at_default) << " <= 1)";
    report(4, "heat-transfer correlation round trip",
           at_default <= 1.0 && decreasing, d.str());
}

void criterion_entrance_length() {
    const GeometrySpec geom;
    const FluidProperties props;
    double max_l = 0.0;
    bool ok = true;
    for (int i = 0; i < 10; ++i) {
        const double v = 4.05 + 0.9 * i / 9.0;
        const double l =
            entrance_length(reynolds(geom, props, v), geom.hydraulic_diameter());
        max_l = std::max(max_l, l);
        ok = ok && l < 0.800;
    }
    report(5, "entrance length fits the domain",
           ok, "max L over 10-point sweep = " + fmt(max_l) + " m < 0.8 m");
}

void criterion_latency() {
    ModelConfig cfg;  // full-scale table architecture, N = 1733
    const GeometrySpec geom;
    CenterPlaneMesh mesh = generate_mesh(geom, cfg.n_nodes, geom.length / 2.0);
    mesh.x.resize(cfg.n_nodes);
    mesh.y.resize(cfg.n_nodes);
    mesh.wall_distance.resize(cfg.n_nodes);

    RandomStream stream(7);
    ModelParams params = init_params(cfg, stream);

    InputSample sample;
    sample.p_rod = sample_heat_flux(600.0, cfg.n1, geom.length);
    sample.t_in = 564.0;
    sample.v_in = 4.5;

    for (int w = 0; w < 5; ++w) (void)forward_eval(params, sample, mesh);
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 100; ++i) (void)forward_eval(params, sample, mesh);
    const double mean_ms = seconds_since(t0) * 1000.0 / 100.0;

    std::ostringstream d;
    d << "mean over 100 runs " << fmt(mean_ms, "%.2f")
      << " ms (bound 50 ms); reference implementation on GPU reported 5.24 ms; "
         "the published 100000x CFD speedup has no denominator here (no CFD "
         "solver in this artifact); machine: "
      << machine_descriptor();
    report(6, "full-scale inference latency", mean_ms < 50.0, d.str());
}

void criterion_serialization(const Dataset& desk) {
    namespace fs = std::filesystem;
    const std::string dir = (fs::temp_directory_path() / "miovs_acc_ser").string();
    fs::create_directories(dir);

    bool ok = true;
    std::string note;

    // dataset write -> read -> write, byte identical
    Dataset small = desk;
    small.samples.resize(3);
    small.fields.resize(3);
    const std::string d1 = dir + "/a.miods";
    const std::string d2 = dir + "/b.miods";
    write_dataset(d1, small);
    write_dataset(d2, read_dataset(d1));
    auto bytes = [](const std::string& p) {
        std::ifstream f(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(f)), {});
    };
    if (bytes(d1) != bytes(d2)) {
        ok = false;
        note += "dataset bytes differ; ";
    }

    // checkpoint round trip + stable predictions
    testing::GradCheckCase c = testing::random_tiny_case(99, false);
    ModelParams params = testing::params_for_case(c, 100);
    const FieldSnapshot before = predict(params, c.sample, c.mesh);
    const std::string k1 = dir + "/a.miock";
    const std::string k2 = dir + "/b.miock";
    write_checkpoint(k1, params);
    const ModelParams loaded = read_checkpoint(k1);
    write_checkpoint(k2, loaded);
    if (bytes(k1) != bytes(k2)) {
        ok = false;
        note += "checkpoint bytes differ; ";
    }
    const FieldSnapshot after = predict(loaded, c.sample, c.mesh);
    if (before.T != after.T || before.v != after.v || before.k != after.k) {
        ok = false;
        note += "predictions changed across save/load; ";
    }

    // committed golden files parse to frozen values
    const std::string golden = MIOVS_TEST_DIR "/golden";
    try {
        const Dataset g = read_dataset(golden + "/tiny_dataset.miods");
        if (g.size() != 2 || g.n1() != 3 || g.mesh.size() != 4 ||
            g.seed != 424242 || g.samples[0].p_rod[1] != 625.0 ||
            g.fields[1].k[3] != 0.0256) {
            ok = false;
            note += "golden dataset drifted; ";
        }
        const ModelParams gp = read_checkpoint(golden + "/tiny_checkpoint.miock");
        if (gp.config.n_nodes != 4 || gp.config.dropout_rate != 0.25 ||
            gp.norm.output_mean[0] != 600.0) {
            ok = false;
            note += "golden checkpoint drifted; ";
        }
    } catch (const std::exception& e) {
        ok = false;
        note += std::string("golden parse failed: ") + e.what() + "; ";
    }

    fs::remove_all(dir);
    report(7, "serialization freeze", ok,
           ok ? "write/read/write byte-identical, golden files stable, "
                "predictions stable across save/load"
              : note);
}

void criterion_metrics() {
    bool ok = true;
    std::string note;
    try {
        ok = ok && relative_l2({3.0, 4.0}, {3.0, 4.0}) == 0.0;
        ok = ok && relative_l2({0.0, 0.0}, {3.0, 4.0}) == 100.0;
        ok = ok && relative_l2({3.0, 0.0}, {3.0, 4.0}) == 80.0;

        testing::GradCheckCase c = testing::random_tiny_case(5, false);
        ModelParams params = testing::params_for_case(c, 6);
        FieldSnapshot ones, zeros;
        ones.T = {1.0, 1.0};
        ones.v = {1.0, 1.0};
        ones.k = {1.0, 1.0};
        zeros.T = {0.0, 0.0};
        zeros.v = {0.0, 0.0};
        zeros.k = {0.0, 0.0};
        ok = ok && composite_loss(ones, ones, params, 0.0).composite == 0.0;
        ok = ok && composite_loss(ones, zeros, params, 0.0).composite == 3.0;
        double wsum = 0.0;
        for (ParamSpan s : param_spans(params)) {
            if (s.is_weight) {
                for (std::size_t i = 0; i < s.len; ++i) {
                    wsum += s.data[i] * s.data[i];
                }
            }
        }
        const LossReport iso = composite_loss(ones, ones, params, 0.25);
        ok = ok && iso.composite == iso.reg_term &&
             std::abs(iso.reg_term - 0.25 * wsum) < 1e-15 * wsum;
    } catch (const std::exception& e) {
        ok = false;
        note = e.what();
    }
    report(8, "metric unit suite", ok,
           ok ? "relative L2 and composite-loss examples exact" : note);
}

}  // namespace

int main() {
    std::printf("acceptance suite (kernels=%s, workers=%zu)\n",
                kernels::active().name, worker_count());

    criterion_gradients();

    const Dataset desk = desk_scale_dataset();
    criterion_desk_scale(desk);
    criterion_cv_protocol(desk);
    criterion_roundtrip();
    criterion_entrance_length();
    criterion_latency();
    criterion_serialization(desk);
    criterion_metrics();

    if (g_failures == 0) {
        std::printf("all criteria passed\n");
    } else {
        std::printf("%d criteria FAILED\n", g_failures);
    }
    return g_failures == 0 ? 0 : 1;
}
