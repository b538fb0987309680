#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "miovs/oracle.hpp"
#include "miovs/training.hpp"

namespace miovs {

/// Effective configuration echoed into every report so a run is reproducible
/// from the report plus its input files. Keys keep their insertion order.
using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

/// Timing results of the forward-pass benchmark.
struct BenchReport {
    std::size_t iters = 0;
    double mean_ms = 0.0;
    double p50_ms = 0.0;
    double p99_ms = 0.0;
    double oracle_ms = 0.0;    // one reduced-order field synthesis
    double speedup = 0.0;      // oracle_ms / mean_ms
    std::string machine;
};

/// Minimal JSON emitter: pretty-printed, keys in insertion order, floating
/// point values as decimal with 17 significant digits (lossless for 64-bit
/// floats). Rejects non-finite numbers.
class JsonWriter {
public:
    std::string take();

    JsonWriter& begin_object();
    JsonWriter& end_object();
    JsonWriter& begin_array();
    JsonWriter& end_array();
    JsonWriter& key(const std::string& name);
    JsonWriter& value(double v);
    JsonWriter& value(std::int64_t v);
    JsonWriter& value(std::uint64_t v);
    JsonWriter& value(const std::string& v);
    JsonWriter& value(const char* v) { return value(std::string(v)); }
    JsonWriter& value(bool v);

private:
    void before_value();
    void newline_indent();

    std::string out_;
    std::vector<bool> has_items_;  // per nesting level
    bool pending_key_ = false;
};

void write_cv_report(const std::string& path, const CVReport& report,
                     const std::vector<std::size_t>& test_indices,
                     const TrainResult* final_model, const ConfigEcho& config);

void write_eval_report(const std::string& path, const EvalReport& report,
                       const ConfigEcho& config);

void write_nusselt_report(const std::string& path, const NusseltReport& report,
                          const ConfigEcho& config);

void write_bench_report(const std::string& path, const BenchReport& report,
                        const ConfigEcho& config);

}  // namespace miovs
