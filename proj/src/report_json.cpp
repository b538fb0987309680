#include "miovs/report_json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace miovs {

// ---------------------------------------------------------------------------
// JsonWriter
// ---------------------------------------------------------------------------

std::string JsonWriter::take() {
    if (!has_items_.empty()) {
        throw std::runtime_error("json writer: unclosed object or array");
    }
    out_.push_back('\n');
    return std::move(out_);
}

void JsonWriter::newline_indent() {
    out_.push_back('\n');
    out_.append(2 * has_items_.size(), ' ');
}

void JsonWriter::before_value() {
    if (pending_key_) {
        pending_key_ = false;
        return;
    }
    if (!has_items_.empty()) {
        if (has_items_.back()) out_.push_back(',');
        has_items_.back() = true;
        newline_indent();
    }
}

JsonWriter& JsonWriter::begin_object() {
    before_value();
    out_.push_back('{');
    has_items_.push_back(false);
    return *this;
}

JsonWriter& JsonWriter::end_object() {
    const bool had = has_items_.back();
    has_items_.pop_back();
    if (had) newline_indent();
    out_.push_back('}');
    return *this;
}

JsonWriter& JsonWriter::begin_array() {
    before_value();
    out_.push_back('[');
    has_items_.push_back(false);
    return *this;
}

JsonWriter& JsonWriter::end_array() {
    const bool had = has_items_.back();
    has_items_.pop_back();
    if (had) newline_indent();
    out_.push_back(']');
    return *this;
}

namespace {

std::string escape_string(const std::string& v) {
    std::string escaped;
    escaped.reserve(v.size() + 2);
    escaped.push_back('"');
    for (char c : v) {
        switch (c) {
            case '"': escaped += "\\\""; break;
            case '\\': escaped += "\\\\"; break;
            case '\n': escaped += "\\n"; break;
            case '\t': escaped += "\\t"; break;
            case '\r': escaped += "\\r"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    escaped += buf;
                } else {
                    escaped.push_back(c);
                }
        }
    }
    escaped.push_back('"');
    return escaped;
}

}  // namespace

JsonWriter& JsonWriter::key(const std::string& name) {
    if (has_items_.back()) out_.push_back(',');
    has_items_.back() = true;
    newline_indent();
    out_.append(escape_string(name));
    out_.append(": ");
    pending_key_ = true;
    return *this;
}

JsonWriter& JsonWriter::value(double v) {
    if (!std::isfinite(v)) {
        throw std::runtime_error("json writer: non-finite number");
    }
    before_value();
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out_.append(buf);
    return *this;
}

JsonWriter& JsonWriter::value(std::int64_t v) {
    before_value();
    out_.append(std::to_string(v));
    return *this;
}

JsonWriter& JsonWriter::value(std::uint64_t v) {
    before_value();
    out_.append(std::to_string(v));
    return *this;
}

JsonWriter& JsonWriter::value(bool v) {
    before_value();
    out_.append(v ? "true" : "false");
    return *this;
}

JsonWriter& JsonWriter::value(const std::string& v) {
    before_value();
    out_.append(escape_string(v));
    return *this;
}

// ---------------------------------------------------------------------------
// report writers
// ---------------------------------------------------------------------------

namespace {

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) {
        throw std::runtime_error("cannot open report file for writing: " + path);
    }
    f << text;
    if (!f) {
        throw std::runtime_error("failed to write report file: " + path);
    }
}

void emit_config(JsonWriter& w, const ConfigEcho& config) {
    w.key("config").begin_object();
    for (const auto& [k, v] : config) {
        w.key(k).value(v);
    }
    w.end_object();
}

void emit_double_array(JsonWriter& w, const std::vector<double>& xs) {
    w.begin_array();
    for (double x : xs) w.value(x);
    w.end_array();
}

void emit_index_array(JsonWriter& w, const std::vector<std::size_t>& xs) {
    w.begin_array();
    for (std::size_t x : xs) w.value(static_cast<std::uint64_t>(x));
    w.end_array();
}

void emit_summary(JsonWriter& w, const QuantitySummary& s) {
    w.begin_object();
    w.key("mean").value(s.mean);
    w.key("std").value(s.stddev);
    w.key("q25").value(s.q25);
    w.key("q50").value(s.q50);
    w.key("q75").value(s.q75);
    w.end_object();
}

}  // namespace

void write_cv_report(const std::string& path, const CVReport& report,
                     const std::vector<std::size_t>& test_indices,
                     const TrainResult* final_model, const ConfigEcho& config) {
    JsonWriter w;
    w.begin_object();
    w.key("report_type").value("cv_report");
    emit_config(w, config);
    w.key("fold_val_mse");
    emit_double_array(w, report.fold_val_mse);
    w.key("mean_val_mse").value(report.mean_val_mse);
    w.key("std_val_mse").value(report.std_val_mse);
    w.key("fold_epochs");
    emit_index_array(w, report.fold_epochs);
    w.key("fold_stop_reasons").begin_array();
    for (const auto& reason : report.fold_stop_reasons) w.value(reason);
    w.end_array();
    if (final_model) {
        w.key("final_model").begin_object();
        w.key("best_val_loss").value(final_model->best_val_loss);
        w.key("best_epoch").value(static_cast<std::uint64_t>(final_model->best_epoch));
        w.key("epochs_run").value(static_cast<std::uint64_t>(final_model->epochs_run));
        w.key("stop_reason").value(final_model->stop_reason);
        w.end_object();
    }
    w.key("test_indices");
    emit_index_array(w, test_indices);
    w.end_object();
    write_text_file(path, w.take());
}

void write_eval_report(const std::string& path, const EvalReport& report,
                       const ConfigEcho& config) {
    JsonWriter w;
    w.begin_object();
    w.key("report_type").value("eval_report");
    emit_config(w, config);
    static const char* kQuantities[3] = {"T", "v", "k"};
    const std::vector<double>* mses[3] = {&report.mse_T, &report.mse_v,
                                          &report.mse_k};
    const std::vector<double>* rels[3] = {&report.rel_l2_T, &report.rel_l2_v,
                                          &report.rel_l2_k};
    w.key("quantities").begin_object();
    for (int q = 0; q < 3; ++q) {
        w.key(kQuantities[q]).begin_object();
        w.key("mse_per_sample");
        emit_double_array(w, *mses[q]);
        w.key("mse_summary");
        emit_summary(w, report.mse_summary[q]);
        w.key("relative_l2_percent_per_sample");
        emit_double_array(w, *rels[q]);
        w.key("relative_l2_percent_summary");
        emit_summary(w, report.rel_l2_summary[q]);
        w.end_object();
    }
    w.end_object();
    w.end_object();
    write_text_file(path, w.take());
}

void write_nusselt_report(const std::string& path, const NusseltReport& report,
                          const ConfigEcho& config) {
    JsonWriter w;
    w.begin_object();
    w.key("report_type").value("nusselt_report");
    emit_config(w, config);
    w.key("h_avg").value(report.h_avg);
    w.key("nu_avg").value(report.nu_avg);
    w.key("nu_weisman").value(report.nu_weisman);
    w.key("margin_percent").value(report.margin_percent);
    w.key("reynolds").value(report.reynolds);
    w.key("prandtl").value(report.prandtl);
    w.end_object();
    write_text_file(path, w.take());
}

void write_bench_report(const std::string& path, const BenchReport& report,
                        const ConfigEcho& config) {
    JsonWriter w;
    w.begin_object();
    w.key("report_type").value("bench_report");
    emit_config(w, config);
    w.key("iters").value(static_cast<std::uint64_t>(report.iters));
    w.key("forward_mean_ms").value(report.mean_ms);
    w.key("forward_p50_ms").value(report.p50_ms);
    w.key("forward_p99_ms").value(report.p99_ms);
    w.key("oracle_ms").value(report.oracle_ms);
    w.key("speedup_vs_oracle").value(report.speedup);
    w.key("machine").value(report.machine);
    w.end_object();
    write_text_file(path, w.take());
}

}  // namespace miovs
