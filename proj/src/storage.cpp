#include "miovs/storage.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "miovs/kernels.hpp"

namespace miovs {

namespace {

// ---------------------------------------------------------------------------
// little-endian encode/decode
// ---------------------------------------------------------------------------

class ByteWriter {
public:
    void put_bytes(const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        buf_.insert(buf_.end(), p, p + len);
    }

    void put_u32(std::uint32_t v) {
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        put_bytes(b, 4);
    }

    void put_u64(std::uint64_t v) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        put_bytes(b, 8);
    }

    void put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }

    void put_f64_array(const std::vector<double>& v) {
        for (double x : v) put_f64(x);
    }

    const std::vector<unsigned char>& bytes() const { return buf_; }

private:
    std::vector<unsigned char> buf_;
};

class ByteReader {
public:
    ByteReader(std::vector<unsigned char> bytes, std::string label)
        : buf_(std::move(bytes)), label_(std::move(label)) {}

    std::size_t offset() const { return at_; }
    std::size_t size() const { return buf_.size(); }

    void need(std::size_t len) const {
        if (at_ + len > buf_.size()) {
            throw std::runtime_error(
                label_ + ": truncated at byte " + std::to_string(buf_.size()) +
                ", needed " + std::to_string(at_ + len));
        }
    }

    void get_bytes(void* out, std::size_t len) {
        need(len);
        std::memcpy(out, buf_.data() + at_, len);
        at_ += len;
    }

    std::uint32_t get_u32() {
        unsigned char b[4];
        get_bytes(b, 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }

    std::uint64_t get_u64() {
        unsigned char b[8];
        get_bytes(b, 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }

    double get_f64() { return std::bit_cast<double>(get_u64()); }

    void get_f64_array(std::vector<double>& out, std::size_t n) {
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = get_f64();
    }

    void expect_exhausted() const {
        if (at_ != buf_.size()) {
            throw std::runtime_error(label_ + ": trailing bytes, file has " +
                                     std::to_string(buf_.size()) +
                                     " bytes, expected " + std::to_string(at_));
        }
    }

private:
    std::vector<unsigned char> buf_;
    std::string label_;
    std::size_t at_ = 0;
};

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot open file: " + path);
    }
    f.seekg(0, std::ios::end);
    const std::streamoff len = f.tellg();
    f.seekg(0, std::ios::beg);
    std::vector<unsigned char> bytes(static_cast<std::size_t>(len));
    if (len > 0) {
        f.read(reinterpret_cast<char*>(bytes.data()), len);
    }
    if (!f) {
        throw std::runtime_error("failed to read file: " + path);
    }
    return bytes;
}

void write_file_atomic(const std::string& path,
                       const std::vector<unsigned char>& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) {
            throw std::runtime_error("cannot open file for writing: " + tmp);
        }
        f.write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
        if (!f) {
            throw std::runtime_error("failed to write file: " + tmp);
        }
    }
    std::filesystem::rename(tmp, path);
}

void check_magic(ByteReader& r, const char* expected, const std::string& what) {
    char magic[8];
    r.get_bytes(magic, 8);
    if (std::memcmp(magic, expected, 8) != 0) {
        throw std::runtime_error(what + ": bad magic, expected \"" +
                                 std::string(expected, 8) + "\"");
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// dataset files
// ---------------------------------------------------------------------------

void write_dataset(const std::string& path, const Dataset& dataset) {
    const std::size_t n_samples = dataset.size();
    const std::size_t n1 = dataset.n1();
    const std::size_t n_nodes = dataset.mesh.size();
    if (n_samples == 0 || n1 == 0 || n_nodes == 0) {
        throw std::runtime_error("refusing to write an empty dataset");
    }

    ByteWriter w;
    w.put_bytes(kDatasetMagic, 8);
    w.put_u32(static_cast<std::uint32_t>(n_samples));
    w.put_u32(static_cast<std::uint32_t>(n1));
    w.put_u32(static_cast<std::uint32_t>(n_nodes));
    w.put_u32(2);  // scalar inputs per sample
    w.put_f64(dataset.ranges.pmax_min);
    w.put_f64(dataset.ranges.pmax_max);
    w.put_f64(dataset.ranges.tin_min);
    w.put_f64(dataset.ranges.tin_max);
    w.put_f64(dataset.ranges.vin_min);
    w.put_f64(dataset.ranges.vin_max);
    w.put_u64(dataset.seed);
    w.put_f64(dataset.pitch);
    w.put_f64(dataset.rod_diameter);
    w.put_f64(dataset.length);

    for (std::size_t i = 0; i < n_nodes; ++i) {
        w.put_f64(dataset.mesh.x[i]);
        w.put_f64(dataset.mesh.y[i]);
        w.put_f64(dataset.mesh.wall_distance[i]);
    }

    for (std::size_t s = 0; s < n_samples; ++s) {
        const InputSample& sample = dataset.samples[s];
        const FieldSnapshot& f = dataset.fields[s];
        if (sample.p_rod.size() != n1 || f.T.size() != n_nodes ||
            f.v.size() != n_nodes || f.k.size() != n_nodes) {
            throw std::runtime_error("dataset sample " + std::to_string(s) +
                                     " has inconsistent shapes");
        }
        w.put_f64_array(sample.p_rod);
        w.put_f64(sample.t_in);
        w.put_f64(sample.v_in);
        w.put_f64_array(f.T);
        w.put_f64_array(f.v);
        w.put_f64_array(f.k);
    }

    write_file_atomic(path, w.bytes());
}

Dataset read_dataset(const std::string& path) {
    ByteReader r(read_file(path), "dataset file " + path);
    check_magic(r, kDatasetMagic, "dataset file " + path);

    const std::uint32_t n_samples = r.get_u32();
    const std::uint32_t n1 = r.get_u32();
    const std::uint32_t n_nodes = r.get_u32();
    const std::uint32_t n_scalar = r.get_u32();
    if (n_scalar != 2) {
        throw std::runtime_error("dataset file " + path +
                                 ": unsupported scalar-input count " +
                                 std::to_string(n_scalar));
    }
    if (n_samples == 0 || n1 == 0 || n_nodes == 0) {
        throw std::runtime_error("dataset file " + path + ": empty header field");
    }

    // header (after magic): 4 u32 + 6 f64 + u64 + 3 f64
    const std::size_t expected =
        8 + 16 + 48 + 8 + 24 + std::size_t{n_nodes} * 24 +
        std::size_t{n_samples} * (std::size_t{n1} + 2 + 3 * std::size_t{n_nodes}) * 8;
    if (r.size() != expected) {
        throw std::runtime_error("dataset file " + path + ": length mismatch, has " +
                                 std::to_string(r.size()) + " bytes, header implies " +
                                 std::to_string(expected));
    }

    Dataset ds;
    ds.ranges.pmax_min = r.get_f64();
    ds.ranges.pmax_max = r.get_f64();
    ds.ranges.tin_min = r.get_f64();
    ds.ranges.tin_max = r.get_f64();
    ds.ranges.vin_min = r.get_f64();
    ds.ranges.vin_max = r.get_f64();
    ds.seed = r.get_u64();
    ds.pitch = r.get_f64();
    ds.rod_diameter = r.get_f64();
    ds.length = r.get_f64();

    ds.mesh.x.resize(n_nodes);
    ds.mesh.y.resize(n_nodes);
    ds.mesh.wall_distance.resize(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) {
        ds.mesh.x[i] = r.get_f64();
        ds.mesh.y[i] = r.get_f64();
        ds.mesh.wall_distance[i] = r.get_f64();
    }
    ds.mesh.box_lo = 0.0;
    ds.mesh.box_hi = ds.pitch;

    ds.samples.resize(n_samples);
    ds.fields.resize(n_samples);
    for (std::size_t s = 0; s < n_samples; ++s) {
        r.get_f64_array(ds.samples[s].p_rod, n1);
        ds.samples[s].t_in = r.get_f64();
        ds.samples[s].v_in = r.get_f64();
        r.get_f64_array(ds.fields[s].T, n_nodes);
        r.get_f64_array(ds.fields[s].v, n_nodes);
        r.get_f64_array(ds.fields[s].k, n_nodes);
    }
    r.expect_exhausted();
    return ds;
}

// ---------------------------------------------------------------------------
// checkpoint files
// ---------------------------------------------------------------------------

namespace {

void put_layer(ByteWriter& w, const DenseLayer& layer) {
    w.put_u32(static_cast<std::uint32_t>(layer.weight.rows));
    w.put_u32(static_cast<std::uint32_t>(layer.weight.cols));
    w.put_f64_array(layer.weight.data);
    w.put_f64_array(layer.bias);
}

DenseLayer get_layer(ByteReader& r, std::size_t expect_rows,
                     std::size_t expect_cols, const std::string& what) {
    const std::uint32_t rows = r.get_u32();
    const std::uint32_t cols = r.get_u32();
    if (rows != expect_rows || cols != expect_cols) {
        throw std::runtime_error(what + ": shape " + std::to_string(rows) + "x" +
                                 std::to_string(cols) + " does not match config " +
                                 std::to_string(expect_rows) + "x" +
                                 std::to_string(expect_cols));
    }
    DenseLayer layer;
    layer.weight = DenseMatrix(rows, cols);
    r.get_f64_array(layer.weight.data, std::size_t{rows} * cols);
    r.get_f64_array(layer.bias, rows);
    return layer;
}

std::vector<std::size_t> stack_dims(std::size_t in,
                                    const std::vector<std::size_t>& hidden,
                                    std::size_t out) {
    std::vector<std::size_t> dims{in};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(out);
    return dims;
}

}  // namespace

void write_checkpoint(const std::string& path, const ModelParams& params) {
    const ModelConfig& cfg = params.config;
    cfg.validate();

    ByteWriter w;
    w.put_bytes(kCheckpointMagic, 8);
    w.put_u32(static_cast<std::uint32_t>(cfg.n1));
    w.put_u32(static_cast<std::uint32_t>(cfg.n_scalar));
    w.put_u32(static_cast<std::uint32_t>(cfg.branch_hidden.size()));
    for (std::size_t h : cfg.branch_hidden) w.put_u32(static_cast<std::uint32_t>(h));
    w.put_u32(static_cast<std::uint32_t>(cfg.trunk_hidden.size()));
    for (std::size_t h : cfg.trunk_hidden) w.put_u32(static_cast<std::uint32_t>(h));
    w.put_u32(static_cast<std::uint32_t>(cfg.n_nodes));
    w.put_f64(cfg.dropout_rate);

    for (int c = 0; c < 3; ++c) {
        w.put_f64(params.norm.input_min[c]);
        w.put_f64(params.norm.input_max[c]);
    }
    for (int q = 0; q < 3; ++q) {
        w.put_f64(params.norm.output_mean[q]);
        w.put_f64(params.norm.output_std[q]);
    }

    for (const auto& l : params.branch1) put_layer(w, l);
    for (const auto& l : params.branch2) put_layer(w, l);
    for (const auto& l : params.trunk) put_layer(w, l);
    put_layer(w, params.head_T);
    put_layer(w, params.head_v);
    put_layer(w, params.head_k);

    write_file_atomic(path, w.bytes());
}

ModelParams read_checkpoint(const std::string& path) {
    ByteReader r(read_file(path), "checkpoint file " + path);
    check_magic(r, kCheckpointMagic, "checkpoint file " + path);

    ModelConfig cfg;
    cfg.n1 = r.get_u32();
    cfg.n_scalar = r.get_u32();
    const std::uint32_t nb = r.get_u32();
    if (nb > 64) {
        throw std::runtime_error("checkpoint file " + path +
                                 ": implausible branch depth " + std::to_string(nb));
    }
    cfg.branch_hidden.resize(nb);
    for (auto& h : cfg.branch_hidden) h = r.get_u32();
    const std::uint32_t nt = r.get_u32();
    if (nt > 64) {
        throw std::runtime_error("checkpoint file " + path +
                                 ": implausible trunk depth " + std::to_string(nt));
    }
    cfg.trunk_hidden.resize(nt);
    for (auto& h : cfg.trunk_hidden) h = r.get_u32();
    cfg.n_nodes = r.get_u32();
    cfg.dropout_rate = r.get_f64();
    cfg.validate();

    ModelParams params;
    params.config = cfg;
    for (int c = 0; c < 3; ++c) {
        params.norm.input_min[c] = r.get_f64();
        params.norm.input_max[c] = r.get_f64();
    }
    for (int q = 0; q < 3; ++q) {
        params.norm.output_mean[q] = r.get_f64();
        params.norm.output_std[q] = r.get_f64();
    }
    params.norm.validate();

    auto read_stack = [&r](const std::vector<std::size_t>& dims,
                           const std::string& name) {
        std::vector<DenseLayer> layers;
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            layers.push_back(get_layer(r, dims[l + 1], dims[l],
                                       name + " layer " + std::to_string(l)));
        }
        return layers;
    };
    params.branch1 =
        read_stack(stack_dims(cfg.n1, cfg.branch_hidden, cfg.n_nodes), "branch1");
    params.branch2 = read_stack(
        stack_dims(cfg.n_scalar, cfg.branch_hidden, cfg.n_nodes), "branch2");
    params.trunk = read_stack(stack_dims(2, cfg.trunk_hidden, 1), "trunk");
    params.head_T = get_layer(r, cfg.n_nodes, cfg.n_nodes, "head_T");
    params.head_v = get_layer(r, cfg.n_nodes, cfg.n_nodes, "head_v");
    params.head_k = get_layer(r, cfg.n_nodes, cfg.n_nodes, "head_k");
    r.expect_exhausted();

    const auto& kr = kernels::active();
    for (ParamSpan s : param_spans(params)) {
        if (!kr.all_finite(s.data, s.len)) {
            throw std::runtime_error("checkpoint file " + path +
                                     ": non-finite parameter value");
        }
    }
    return params;
}

}  // namespace miovs
