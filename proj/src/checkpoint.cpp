#include "dnc/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "dnc/errors.hpp"

namespace dnc {
namespace {

constexpr const char* kMagic = "DNC-CHECKPOINT";

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double to_double(const std::string& s, const std::string& key) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw DataError("checkpoint: bad value for " + key + ": '" + s + "'");
    return v;
}

std::uint64_t to_u64(const std::string& s, const std::string& key) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || p != s.data() + s.size())
        throw DataError("checkpoint: bad value for " + key + ": '" + s + "'");
    return v;
}

std::vector<std::size_t> parse_list(const std::string& s, const std::string& key) {
    std::vector<std::size_t> out;
    if (s.empty()) return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_u64(item, key));
    return out;
}

std::uint64_t to_le(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t r = 0;
        for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
        return r;
    }
    return v;
}

struct ArraySpec {
    std::string name;
    bool is_f64 = true;
    std::size_t rows = 0;
    std::size_t cols = 0;
};

class Writer {
public:
    void add(const std::string& name, const Matrix& m) {
        specs_.push_back({name, true, m.rows(), m.cols()});
        for (double v : m.data()) put(std::bit_cast<std::uint64_t>(v));
    }
    void add(const std::string& name, std::span<const double> v) {
        specs_.push_back({name, true, 1, v.size()});
        for (double x : v) put(std::bit_cast<std::uint64_t>(x));
    }
    void add_u64(const std::string& name, const std::vector<std::uint64_t>& v) {
        specs_.push_back({name, false, 1, v.size()});
        for (auto x : v) put(x);
    }
    const std::vector<ArraySpec>& specs() const { return specs_; }
    const std::string& payload() const { return payload_; }

private:
    void put(std::uint64_t v) {
        const std::uint64_t le = to_le(v);
        char buf[8];
        std::memcpy(buf, &le, 8);
        payload_.append(buf, 8);
    }
    std::vector<ArraySpec> specs_;
    std::string payload_;
};

class Reader {
public:
    Reader(std::vector<ArraySpec> specs, std::string_view payload)
        : specs_(std::move(specs)), payload_(payload) {}

    const ArraySpec& expect(const std::string& name, bool is_f64) {
        if (next_ >= specs_.size() || specs_[next_].name != name)
            throw DataError("checkpoint: expected array '" + name + "'" +
                            (next_ < specs_.size() ? ", found '" + specs_[next_].name + "'" : ""));
        if (specs_[next_].is_f64 != is_f64)
            throw DataError("checkpoint: array '" + name + "' has the wrong element type");
        return specs_[next_];
    }
    Matrix matrix(const std::string& name, std::size_t rows, std::size_t cols) {
        const auto& s = expect(name, true);
        if (s.rows != rows || s.cols != cols)
            throw DataError("checkpoint: array '" + name + "' is " + std::to_string(s.rows) + "x" +
                            std::to_string(s.cols) + ", expected " + std::to_string(rows) + "x" +
                            std::to_string(cols));
        Matrix m(rows, cols);
        for (double& v : m.data()) v = std::bit_cast<double>(get());
        ++next_;
        return m;
    }
    Vector vector(const std::string& name, std::size_t n) {
        const Matrix m = matrix(name, 1, n);
        return Vector(m.data().begin(), m.data().end());
    }
    std::vector<std::uint64_t> u64(const std::string& name, std::size_t n) {
        const auto& s = expect(name, false);
        if (s.rows != 1 || s.cols != n)
            throw DataError("checkpoint: array '" + name + "' has " + std::to_string(s.cols) +
                            " entries, expected " + std::to_string(n));
        std::vector<std::uint64_t> out(n);
        for (auto& v : out) v = get();
        ++next_;
        return out;
    }
    bool peek(const std::string& name) const {
        return next_ < specs_.size() && specs_[next_].name == name;
    }
    const ArraySpec& current() const {
        if (next_ >= specs_.size()) throw DataError("checkpoint: missing arrays");
        return specs_[next_];
    }
    void finish() const {
        if (next_ != specs_.size())
            throw DataError("checkpoint: unexpected array '" + specs_[next_].name + "'");
    }

private:
    std::uint64_t get() {
        std::uint64_t v = 0;
        std::memcpy(&v, payload_.data() + offset_, 8);
        offset_ += 8;
        return to_le(v);
    }
    std::vector<ArraySpec> specs_;
    std::string_view payload_;
    std::size_t next_ = 0;
    std::size_t offset_ = 0;
};

std::map<std::string, std::string> config_entries(const TrainConfig& c) {
    std::map<std::string, std::string> e;
    e["epochs"] = std::to_string(c.epochs);
    e["batch_size"] = std::to_string(c.batch_size);
    e["classifier"] = to_string(c.classifier);
    e["k"] = std::to_string(c.k);
    std::string km;
    for (const auto& [cls, k] : c.k_map)
        km += (km.empty() ? "" : ";") + std::to_string(cls) + ":" + std::to_string(k);
    e["k_map"] = km;
    e["mu"] = fmt(c.mu);
    e["epsilon"] = fmt(c.epsilon);
    e["sinkhorn_iters"] = std::to_string(c.sinkhorn_iters);
    e["memory_batches"] = std::to_string(c.memory_batches);
    e["temperature"] = fmt(c.temperature);
    e["learning_rate"] = fmt(c.learning_rate);
    e["poly_lr"] = c.poly_lr ? "1" : "0";
    e["seed"] = std::to_string(c.seed);
    e["anchor_after_epoch"] = c.anchor_after_epoch ? std::to_string(*c.anchor_after_epoch) : "none";
    e["clusterer"] = to_string(c.clusterer);
    std::string hidden;
    for (auto h : c.hidden) hidden += (hidden.empty() ? "" : ",") + std::to_string(h);
    e["hidden"] = hidden;
    e["feature_dim"] = std::to_string(c.feature_dim);
    return e;
}

TrainConfig parse_config(const std::map<std::string, std::string>& kv) {
    auto get = [&](const std::string& key) -> const std::string& {
        const auto it = kv.find("config." + key);
        if (it == kv.end()) throw DataError("checkpoint: missing config." + key);
        return it->second;
    };
    TrainConfig c;
    try {
        c.epochs = static_cast<int>(to_u64(get("epochs"), "epochs"));
        c.batch_size = to_u64(get("batch_size"), "batch_size");
        c.classifier = parse_classifier_kind(get("classifier"));
        c.k = to_u64(get("k"), "k");
        std::stringstream km(get("k_map"));
        std::string item;
        while (std::getline(km, item, ';')) {
            const auto colon = item.find(':');
            if (colon == std::string::npos) throw DataError("checkpoint: bad k_map entry");
            c.k_map[to_u64(item.substr(0, colon), "k_map")] =
                to_u64(item.substr(colon + 1), "k_map");
        }
        c.mu = to_double(get("mu"), "mu");
        c.epsilon = to_double(get("epsilon"), "epsilon");
        c.sinkhorn_iters = static_cast<int>(to_u64(get("sinkhorn_iters"), "sinkhorn_iters"));
        c.memory_batches = to_u64(get("memory_batches"), "memory_batches");
        c.temperature = to_double(get("temperature"), "temperature");
        c.learning_rate = to_double(get("learning_rate"), "learning_rate");
        c.poly_lr = get("poly_lr") == "1";
        c.seed = to_u64(get("seed"), "seed");
        const auto& anchor = get("anchor_after_epoch");
        if (anchor != "none") c.anchor_after_epoch = static_cast<int>(to_u64(anchor, "anchor"));
        c.clusterer = parse_clusterer(get("clusterer"));
        c.hidden = parse_list(get("hidden"), "hidden");
        c.feature_dim = to_u64(get("feature_dim"), "feature_dim");
    } catch (const ConfigError& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    }
    return c;
}

}  // namespace

Checkpoint make_checkpoint(const TrainState& state) {
    std::ostringstream rng;
    rng << state.rng;
    return Checkpoint{kCheckpointFormatVersion, state.config, state.num_classes, state.model,
                      rng.str()};
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
    Writer w;
    const auto& layers = ckpt.model.encoder.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        w.add("encoder." + std::to_string(l) + ".weight", layers[l].weight);
        w.add("encoder." + std::to_string(l) + ".bias", layers[l].bias);
    }
    if (ckpt.model.is_dnc()) {
        const auto& bank = ckpt.model.bank();
        std::vector<std::uint64_t> subs(bank.subs_per_class().begin(), bank.subs_per_class().end());
        w.add_u64("bank.subs", subs);
        w.add("bank.centroids", bank.centroids());
        if (bank.anchored()) w.add_u64("bank.anchor_ids", *bank.anchor_ids());
    } else {
        w.add("linear.weight", ckpt.model.linear().weight);
        w.add("linear.bias", ckpt.model.linear().bias);
    }

    std::ostringstream out;
    out << kMagic << '\n';
    out << "format_version=" << ckpt.format_version << '\n';
    for (const auto& [k, v] : config_entries(ckpt.config)) out << "config." << k << '=' << v << '\n';
    out << "num_classes=" << ckpt.num_classes << '\n';
    out << "classifier=" << (ckpt.model.is_dnc() ? "dnc" : "softmax") << '\n';
    out << "encoder_layers=" << layers.size() << '\n';
    out << "rng=" << ckpt.rng_state << '\n';
    for (const auto& s : w.specs())
        out << "array " << s.name << ' ' << (s.is_f64 ? "f64" : "u64") << ' ' << s.rows << ' '
            << s.cols << '\n';
    out << "payload_bytes=" << w.payload().size() << '\n';
    out << "end\n";
    return out.str() + w.payload();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
    std::size_t pos = 0;
    auto next_line = [&]() -> std::string {
        const auto nl = bytes.find('\n', pos);
        if (nl == std::string::npos) throw DataError("checkpoint: truncated manifest");
        std::string line = bytes.substr(pos, nl - pos);
        pos = nl + 1;
        return line;
    };
    if (next_line() != kMagic) throw DataError("checkpoint: not a DNC checkpoint");

    std::map<std::string, std::string> kv;
    std::vector<ArraySpec> specs;
    for (;;) {
        const std::string line = next_line();
        if (line == "end") break;
        if (line.rfind("array ", 0) == 0) {
            std::istringstream ss(line.substr(6));
            ArraySpec s;
            std::string type;
            if (!(ss >> s.name >> type >> s.rows >> s.cols) || (type != "f64" && type != "u64"))
                throw DataError("checkpoint: bad array line '" + line + "'");
            s.is_f64 = type == "f64";
            specs.push_back(s);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError("checkpoint: bad manifest line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }

    const auto version_it = kv.find("format_version");
    if (version_it == kv.end()) throw DataError("checkpoint: missing format_version");
    if (version_it->second != std::to_string(kCheckpointFormatVersion))
        throw DataError("checkpoint: unsupported format version '" + version_it->second +
                        "' (expected " + std::to_string(kCheckpointFormatVersion) + ")");

    auto need = [&](const std::string& key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) throw DataError("checkpoint: missing " + key);
        return it->second;
    };
    const std::uint64_t declared = to_u64(need("payload_bytes"), "payload_bytes");
    std::uint64_t expected = 0;
    for (const auto& s : specs) expected += 8ULL * s.rows * s.cols;
    if (declared != expected)
        throw DataError("checkpoint: manifest declares " + std::to_string(declared) +
                        " payload bytes but arrays need " + std::to_string(expected));
    const std::size_t available = bytes.size() - pos;
    if (available != declared)
        throw DataError("checkpoint: payload length " + std::to_string(available) +
                        " bytes, expected " + std::to_string(declared) +
                        (available < declared ? " (truncated)" : ""));

    Checkpoint ckpt;
    ckpt.format_version = kCheckpointFormatVersion;
    ckpt.config = parse_config(kv);
    ckpt.num_classes = to_u64(need("num_classes"), "num_classes");
    ckpt.rng_state = need("rng");
    const std::string kind = need("classifier");
    const std::size_t n_layers = to_u64(need("encoder_layers"), "encoder_layers");

    Reader r(std::move(specs), std::string_view(bytes).substr(pos));
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const std::string base = "encoder." + std::to_string(l);
        const auto& s = r.current();
        Matrix wgt = r.matrix(base + ".weight", s.rows, s.cols);
        Vector bias = r.vector(base + ".bias", wgt.cols());
        layers.push_back({std::move(wgt), std::move(bias)});
    }
    try {
        ckpt.model.encoder = Encoder(std::move(layers));
    } catch (const Error& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    }
    const std::size_t d = ckpt.model.encoder.output_dim();

    if (kind == "dnc") {
        const auto subs64 = r.u64("bank.subs", ckpt.num_classes);
        std::vector<std::size_t> subs(subs64.begin(), subs64.end());
        std::size_t total = 0;
        for (auto k : subs) total += k;
        Matrix centroids = r.matrix("bank.centroids", total, d);
        try {
            SubCentroidBank bank(std::move(subs), std::move(centroids));
            if (r.peek("bank.anchor_ids")) bank.set_anchor_ids(r.u64("bank.anchor_ids", total));
            ckpt.model.head = std::move(bank);
        } catch (const Error& e) {
            throw DataError(std::string("checkpoint: ") + e.what());
        }
    } else if (kind == "softmax") {
        LinearClassifier clf;
        clf.weight = r.matrix("linear.weight", d, ckpt.num_classes);
        clf.bias = r.vector("linear.bias", ckpt.num_classes);
        ckpt.model.head = std::move(clf);
    } else {
        throw DataError("checkpoint: unknown classifier '" + kind + "'");
    }
    r.finish();

    // The config snapshot must describe the arrays that were stored.
    const auto& cfg = ckpt.config;
    std::vector<std::size_t> widths;
    for (const auto& layer : ckpt.model.encoder.layers()) widths.push_back(layer.weight.cols());
    std::vector<std::size_t> want(cfg.hidden);
    want.push_back(cfg.feature_dim);
    if (widths != want)
        throw DataError("checkpoint: encoder layer widths disagree with config.hidden/feature_dim");
    if (kind != to_string(cfg.classifier))
        throw DataError("checkpoint: classifier '" + kind + "' disagrees with config.classifier");
    if (kind == "dnc") {
        std::vector<std::size_t> subs;
        try {
            subs = cfg.subs_per_class(ckpt.num_classes);
        } catch (const Error& e) {
            throw DataError(std::string("checkpoint: ") + e.what());
        }
        if (ckpt.model.bank().subs_per_class() != subs)
            throw DataError("checkpoint: bank.subs disagrees with config.k/k_map");
    }
    return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write checkpoint '" + path + "'");
    const std::string bytes = serialize_checkpoint(ckpt);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return deserialize_checkpoint(ss.str());
}

}  // namespace dnc
