#include "dreamid/nn/params.hpp"

#include <cmath>
#include <cstring>

namespace dreamid::nn {

Mat& ParamStore::add(const std::string& name, Index rows, Index cols, bool trainable) {
    if (has(name)) throw ConfigError("duplicate parameter: " + name);
    Param p;
    p.name = name;
    p.value = Mat::Zero(rows, cols);
    p.grad = Mat::Zero(rows, cols);
    p.trainable = trainable;
    if (trainable) {
        p.m = Mat::Zero(rows, cols);
        p.v = Mat::Zero(rows, cols);
    }
    index_[name] = items_.size();
    items_.push_back(std::move(p));
    return items_.back().value;
}

ParamStore::Param& ParamStore::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return items_[it->second];
}

const ParamStore::Param& ParamStore::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return items_[it->second];
}

Tape::Id ParamStore::use(Tape& tape, const std::string& name) {
    Param& p = at(name);
    return tape.leaf(p.value, p.trainable ? &p.grad : nullptr);
}

void ParamStore::zero_grad() {
    for (auto& p : items_) p.grad.setZero();
}

std::uint64_t ParamStore::value_checksum() const {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& p : items_) {
        h = fnv1a(p.name, h);
        h = fnv1a(p.value.data(), sizeof(double) * p.value.size(), h);
    }
    return h;
}

std::uint64_t ParamStore::frozen_checksum() const {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& p : items_) {
        if (p.trainable) continue;
        h = fnv1a(p.name, h);
        h = fnv1a(p.value.data(), sizeof(double) * p.value.size(), h);
    }
    return h;
}

namespace {

Json mat_to_json(const Mat& m) {
    std::vector<double> flat(m.data(), m.data() + m.size());
    Json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    j["data"] = base64_encode(flat);
    return j;
}

Mat mat_from_json(const Json& j) {
    Index rows = j.at("rows").get<Index>();
    Index cols = j.at("cols").get<Index>();
    std::vector<double> flat = base64_decode_doubles(j.at("data").get<std::string>());
    if (static_cast<Index>(flat.size()) != rows * cols)
        throw IoError("tensor payload size mismatch");
    Mat m(rows, cols);
    std::memcpy(m.data(), flat.data(), sizeof(double) * flat.size());
    return m;
}

}  // namespace

Json ParamStore::to_json() const {
    Json j = Json::object();
    for (const auto& p : items_) {
        Json e;
        e["trainable"] = p.trainable;
        e["value"] = mat_to_json(p.value);
        if (p.trainable && p.m.size() > 0) {
            e["adam_m"] = mat_to_json(p.m);
            e["adam_v"] = mat_to_json(p.v);
        }
        j[p.name] = std::move(e);
    }
    return j;
}

void ParamStore::load_json(const Json& j) {
    for (auto& p : items_) {
        if (!j.contains(p.name))
            throw IoError("checkpoint missing parameter: " + p.name);
        const Json& e = j.at(p.name);
        Mat v = mat_from_json(e.at("value"));
        if (v.rows() != p.value.rows() || v.cols() != p.value.cols())
            throw ShapeError("checkpoint shape mismatch for " + p.name);
        p.value = std::move(v);
        if (p.trainable && e.contains("adam_m")) {
            p.m = mat_from_json(e.at("adam_m"));
            p.v = mat_from_json(e.at("adam_v"));
        }
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!has(it.key())) throw IoError("checkpoint has unknown parameter: " + it.key());
    }
}

void AdamOptimizer::step(ParamStore& params) {
    ++step_count;
    const Scalar bc1 = 1.0 - std::pow(beta1, static_cast<Scalar>(step_count));
    const Scalar bc2 = 1.0 - std::pow(beta2, static_cast<Scalar>(step_count));
    for (auto& p : params.items()) {
        if (!p.trainable) continue;
        p.m = beta1 * p.m + (1.0 - beta1) * p.grad;
        p.v = (beta2 * p.v.array() + (1.0 - beta2) * p.grad.array().square()).matrix();
        Mat mhat = p.m / bc1;
        Mat vhat = p.v / bc2;
        p.value.array() -= lr * mhat.array() / (vhat.array().sqrt() + eps);
    }
}

namespace {
constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_index(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}
}  // namespace

std::string base64_encode(const std::vector<double>& data) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data.data());
    std::size_t n = data.size() * sizeof(double);
    std::string out;
    out.reserve((n + 2) / 3 * 4);
    for (std::size_t i = 0; i < n; i += 3) {
        unsigned b0 = bytes[i];
        unsigned b1 = i + 1 < n ? bytes[i + 1] : 0;
        unsigned b2 = i + 2 < n ? bytes[i + 2] : 0;
        out.push_back(kB64[b0 >> 2]);
        out.push_back(kB64[((b0 & 3) << 4) | (b1 >> 4)]);
        out.push_back(i + 1 < n ? kB64[((b1 & 15) << 2) | (b2 >> 6)] : '=');
        out.push_back(i + 2 < n ? kB64[b2 & 63] : '=');
    }
    return out;
}

std::vector<double> base64_decode_doubles(const std::string& text) {
    std::vector<unsigned char> bytes;
    bytes.reserve(text.size() / 4 * 3);
    unsigned acc = 0;
    int bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        int v = b64_index(c);
        if (v < 0) throw IoError("invalid base64 payload");
        acc = (acc << 6) | static_cast<unsigned>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            bytes.push_back(static_cast<unsigned char>((acc >> bits) & 0xFF));
        }
    }
    if (bytes.size() % sizeof(double) != 0)
        throw IoError("base64 payload is not a whole number of doubles");
    std::vector<double> out(bytes.size() / sizeof(double));
    std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

}  // namespace dreamid::nn
