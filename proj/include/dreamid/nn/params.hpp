#pragma once

#include "dreamid/nn/tape.hpp"

#include <json.hpp>

#include <string>
#include <unordered_map>
#include <vector>

namespace dreamid::nn {

using Json = nlohmann::ordered_json;

// Named parameter tensors with gradient and Adam state. Insertion order is
// the serialization and checksum order, so construction must be deterministic.
class ParamStore {
  public:
    struct Param {
        std::string name;
        Mat value;
        Mat grad;
        Mat m, v;  // Adam moments
        bool trainable = true;
    };

    Mat& add(const std::string& name, Index rows, Index cols, bool trainable = true);
    bool has(const std::string& name) const { return index_.count(name) > 0; }
    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;

    // Puts the parameter on a tape; trainable parameters get a gradient sink.
    Tape::Id use(Tape& tape, const std::string& name);

    void zero_grad();
    std::uint64_t value_checksum() const;
    std::uint64_t frozen_checksum() const;  // non-trainable tensors only
    std::size_t size() const { return items_.size(); }
    std::vector<Param>& items() { return items_; }
    const std::vector<Param>& items() const { return items_; }

    Json to_json() const;
    // Loads values (and Adam state when present) into already-declared
    // parameters; unknown or missing names / shape mismatches fail loudly.
    void load_json(const Json& j);

  private:
    std::vector<Param> items_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct AdamOptimizer {
    Scalar lr = 1e-3;
    Scalar beta1 = 0.9;
    Scalar beta2 = 0.999;
    Scalar eps = 1e-8;
    long step_count = 0;

    void step(ParamStore& params);
};

std::string base64_encode(const std::vector<double>& data);
std::vector<double> base64_decode_doubles(const std::string& text);

}  // namespace dreamid::nn
