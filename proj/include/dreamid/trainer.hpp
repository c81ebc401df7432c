#pragma once

#include "dreamid/diffusion.hpp"
#include "dreamid/selfaug.hpp"

#include <filesystem>

namespace dreamid {

struct LossBreakdown {
    Scalar l_diffusion = 0;
    Scalar l_reg = 0;
    Scalar lambda = 0;
    Scalar l_total = 0;  // always l_diffusion + lambda * l_reg
};

struct TrainConfig {
    int iterations = 500;
    int batch_size = 4;
    Scalar lr = 1e-2;
    Scalar lambda = 1e-4;
    Scalar mix_ratio = 0.5;  // probability a batch slot draws an edited pair
    std::uint64_t seed = 0;
    int checkpoint_every = 100;

    void validate() const;
    nn::Json to_json() const;
    static TrainConfig from_json(const nn::Json& j);
};

struct TrainSample {
    std::string kind;  // "reconstruction" | "selfaug"
    AlignedFace face;
    Image target;
    PromptTemplate prompt;
};

struct TrainSet {
    std::vector<TrainSample> recon;
    std::vector<TrainSample> selfaug;

    std::size_t size() const { return recon.size() + selfaug.size(); }
    static TrainSet load(const DatasetManifest& manifest,
                         const std::filesystem::path& base_dir);
};

// Draws batch_size samples, each slot Bernoulli(mix_ratio) from the edited
// pool, otherwise reconstruction. Throws ConfigError when the required pool
// is empty.
std::vector<const TrainSample*> sample_batch(const TrainSet& data, Scalar mix_ratio,
                                             int batch_size, Rng& rng);

// Optimizes the identity encoder against a frozen backend. Each step draws
// fresh timesteps and noise, differentiates the denoising error plus the
// embedding-norm penalty through the conditioning splice, and applies Adam
// to the encoder weights only.
class Trainer {
  public:
    Trainer(M2Encoder& encoder, const DiffusionBackend& backend, TrainConfig cfg);

    LossBreakdown training_step(const std::vector<const TrainSample*>& batch);

    // Full loop: JSONL loss log, periodic + latest checkpoints. With zero
    // iterations only the initial checkpoint is written.
    void run(const TrainSet& data, const std::filesystem::path& out_dir);

    void save_checkpoint(const std::filesystem::path& path) const;
    void load_checkpoint(const std::filesystem::path& path);

    long step() const { return step_; }
    const TrainConfig& config() const { return cfg_; }
    Rng& rng() { return rng_; }

  private:
    M2Encoder& encoder_;
    const DiffusionBackend& backend_;
    TrainConfig cfg_;
    nn::AdamOptimizer opt_;
    Rng rng_;
    long step_ = 0;
};

// Rebuilds the encoder (config + weights) stored in a training checkpoint.
M2Encoder encoder_from_checkpoint(const std::filesystem::path& path);

}  // namespace dreamid
