#pragma once

#include "dreamid/conditioning.hpp"

#include <filesystem>

namespace dreamid {

// Linear-beta DDPM schedule. Index 0 is the identity step (abar = 1);
// valid diffusion timesteps are 1..T.
struct NoiseSchedule {
    int T = 1000;
    Vec beta;       // size T+1, beta[0] unused
    Vec alpha_bar;  // size T+1, alpha_bar[0] = 1

    static NoiseSchedule linear(int T, Scalar beta_start = 1e-4, Scalar beta_end = 0.02);
};

// Latent tensor stored as (side*side) position rows x channel columns,
// position p = y*side + x.
struct LatentCode {
    Mat z;
    int channels = 4;
    int side = 8;
    int image_resolution = 64;

    void check_finite() const;
};

struct SamplerConfig {
    int steps = 30;
    Scalar guidance_scale = 7.5;
    std::uint64_t seed = 0;

    void validate() const;
    nn::Json to_json() const;
};

// Fixed linear image-to-latent map standing in for the VAE: block average
// pooling plus a constant channel mixing matrix, inverted on decode.
class ToyVae {
  public:
    ToyVae(int image_resolution, int latent_side, int channels);

    LatentCode encode(const Image& img) const;
    Image decode(const LatentCode& z) const;
    std::uint64_t checksum() const;

  private:
    int image_res_, side_, channels_;
    Mat mix_;   // channels x 3
    Mat pinv_;  // 3 x channels
};

struct BackendConfig {
    int d_text = 128;
    int vocab_size = 4096;
    int max_len = 32;
    int dm = 128;  // noise-net width
    int latent_channels = 4;
    int latent_side = 8;
    int image_resolution = 64;
    int T = 1000;
    Scalar beta_start = 1e-4;
    Scalar beta_end = 0.02;

    int latent_tokens() const { return latent_side * latent_side; }
    nn::Json to_json() const;
    static BackendConfig from_json(const nn::Json& j);
};

// Text-conditioned latent diffusion backend. Everything behind this
// interface is frozen at training time; an adapter for a full pre-trained
// pipeline would implement the same surface.
class DiffusionBackend {
  public:
    virtual ~DiffusionBackend() = default;

    virtual const Tokenizer& tokenizer() const = 0;
    virtual const Mat& embedding_table() const = 0;
    virtual Index max_len() const = 0;
    virtual const NoiseSchedule& schedule() const = 0;
    virtual const ToyVae& vae() const = 0;

    virtual LatentCode add_noise(const LatentCode& z, int t, const Mat& eps) const = 0;
    virtual Mat predict_noise(const Mat& z_t, const ConditioningSequence& cond,
                              int t) const = 0;
    virtual nn::Tape::Id predict_noise_on_tape(nn::Tape& tape, const Mat& z_t,
                                               nn::Tape::Id cond, int t) const = 0;
    virtual LatentCode ddim_sample_latent(const ConditioningSequence& cond,
                                          const SamplerConfig& cfg) const = 0;
    virtual Image ddim_sample(const ConditioningSequence& cond,
                              const SamplerConfig& cfg) const = 0;

    virtual std::uint64_t frozen_checksum() const = 0;
};

class ToyBackend final : public DiffusionBackend {
  public:
    ToyBackend(BackendConfig config, std::uint64_t seed);

    const BackendConfig& config() const { return cfg_; }
    const Tokenizer& tokenizer() const override { return tok_; }
    const Mat& embedding_table() const override;
    Index max_len() const override { return cfg_.max_len; }
    const NoiseSchedule& schedule() const override { return sched_; }
    const ToyVae& vae() const override { return vae_; }

    LatentCode add_noise(const LatentCode& z, int t, const Mat& eps) const override;
    Mat predict_noise(const Mat& z_t, const ConditioningSequence& cond,
                      int t) const override;
    nn::Tape::Id predict_noise_on_tape(nn::Tape& tape, const Mat& z_t,
                                       nn::Tape::Id cond, int t) const override;
    LatentCode ddim_sample_latent(const ConditioningSequence& cond,
                                  const SamplerConfig& cfg) const override;
    Image ddim_sample(const ConditioningSequence& cond,
                      const SamplerConfig& cfg) const override;

    std::uint64_t frozen_checksum() const override;

    ConditioningSequence uncond_sequence() const;
    ConditioningSequence prompt_conditioning(const std::string& text) const;

    void save(const std::filesystem::path& path) const;
    static ToyBackend load(const std::filesystem::path& path);

  private:
    // Pads cond to max_len with the frozen pad embedding, runs the contextual
    // text block, and evaluates the x0-parameterized noise prediction.
    nn::Tape::Id noise_net(nn::Tape& tape, const Mat& z_t, nn::Tape::Id cond,
                           int t) const;

    BackendConfig cfg_;
    Tokenizer tok_;
    mutable nn::ParamStore params_;
    NoiseSchedule sched_;
    ToyVae vae_;
};

// Lossless image plus a sidecar record of prompt, seed and sampler settings.
void write_image_with_sidecar(const std::filesystem::path& image_path, const Image& img,
                              const std::string& prompt, const SamplerConfig& cfg);

}  // namespace dreamid
