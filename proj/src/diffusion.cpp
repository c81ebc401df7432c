#include "dreamid/diffusion.hpp"

#include <cmath>
#include <fstream>

namespace dreamid {

using nn::Json;
using nn::Tape;

NoiseSchedule NoiseSchedule::linear(int T, Scalar beta_start, Scalar beta_end) {
    if (T < 1) throw ConfigError("schedule length must be >= 1");
    NoiseSchedule s;
    s.T = T;
    s.beta = Vec::Zero(T + 1);
    s.alpha_bar = Vec::Zero(T + 1);
    s.alpha_bar(0) = 1.0;
    for (int t = 1; t <= T; ++t) {
        s.beta(t) = T == 1 ? beta_start
                           : beta_start + (beta_end - beta_start) * (t - 1) / (T - 1);
        s.alpha_bar(t) = s.alpha_bar(t - 1) * (1.0 - s.beta(t));
    }
    return s;
}

void LatentCode::check_finite() const {
    if (!z.allFinite()) throw ShapeError("latent contains non-finite values");
}

void SamplerConfig::validate() const {
    if (steps < 1) throw ConfigError("sampler steps must be >= 1");
    if (guidance_scale < 0.0) throw ConfigError("guidance scale must be non-negative");
}

Json SamplerConfig::to_json() const {
    Json j;
    j["steps"] = steps;
    j["guidance_scale"] = guidance_scale;
    j["seed"] = seed;
    return j;
}

ToyVae::ToyVae(int image_resolution, int latent_side, int channels)
    : image_res_(image_resolution), side_(latent_side), channels_(channels) {
    if (channels != 4) throw ConfigError("toy VAE supports 4 latent channels");
    if (image_resolution % latent_side != 0)
        throw ConfigError("image resolution must divide by latent side");
    mix_ = Mat(4, 3);
    mix_ << 0.57735, 0.57735, 0.57735,    // brightness
            0.70711, -0.70711, 0.0,       // red-green
            0.40825, 0.40825, -0.81650,   // yellow-blue
            0.50000, -0.50000, 0.50000;
    pinv_ = (mix_.transpose() * mix_).inverse() * mix_.transpose();
}

LatentCode ToyVae::encode(const Image& img) const {
    if (img.height() != image_res_ || img.width() != image_res_)
        throw ShapeError("toy VAE expects " + std::to_string(image_res_) + " square images");
    const Index factor = image_res_ / side_;
    std::array<Mat, 3> pooled;
    for (int c = 0; c < 3; ++c) pooled[c] = avg_pool(img.rgb[c], factor);
    LatentCode out;
    out.channels = channels_;
    out.side = side_;
    out.image_resolution = image_res_;
    out.z = Mat(side_ * side_, channels_);
    for (Index y = 0; y < side_; ++y) {
        for (Index x = 0; x < side_; ++x) {
            Vec rgb(3);
            for (int c = 0; c < 3; ++c) rgb(c) = (pooled[c](y, x) - 0.5) * 2.0;
            out.z.row(y * side_ + x) = (mix_ * rgb).transpose();
        }
    }
    return out;
}

Image ToyVae::decode(const LatentCode& code) const {
    if (code.z.rows() != side_ * side_ || code.z.cols() != channels_)
        throw ShapeError("latent shape does not match the toy VAE configuration");
    Image small(side_, side_);
    for (Index y = 0; y < side_; ++y) {
        for (Index x = 0; x < side_; ++x) {
            Vec rgb = pinv_ * code.z.row(y * side_ + x).transpose();
            for (int c = 0; c < 3; ++c)
                small.rgb[c](y, x) = std::clamp(rgb(c) / 2.0 + 0.5, 0.0, 1.0);
        }
    }
    return resize_bilinear(small, image_res_, image_res_);
}

std::uint64_t ToyVae::checksum() const {
    std::uint64_t h = fnv1a(mix_.data(), sizeof(double) * mix_.size());
    return fnv1a(pinv_.data(), sizeof(double) * pinv_.size(), h);
}

Json BackendConfig::to_json() const {
    Json j;
    j["d_text"] = d_text;
    j["vocab_size"] = vocab_size;
    j["max_len"] = max_len;
    j["dm"] = dm;
    j["latent_channels"] = latent_channels;
    j["latent_side"] = latent_side;
    j["image_resolution"] = image_resolution;
    j["T"] = T;
    j["beta_start"] = beta_start;
    j["beta_end"] = beta_end;
    return j;
}

BackendConfig BackendConfig::from_json(const Json& j) {
    BackendConfig c;
    c.d_text = j.at("d_text").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.max_len = j.at("max_len").get<int>();
    c.dm = j.at("dm").get<int>();
    c.latent_channels = j.at("latent_channels").get<int>();
    c.latent_side = j.at("latent_side").get<int>();
    c.image_resolution = j.at("image_resolution").get<int>();
    c.T = j.at("T").get<int>();
    c.beta_start = j.at("beta_start").get<Scalar>();
    c.beta_end = j.at("beta_end").get<Scalar>();
    return c;
}

namespace {
Mat time_features(int t, int T) {
    Mat f(1, 16);
    for (int j = 0; j < 8; ++j) {
        Scalar freq = std::pow(10000.0, -static_cast<Scalar>(j) / 8.0);
        Scalar phase = freq * static_cast<Scalar>(t) / static_cast<Scalar>(T) * 1000.0;
        f(0, 2 * j) = std::sin(phase);
        f(0, 2 * j + 1) = std::cos(phase);
    }
    return f;
}
}  // namespace

ToyBackend::ToyBackend(BackendConfig config, std::uint64_t seed)
    : cfg_(config),
      sched_(NoiseSchedule::linear(config.T, config.beta_start, config.beta_end)),
      vae_(config.image_resolution, config.latent_side, config.latent_channels) {
    tok_.vocab_size = cfg_.vocab_size;
    Rng rng(seed ^ 0x746f7962636b6e64ull);
    const bool trainable = false;  // the whole backend is frozen
    Mat& table = params_.add("txt.table", cfg_.vocab_size, cfg_.d_text, trainable);
    nn::init_normal(table, rng, 0.1);
    table.row(Tokenizer::kPadId).setZero();
    Mat& tpos = params_.add("txt.pos", cfg_.max_len, cfg_.d_text, trainable);
    nn::init_normal(tpos, rng, 0.02);
    Mat& tpad = params_.add("txt.pad", 1, cfg_.d_text, trainable);
    nn::init_normal(tpad, rng, 0.02);
    nn::add_transformer_block(params_, "txt.blk", cfg_.d_text, 2 * cfg_.d_text, rng, trainable);

    Mat& lin = params_.add("lat.in.w", cfg_.latent_channels, cfg_.dm, trainable);
    nn::init_normal(lin, rng, 1.0 / std::sqrt(static_cast<Scalar>(cfg_.latent_channels)));
    Mat& lpos = params_.add("lat.pos", cfg_.latent_tokens(), cfg_.dm, trainable);
    nn::init_normal(lpos, rng, 0.02);
    Mat& tw = params_.add("t.w", 16, cfg_.dm, trainable);
    nn::init_normal(tw, rng, 0.25);
    nn::add_transformer_block(params_, "sa", cfg_.dm, 2 * cfg_.dm, rng, trainable);
    nn::add_cross_attention(params_, "ca", cfg_.dm, cfg_.d_text, rng, trainable);
    Mat& olg = params_.add("out.ln.g", 1, cfg_.dm, trainable);
    olg.setOnes();
    params_.add("out.ln.b", 1, cfg_.dm, trainable);
    Mat& ow = params_.add("out.w", cfg_.dm, cfg_.latent_channels, trainable);
    nn::init_normal(ow, rng, 0.02 / std::sqrt(static_cast<Scalar>(cfg_.dm)));
    // token-wise linear readout from the contextual sequence to the x0 estimate
    const Index ro_in = static_cast<Index>(cfg_.max_len) * cfg_.d_text;
    Mat& ro = params_.add("readout.w", ro_in, cfg_.latent_tokens() * cfg_.latent_channels,
                          trainable);
    nn::init_normal(ro, rng, 1.0 / std::sqrt(static_cast<Scalar>(ro_in)));
}

const Mat& ToyBackend::embedding_table() const { return params_.at("txt.table").value; }

LatentCode ToyBackend::add_noise(const LatentCode& z, int t, const Mat& eps) const {
    if (t < 0 || t > cfg_.T)
        throw ConfigError("timestep " + std::to_string(t) + " outside [0, " +
                          std::to_string(cfg_.T) + "]");
    if (eps.rows() != z.z.rows() || eps.cols() != z.z.cols())
        throw ShapeError("noise shape does not match the latent");
    LatentCode out = z;
    const Scalar ab = sched_.alpha_bar(t);
    out.z = std::sqrt(ab) * z.z + std::sqrt(1.0 - ab) * eps;
    return out;
}

Tape::Id ToyBackend::noise_net(Tape& tape, const Mat& z_t, Tape::Id cond, int t) const {
    if (t < 1 || t > cfg_.T)
        throw ConfigError("noise prediction needs a timestep in [1, " +
                          std::to_string(cfg_.T) + "]");
    if (z_t.rows() != cfg_.latent_tokens() || z_t.cols() != cfg_.latent_channels)
        throw ShapeError("latent shape mismatch in predict_noise");
    const Mat& c = tape.value(cond);
    if (c.cols() != cfg_.d_text)
        throw ShapeError("conditioning width does not match d_text");
    if (c.rows() > cfg_.max_len)
        throw TruncationError("conditioning longer than max_len");
    // pad with the frozen pad embedding, then contextual text block
    Tape::Id padded = cond;
    if (c.rows() < cfg_.max_len) {
        Mat pad = params_.at("txt.pad").value.replicate(cfg_.max_len - c.rows(), 1);
        padded = tape.concat_rows({cond, tape.constant(std::move(pad))});
    }
    Tape::Id ctx = tape.add(padded, params_.use(tape, "txt.pos"));
    ctx = nn::transformer_block(tape, params_, "txt.blk", ctx);

    Tape::Id flat = tape.reshape(ctx, 1, static_cast<Index>(cfg_.max_len) * cfg_.d_text);
    Tape::Id x0_direct = tape.reshape(tape.matmul(flat, params_.use(tape, "readout.w")),
                                      cfg_.latent_tokens(), cfg_.latent_channels);

    Tape::Id h = tape.add(tape.matmul(tape.constant(z_t), params_.use(tape, "lat.in.w")),
                          params_.use(tape, "lat.pos"));
    Tape::Id trow = tape.matmul(tape.constant(time_features(t, cfg_.T)),
                                params_.use(tape, "t.w"));
    h = tape.add_rowvec(h, trow);
    h = nn::transformer_block(tape, params_, "sa", h);
    h = nn::cross_attention(tape, params_, "ca", h, ctx);
    Tape::Id x0_attn = tape.matmul(
        tape.layer_norm(h, params_.use(tape, "out.ln.g"), params_.use(tape, "out.ln.b")),
        params_.use(tape, "out.w"));
    Tape::Id x0 = tape.add(x0_direct, x0_attn);

    const Scalar ab = sched_.alpha_bar(t);
    Tape::Id eps = tape.scale(tape.sub(tape.constant(z_t), tape.scale(x0, std::sqrt(ab))),
                              1.0 / std::sqrt(1.0 - ab));
    return eps;
}

Mat ToyBackend::predict_noise(const Mat& z_t, const ConditioningSequence& cond,
                              int t) const {
    Tape tape;
    Tape::Id eps = noise_net(tape, z_t, tape.constant(cond.embeddings), t);
    return tape.value(eps);
}

Tape::Id ToyBackend::predict_noise_on_tape(Tape& tape, const Mat& z_t, Tape::Id cond,
                                           int t) const {
    return noise_net(tape, z_t, cond, t);
}

LatentCode ToyBackend::ddim_sample_latent(const ConditioningSequence& cond,
                                          const SamplerConfig& cfg) const {
    cfg.validate();
    Rng rng(cfg.seed);
    LatentCode code;
    code.channels = cfg_.latent_channels;
    code.side = cfg_.latent_side;
    code.image_resolution = cfg_.image_resolution;
    code.z = randn(cfg_.latent_tokens(), cfg_.latent_channels, rng);

    ConditioningSequence uncond = uncond_sequence();
    for (int i = 0; i < cfg.steps; ++i) {
        const int t = cfg_.T * (cfg.steps - i) / cfg.steps;
        const int t_prev = cfg_.T * (cfg.steps - i - 1) / cfg.steps;
        Mat eps_u = predict_noise(code.z, uncond, t);
        Mat eps_c = predict_noise(code.z, cond, t);
        Mat eps = eps_u + cfg.guidance_scale * (eps_c - eps_u);
        const Scalar ab = sched_.alpha_bar(t);
        const Scalar ab_prev = sched_.alpha_bar(t_prev);
        Mat x0 = (code.z - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab);
        code.z = std::sqrt(ab_prev) * x0 + std::sqrt(1.0 - ab_prev) * eps;
    }
    code.check_finite();
    return code;
}

Image ToyBackend::ddim_sample(const ConditioningSequence& cond,
                              const SamplerConfig& cfg) const {
    return vae_.decode(ddim_sample_latent(cond, cfg));
}

std::uint64_t ToyBackend::frozen_checksum() const {
    return fnv1a(&cfg_.T, sizeof(cfg_.T), params_.value_checksum() ^ vae_.checksum());
}

ConditioningSequence ToyBackend::uncond_sequence() const {
    return plain_conditioning("", tok_, embedding_table(), cfg_.max_len);
}

ConditioningSequence ToyBackend::prompt_conditioning(const std::string& text) const {
    return plain_conditioning(text, tok_, embedding_table(), cfg_.max_len);
}

void ToyBackend::save(const std::filesystem::path& path) const {
    Json j;
    j["format"] = "dreamid-backend";
    j["version"] = 1;
    j["config"] = cfg_.to_json();
    j["params"] = params_.to_json();
    std::ofstream f(path);
    if (!f) throw IoError("cannot write checkpoint: " + path.string());
    f << j.dump() << "\n";
}

ToyBackend ToyBackend::load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read checkpoint: " + path.string());
    Json j = Json::parse(f);
    if (j.value("format", "") != "dreamid-backend")
        throw IoError("not a backend checkpoint: " + path.string());
    ToyBackend b(BackendConfig::from_json(j.at("config")), 0);
    b.params_.load_json(j.at("params"));
    return b;
}

void write_image_with_sidecar(const std::filesystem::path& image_path, const Image& img,
                              const std::string& prompt, const SamplerConfig& cfg) {
    write_ppm(img, image_path);
    Json j;
    j["prompt"] = prompt;
    j["seed"] = cfg.seed;
    j["sampler"] = cfg.to_json();
    std::filesystem::path side = image_path;
    side += ".json";
    std::ofstream f(side);
    if (!f) throw IoError("cannot write sidecar: " + side.string());
    f << j.dump(2) << "\n";
}

}  // namespace dreamid
