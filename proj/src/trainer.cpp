#include "dreamid/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace dreamid {

namespace fs = std::filesystem;
using nn::Json;

void TrainConfig::validate() const {
    if (iterations < 0) throw ConfigError("iterations must be >= 0");
    if (batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (lr <= 0) throw ConfigError("lr must be positive");
    if (lambda < 0) throw ConfigError("lambda must be >= 0");
    if (mix_ratio < 0 || mix_ratio > 1) throw ConfigError("mix_ratio must be in [0,1]");
    if (checkpoint_every <= 0) throw ConfigError("checkpoint_every must be positive");
}

Json TrainConfig::to_json() const {
    Json j;
    j["iterations"] = iterations;
    j["batch_size"] = batch_size;
    j["lr"] = lr;
    j["lambda"] = lambda;
    j["mix_ratio"] = mix_ratio;
    j["seed"] = seed;
    j["checkpoint_every"] = checkpoint_every;
    return j;
}

TrainConfig TrainConfig::from_json(const Json& j) {
    TrainConfig c;
    c.iterations = j.value("iterations", c.iterations);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.lambda = j.value("lambda", c.lambda);
    c.mix_ratio = j.value("mix_ratio", c.mix_ratio);
    c.seed = j.value("seed", c.seed);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.validate();
    return c;
}

TrainSet TrainSet::load(const DatasetManifest& manifest, const fs::path& base_dir) {
    TrainSet set;
    for (const ManifestEntry& e : manifest.entries) {
        TrainSample s;
        s.kind = e.kind;
        s.face.pixels = read_ppm(base_dir / e.face);
        s.face.identity_id = e.identity_id;
        s.face.source = e.kind == "selfaug" ? AlignedFace::Source::generated
                                            : AlignedFace::Source::real;
        s.target = e.target == e.face ? s.face.pixels : read_ppm(base_dir / e.target);
        s.prompt.text = e.prompt;
        s.prompt.role = e.kind == "selfaug" ? PromptTemplate::Role::editing
                                            : PromptTemplate::Role::reconstruction;
        if (s.prompt.placeholder_count() != 1)
            throw ConfigError("training prompt needs exactly one placeholder: '" +
                              e.prompt + "'");
        (e.kind == "selfaug" ? set.selfaug : set.recon).push_back(std::move(s));
    }
    return set;
}

std::vector<const TrainSample*> sample_batch(const TrainSet& data, Scalar mix_ratio,
                                             int batch_size, Rng& rng) {
    if (mix_ratio > 0 && data.selfaug.empty())
        throw ConfigError("mix_ratio > 0 but the dataset has no edited pairs");
    if (mix_ratio < 1 && data.recon.empty())
        throw ConfigError("mix_ratio < 1 but the dataset has no reconstruction pairs");
    std::bernoulli_distribution pick_aug(mix_ratio);
    std::vector<const TrainSample*> batch;
    batch.reserve(batch_size);
    for (int b = 0; b < batch_size; ++b) {
        const auto& pool = pick_aug(rng) ? data.selfaug : data.recon;
        std::uniform_int_distribution<std::size_t> idx(0, pool.size() - 1);
        batch.push_back(&pool[idx(rng)]);
    }
    return batch;
}

Trainer::Trainer(M2Encoder& encoder, const DiffusionBackend& backend, TrainConfig cfg)
    : encoder_(encoder), backend_(backend), cfg_(cfg), rng_(cfg.seed) {
    cfg_.validate();
    opt_.lr = cfg_.lr;
}

LossBreakdown Trainer::training_step(const std::vector<const TrainSample*>& batch) {
    if (batch.empty()) throw ConfigError("training_step: empty batch");
    const Scalar inv_b = 1.0 / static_cast<Scalar>(batch.size());
    const NoiseSchedule& sched = backend_.schedule();
    std::uniform_int_distribution<int> pick_t(1, sched.T);

    encoder_.params().zero_grad();
    Scalar sum_mse = 0, sum_reg = 0;
    for (const TrainSample* sample : batch) {
        nn::Tape tape;
        nn::Tape::Id words = encoder_.encode_on_tape(tape, sample->face);
        nn::Tape::Id cond = assemble_conditioning_on_tape(
            tape, sample->prompt, words, backend_.tokenizer(),
            backend_.embedding_table(), backend_.max_len());

        LatentCode z0 = backend_.vae().encode(sample->target);
        const int t = pick_t(rng_);
        const Mat eps = randn(z0.z.rows(), z0.z.cols(), rng_);
        LatentCode zt = backend_.add_noise(z0, t, eps);

        nn::Tape::Id eps_hat = backend_.predict_noise_on_tape(tape, zt.z, cond, t);
        nn::Tape::Id mse = tape.mean_sq(tape.sub(eps_hat, tape.constant(eps)));
        nn::Tape::Id reg = tape.sum_row_norms(words);
        nn::Tape::Id loss =
            tape.scale(tape.add(mse, tape.scale(reg, cfg_.lambda)), inv_b);
        tape.backward(loss);
        sum_mse += tape.value(mse)(0, 0);
        sum_reg += tape.value(reg)(0, 0);
    }

    LossBreakdown out;
    out.l_diffusion = sum_mse * inv_b;
    out.l_reg = sum_reg * inv_b;
    out.lambda = cfg_.lambda;
    out.l_total = out.l_diffusion + cfg_.lambda * out.l_reg;
    if (!std::isfinite(out.l_total)) {
        std::ostringstream msg;
        msg << "non-finite loss at step " << step_ << ": l_diffusion=" << out.l_diffusion
            << " l_reg=" << out.l_reg;
        throw ConfigError(msg.str());
    }

    opt_.step(encoder_.params());
    ++step_;
    return out;
}

void Trainer::save_checkpoint(const fs::path& path) const {
    Json j;
    j["schema"] = "dreamid-checkpoint";
    j["version"] = 1;
    j["step"] = step_;
    j["train_config"] = cfg_.to_json();
    j["encoder_config"] = encoder_.config().to_json();
    j["params"] = encoder_.params().to_json();
    j["optimizer"] = Json{{"lr", opt_.lr},
                          {"beta1", opt_.beta1},
                          {"beta2", opt_.beta2},
                          {"eps", opt_.eps},
                          {"step_count", opt_.step_count}};
    std::ostringstream rng_state;
    rng_state << rng_;
    j["rng"] = rng_state.str();
    j["backend_checksum"] = to_hex(backend_.frozen_checksum());
    std::ofstream f(path);
    if (!f) throw IoError("cannot write checkpoint: " + path.string());
    f << j.dump(1) << "\n";
}

void Trainer::load_checkpoint(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read checkpoint: " + path.string());
    Json j = Json::parse(f);
    if (j.value("schema", "") != "dreamid-checkpoint")
        throw IoError("not a checkpoint file: " + path.string());
    if (j.at("version").get<int>() != 1)
        throw IoError("unsupported checkpoint version in " + path.string());
    const std::string want = to_hex(backend_.frozen_checksum());
    const std::string have = j.value("backend_checksum", want);
    if (have != want)
        throw ConfigError("checkpoint was trained against a different backend (" +
                          have + " vs " + want + ")");
    encoder_.params().load_json(j.at("params"));
    const Json& o = j.at("optimizer");
    opt_.lr = o.at("lr").get<Scalar>();
    opt_.beta1 = o.at("beta1").get<Scalar>();
    opt_.beta2 = o.at("beta2").get<Scalar>();
    opt_.eps = o.at("eps").get<Scalar>();
    opt_.step_count = o.at("step_count").get<long>();
    step_ = j.at("step").get<long>();
    std::istringstream rng_state(j.at("rng").get<std::string>());
    rng_state >> rng_;
}

M2Encoder encoder_from_checkpoint(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read checkpoint: " + path.string());
    Json j = Json::parse(f);
    if (j.value("schema", "") != "dreamid-checkpoint")
        throw IoError("not a checkpoint file: " + path.string());
    M2Encoder enc(EncoderConfig::from_json(j.at("encoder_config")), 0);
    enc.params().load_json(j.at("params"));
    return enc;
}

void Trainer::run(const TrainSet& data, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const std::uint64_t frozen_before = backend_.frozen_checksum();
    std::clog << "[train] backend frozen checksum " << to_hex(frozen_before) << "\n";

    std::ofstream log(out_dir / "loss_log.jsonl", std::ios::app);
    if (!log) throw IoError("cannot write loss log under " + out_dir.string());

    if (step_ == 0) save_checkpoint(out_dir / "checkpoint-000000.json");
    const long target = step_ + cfg_.iterations;
    while (step_ < target) {
        auto batch = sample_batch(data, cfg_.mix_ratio, cfg_.batch_size, rng_);
        LossBreakdown loss = training_step(batch);
        Json rec;
        rec["step"] = step_;
        rec["l_diffusion"] = loss.l_diffusion;
        rec["l_reg"] = loss.l_reg;
        rec["l_total"] = loss.l_total;
        log << rec.dump() << "\n";
        if (step_ % cfg_.checkpoint_every == 0 || step_ == target) {
            std::ostringstream name;
            name << "checkpoint-" << std::setw(6) << std::setfill('0') << step_
                 << ".json";
            save_checkpoint(out_dir / name.str());
        }
    }
    save_checkpoint(out_dir / "checkpoint-latest.json");

    if (backend_.frozen_checksum() != frozen_before)
        throw ConfigError("frozen backend changed during training");
    std::clog << "[train] finished at step " << step_ << ", backend checksum unchanged\n";
}

}  // namespace dreamid
