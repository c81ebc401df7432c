// Acceptance checks for the full pipeline. Each criterion prints exactly one
// PASS/FAIL line; the process exits nonzero if any criterion fails.

#include "dreamid/evaluator.hpp"
#include "dreamid/facegen.hpp"

#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

using namespace dreamid;
namespace fs = std::filesystem;

namespace {

EncoderConfig tiny_encoder_config() {
    EncoderConfig cfg;
    cfg.depth = 2;
    cfg.d_b = 16;
    cfg.d_text = 128;
    cfg.k = 2;
    cfg.input_resolution = 16;
    cfg.patch_size = 8;
    cfg.proj_hidden = 24;
    cfg.finalize();
    return cfg;
}

ToyBackend& shared_backend() {
    static ToyBackend backend(BackendConfig{}, 42);
    return backend;
}

TrainSample recon_sample(std::uint64_t seed, Index face_res) {
    TrainSample s;
    s.kind = "reconstruction";
    s.face = {synth_face(seed, face_res), "id" + std::to_string(seed),
              AlignedFace::Source::real};
    s.target = synth_face(seed, 64);
    s.prompt = {"a photo of S* face", PromptTemplate::Role::reconstruction};
    return s;
}

#define REQUIRE_TRUE(cond)                                          \
    do {                                                            \
        if (!(cond)) throw std::runtime_error("failed: " #cond);    \
    } while (0)

// --- criterion 1: exact loss composition -------------------------------
// tolerance: 1e-6 relative on l_total vs l_diffusion + lambda * l_reg
void check_loss_composition() {
    ToyBackend& backend = shared_backend();
    TrainSet data;
    data.recon = {recon_sample(1, 16), recon_sample(2, 16)};
    for (Scalar lambda : {1e-4, 0.0, 0.05}) {
        M2Encoder enc(tiny_encoder_config(), 3);
        TrainConfig tc;
        tc.lambda = lambda;
        tc.seed = 5;
        Trainer tr(enc, backend, tc);
        LossBreakdown loss = tr.training_step({&data.recon[0], &data.recon[1]});
        const Scalar want = loss.l_diffusion + lambda * loss.l_reg;
        REQUIRE_TRUE(std::abs(loss.l_total - want) <=
                     1e-6 * std::max(1.0, std::abs(want)));
        REQUIRE_TRUE(loss.l_reg > 0.0);
        if (lambda == 0.0) REQUIRE_TRUE(loss.l_total == loss.l_diffusion);
    }
    TrainConfig defaults;
    REQUIRE_TRUE(defaults.lambda == 1e-4);
}

// --- criterion 2: embedding-norm penalty vs an independent oracle -------
// tolerance: 1e-6 absolute over 1000 random word sets
void check_reg_oracle() {
    PseudoWords hand;
    hand.k = 2;
    Vec s1 = Vec::Zero(8);
    s1(0) = 3.0;
    s1(1) = 4.0;
    hand.embeddings = {s1, Vec::Zero(8)};
    REQUIRE_TRUE(std::abs(M2Encoder::reg_loss(hand) - 5.0) <= 1e-12);

    Rng rng(2);
    std::uniform_int_distribution<int> pick_k(1, 3);
    for (int trial = 0; trial < 1000; ++trial) {
        PseudoWords w;
        w.k = pick_k(rng);
        Scalar want = 0;
        for (int i = 0; i < w.k; ++i) {
            Vec v = randn(16, 1, rng);
            Scalar sq = 0;
            for (Index j = 0; j < v.size(); ++j) sq += v(j) * v(j);
            want += std::sqrt(sq);
            w.embeddings.push_back(v);
        }
        REQUIRE_TRUE(std::abs(M2Encoder::reg_loss(w) - want) <= 1e-6);
    }
}

// --- criterion 3: gradient flow vs finite differences -------------------
// tolerances: 1e-3 relative at the conditioning input, 1e-2 relative for
// encoder weights through the full frozen pipeline
void check_gradients() {
    ToyBackend& backend = shared_backend();
    const int t = 400;

    // conditioning-level gradient
    Rng rng(11);
    ConditioningSequence cond = backend.prompt_conditioning("a photo of x x face");
    cond.embeddings.middleRows(3, 2) = randn(2, cond.embeddings.cols(), rng);
    Mat z = randn(backend.config().latent_tokens(), backend.config().latent_channels, rng);
    Mat grad = Mat::Zero(cond.embeddings.rows(), cond.embeddings.cols());
    {
        nn::Tape tape;
        nn::Tape::Id c = tape.leaf(cond.embeddings, &grad);
        tape.backward(tape.mean_sq(backend.predict_noise_on_tape(tape, z, c, t)));
    }
    auto cond_loss = [&](const Mat& emb) {
        ConditioningSequence c = cond;
        c.embeddings = emb;
        Mat e = backend.predict_noise(z, c, t);
        return e.squaredNorm() / static_cast<Scalar>(e.size());
    };
    const Scalar h = 1e-5;
    for (int probe = 0; probe < 8; ++probe) {
        const Index i = probe % cond.embeddings.rows();
        const Index j = (probe * 17) % cond.embeddings.cols();
        Mat p = cond.embeddings, m = cond.embeddings;
        p(i, j) += h;
        m(i, j) -= h;
        const Scalar fd = (cond_loss(p) - cond_loss(m)) / (2 * h);
        REQUIRE_TRUE(std::abs(grad(i, j) - fd) <=
                     1e-3 * std::max(1.0, std::abs(fd)));
    }

    // encoder-weight gradient through encode -> splice -> noise net
    M2Encoder enc(tiny_encoder_config(), 7);
    TrainSample s = recon_sample(9, 16);
    const Scalar lambda = 1e-4;
    LatentCode z0 = backend.vae().encode(s.target);
    Mat eps = randn(z0.z.rows(), z0.z.cols(), rng);
    LatentCode zt = backend.add_noise(z0, t, eps);

    enc.params().zero_grad();
    {
        nn::Tape tape;
        nn::Tape::Id words = enc.encode_on_tape(tape, s.face);
        nn::Tape::Id c = assemble_conditioning_on_tape(
            tape, s.prompt, words, backend.tokenizer(), backend.embedding_table(),
            backend.max_len());
        nn::Tape::Id eps_hat = backend.predict_noise_on_tape(tape, zt.z, c, t);
        nn::Tape::Id mse = tape.mean_sq(tape.sub(eps_hat, tape.constant(eps)));
        tape.backward(tape.add(mse, tape.scale(tape.sum_row_norms(words), lambda)));
    }
    auto full_loss = [&]() {
        PseudoWords w = enc.encode_identity(s.face);
        ConditioningSequence c = assemble_conditioning(
            s.prompt, w, backend.tokenizer(), backend.embedding_table(),
            backend.max_len());
        Mat e = backend.predict_noise(zt.z, c, t);
        return (e - eps).squaredNorm() / static_cast<Scalar>(e.size()) +
               lambda * M2Encoder::reg_loss(w);
    };
    for (const std::string& name :
         {"patch.w", "blk1.q.w", "blk2.m2.w", "ln_f.g", "proj1.l3.w", "proj2.l1.w"}) {
        auto& p = enc.params().at(name);
        const Index i = p.value.rows() / 2, j = p.value.cols() / 3;
        const Scalar keep = p.value(i, j);
        p.value(i, j) = keep + h;
        const Scalar lp = full_loss();
        p.value(i, j) = keep - h;
        const Scalar lm = full_loss();
        p.value(i, j) = keep;
        const Scalar fd = (lp - lm) / (2 * h);
        REQUIRE_TRUE(std::abs(p.grad(i, j) - fd) <=
                     1e-2 * std::max(1e-3, std::abs(fd)));
    }
}

// --- criterion 4: conditioning splice law over random pairs -------------
// 50 random (prompt, k) pairs with k in {1,2,3}; exact row equality
void check_splice_law() {
    ToyBackend& backend = shared_backend();
    const Tokenizer& tok = backend.tokenizer();
    const Mat& table = backend.embedding_table();
    const std::vector<std::string> prompts = {
        "S* face",
        "a photo of S* face",
        "Oil painting style, S* face",
        "S* wearing a hat, looking at the camera",
        "Watercolor style, S* face",
    };
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = 1 + trial % 3;
        PromptTemplate tmpl{prompts[trial % prompts.size()],
                            PromptTemplate::Role::editing};
        PseudoWords words;
        words.k = k;
        for (int i = 0; i < k; ++i) words.embeddings.push_back(randn(table.cols(), 1, rng));
        ConditioningSequence seq =
            assemble_conditioning(tmpl, words, tok, table, backend.max_len());

        std::vector<int> ids = tok.tokenize(tmpl.text);
        Index ph = -1;
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (ids[i] == Tokenizer::kPlaceholderId) ph = static_cast<Index>(i);
        REQUIRE_TRUE(ph >= 0);
        REQUIRE_TRUE(seq.length() == static_cast<Index>(ids.size()) - 1 + k);
        REQUIRE_TRUE(seq.injection_start == ph);
        for (int i = 0; i < k; ++i)
            REQUIRE_TRUE(seq.embeddings.row(ph + i) == words.embeddings[i].transpose());
        for (Index i = 0; i < ph; ++i)
            REQUIRE_TRUE(seq.embeddings.row(i) == table.row(ids[i]));
        for (std::size_t i = ph + 1; i < ids.size(); ++i)
            REQUIRE_TRUE(seq.embeddings.row(static_cast<Index>(i) - 1 + k) ==
                         table.row(ids[i]));
    }
}

// --- criterion 5: quality filter vs a brute-force oracle ----------------
// 100 random candidate sets; kept count is max(1, floor(0.25 * n)) per prompt
void check_filter_oracle() {
    Rng rng(17);
    std::uniform_int_distribution<int> n_groups(1, 4), n_cands(1, 12);
    std::uniform_real_distribution<Scalar> score(-1.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Triplet> cands;
        std::map<std::string, int> group_sizes;
        int next = 0;
        const int groups = n_groups(rng);
        for (int g = 0; g < groups; ++g) {
            const std::string prompt = "prompt " + std::to_string(g);
            const int n = n_cands(rng);
            group_sizes[prompt] = n;
            for (int i = 0; i < n; ++i) {
                Triplet t;
                std::ostringstream id;
                id << "c" << std::setw(4) << std::setfill('0') << next++;
                t.candidate_id = id.str();
                t.edit_prompt = prompt;
                t.id_score = score(rng);
                t.clip_score = score(rng);
                cands.push_back(std::move(t));
            }
        }
        std::vector<Triplet> kept = score_and_filter(cands, 0.25);
        std::map<std::string, int> kept_per_prompt;
        for (const Triplet& t : kept) ++kept_per_prompt[t.edit_prompt];
        for (const auto& [prompt, n] : group_sizes)
            REQUIRE_TRUE(kept_per_prompt[prompt] == std::max(1, n / 4));

        // brute force: per group, the kept set maximizes the normalized sum
        std::map<std::string, std::vector<const Triplet*>> by_prompt;
        for (const Triplet& t : cands) by_prompt[t.edit_prompt].push_back(&t);
        for (const auto& [prompt, g] : by_prompt) {
            Scalar ilo = g[0]->id_score, ihi = ilo, clo = g[0]->clip_score, chi = clo;
            for (const Triplet* t : g) {
                ilo = std::min(ilo, t->id_score);
                ihi = std::max(ihi, t->id_score);
                clo = std::min(clo, t->clip_score);
                chi = std::max(chi, t->clip_score);
            }
            auto rank = [&](const Triplet* t) {
                Scalar a = ihi > ilo ? (t->id_score - ilo) / (ihi - ilo) : 0.5;
                Scalar b = chi > clo ? (t->clip_score - clo) / (chi - clo) : 0.5;
                return a + b;
            };
            Scalar worst_kept = 1e300, best_dropped = -1e300;
            for (const Triplet* t : g) {
                bool was_kept = false;
                for (const Triplet& k : kept)
                    if (k.candidate_id == t->candidate_id) was_kept = true;
                if (was_kept)
                    worst_kept = std::min(worst_kept, rank(t));
                else
                    best_dropped = std::max(best_dropped, rank(t));
            }
            REQUIRE_TRUE(worst_kept >= best_dropped - 1e-12);
        }
    }
}

// --- criterion 6: byte-identical dataset reruns -------------------------
void check_manifest_determinism() {
    CelebrityList names;
    names.names = {"Ada Navarro", "Bruno Keller"};
    std::vector<PromptTemplate> templates = {
        {"Oil painting style, S* face", PromptTemplate::Role::editing},
        {"S* wearing a hat, looking at the camera", PromptTemplate::Role::editing},
    };
    ToyBackend& backend = shared_backend();
    IdentityScorer id_scorer;
    ToyJointScorer clip_scorer;
    PipelineConfig cfg;
    cfg.per_name = 1;
    cfg.per_pair = 2;
    cfg.seed = 19;
    cfg.sampler.steps = 6;

    auto slurp = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        std::ostringstream ss;
        ss << f.rdbuf();
        return ss.str();
    };
    std::string bytes[2];
    for (int run = 0; run < 2; ++run) {
        fs::path out = fs::temp_directory_path() / ("dreamid_acc_ds" + std::to_string(run));
        fs::remove_all(out);
        build_dataset(names, templates, backend, id_scorer, clip_scorer, cfg, {}, out);
        bytes[run] = slurp(out / "manifest.jsonl");
        fs::remove_all(out);
    }
    REQUIRE_TRUE(!bytes[0].empty());
    REQUIRE_TRUE(bytes[0] == bytes[1]);
    // names never leak into the manifest
    for (const std::string& frag : {"Ada", "Navarro", "Bruno", "Keller"})
        REQUIRE_TRUE(bytes[0].find(frag) == std::string::npos);
}

// --- criterion 7: the backend stays frozen across 200 steps -------------
void check_frozen_backend() {
    ToyBackend& backend = shared_backend();
    const std::uint64_t before = backend.frozen_checksum();
    M2Encoder enc(tiny_encoder_config(), 23);
    TrainSet data;
    for (int i = 0; i < 4; ++i) data.recon.push_back(recon_sample(100 + i, 16));
    TrainConfig tc;
    tc.batch_size = 1;
    tc.seed = 29;
    Trainer tr(enc, backend, tc);
    for (int step = 0; step < 200; ++step) {
        auto batch = sample_batch(data, 0.0, 1, tr.rng());
        tr.training_step(batch);
        REQUIRE_TRUE(backend.frozen_checksum() == before);
    }
    REQUIRE_TRUE(enc.checksum() != M2Encoder(tiny_encoder_config(), 23).checksum());
}

// --- criterion 8: toy overfit --------------------------------------------
// 8 identities, 500 steps: the 50-step smoothed total loss must at least
// halve and the mean face similarity of reconstructions must increase
void check_toy_overfit() {
    ToyBackend& backend = shared_backend();
    EncoderConfig ec;
    ec.finalize();
    M2Encoder enc(ec, 1);
    BlobFaceDetector det;
    TrainSet data;
    std::vector<Image> faces;
    for (int i = 0; i < 8; ++i) {
        Image raw = synth_face(500 + i, 64);
        auto crop = crop_align_filter(raw, det, 0, 64, "ov" + std::to_string(i),
                                      AlignedFace::Source::real);
        REQUIRE_TRUE(crop.accepted());
        TrainSample s;
        s.kind = "reconstruction";
        s.face = *crop.face;
        s.target = raw;
        s.prompt = {"a photo of S* face", PromptTemplate::Role::reconstruction};
        faces.push_back(crop.face->pixels);
        data.recon.push_back(std::move(s));
    }

    IdentityScorer ids;
    auto mean_sim = [&]() {
        Scalar total = 0;
        for (int i = 0; i < 8; ++i) {
            PseudoWords w = enc.encode_identity(data.recon[i].face);
            ConditioningSequence cond = assemble_conditioning(
                data.recon[i].prompt, w, backend.tokenizer(),
                backend.embedding_table(), backend.max_len());
            SamplerConfig sc;
            sc.guidance_scale = 1.0;  // pure reconstruction branch
            sc.seed = 1000 + i;
            total += ids.face_similarity(faces[i], backend.ddim_sample(cond, sc));
        }
        return total / 8.0;
    };

    const Scalar sim_before = mean_sim();
    TrainConfig tc;
    tc.iterations = 500;
    tc.batch_size = 4;
    tc.mix_ratio = 0.0;
    tc.lr = 1e-2;
    tc.seed = 7;
    Trainer tr(enc, backend, tc);
    std::vector<Scalar> losses;
    for (int step = 0; step < 500; ++step) {
        auto batch = sample_batch(data, 0.0, 4, tr.rng());
        losses.push_back(tr.training_step(batch).l_total);
    }
    Scalar first = 0, last = 0;
    for (int i = 0; i < 50; ++i) {
        first += losses[i];
        last += losses[450 + i];
    }
    const Scalar sim_after = mean_sim();
    std::cerr << "  [overfit] smoothed loss " << first / 50 << " -> " << last / 50
              << ", face similarity " << sim_before << " -> " << sim_after << "\n";
    REQUIRE_TRUE(last <= 0.5 * first);
    REQUIRE_TRUE(sim_after > sim_before);
}

// --- criterion 9: sampler determinism, defaults and guidance algebra ----
void check_sampler() {
    SamplerConfig defaults;
    REQUIRE_TRUE(defaults.steps == 30);
    REQUIRE_TRUE(defaults.guidance_scale == 7.5);

    ToyBackend& backend = shared_backend();
    Rng rng(31);
    ConditioningSequence cond = backend.prompt_conditioning("a photo of x x face");
    cond.embeddings.middleRows(3, 2) = randn(2, cond.embeddings.cols(), rng);
    SamplerConfig cfg;
    cfg.steps = 5;
    cfg.guidance_scale = 3.0;
    cfg.seed = 41;
    LatentCode a = backend.ddim_sample_latent(cond, cfg);
    LatentCode b = backend.ddim_sample_latent(cond, cfg);
    REQUIRE_TRUE(a.z == b.z);
    cfg.seed = 42;
    REQUIRE_TRUE(a.z != backend.ddim_sample_latent(cond, cfg).z);
    cfg.seed = 41;

    // independent trajectory from the public surface, tolerance 1e-12
    Rng zrng(cfg.seed);
    Mat z = randn(backend.config().latent_tokens(), backend.config().latent_channels,
                  zrng);
    ConditioningSequence uncond = backend.uncond_sequence();
    const NoiseSchedule& s = backend.schedule();
    for (int i = 0; i < cfg.steps; ++i) {
        const int t = backend.config().T * (cfg.steps - i) / cfg.steps;
        const int t_prev = backend.config().T * (cfg.steps - i - 1) / cfg.steps;
        Mat eu = backend.predict_noise(z, uncond, t);
        Mat ec = backend.predict_noise(z, cond, t);
        Mat eps = eu + cfg.guidance_scale * (ec - eu);
        Mat x0 = (z - std::sqrt(1.0 - s.alpha_bar(t)) * eps) / std::sqrt(s.alpha_bar(t));
        z = std::sqrt(s.alpha_bar(t_prev)) * x0 + std::sqrt(1.0 - s.alpha_bar(t_prev)) * eps;
    }
    REQUIRE_TRUE((a.z - z).lpNorm<Eigen::Infinity>() <= 1e-12);

    // guidance algebra at scales 1 and 0
    Mat zt = randn(backend.config().latent_tokens(), backend.config().latent_channels,
                   rng);
    Mat eu = backend.predict_noise(zt, uncond, 600);
    Mat ec = backend.predict_noise(zt, cond, 600);
    REQUIRE_TRUE(((eu + 1.0 * (ec - eu)) - ec).lpNorm<Eigen::Infinity>() <= 1e-12);
    REQUIRE_TRUE((eu + 0.0 * (ec - eu)) == eu);
}

// --- criterion 10: evaluation protocol ----------------------------------
void check_eval_protocol() {
    // cosine bounds over random pairs
    Rng rng(37);
    for (int i = 0; i < 200; ++i) {
        const Scalar c = cosine_similarity(randn(16, 1, rng), randn(16, 1, rng));
        REQUIRE_TRUE(c >= -1.0 - 1e-12 && c <= 1.0 + 1e-12);
    }
    // self-similarity is exactly 1
    IdentityScorer ids;
    Image face = synth_face(61, 64);
    REQUIRE_TRUE(std::abs(ids.face_similarity(face, face) - 1.0) <= 1e-12);

    ToyBackend& backend = shared_backend();
    M2Encoder enc(tiny_encoder_config(), 43);
    ToyJointScorer clip;
    std::vector<EvalIdentity> identities = {{"eval-a", synth_face(101, 16)},
                                            {"eval-b", synth_face(102, 16)}};
    std::vector<PromptTemplate> prompts = {
        {"Oil painting style, S* face", PromptTemplate::Role::editing},
        {"S* wearing a hat, looking at the camera", PromptTemplate::Role::editing},
        {"S* as a chef, looking at the camera", PromptTemplate::Role::editing}};
    EvalConfig cfg;
    cfg.images_per_cell = 4;
    cfg.sampler.steps = 4;
    EvalReport report = run_protocol(enc, backend, identities, prompts, clip, ids, cfg);
    REQUIRE_TRUE(report.cells.size() == 6);
    for (const EvalCell& c : report.cells) {
        REQUIRE_TRUE(c.images == 4);
        REQUIRE_TRUE(c.text_alignment >= -1.0 && c.text_alignment <= 1.0);
        REQUIRE_TRUE(c.face_similarity >= -1.0 && c.face_similarity <= 1.0);
    }

    // identity overlap with the training set is a hard error naming the id
    std::set<std::string> train = {"eval-b"};
    bool threw = false;
    try {
        run_protocol(enc, backend, identities, prompts, clip, ids, cfg, &train);
    } catch (const ConfigError& e) {
        threw = std::string(e.what()).find("eval-b") != std::string::npos;
    }
    REQUIRE_TRUE(threw);
}

// --- criterion 11: encoding speed and the ablation grid -----------------
// median single-face encoding under 1 second at full configuration
void check_speed_and_ablation() {
    EncoderConfig ec;
    ec.finalize();
    M2Encoder full(ec, 1);
    EncodingTimeStats stats = measure_encoding_time(full, synth_face(71, 64), 10);
    std::cerr << "  [timing] median encode " << stats.median_seconds << "s\n";
    REQUIRE_TRUE(stats.median_seconds < 1.0);

    ToyBackend& backend = shared_backend();
    ToyJointScorer clip;
    IdentityScorer ids;
    std::vector<EvalIdentity> identities = {{"eval-a", synth_face(101, 16)}};
    std::vector<PromptTemplate> prompts = {
        {"Oil painting style, S* face", PromptTemplate::Role::editing}};
    EvalConfig cfg;
    cfg.images_per_cell = 1;
    cfg.sampler.steps = 4;
    auto rows = run_ablation(tiny_encoder_config(), 43, backend, identities, prompts,
                             clip, ids, cfg);
    REQUIRE_TRUE(rows.size() == 5);
    REQUIRE_TRUE(rows[0].id_encoder == "generic" && rows[0].ms_feat && rows[0].k == 2);
    REQUIRE_TRUE(rows[1].id_encoder == "face" && !rows[1].ms_feat);
    REQUIRE_TRUE(rows[2].k == 1 && rows[3].k == 2 && rows[4].k == 3);
    std::string table = render_ablation_table(rows);
    for (const std::string& col :
         {"ID Encoder", "MS Feat", "Multi Embedding", "Text-alignment", "Face-similarity"})
        REQUIRE_TRUE(table.find(col) != std::string::npos);
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<void()> run;
    };
    const std::vector<Criterion> criteria = {
        {"1 loss composition l_total = l_diffusion + lambda*l_reg (rel 1e-6)",
         check_loss_composition},
        {"2 embedding-norm penalty matches the oracle on 1000 random sets (1e-6)",
         check_reg_oracle},
        {"3 gradients match finite differences (cond 1e-3, weights 1e-2)",
         check_gradients},
        {"4 splice law holds for 50 random prompt/k pairs, k in {1,2,3}",
         check_splice_law},
        {"5 quality filter keeps max(1, floor(0.25n)) and matches brute force",
         check_filter_oracle},
        {"6 dataset reruns are byte-identical and leak no raw names",
         check_manifest_determinism},
        {"7 backend checksum unchanged across 200 training steps",
         check_frozen_backend},
        {"8 toy overfit: smoothed loss halves, face similarity increases",
         check_toy_overfit},
        {"9 sampler: deterministic, guidance algebra, defaults 30/7.5",
         check_sampler},
        {"10 evaluation protocol: bounds, self-similarity 1, 4 images/cell, overlap error",
         check_eval_protocol},
        {"11 sub-second encoding and the design-choice ablation grid",
         check_speed_and_ablation},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        try {
            c.run();
            std::cout << "PASS " << c.name << "\n";
        } catch (const std::exception& e) {
            ++failures;
            std::cout << "FAIL " << c.name << " -- " << e.what() << "\n";
        }
        std::cout.flush();
    }
    if (failures) std::cout << failures << " criteria failed\n";
    return failures == 0 ? 0 : 1;
}
