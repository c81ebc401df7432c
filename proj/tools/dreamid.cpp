// dreamid: dataset generation, encoder training, generation and evaluation
// for the optimization-free identity personalization pipeline.

#include "dreamid/evaluator.hpp"
#include "dreamid/facegen.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace dreamid;
using nn::Json;

namespace {

constexpr std::uint64_t kDefaultBackendSeed = 42;

std::string default_checkpoint() {
    if (const char* dir = std::getenv("DREAMID_CHECKPOINT_DIR"))
        return (fs::path(dir) / "checkpoint-latest.json").string();
    return "";
}

M2Encoder make_encoder(const std::string& checkpoint, std::uint64_t seed) {
    if (!checkpoint.empty()) return encoder_from_checkpoint(checkpoint);
    EncoderConfig cfg;
    cfg.finalize();
    return M2Encoder(cfg, seed);
}

// Accepts either an already-aligned face at encoder resolution or a larger
// image that the detector can crop.
Image aligned_input_face(const Image& img, Index resolution) {
    BlobFaceDetector detector;
    CropAlignResult crop = crop_align_filter(img, detector, 0, resolution, "input",
                                             AlignedFace::Source::real);
    if (crop.accepted()) return crop.face->pixels;
    if (img.height() == resolution && img.width() == resolution) return img;
    throw ConfigError("no detectable face in the input image");
}

int run_build_dataset(const std::string& names_path, const std::string& templates_path,
                      const std::string& out_dir, double keep, std::uint64_t seed,
                      int per_name, int per_pair, const std::string& recon_faces) {
    CelebrityList names = ingest_names(names_path);
    auto templates = load_templates(templates_path, PromptTemplate::Role::editing);
    ToyBackend backend(BackendConfig{}, kDefaultBackendSeed);
    IdentityScorer id_scorer;
    ToyJointScorer clip_scorer;

    PipelineConfig cfg;
    cfg.per_name = per_name;
    cfg.per_pair = per_pair;
    cfg.keep_fraction = keep;
    cfg.seed = seed;

    std::vector<ManifestEntry> recon_entries;
    if (!recon_faces.empty()) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(recon_faces))
            if (e.path().extension() == ".ppm") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const fs::path& p : files) {
            Image img = read_ppm(p);
            const std::string bytes = ppm_bytes(img);
            const fs::path rel = content_address(bytes);
            fs::create_directories(fs::path(out_dir) / rel.parent_path());
            if (!fs::exists(fs::path(out_dir) / rel)) write_ppm(img, fs::path(out_dir) / rel);
            ManifestEntry e;
            e.kind = "reconstruction";
            e.identity_id = p.stem().string();
            e.face = e.target = rel.generic_string();
            e.prompt = "a photo of S* face";
            e.seed = fnv1a(e.identity_id, seed);
            recon_entries.push_back(std::move(e));
        }
    }

    PipelineStats stats;
    DatasetManifest manifest = build_dataset(names, templates, backend, id_scorer,
                                             clip_scorer, cfg, recon_entries, out_dir,
                                             &stats);
    std::cout << "identities: " << manifest.identities("selfaug").size()
              << "  candidates: " << stats.candidates << "  kept: " << stats.kept
              << "  reconstruction: " << manifest.count("reconstruction") << "\n"
              << "manifest: " << (fs::path(out_dir) / "manifest.jsonl").string() << "\n";
    return 0;
}

int run_train(const std::string& config_path, const std::string& manifest_path,
              const std::string& out_dir, const std::string& resume) {
    Json j;
    if (!config_path.empty()) {
        std::ifstream f(config_path);
        if (!f) throw IoError("cannot read config: " + config_path);
        j = Json::parse(f);
    }
    TrainConfig tc = TrainConfig::from_json(j.value("train", j));
    EncoderConfig ec = j.contains("encoder") ? EncoderConfig::from_json(j["encoder"])
                                             : EncoderConfig{};
    ec.finalize();
    const auto backend_seed = j.value("backend_seed", kDefaultBackendSeed);
    const auto encoder_seed = j.value("encoder_seed", std::uint64_t{1});

    ToyBackend backend(BackendConfig{}, backend_seed);
    M2Encoder encoder(ec, encoder_seed);
    Trainer trainer(encoder, backend, tc);
    if (!resume.empty()) trainer.load_checkpoint(resume);

    DatasetManifest manifest = DatasetManifest::read(manifest_path);
    TrainSet data = TrainSet::load(manifest, fs::path(manifest_path).parent_path());
    trainer.run(data, out_dir);
    std::cout << "trained to step " << trainer.step() << ", checkpoints under "
              << out_dir << "\n";
    return 0;
}

int run_generate(const std::string& face_path, const std::string& prompt,
                 const std::string& checkpoint, const std::string& out_dir, int count,
                 std::uint64_t seed, int steps, double guidance) {
    ToyBackend backend(BackendConfig{}, kDefaultBackendSeed);
    M2Encoder encoder = make_encoder(checkpoint, 1);

    const Image face = aligned_input_face(read_ppm(face_path),
                                          encoder.config().input_resolution);
    PromptTemplate tmpl{prompt, PromptTemplate::Role::editing};
    PseudoWords words = encoder.encode_identity(
        {face, fs::path(face_path).stem().string(), AlignedFace::Source::real});
    ConditioningSequence cond = assemble_conditioning(
        tmpl, words, backend.tokenizer(), backend.embedding_table(), backend.max_len());

    fs::create_directories(out_dir);
    for (int i = 0; i < count; ++i) {
        SamplerConfig sc;
        sc.steps = steps;
        sc.guidance_scale = guidance;
        sc.seed = fnv1a(prompt + "#" + std::to_string(i), seed);
        Image img = backend.ddim_sample(cond, sc);
        fs::path path = fs::path(out_dir) / ("sample-" + std::to_string(i) + ".ppm");
        write_image_with_sidecar(path, img, prompt, sc);
        std::cout << path.string() << "\n";
    }
    return 0;
}

int run_evaluate(const std::string& checkpoint, const std::string& faces_dir,
                 const std::string& prompts_path, const std::string& out_path,
                 const std::string& manifest_path, bool ablation, int images_per_cell,
                 int timing_repeats, std::uint64_t seed) {
    ToyBackend backend(BackendConfig{}, kDefaultBackendSeed);
    M2Encoder encoder = make_encoder(checkpoint, 1);
    IdentityScorer id_scorer;
    ToyJointScorer clip_scorer;
    auto prompts = load_templates(prompts_path, PromptTemplate::Role::editing);

    std::vector<EvalIdentity> identities;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(faces_dir))
        if (e.path().extension() == ".ppm") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& p : files)
        identities.push_back({p.stem().string(),
                              aligned_input_face(read_ppm(p),
                                                 encoder.config().input_resolution)});

    std::set<std::string> train_ids;
    const std::set<std::string>* train_ids_ptr = nullptr;
    if (!manifest_path.empty()) {
        train_ids = DatasetManifest::read(manifest_path).identities("");
        train_ids_ptr = &train_ids;
    }

    EvalConfig cfg;
    cfg.images_per_cell = images_per_cell;
    cfg.timing_repeats = timing_repeats;
    cfg.seed = seed;
    EvalReport report = run_protocol(encoder, backend, identities, prompts, clip_scorer,
                                     id_scorer, cfg, train_ids_ptr);

    Json out = report.to_json();
    std::vector<ComparisonRow> rows{{"dreamid", report.text_alignment,
                                     report.face_similarity,
                                     report.timing ? report.timing->median_seconds : 0}};
    std::cout << render_comparison_table(rows);

    if (ablation) {
        EncoderConfig base = encoder.config();
        auto abl = run_ablation(base, 1, backend, identities, prompts, clip_scorer,
                                id_scorer, cfg);
        std::cout << "\n" << render_ablation_table(abl);
        out["ablation"] = Json::array();
        for (const AblationRow& r : abl)
            out["ablation"].push_back(Json{{"id_encoder", r.id_encoder},
                                           {"ms_feat", r.ms_feat},
                                           {"k", r.k},
                                           {"text_alignment", r.text_alignment},
                                           {"face_similarity", r.face_similarity}});
    }
    if (!out_path.empty()) {
        std::ofstream f(out_path);
        if (!f) throw IoError("cannot write report: " + out_path);
        f << out.dump(1) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"identity-preserving text-to-image personalization toolkit"};
    app.require_subcommand(1);

    auto* bd = app.add_subcommand("build-dataset", "generate the self-augmented dataset");
    std::string bd_names, bd_templates, bd_out, bd_recon;
    double bd_keep = 0.25;
    std::uint64_t bd_seed = 0;
    int bd_per_name = 4, bd_per_pair = 4;
    bd->add_option("--names", bd_names, "name list, one per line")->required();
    bd->add_option("--templates", bd_templates, "editing prompt templates")->required();
    bd->add_option("--out", bd_out, "output dataset directory")->required();
    bd->add_option("--keep", bd_keep, "kept fraction per prompt");
    bd->add_option("--seed", bd_seed, "pipeline seed");
    bd->add_option("--per-name", bd_per_name, "source images per name");
    bd->add_option("--per-pair", bd_per_pair, "edited images per (name, template)");
    bd->add_option("--recon-faces", bd_recon, "directory of .ppm reconstruction faces");

    auto* tr = app.add_subcommand("train", "train the identity encoder");
    std::string tr_config, tr_manifest, tr_out, tr_resume;
    tr->add_option("--config", tr_config, "training config JSON");
    tr->add_option("--manifest", tr_manifest, "dataset manifest")->required();
    tr->add_option("--out", tr_out, "output directory")->required();
    tr->add_option("--resume", tr_resume, "checkpoint to resume from");

    auto* ge = app.add_subcommand("generate", "generate images for a face and prompt");
    std::string ge_face, ge_prompt, ge_ckpt = default_checkpoint(), ge_out = ".";
    int ge_count = 4, ge_steps = 30;
    double ge_guidance = 7.5;
    std::uint64_t ge_seed = 0;
    ge->add_option("--face", ge_face, "input face image (.ppm)")->required();
    ge->add_option("--prompt", ge_prompt, "prompt containing S*")->required();
    ge->add_option("--checkpoint", ge_ckpt, "encoder checkpoint");
    ge->add_option("--out", ge_out, "output directory");
    ge->add_option("--count", ge_count, "images to generate");
    ge->add_option("--seed", ge_seed, "generation seed");
    ge->add_option("--steps", ge_steps, "sampler steps");
    ge->add_option("--guidance", ge_guidance, "guidance scale");

    auto* ev = app.add_subcommand("evaluate", "run the evaluation protocol");
    std::string ev_ckpt = default_checkpoint(), ev_faces, ev_prompts, ev_out, ev_manifest;
    bool ev_ablation = false;
    int ev_cells = 4, ev_timing = 20;
    std::uint64_t ev_seed = 0;
    ev->add_option("--checkpoint", ev_ckpt, "encoder checkpoint");
    ev->add_option("--faces", ev_faces, "directory of held-out .ppm faces")->required();
    ev->add_option("--prompts", ev_prompts, "prompt templates")->required();
    ev->add_option("--out", ev_out, "report JSON path");
    ev->add_option("--manifest", ev_manifest, "training manifest for the overlap check");
    ev->add_flag("--ablation", ev_ablation, "also run the design-choice ablation");
    ev->add_option("--images-per-cell", ev_cells, "images per (identity, prompt)");
    ev->add_option("--timing-repeats", ev_timing, "encoding time repeats");
    ev->add_option("--seed", ev_seed, "evaluation seed");

    try {
        app.parse(argc, argv);
        if (*bd)
            return run_build_dataset(bd_names, bd_templates, bd_out, bd_keep, bd_seed,
                                     bd_per_name, bd_per_pair, bd_recon);
        if (*tr) return run_train(tr_config, tr_manifest, tr_out, tr_resume);
        if (*ge)
            return run_generate(ge_face, ge_prompt, ge_ckpt, ge_out, ge_count, ge_seed,
                                ge_steps, ge_guidance);
        if (*ev)
            return run_evaluate(ev_ckpt, ev_faces, ev_prompts, ev_out, ev_manifest,
                                ev_ablation, ev_cells, ev_timing, ev_seed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const TemplateError& e) {
        std::cerr << "template error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
