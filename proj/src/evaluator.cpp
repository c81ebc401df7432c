#include "dreamid/evaluator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace dreamid {

using nn::Json;

Json EncodingTimeStats::to_json() const {
    return Json{{"repeats", repeats},
                {"median_seconds", median_seconds},
                {"p95_seconds", p95_seconds}};
}

Json EvalReport::to_json() const {
    Json j;
    j["text_alignment"] = text_alignment;
    j["face_similarity"] = face_similarity;
    if (timing) j["encoding_time"] = timing->to_json();
    j["cells"] = Json::array();
    for (const EvalCell& c : cells) {
        j["cells"].push_back(Json{{"identity_id", c.identity_id},
                                  {"prompt", c.prompt},
                                  {"images", c.images},
                                  {"text_alignment", c.text_alignment},
                                  {"face_similarity", c.face_similarity}});
    }
    return j;
}

Json EvalConfig::to_json() const {
    Json j;
    j["images_per_cell"] = images_per_cell;
    j["sampler"] = sampler.to_json();
    j["seed"] = seed;
    j["timing_repeats"] = timing_repeats;
    return j;
}

EvalReport run_protocol(const M2Encoder& encoder, const DiffusionBackend& backend,
                        const std::vector<EvalIdentity>& identities,
                        const std::vector<PromptTemplate>& prompts,
                        const TextImageScorer& clip_scorer,
                        const IdentityScorer& id_scorer, const EvalConfig& cfg,
                        const std::set<std::string>* train_identities) {
    if (identities.empty()) throw ConfigError("evaluation needs at least one identity");
    if (prompts.empty()) throw ConfigError("evaluation needs at least one prompt");
    if (cfg.images_per_cell <= 0)
        throw ConfigError("images_per_cell must be positive");
    if (train_identities) {
        std::string overlap;
        for (const EvalIdentity& id : identities)
            if (train_identities->count(id.identity_id))
                overlap += (overlap.empty() ? "" : ", ") + id.identity_id;
        if (!overlap.empty())
            throw ConfigError("evaluation identities overlap the training set: " +
                              overlap);
    }

    EvalReport report;
    for (const EvalIdentity& id : identities) {
        AlignedFace face{id.face, id.identity_id, AlignedFace::Source::real};
        PseudoWords words = encoder.encode_identity(face);
        for (const PromptTemplate& tmpl : prompts) {
            ConditioningSequence cond = assemble_conditioning(
                tmpl, words, backend.tokenizer(), backend.embedding_table(),
                backend.max_len());
            std::vector<Image> images;
            for (int i = 0; i < cfg.images_per_cell; ++i) {
                SamplerConfig sc = cfg.sampler;
                sc.seed = fnv1a(id.identity_id + "#" + tmpl.text + "#" +
                                    std::to_string(i),
                                cfg.seed + 0x5eedull);
                images.push_back(backend.ddim_sample(cond, sc));
            }
            EvalCell cell;
            cell.identity_id = id.identity_id;
            cell.prompt = tmpl.text;
            cell.images = static_cast<int>(images.size());
            cell.text_alignment = clip_scorer.text_alignment(
                images, class_substituted_prompt(tmpl.text));
            Scalar sim = 0;
            for (const Image& img : images)
                sim += id_scorer.face_similarity(id.face, img);
            cell.face_similarity = sim / static_cast<Scalar>(images.size());
            report.cells.push_back(std::move(cell));
        }
    }

    Scalar ta = 0, fs = 0;
    for (const EvalCell& c : report.cells) {
        ta += c.text_alignment;
        fs += c.face_similarity;
    }
    const auto n = static_cast<Scalar>(report.cells.size());
    report.text_alignment = ta / n;
    report.face_similarity = fs / n;

    if (cfg.timing_repeats > 0)
        report.timing =
            measure_encoding_time(encoder, identities.front().face, cfg.timing_repeats);
    return report;
}

EncodingTimeStats measure_encoding_time(const M2Encoder& encoder, const Image& face,
                                        int repeats) {
    if (repeats <= 0) throw ConfigError("timing repeats must be positive");
    AlignedFace aligned{face, "timing", AlignedFace::Source::real};
    encoder.encode_identity(aligned);  // warm-up, excluded
    std::vector<Scalar> secs(repeats);
    for (int i = 0; i < repeats; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        PseudoWords w = encoder.encode_identity(aligned);
        const auto t1 = std::chrono::steady_clock::now();
        if (w.k <= 0) throw ShapeError("encode produced no embeddings");
        secs[i] = std::chrono::duration<Scalar>(t1 - t0).count();
    }
    std::sort(secs.begin(), secs.end());
    EncodingTimeStats stats;
    stats.repeats = repeats;
    stats.median_seconds = secs[repeats / 2];
    stats.p95_seconds = secs[std::min<std::size_t>(
        secs.size() - 1, static_cast<std::size_t>(std::ceil(0.95 * repeats)) - 1)];
    return stats;
}

namespace {

std::string fixed3(Scalar v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(3) << v;
    return s.str();
}

std::string pad(const std::string& s, std::size_t w) {
    return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

}  // namespace

std::string render_comparison_table(const std::vector<ComparisonRow>& rows) {
    std::size_t name_w = std::string("Method").size();
    for (const ComparisonRow& r : rows) name_w = std::max(name_w, r.method.size());
    std::ostringstream out;
    out << pad("Method", name_w) << "  Text-alignment  Face-similarity  Encoding time\n";
    for (const ComparisonRow& r : rows) {
        std::ostringstream t;
        t << std::fixed << std::setprecision(3) << r.encoding_seconds << "s";
        out << pad(r.method, name_w) << "  " << pad(fixed3(r.text_alignment), 14)
            << "  " << pad(fixed3(r.face_similarity), 15) << "  " << t.str() << "\n";
    }
    return out.str();
}

std::vector<AblationRow> run_ablation(const EncoderConfig& base, std::uint64_t encoder_seed,
                                      const DiffusionBackend& backend,
                                      const std::vector<EvalIdentity>& identities,
                                      const std::vector<PromptTemplate>& prompts,
                                      const TextImageScorer& clip_scorer,
                                      const IdentityScorer& id_scorer,
                                      const EvalConfig& cfg) {
    struct Variant {
        std::string backbone;
        bool multiscale;
        int k;
    };
    const std::vector<Variant> variants = {
        {"generic", true, base.k},   // generic backbone in place of the face one
        {"face_vit", false, base.k}, // final feature only
        {"face_vit", true, 1},
        {"face_vit", true, 2},
        {"face_vit", true, 3},
    };
    std::vector<AblationRow> rows;
    for (const Variant& v : variants) {
        EncoderConfig ec = base;
        ec.backbone_kind = v.backbone;
        ec.multiscale = v.multiscale;
        ec.k = v.k;
        ec.finalize();
        M2Encoder enc(ec, encoder_seed);
        EvalReport rep = run_protocol(enc, backend, identities, prompts, clip_scorer,
                                      id_scorer, cfg);
        AblationRow row;
        row.id_encoder = v.backbone == "generic" ? "generic" : "face";
        row.ms_feat = v.multiscale;
        row.k = v.k;
        row.text_alignment = rep.text_alignment;
        row.face_similarity = rep.face_similarity;
        rows.push_back(row);
    }
    return rows;
}

std::string render_ablation_table(const std::vector<AblationRow>& rows) {
    std::ostringstream out;
    out << "ID Encoder  MS Feat  Multi Embedding  Text-alignment  Face-similarity\n";
    for (const AblationRow& r : rows) {
        out << pad(r.id_encoder, 10) << "  " << pad(r.ms_feat ? "yes" : "no", 7)
            << "  " << pad("k=" + std::to_string(r.k), 15) << "  "
            << pad(fixed3(r.text_alignment), 14) << "  " << fixed3(r.face_similarity)
            << "\n";
    }
    return out.str();
}

}  // namespace dreamid
