#include "dreamid/selfaug.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace dreamid {

namespace fs = std::filesystem;
using nn::Json;

CelebrityList ingest_names(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read name list: " + path.string());
    return ingest_names(f, path.string());
}

CelebrityList ingest_names(std::istream& in, const std::string& provenance) {
    CelebrityList list;
    list.provenance = provenance;
    std::set<std::string> seen;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n' ||
                                 line.back() == ' '))
            line.pop_back();
        std::size_t start = line.find_first_not_of(' ');
        if (start == std::string::npos) continue;
        std::string name = line.substr(start);
        std::string lower = name;
        std::transform(lower.begin(), lower.end(), lower.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (!seen.insert(lower).second) {
            ++list.duplicates_dropped;
            std::clog << "[selfaug] duplicate name dropped: " << name << "\n";
            continue;
        }
        list.names.push_back(std::move(name));
    }
    if (list.names.empty()) throw IoError("name list is empty: " + provenance);
    return list;
}

int DatasetManifest::count(const std::string& kind) const {
    int n = 0;
    for (const auto& e : entries)
        if (e.kind == kind) ++n;
    return n;
}

std::set<std::string> DatasetManifest::identities(const std::string& kind) const {
    std::set<std::string> ids;
    for (const auto& e : entries)
        if (kind.empty() || e.kind == kind) ids.insert(e.identity_id);
    return ids;
}

namespace {

Json entry_to_json(const ManifestEntry& e) {
    Json j;
    j["kind"] = e.kind;
    j["identity_id"] = e.identity_id;
    j["face"] = e.face;
    j["target"] = e.target;
    j["prompt"] = e.prompt;
    j["seed"] = e.seed;
    if (e.has_scores) {
        j["id_score"] = e.id_score;
        j["clip_score"] = e.clip_score;
    }
    return j;
}

ManifestEntry entry_from_json(const Json& j) {
    ManifestEntry e;
    e.kind = j.at("kind").get<std::string>();
    e.identity_id = j.at("identity_id").get<std::string>();
    e.face = j.at("face").get<std::string>();
    e.target = j.at("target").get<std::string>();
    e.prompt = j.at("prompt").get<std::string>();
    e.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("id_score")) {
        e.has_scores = true;
        e.id_score = j.at("id_score").get<Scalar>();
        e.clip_score = j.at("clip_score").get<Scalar>();
    }
    return e;
}

void canonical_sort(std::vector<ManifestEntry>& entries) {
    std::sort(entries.begin(), entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) {
                  return std::tie(a.kind, a.identity_id, a.target, a.prompt) <
                         std::tie(b.kind, b.identity_id, b.target, b.prompt);
              });
}

}  // namespace

void DatasetManifest::write(const fs::path& path) const {
    std::vector<ManifestEntry> sorted = entries;
    canonical_sort(sorted);
    int recon = 0, selfaug = 0;
    for (const auto& e : sorted)
        (e.kind == "reconstruction" ? recon : selfaug) += 1;
    Json header;
    header["schema"] = "dreamid-manifest";
    header["version"] = kSchemaVersion;
    header["config_hash"] = config_hash;
    header["counts"] = Json{{"reconstruction", recon}, {"selfaug", selfaug}};
    std::ofstream f(path);
    if (!f) throw IoError("cannot write manifest: " + path.string());
    f << header.dump() << "\n";
    for (const auto& e : sorted) f << entry_to_json(e).dump() << "\n";
}

DatasetManifest DatasetManifest::read(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read manifest: " + path.string());
    std::string line;
    if (!std::getline(f, line)) throw IoError("empty manifest: " + path.string());
    Json header = Json::parse(line);
    if (header.value("schema", "") != "dreamid-manifest")
        throw IoError("not a dreamid manifest: " + path.string());
    if (header.at("version").get<int>() != kSchemaVersion)
        throw IoError("unsupported manifest version in " + path.string());
    DatasetManifest m;
    m.config_hash = header.value("config_hash", "");
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        m.entries.push_back(entry_from_json(Json::parse(line)));
    }
    const Json& counts = header.at("counts");
    if (counts.at("reconstruction").get<int>() != m.count("reconstruction") ||
        counts.at("selfaug").get<int>() != m.count("selfaug"))
        throw IoError("manifest header counts disagree with entries: " + path.string());
    return m;
}

std::vector<Triplet> score_and_filter(std::vector<Triplet> candidates,
                                      Scalar keep_fraction) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < candidates.size(); ++i)
        groups[candidates[i].edit_prompt].push_back(i);

    std::vector<Triplet> kept;
    for (auto& [prompt, idx] : groups) {
        Scalar id_lo = 1e300, id_hi = -1e300, cl_lo = 1e300, cl_hi = -1e300;
        for (std::size_t i : idx) {
            id_lo = std::min(id_lo, candidates[i].id_score);
            id_hi = std::max(id_hi, candidates[i].id_score);
            cl_lo = std::min(cl_lo, candidates[i].clip_score);
            cl_hi = std::max(cl_hi, candidates[i].clip_score);
        }
        auto norm = [](Scalar v, Scalar lo, Scalar hi) {
            return hi > lo ? (v - lo) / (hi - lo) : 0.5;
        };
        std::vector<std::pair<Scalar, std::size_t>> ranked;
        for (std::size_t i : idx) {
            Scalar score = norm(candidates[i].id_score, id_lo, id_hi) +
                           norm(candidates[i].clip_score, cl_lo, cl_hi);
            ranked.emplace_back(score, i);
        }
        std::sort(ranked.begin(), ranked.end(),
                  [&](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return candidates[a.second].candidate_id <
                             candidates[b.second].candidate_id;
                  });
        const auto n = static_cast<std::size_t>(ranked.size());
        const auto n_keep = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::floor(keep_fraction * static_cast<Scalar>(n))));
        for (std::size_t r = 0; r < std::min(n_keep, n); ++r) {
            Triplet t = candidates[ranked[r].second];
            t.kept = true;
            kept.push_back(std::move(t));
        }
    }
    // deterministic output order regardless of group-map iteration
    std::sort(kept.begin(), kept.end(), [](const Triplet& a, const Triplet& b) {
        return a.candidate_id < b.candidate_id;
    });
    return kept;
}

DatasetManifest write_manifest(const std::vector<Triplet>& triplets,
                               const std::vector<ManifestEntry>& recon_entries,
                               const std::string& config_hash,
                               const fs::path& base_dir,
                               const fs::path& manifest_path) {
    DatasetManifest m;
    m.config_hash = config_hash;
    for (const auto& t : triplets) {
        ManifestEntry e;
        e.kind = "selfaug";
        e.identity_id = t.identity_id;
        e.face = t.face_ref;
        e.target = t.edited_ref;
        e.prompt = t.edit_prompt;
        e.seed = t.seed;
        e.has_scores = true;
        e.id_score = t.id_score;
        e.clip_score = t.clip_score;
        m.entries.push_back(std::move(e));
    }
    for (const auto& e : recon_entries) m.entries.push_back(e);

    std::vector<std::string> missing;
    for (const auto& e : m.entries) {
        if (!fs::exists(base_dir / e.face)) missing.push_back(e.face);
        if (e.target != e.face && !fs::exists(base_dir / e.target))
            missing.push_back(e.target);
    }
    if (!missing.empty()) {
        std::string msg = "manifest references missing files:";
        for (const auto& p : missing) msg += " " + p;
        throw IoError(msg);
    }
    m.write(manifest_path);
    return m;
}

std::string identity_key(const std::string& name) {
    return "id-" + to_hex(fnv1a(name, 0x6964ull));
}

PromptTemplate source_face_template() {
    return PromptTemplate{"<celebrity-name> face, looking at the camera",
                          PromptTemplate::Role::reconstruction};
}

std::string class_substituted_prompt(const std::string& prompt) {
    std::string out = prompt;
    std::size_t pos = out.find(Tokenizer::kPlaceholder);
    if (pos != std::string::npos)
        out.replace(pos, std::string(Tokenizer::kPlaceholder).size(), "face");
    return out;
}

fs::path content_address(const std::string& bytes) {
    std::string hex = to_hex(fnv1a(bytes));
    return fs::path("images") / hex.substr(0, 2) / (hex + ".ppm");
}

Json PipelineConfig::to_json() const {
    Json j;
    j["per_name"] = per_name;
    j["per_pair"] = per_pair;
    j["keep_fraction"] = keep_fraction;
    j["seed"] = seed;
    j["min_side"] = min_side;
    j["sampler"] = sampler.to_json();
    return j;
}

namespace {

std::string placeholder_form(const std::string& template_text) {
    std::string out = template_text;
    const std::string needle = "<celebrity-name>";
    std::size_t pos = out.find(needle);
    if (pos != std::string::npos)
        out.replace(pos, needle.size(), Tokenizer::kPlaceholder);
    return out;
}

std::string save_image(const Image& img, const fs::path& out_dir) {
    const std::string bytes = ppm_bytes(img);
    const fs::path rel = content_address(bytes);
    const fs::path full = out_dir / rel;
    fs::create_directories(full.parent_path());
    if (!fs::exists(full)) write_ppm(img, full);
    return rel.generic_string();
}

}  // namespace

std::vector<SourceFace> generate_source_faces(const CelebrityList& names,
                                              const ToyBackend& backend, int per_name,
                                              const PipelineConfig& cfg) {
    const PromptTemplate src_tmpl = source_face_template();
    std::vector<SourceFace> out;
    for (const std::string& name : names.names) {
        for (int i = 0; i < per_name; ++i) {
            SamplerConfig sc = cfg.sampler;
            sc.seed = fnv1a(name + "#source#" + std::to_string(i), cfg.seed + 0x9e3779b9ull);
            try {
                out.push_back({name,
                               backend.ddim_sample(
                                   backend.prompt_conditioning(render_prompt(src_tmpl, name)),
                                   sc),
                               sc.seed});
            } catch (const std::exception& e) {
                std::clog << "[selfaug] source generation failed for '" << name
                          << "': " << e.what() << "\n";
            }
        }
    }
    return out;
}

std::vector<Triplet> generate_edited_images(const std::vector<IdentityFace>& identities,
                                            const std::vector<PromptTemplate>& templates,
                                            const ToyBackend& backend, int per_pair,
                                            const PipelineConfig& cfg,
                                            const fs::path& out_dir) {
    std::vector<Triplet> candidates;
    for (const auto& idf : identities) {
        for (std::size_t ti = 0; ti < templates.size(); ++ti) {
            const std::string stored_prompt = placeholder_form(templates[ti].text);
            for (int i = 0; i < per_pair; ++i) {
                SamplerConfig sc = cfg.sampler;
                sc.seed = fnv1a(idf.name + "#edit#" + std::to_string(ti) + "#" +
                                    std::to_string(i),
                                cfg.seed + 0x51ed2701ull);
                Image edited;
                try {
                    edited = backend.ddim_sample(
                        backend.prompt_conditioning(render_prompt(templates[ti], idf.name)),
                        sc);
                } catch (const std::exception& e) {
                    std::clog << "[selfaug] edit generation failed for '" << idf.name
                              << "': " << e.what() << "\n";
                    continue;
                }
                Triplet t;
                t.candidate_id = to_hex(fnv1a(idf.name + "|" + stored_prompt + "|" +
                                              std::to_string(sc.seed)));
                t.identity_id = idf.id;
                t.face_ref = idf.ref;
                t.edit_prompt = stored_prompt;
                t.edited_ref = save_image(edited, out_dir);
                t.seed = sc.seed;
                candidates.push_back(std::move(t));
            }
        }
    }
    return candidates;
}

DatasetManifest build_dataset(const CelebrityList& names,
                              const std::vector<PromptTemplate>& edit_templates,
                              const ToyBackend& backend,
                              const IdentityScorer& id_scorer,
                              const TextImageScorer& clip_scorer,
                              const PipelineConfig& cfg,
                              const std::vector<ManifestEntry>& recon_entries,
                              const fs::path& out_dir,
                              PipelineStats* stats) {
    fs::create_directories(out_dir);
    PipelineStats local;
    BlobFaceDetector detector;
    const Index face_res = 64;

    std::vector<SourceFace> sources = generate_source_faces(names, backend,
                                                            cfg.per_name, cfg);
    local.source_generated = static_cast<int>(sources.size());

    // first accepted crop per name becomes that identity's face
    std::vector<IdentityFace> identities;
    std::map<std::string, Image> face_by_name;
    for (const auto& src : sources) {
        if (face_by_name.count(src.name)) continue;
        CropAlignResult crop = crop_align_filter(src.image, detector, cfg.min_side,
                                                 face_res, src.name,
                                                 AlignedFace::Source::generated);
        if (!crop.accepted()) {
            ++local.faces_rejected;
            std::clog << "[selfaug] face rejected for '" << src.name
                      << "': " << crop.rejection->reason << "\n";
            continue;
        }
        ++local.faces_accepted;
        IdentityFace idf;
        idf.name = src.name;
        idf.id = identity_key(src.name);
        idf.pixels = crop.face->pixels;
        idf.ref = save_image(idf.pixels, out_dir);
        face_by_name.emplace(idf.id, idf.pixels);
        identities.push_back(std::move(idf));
    }
    local.names_skipped = static_cast<int>(names.names.size() - identities.size());

    std::vector<Triplet> candidates = generate_edited_images(
        identities, edit_templates, backend, cfg.per_pair, cfg, out_dir);
    for (Triplet& t : candidates) {
        const Image edited = read_ppm(out_dir / t.edited_ref);
        t.id_score = id_scorer.face_similarity(face_by_name.at(t.identity_id), edited);
        t.clip_score = clip_scorer.text_alignment(
            {edited}, class_substituted_prompt(t.edit_prompt));
    }
    local.candidates = static_cast<int>(candidates.size());

    std::vector<Triplet> kept = score_and_filter(std::move(candidates), cfg.keep_fraction);
    local.kept = static_cast<int>(kept.size());

    const std::string cfg_hash = to_hex(fnv1a(cfg.to_json().dump()));
    DatasetManifest manifest = write_manifest(kept, recon_entries, cfg_hash, out_dir,
                                              out_dir / "manifest.jsonl");
    if (stats) *stats = local;
    return manifest;
}

}  // namespace dreamid
