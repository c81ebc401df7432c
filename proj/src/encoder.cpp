#include "dreamid/encoder.hpp"

#include <cmath>
#include <fstream>

namespace dreamid {

using nn::Json;
using nn::Tape;

Mat PseudoWords::as_matrix() const {
    if (embeddings.empty()) return Mat();
    Mat m(static_cast<Index>(embeddings.size()), embeddings[0].size());
    for (std::size_t i = 0; i < embeddings.size(); ++i)
        m.row(static_cast<Index>(i)) = embeddings[i].transpose();
    return m;
}

void EncoderConfig::finalize() {
    if (extract_layers.empty()) {
        // evenly spaced quartile blocks; {3,6,9,12} at depth 12
        for (int q = 1; q <= 4; ++q) {
            int idx = (depth * q + 3) / 4;
            if (extract_layers.empty() || extract_layers.back() != idx)
                extract_layers.push_back(idx);
        }
    }
    if (depth < 1) throw ConfigError("encoder depth must be >= 1");
    if (k < 1) throw ConfigError("k must be >= 1");
    if (d_b < 1 || d_text < 1 || proj_hidden < 1)
        throw ConfigError("encoder widths must be positive");
    if (input_resolution % patch_size != 0)
        throw ConfigError("input resolution must divide by patch size");
    int prev = 0;
    for (int idx : extract_layers) {
        if (idx <= prev || idx > depth)
            throw ConfigError("extraction indices must be strictly increasing block indices");
        prev = idx;
    }
}

int EncoderConfig::n_patches() const {
    int side = input_resolution / patch_size;
    return side * side;
}

Json EncoderConfig::to_json() const {
    Json j;
    j["depth"] = depth;
    j["d_b"] = d_b;
    j["d_text"] = d_text;
    j["k"] = k;
    j["input_resolution"] = input_resolution;
    j["patch_size"] = patch_size;
    j["proj_hidden"] = proj_hidden;
    j["extract_layers"] = extract_layers;
    j["multiscale"] = multiscale;
    j["backbone_kind"] = backbone_kind;
    return j;
}

EncoderConfig EncoderConfig::from_json(const Json& j) {
    EncoderConfig c;
    c.depth = j.at("depth").get<int>();
    c.d_b = j.at("d_b").get<int>();
    c.d_text = j.at("d_text").get<int>();
    c.k = j.at("k").get<int>();
    c.input_resolution = j.at("input_resolution").get<int>();
    c.patch_size = j.at("patch_size").get<int>();
    c.proj_hidden = j.at("proj_hidden").get<int>();
    c.extract_layers = j.at("extract_layers").get<std::vector<int>>();
    c.multiscale = j.at("multiscale").get<bool>();
    c.backbone_kind = j.at("backbone_kind").get<std::string>();
    c.finalize();
    return c;
}

M2Encoder::M2Encoder(EncoderConfig config, std::uint64_t seed) : cfg_(std::move(config)) {
    cfg_.finalize();
    // backbone_kind salts the init stream so the ablation baselines differ
    Rng rng(seed ^ fnv1a(cfg_.backbone_kind));
    Mat& pw = params_.add("patch.w", cfg_.patch_dim(), cfg_.d_b);
    nn::init_normal(pw, rng, 1.0 / std::sqrt(static_cast<Scalar>(cfg_.patch_dim())));
    params_.add("patch.b", 1, cfg_.d_b);
    Mat& cls = params_.add("cls", 1, cfg_.d_b);
    nn::init_normal(cls, rng, 0.02);
    Mat& pos = params_.add("pos", cfg_.n_patches() + 1, cfg_.d_b);
    nn::init_normal(pos, rng, 0.02);
    for (int i = 1; i <= cfg_.depth; ++i)
        nn::add_transformer_block(params_, "blk" + std::to_string(i), cfg_.d_b,
                                  4 * cfg_.d_b, rng);
    Mat& lng = params_.add("ln_f.g", 1, cfg_.d_b);
    lng.setOnes();
    params_.add("ln_f.b", 1, cfg_.d_b);
    for (int i = 1; i <= cfg_.k; ++i) {
        std::string p = "proj" + std::to_string(i);
        Mat& w1 = params_.add(p + ".l1.w", cfg_.proj_input_dim(), cfg_.proj_hidden);
        nn::init_normal(w1, rng, 1.0 / std::sqrt(static_cast<Scalar>(cfg_.proj_input_dim())));
        params_.add(p + ".l1.b", 1, cfg_.proj_hidden);
        Mat& w2 = params_.add(p + ".l2.w", cfg_.proj_hidden, cfg_.proj_hidden);
        nn::init_normal(w2, rng, 1.0 / std::sqrt(static_cast<Scalar>(cfg_.proj_hidden)));
        params_.add(p + ".l2.b", 1, cfg_.proj_hidden);
        Mat& w3 = params_.add(p + ".l3.w", cfg_.proj_hidden, cfg_.d_text);
        nn::init_normal(w3, rng, 1.0 / std::sqrt(static_cast<Scalar>(cfg_.proj_hidden)));
        params_.add(p + ".l3.b", 1, cfg_.d_text);
    }
}

Mat M2Encoder::patchify(const Image& pixels) const {
    if (pixels.height() != cfg_.input_resolution || pixels.width() != cfg_.input_resolution)
        throw ShapeError("face is " + std::to_string(pixels.height()) + "x" +
                         std::to_string(pixels.width()) + ", backbone expects " +
                         std::to_string(cfg_.input_resolution) + " square");
    for (const Mat& c : pixels.rgb)
        if ((c.array() < -1e-9).any() || (c.array() > 1.0 + 1e-9).any())
            throw ShapeError("pixel values outside the normalized [0,1] range");
    const int ps = cfg_.patch_size;
    const int side = cfg_.input_resolution / ps;
    Mat patches(cfg_.n_patches(), cfg_.patch_dim());
    for (int py = 0; py < side; ++py) {
        for (int px = 0; px < side; ++px) {
            Index row = py * side + px;
            Index col = 0;
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < ps; ++y)
                    for (int x = 0; x < ps; ++x)
                        patches(row, col++) = pixels.rgb[c](py * ps + y, px * ps + x);
        }
    }
    return patches;
}

Tape::Id M2Encoder::backbone_on_tape(Tape& tape, const Mat& patches,
                                     std::vector<Tape::Id>* cls_nodes) const {
    Tape::Id tok = tape.add_rowvec(tape.matmul(tape.constant(patches),
                                               params_.use(tape, "patch.w")),
                                   params_.use(tape, "patch.b"));
    Tape::Id x = tape.concat_rows({params_.use(tape, "cls"), tok});
    x = tape.add(x, params_.use(tape, "pos"));
    std::size_t next_extract = 0;
    for (int i = 1; i <= cfg_.depth; ++i) {
        x = nn::transformer_block(tape, params_, "blk" + std::to_string(i), x);
        if (cls_nodes && next_extract < cfg_.extract_layers.size() &&
            cfg_.extract_layers[next_extract] == i) {
            cls_nodes->push_back(tape.slice_rows(x, 0, 1));
            ++next_extract;
        }
    }
    Tape::Id normed = tape.layer_norm(x, params_.use(tape, "ln_f.g"),
                                      params_.use(tape, "ln_f.b"));
    return tape.slice_rows(normed, 0, 1);
}

Tape::Id M2Encoder::features_on_tape(Tape& tape, const Mat& patches) const {
    std::vector<Tape::Id> cls;
    Tape::Id v_final = backbone_on_tape(tape, patches, cfg_.multiscale ? &cls : nullptr);
    if (!cfg_.multiscale) return v_final;
    cls.push_back(v_final);
    // stack the bundle then flatten to a single 1 x (n*d_b) row
    return tape.reshape(tape.concat_rows(cls), 1,
                        static_cast<Index>(cls.size()) * cfg_.d_b);
}

Tape::Id M2Encoder::project_on_tape(Tape& tape, Tape::Id features) const {
    std::vector<Tape::Id> heads;
    for (int i = 1; i <= cfg_.k; ++i) {
        std::string p = "proj" + std::to_string(i);
        Tape::Id h = tape.gelu(tape.add_rowvec(
            tape.matmul(features, params_.use(tape, p + ".l1.w")),
            params_.use(tape, p + ".l1.b")));
        h = tape.gelu(tape.add_rowvec(tape.matmul(h, params_.use(tape, p + ".l2.w")),
                                      params_.use(tape, p + ".l2.b")));
        heads.push_back(tape.add_rowvec(tape.matmul(h, params_.use(tape, p + ".l3.w")),
                                        params_.use(tape, p + ".l3.b")));
    }
    return tape.concat_rows(heads);
}

Tape::Id M2Encoder::encode_on_tape(Tape& tape, const AlignedFace& face) const {
    return project_on_tape(tape, features_on_tape(tape, patchify(face.pixels)));
}

MultiScaleFeature M2Encoder::extract_multiscale_features(const AlignedFace& face) const {
    Tape tape;
    std::vector<Tape::Id> cls;
    Tape::Id v_final = backbone_on_tape(tape, patchify(face.pixels), &cls);
    MultiScaleFeature out;
    for (std::size_t i = 0; i < cls.size(); ++i) {
        out.vectors.push_back(tape.value(cls[i]).row(0).transpose());
        out.layer_indices.push_back(cfg_.extract_layers[i]);
    }
    out.vectors.push_back(tape.value(v_final).row(0).transpose());
    out.layer_indices.push_back(cfg_.depth + 1);
    return out;
}

PseudoWords M2Encoder::project_to_embeddings(const MultiScaleFeature& feat) const {
    if (static_cast<int>(feat.vectors.size()) != cfg_.feature_count())
        throw ShapeError("expected " + std::to_string(cfg_.feature_count()) +
                         " feature vectors, got " + std::to_string(feat.vectors.size()));
    for (const Vec& v : feat.vectors)
        if (v.size() != cfg_.d_b)
            throw ShapeError("feature vector dimension mismatch with d_b");
    Mat input(1, cfg_.proj_input_dim());
    if (cfg_.multiscale) {
        for (std::size_t i = 0; i < feat.vectors.size(); ++i)
            input.block(0, static_cast<Index>(i) * cfg_.d_b, 1, cfg_.d_b) =
                feat.vectors[i].transpose();
    } else {
        input.row(0) = feat.vectors.back().transpose();
    }
    Tape tape;
    Tape::Id words = project_on_tape(tape, tape.constant(input));
    PseudoWords out;
    out.k = cfg_.k;
    for (int i = 0; i < cfg_.k; ++i)
        out.embeddings.push_back(tape.value(words).row(i).transpose());
    return out;
}

PseudoWords M2Encoder::encode_identity(const AlignedFace& face) const {
    return project_to_embeddings(extract_multiscale_features(face));
}

Scalar M2Encoder::reg_loss(const PseudoWords& words) {
    Scalar total = 0.0;
    for (const Vec& s : words.embeddings) total += s.norm();
    return total;
}

std::vector<Vec> M2Encoder::reg_loss_grad(const PseudoWords& words) {
    std::vector<Vec> grads;
    for (const Vec& s : words.embeddings) {
        Scalar n = s.norm();
        grads.push_back(n > 0.0 ? Vec(s / n) : Vec(Vec::Zero(s.size())));
    }
    return grads;
}

Vec M2Encoder::final_identity_vector(const Image& face_pixels) const {
    Tape tape;
    Tape::Id v = backbone_on_tape(tape, patchify(face_pixels), nullptr);
    return tape.value(v).row(0).transpose();
}

void M2Encoder::save(const std::filesystem::path& path) const {
    Json j;
    j["format"] = "dreamid-encoder";
    j["version"] = 1;
    j["config"] = cfg_.to_json();
    j["params"] = params_.to_json();
    std::ofstream f(path);
    if (!f) throw IoError("cannot write checkpoint: " + path.string());
    f << j.dump() << "\n";
}

M2Encoder M2Encoder::load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read checkpoint: " + path.string());
    Json j = Json::parse(f);
    if (j.value("format", "") != "dreamid-encoder")
        throw IoError("not an encoder checkpoint: " + path.string());
    M2Encoder enc(EncoderConfig::from_json(j.at("config")), 0);
    enc.params_.load_json(j.at("params"));
    return enc;
}

}  // namespace dreamid
