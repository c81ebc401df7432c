#include "dreamid/nn/transformer.hpp"

#include <cmath>

namespace dreamid::nn {

void init_normal(Mat& m, Rng& rng, Scalar stddev) {
    std::normal_distribution<Scalar> dist(0.0, stddev);
    for (Index j = 0; j < m.cols(); ++j)
        for (Index i = 0; i < m.rows(); ++i)
            m(i, j) = dist(rng);
}

namespace {

void add_linear(ParamStore& s, const std::string& name, Index in, Index out,
                Rng& rng, bool trainable) {
    Mat& w = s.add(name + ".w", in, out, trainable);
    init_normal(w, rng, 1.0 / std::sqrt(static_cast<Scalar>(in)));
    s.add(name + ".b", 1, out, trainable);
}

Tape::Id linear(Tape& t, ParamStore& s, const std::string& name, Tape::Id x) {
    return t.add_rowvec(t.matmul(x, s.use(t, name + ".w")), s.use(t, name + ".b"));
}

void add_layer_norm(ParamStore& s, const std::string& name, Index d, bool trainable) {
    Mat& g = s.add(name + ".g", 1, d, trainable);
    g.setOnes();
    s.add(name + ".b", 1, d, trainable);
}

Tape::Id layer_norm(Tape& t, ParamStore& s, const std::string& name, Tape::Id x) {
    return t.layer_norm(x, s.use(t, name + ".g"), s.use(t, name + ".b"));
}

}  // namespace

void add_transformer_block(ParamStore& store, const std::string& prefix, Index d,
                           Index hidden, Rng& rng, bool trainable) {
    add_layer_norm(store, prefix + ".ln1", d, trainable);
    add_linear(store, prefix + ".q", d, d, rng, trainable);
    add_linear(store, prefix + ".k", d, d, rng, trainable);
    add_linear(store, prefix + ".v", d, d, rng, trainable);
    add_linear(store, prefix + ".o", d, d, rng, trainable);
    add_layer_norm(store, prefix + ".ln2", d, trainable);
    add_linear(store, prefix + ".m1", d, hidden, rng, trainable);
    add_linear(store, prefix + ".m2", hidden, d, rng, trainable);
}

Tape::Id transformer_block(Tape& tape, ParamStore& store, const std::string& prefix,
                           Tape::Id x) {
    const Index d = tape.value(x).cols();
    Tape::Id h1 = layer_norm(tape, store, prefix + ".ln1", x);
    Tape::Id q = linear(tape, store, prefix + ".q", h1);
    Tape::Id k = linear(tape, store, prefix + ".k", h1);
    Tape::Id v = linear(tape, store, prefix + ".v", h1);
    Tape::Id scores = tape.scale(tape.matmul(q, tape.transpose(k)),
                                 1.0 / std::sqrt(static_cast<Scalar>(d)));
    Tape::Id attn = tape.matmul(tape.softmax_rows(scores), v);
    Tape::Id x2 = tape.add(x, linear(tape, store, prefix + ".o", attn));
    Tape::Id h2 = layer_norm(tape, store, prefix + ".ln2", x2);
    Tape::Id m = linear(tape, store, prefix + ".m2",
                        tape.gelu(linear(tape, store, prefix + ".m1", h2)));
    return tape.add(x2, m);
}

void add_cross_attention(ParamStore& store, const std::string& prefix, Index d,
                         Index d_kv, Rng& rng, bool trainable) {
    add_layer_norm(store, prefix + ".ln", d, trainable);
    add_linear(store, prefix + ".q", d, d, rng, trainable);
    add_linear(store, prefix + ".k", d_kv, d, rng, trainable);
    add_linear(store, prefix + ".v", d_kv, d, rng, trainable);
    add_linear(store, prefix + ".o", d, d, rng, trainable);
}

Tape::Id cross_attention(Tape& tape, ParamStore& store, const std::string& prefix,
                         Tape::Id q_tokens, Tape::Id kv_tokens) {
    const Index d = tape.value(q_tokens).cols();
    Tape::Id h = layer_norm(tape, store, prefix + ".ln", q_tokens);
    Tape::Id q = linear(tape, store, prefix + ".q", h);
    Tape::Id k = linear(tape, store, prefix + ".k", kv_tokens);
    Tape::Id v = linear(tape, store, prefix + ".v", kv_tokens);
    Tape::Id scores = tape.scale(tape.matmul(q, tape.transpose(k)),
                                 1.0 / std::sqrt(static_cast<Scalar>(d)));
    Tape::Id attn = tape.matmul(tape.softmax_rows(scores), v);
    return tape.add(q_tokens, linear(tape, store, prefix + ".o", attn));
}

}  // namespace dreamid::nn
