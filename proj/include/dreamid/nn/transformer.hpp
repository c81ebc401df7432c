#pragma once

#include "dreamid/nn/params.hpp"

namespace dreamid::nn {

void init_normal(Mat& m, Rng& rng, Scalar stddev);

// Pre-LN single-head transformer block of width d with a GELU MLP.
// Parameters are registered under "<prefix>." names.
void add_transformer_block(ParamStore& store, const std::string& prefix, Index d,
                           Index hidden, Rng& rng, bool trainable = true);
Tape::Id transformer_block(Tape& tape, ParamStore& store, const std::string& prefix,
                           Tape::Id x);

// Residual single-head cross-attention: queries from q_tokens (NxD), keys and
// values from kv_tokens (MxDkv).
void add_cross_attention(ParamStore& store, const std::string& prefix, Index d,
                         Index d_kv, Rng& rng, bool trainable = true);
Tape::Id cross_attention(Tape& tape, ParamStore& store, const std::string& prefix,
                         Tape::Id q_tokens, Tape::Id kv_tokens);

}  // namespace dreamid::nn
