#pragma once

#include "dreamid/encoder.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace dreamid {

// Hashing word tokenizer with a reserved, never-merged placeholder token.
// Id 0 is padding, id 1 is the pseudo-word placeholder "S*".
struct Tokenizer {
    static constexpr int kPadId = 0;
    static constexpr int kPlaceholderId = 1;
    static constexpr const char* kPlaceholder = "S*";

    int vocab_size = 4096;

    std::vector<int> tokenize(const std::string& text) const;
    int token_id(const std::string& word) const;
};

struct PromptTemplate {
    enum class Role { reconstruction, editing };
    std::string text;
    Role role = Role::editing;

    // occurrences of either placeholder form ("S*" or "<celebrity-name>")
    int placeholder_count() const;
};

struct ConditioningSequence {
    Mat embeddings;  // length x d_text
    Index injection_start = 0;
    int k = 0;  // injection span is [injection_start, injection_start + k)
    std::string prompt_text;

    Index length() const { return embeddings.rows(); }
};

// Replaces the single placeholder with a literal name (dataset generation
// only; single-pass, no recursion). Throws TemplateError.
std::string render_prompt(const PromptTemplate& tmpl, const std::string& name);

// Splices s_1..s_k into the placeholder slot of the token-embedded prompt.
// Non-placeholder slots come straight from the embedding table. Throws
// TemplateError (placeholder count != 1) or TruncationError (> max_len).
ConditioningSequence assemble_conditioning(const PromptTemplate& tmpl,
                                           const PseudoWords& words,
                                           const Tokenizer& tok,
                                           const Mat& embedding_table,
                                           Index max_len);

// Same splice with the pseudo-words as a live tape node (k x d_text), so the
// encoder trains through the conditioning path.
nn::Tape::Id assemble_conditioning_on_tape(nn::Tape& tape, const PromptTemplate& tmpl,
                                           nn::Tape::Id words, const Tokenizer& tok,
                                           const Mat& embedding_table, Index max_len,
                                           Index* injection_start = nullptr);

// Placeholder-free prompt (empty injection span); used for name-conditioned
// generation and for the unconditional guidance branch.
ConditioningSequence plain_conditioning(const std::string& text, const Tokenizer& tok,
                                        const Mat& embedding_table, Index max_len);

// One template per line; blank lines and '#' comments skipped. Every line
// must contain exactly one placeholder.
std::vector<PromptTemplate> load_templates(const std::filesystem::path& path,
                                           PromptTemplate::Role role);

}  // namespace dreamid
