#include "dreamid/conditioning.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

namespace dreamid {

using nn::Tape;

namespace {

int count_occurrences(const std::string& text, const std::string& needle) {
    int n = 0;
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        ++n;
        pos += needle.size();
    }
    return n;
}

std::string strip_edges(const std::string& w) {
    static const std::string punct = ".,!?;:\"'()";
    std::size_t a = 0, b = w.size();
    while (a < b && punct.find(w[a]) != std::string::npos) ++a;
    while (b > a && punct.find(w[b - 1]) != std::string::npos) --b;
    return w.substr(a, b - a);
}

}  // namespace

int Tokenizer::token_id(const std::string& word) const {
    if (word == kPlaceholder || word == "s*") return kPlaceholderId;
    return 2 + static_cast<int>(fnv1a(word) % static_cast<std::uint64_t>(vocab_size - 2));
}

std::vector<int> Tokenizer::tokenize(const std::string& text) const {
    std::vector<int> ids;
    std::string word;
    auto flush = [&]() {
        if (word.empty()) return;
        std::string stripped = strip_edges(word);
        if (!stripped.empty()) {
            std::string lower = stripped;
            std::transform(lower.begin(), lower.end(), lower.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            ids.push_back(token_id(lower));
        }
        word.clear();
    };
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c)))
            flush();
        else
            word.push_back(c);
    }
    flush();
    return ids;
}

int PromptTemplate::placeholder_count() const {
    return count_occurrences(text, Tokenizer::kPlaceholder) +
           count_occurrences(text, "<celebrity-name>");
}

std::string render_prompt(const PromptTemplate& tmpl, const std::string& name) {
    if (name.empty()) throw TemplateError("render_prompt: empty name");
    if (tmpl.placeholder_count() != 1)
        throw TemplateError("template must contain exactly one placeholder: '" +
                            tmpl.text + "'");
    std::string out = tmpl.text;
    for (const std::string needle : {std::string("<celebrity-name>"),
                                     std::string(Tokenizer::kPlaceholder)}) {
        std::size_t pos = out.find(needle);
        if (pos != std::string::npos) {
            out.replace(pos, needle.size(), name);
            return out;
        }
    }
    return out;
}

namespace {

struct SplicePlan {
    std::vector<int> tokens;   // original token ids, with one placeholder
    Index placeholder_pos = -1;
};

SplicePlan plan_splice(const PromptTemplate& tmpl, const Tokenizer& tok, int k,
                       Index d_text, const Mat& table, Index max_len) {
    if (table.cols() != d_text)
        throw ShapeError("pseudo-word dimension does not match the text embedding table");
    SplicePlan plan;
    plan.tokens = tok.tokenize(tmpl.text);
    int n_placeholders = 0;
    for (std::size_t i = 0; i < plan.tokens.size(); ++i) {
        if (plan.tokens[i] == Tokenizer::kPlaceholderId) {
            plan.placeholder_pos = static_cast<Index>(i);
            ++n_placeholders;
        }
    }
    if (n_placeholders != 1)
        throw TemplateError("prompt must contain exactly one '" +
                            std::string(Tokenizer::kPlaceholder) + "', found " +
                            std::to_string(n_placeholders) + ": '" + tmpl.text + "'");
    Index out_len = static_cast<Index>(plan.tokens.size()) - 1 + k;
    if (out_len > max_len)
        throw TruncationError("spliced sequence length " + std::to_string(out_len) +
                              " exceeds the text encoder limit " +
                              std::to_string(max_len));
    return plan;
}

Mat rows_for(const std::vector<int>& ids, std::size_t from, std::size_t to,
             const Mat& table) {
    Mat m(static_cast<Index>(to - from), table.cols());
    for (std::size_t i = from; i < to; ++i)
        m.row(static_cast<Index>(i - from)) = table.row(ids[i]);
    return m;
}

}  // namespace

ConditioningSequence assemble_conditioning(const PromptTemplate& tmpl,
                                           const PseudoWords& words,
                                           const Tokenizer& tok,
                                           const Mat& embedding_table,
                                           Index max_len) {
    if (words.k < 1 || words.embeddings.size() != static_cast<std::size_t>(words.k))
        throw ConfigError("invalid PseudoWords: k must be >= 1 and match embeddings");
    const Index d_text = words.embeddings[0].size();
    SplicePlan plan = plan_splice(tmpl, tok, words.k, d_text, embedding_table, max_len);
    const auto p = static_cast<std::size_t>(plan.placeholder_pos);
    ConditioningSequence out;
    out.prompt_text = tmpl.text;
    out.injection_start = plan.placeholder_pos;
    out.k = words.k;
    out.embeddings.resize(static_cast<Index>(plan.tokens.size()) - 1 + words.k, d_text);
    Index at = 0;
    for (std::size_t i = 0; i < p; ++i)
        out.embeddings.row(at++) = embedding_table.row(plan.tokens[i]);
    for (const Vec& s : words.embeddings) out.embeddings.row(at++) = s.transpose();
    for (std::size_t i = p + 1; i < plan.tokens.size(); ++i)
        out.embeddings.row(at++) = embedding_table.row(plan.tokens[i]);
    return out;
}

Tape::Id assemble_conditioning_on_tape(Tape& tape, const PromptTemplate& tmpl,
                                       Tape::Id words, const Tokenizer& tok,
                                       const Mat& embedding_table, Index max_len,
                                       Index* injection_start) {
    const Mat& w = tape.value(words);
    SplicePlan plan = plan_splice(tmpl, tok, static_cast<int>(w.rows()), w.cols(),
                                  embedding_table, max_len);
    const auto p = static_cast<std::size_t>(plan.placeholder_pos);
    std::vector<Tape::Id> parts;
    if (p > 0)
        parts.push_back(tape.constant(rows_for(plan.tokens, 0, p, embedding_table)));
    parts.push_back(words);
    if (p + 1 < plan.tokens.size())
        parts.push_back(tape.constant(
            rows_for(plan.tokens, p + 1, plan.tokens.size(), embedding_table)));
    if (injection_start) *injection_start = plan.placeholder_pos;
    return tape.concat_rows(parts);
}

ConditioningSequence plain_conditioning(const std::string& text, const Tokenizer& tok,
                                        const Mat& embedding_table, Index max_len) {
    std::vector<int> ids = tok.tokenize(text);
    if (static_cast<Index>(ids.size()) > max_len)
        throw TruncationError("prompt length " + std::to_string(ids.size()) +
                              " exceeds the text encoder limit " + std::to_string(max_len));
    ConditioningSequence out;
    out.prompt_text = text;
    out.injection_start = 0;
    out.k = 0;
    out.embeddings = rows_for(ids, 0, ids.size(), embedding_table);
    return out;
}

std::vector<PromptTemplate> load_templates(const std::filesystem::path& path,
                                           PromptTemplate::Role role) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read template file: " + path.string());
    std::vector<PromptTemplate> out;
    std::string line;
    while (std::getline(f, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
            line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        PromptTemplate t{line, role};
        if (t.placeholder_count() != 1)
            throw TemplateError("template line must contain exactly one placeholder: '" +
                                line + "'");
        out.push_back(std::move(t));
    }
    if (out.empty()) throw IoError("template file is empty: " + path.string());
    return out;
}

}  // namespace dreamid
