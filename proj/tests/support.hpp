#pragma once

#include <string>
#include <utility>
#include <vector>

#include "coursekit/common.hpp"
#include "coursekit/corpus.hpp"
#include "coursekit/entity.hpp"

namespace coursekit::testing {

inline std::string data_path(const std::string& name) { return std::string(COURSEKIT_TEST_DATA) + "/" + name; }

/// Builds admissions from plain strings; mentions are located by substring.
class AdmissionBuilder {
  public:
    explicit AdmissionBuilder(std::string id) { record_.admission_id = std::move(id); }

    AdmissionBuilder& note(std::string note_id, std::vector<std::pair<std::string, std::string>> sections,
                           int day = 1, int total = 1) {
        Note n;
        n.note_id = std::move(note_id);
        n.title = "Progress Note";
        n.timestamp = Timestamp::parse("2150-01-0" + std::to_string(1 + record_.notes.size() % 9) + "T08:00:00");
        n.day_index = day;
        n.total_days = total;
        for (auto& [h, t] : sections) n.sections.push_back({h, t});
        record_.notes.push_back(std::move(n));
        return *this;
    }

    AdmissionBuilder& reference(std::string text) {
        record_.reference = std::move(text);
        return *this;
    }

    AdmissionBuilder& generated(std::string system, std::string text) {
        record_.generated[std::move(system)] = std::move(text);
        return *this;
    }

    /// Mention of the `occurrence`-th match of `surface` in the document.
    AdmissionBuilder& mention(const DocRef& doc, const std::string& surface, SemanticType type,
                              std::vector<std::string> codes = {}, int occurrence = 0) {
        const std::string text = doc.kind == DocKind::Note ? record_.find_note(doc.id)->text()
                                                           : record_.document_text(doc);
        std::size_t pos = text.find(surface);
        for (int i = 0; i < occurrence && pos != std::string::npos; ++i) pos = text.find(surface, pos + 1);
        if (pos == std::string::npos) throw ValidationError("fixture: '" + surface + "' not found");
        EntityMention m;
        m.mention_id = record_.admission_id + "-m" + std::to_string(record_.mentions.size() + 1);
        m.doc = doc;
        m.start = pos;
        m.end = pos + surface.size();
        m.text = surface;
        m.semantic_type = type;
        m.codes = std::move(codes);
        record_.mentions.push_back(std::move(m));
        return *this;
    }

    AdmissionRecord build() const {
        // Round-trip through JSON so every fixture passes schema validation.
        return admission_from_json(to_json(record_));
    }

  private:
    AdmissionRecord record_;
};

inline EntityMention make_mention(std::string id, std::string text, SemanticType type = SemanticType::Problem,
                                  std::vector<std::string> codes = {}, DocRef doc = DocRef::note("n1")) {
    EntityMention m;
    m.mention_id = std::move(id);
    m.doc = std::move(doc);
    m.text = std::move(text);
    m.end = m.text.size();
    m.semantic_type = type;
    m.codes = std::move(codes);
    return m;
}

inline SourceSentence make_source(std::size_t position, const std::string& text, std::string note_id = "n1") {
    SourceSentence s;
    s.sentence.doc = DocRef::note(std::move(note_id));
    s.sentence.index = static_cast<int>(position);
    s.sentence.text = text;
    s.sentence.tokens = tokenize(text);
    s.position = position;
    return s;
}

inline Sentence make_sentence(int index, const std::string& text, DocRef doc = DocRef::reference()) {
    Sentence s;
    s.doc = std::move(doc);
    s.index = index;
    s.text = text;
    s.tokens = tokenize(text);
    s.end = text.size();
    return s;
}

inline TokenList random_tokens(Rng& rng, std::size_t max_len, std::size_t vocab) {
    TokenList out(rng.below(max_len + 1));
    for (auto& t : out) t = "w" + std::to_string(rng.below(vocab));
    return out;
}

/// Exact-text synonymy, the simplest predicate for set-arithmetic oracles.
inline SynonymPredicate exact_text_predicate() {
    return [](const EntityMention& a, const EntityMention& b) {
        return normalize_mention(a.text) == normalize_mention(b.text);
    };
}

}  // namespace coursekit::testing
