#pragma once

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coursekit/common.hpp"
#include "json.hpp"

namespace coursekit {

// ---------------------------------------------------------------------------
// Document references
// ---------------------------------------------------------------------------

enum class DocKind { Note, Reference, Generated };

/// Identifies which text a sentence or mention belongs to. Serialised as the
/// note id, "REFERENCE", "GENERATED" or "GENERATED:<system>".
struct DocRef {
    DocKind kind = DocKind::Generated;
    std::string id;  // note id, or generated system name (may be empty)

    static DocRef note(std::string note_id) { return {DocKind::Note, std::move(note_id)}; }
    static DocRef reference() { return {DocKind::Reference, {}}; }
    static DocRef generated(std::string system = {}) { return {DocKind::Generated, std::move(system)}; }

    static DocRef parse(std::string_view text);
    std::string str() const;

    auto operator<=>(const DocRef&) const = default;
};

enum class SemanticType { Problem, Test, Treatment, Other };

std::string_view to_string(SemanticType type);
SemanticType parse_semantic_type(std::string_view text);

/// An externally extracted entity mention. Offsets are byte offsets into the
/// owning document text (Note::text() or the reference), half-open.
struct EntityMention {
    std::string mention_id;
    DocRef doc;
    std::size_t start = 0;
    std::size_t end = 0;
    std::string text;
    SemanticType semantic_type = SemanticType::Other;
    std::vector<std::string> codes;

    bool operator==(const EntityMention&) const = default;
};

// ---------------------------------------------------------------------------
// Notes and admissions
// ---------------------------------------------------------------------------

struct Timestamp {
    int year = 1970, month = 1, day = 1, hour = 0, minute = 0, second = 0;

    /// Strict "YYYY-MM-DDTHH:MM:SS".
    static Timestamp parse(std::string_view text);
    std::string iso() const;       // full timestamp
    std::string iso_date() const;  // YYYY-MM-DD

    auto operator<=>(const Timestamp&) const = default;
};

struct Section {
    std::string header;
    std::string text;
    bool operator==(const Section&) const = default;
};

struct Note {
    std::string note_id;
    std::string title;
    Timestamp timestamp;
    int day_index = 1;
    int total_days = 1;
    std::vector<Section> sections;

    /// Canonical full text that mention offsets refer to: for each section,
    /// header line then body, sections separated by a blank line.
    std::string text() const;
    /// Byte range of each section's body inside text().
    std::vector<std::pair<std::size_t, std::size_t>> section_body_ranges() const;

    bool operator==(const Note&) const = default;
};

struct AdmissionRecord {
    std::string admission_id;
    std::vector<Note> notes;  // non-decreasing timestamps
    std::string reference;
    std::vector<EntityMention> mentions;
    std::map<std::string, std::string> generated;  // system name -> summary text

    const Note* find_note(std::string_view note_id) const;
    /// Text of the document a DocRef points to; throws NotFoundError.
    const std::string& document_text(const DocRef& ref) const;

    bool operator==(const AdmissionRecord&) const = default;
};

using Corpus = std::vector<AdmissionRecord>;

// ---------------------------------------------------------------------------
// Sentences and tokens
// ---------------------------------------------------------------------------

struct Sentence {
    DocRef doc;
    int index = 0;
    std::string text;
    TokenList tokens;
    std::size_t begin = 0;  // byte range in the owning document
    std::size_t end = 0;
};

/// Lowercases ASCII, splits on whitespace and detaches every ASCII
/// punctuation character as its own token.
TokenList tokenize(std::string_view text);
/// Byte range of every token produced by tokenize(text).
std::vector<std::pair<std::size_t, std::size_t>> token_offsets(std::string_view text);

/// Rule-based splitter: breaks at newlines and after [.!?] when followed by
/// whitespace and an uppercase letter. Offsets index into `text`.
std::vector<Sentence> split_sentences(std::string_view text, const DocRef& doc = DocRef::generated());

/// A sentence of an admission's source notes with its position in the
/// admission. `position` is the global (note order, sentence order) rank used
/// for every tie-break.
struct SourceSentence {
    Sentence sentence;
    std::size_t note_ordinal = 0;
    std::size_t section = 0;
    std::size_t position = 0;
};

/// All source sentences of an admission in note order. Sentences are split per
/// section body so that no sentence straddles a section.
std::vector<SourceSentence> source_sentences(const AdmissionRecord& admission);

std::vector<Sentence> reference_sentences(const AdmissionRecord& admission);

/// "<title> — <date> — Day d of n" with "(On Admission)" / "(On Discharge)".
std::string format_note_header(const Note& note);

// ---------------------------------------------------------------------------
// JSONL
// ---------------------------------------------------------------------------

nlohmann::json to_json(const EntityMention& mention);
EntityMention mention_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AdmissionRecord& record);
/// Validates every schema rule; throws ValidationError naming the field.
AdmissionRecord admission_from_json(const nlohmann::json& j);

Corpus parse_corpus(std::string_view jsonl);
Corpus load_corpus(const std::string& path);
std::string serialize_corpus(const Corpus& corpus);

}  // namespace coursekit
