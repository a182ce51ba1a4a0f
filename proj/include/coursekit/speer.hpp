#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coursekit/corpus.hpp"
#include "coursekit/entity.hpp"

namespace coursekit {

// ---------------------------------------------------------------------------
// Instructions and guidance
// ---------------------------------------------------------------------------

enum class InstructionMode { NonGuided, Guided, Speer };

InstructionMode parse_instruction_mode(const std::string& text);
std::string to_string(InstructionMode mode);
const std::string& instruction_text(InstructionMode mode);

inline constexpr std::string_view kSummaryTerminator = "### BRIEF HOSPITAL COURSE:\n";

/// One line per ESG: its unique mention texts joined by "; ".
struct GuidancePrompt {
    std::vector<std::string> problems;
    std::vector<std::string> treatments;
    std::vector<std::string> tests;
    std::vector<std::string> esg_ids;  // listing order

    std::string render() const;
};

/// Lists `esg_ids` (classifier output order) grouped by semantic type. OTHER
/// groups are left out. With a seed the order is shuffled first.
GuidancePrompt guidance_prompt(const EsgIndex& index, const std::vector<std::string>& esg_ids,
                               std::optional<std::uint64_t> shuffle_seed = std::nullopt);
/// Training-time prompt: every source-salient group, shuffled with a seed
/// derived from the admission id.
GuidancePrompt oracle_guidance(const EsgIndex& index, const std::string& admission_id, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Embedded entity marks
// ---------------------------------------------------------------------------

struct MarkedSpan {
    std::string mention_id;
    std::size_t original_begin = 0;
    std::size_t original_end = 0;
    std::size_t marked_begin = 0;  // first byte inside the opening tag
    std::size_t marked_end = 0;    // first byte of the closing tag
};

struct MarkedSource {
    std::string text;
    std::vector<MarkedSpan> spans;
    std::vector<std::string> log;  // dropped overlaps and unmarkable spans
};

/// Escapes brace runs: a run of n >= 2 braces is doubled, single braces stay.
std::string escape_braces(std::string_view text);

/// Wraps each mention span of `text` in {{ }}. Overlaps keep the longer span.
/// Spans that start or end with a brace, or touch a brace of the same
/// direction, cannot be decoded unambiguously and are skipped.
MarkedSource mark_text(std::string_view text, std::vector<EntityMention> mentions);
/// Inverse of mark_text: drops tags and collapses escaped runs.
std::string unmark(std::string_view marked);

struct MarkedNote {
    std::string note_id;
    MarkedSource source;
};

/// Marks the mentions of source-salient groups in every note.
std::vector<MarkedNote> mark_source(const AdmissionRecord& admission, const EsgIndex& index);

// ---------------------------------------------------------------------------
// Plan documents
// ---------------------------------------------------------------------------

struct SpeerStep {
    std::vector<std::string> plan;  // unescaped span texts
    std::string sentence;
    bool operator==(const SpeerStep&) const = default;
};

struct SpeerDocument {
    std::vector<SpeerStep> steps;

    /// Sentence lines joined by a single space.
    std::string summary() const;
    bool operator==(const SpeerDocument&) const = default;
};

std::string serialize_speer(const SpeerDocument& doc);
/// Throws ParseError with the offending line number.
SpeerDocument parse_speer(std::string_view text);

/// Per reference sentence, its mentions (in text order) that belong to a
/// salient source group.
SpeerDocument oracle_plan(const AdmissionRecord& admission, const EsgIndex& index, const SynonymPredicate& predicate);

struct Adherence {
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
    std::size_t used = 0;
    std::size_t guidance = 0;
};

/// Used groups are the source groups matched by the generated mentions. A
/// mention with no source match counts as its own non-guidance group.
Adherence adherence(const std::vector<EntityMention>& generated, const std::set<std::string>& guidance,
                    const EsgIndex& index, const SynonymPredicate& predicate);
Adherence adherence_sets(const std::set<std::string>& used, const std::set<std::string>& guidance);

// ---------------------------------------------------------------------------
// Prompt assembly
// ---------------------------------------------------------------------------

/// Instruction, then each note as header lines and (marked) text, then the
/// guidance block when given, then the terminator line.
std::string assemble_prompt(const AdmissionRecord& admission, InstructionMode mode,
                            const GuidancePrompt* guidance = nullptr,
                            const std::vector<MarkedNote>* marked = nullptr);

nlohmann::json to_json(const SpeerDocument& doc);
nlohmann::json to_json(const Adherence& a);

}  // namespace coursekit
