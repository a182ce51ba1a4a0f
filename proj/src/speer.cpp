#include "coursekit/speer.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace coursekit {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Instructions and guidance
// ---------------------------------------------------------------------------

InstructionMode parse_instruction_mode(const std::string& text) {
    const std::string t = to_lower_ascii(text);
    if (t == "non-guided" || t == "non_guided") return InstructionMode::NonGuided;
    if (t == "guided") return InstructionMode::Guided;
    if (t == "speer") return InstructionMode::Speer;
    throw ValidationError("instruction mode: expected non-guided, guided or speer, got '" + text + "'");
}

std::string to_string(InstructionMode mode) {
    switch (mode) {
        case InstructionMode::NonGuided: return "non-guided";
        case InstructionMode::Guided: return "guided";
        case InstructionMode::Speer: return "speer";
    }
    return {};
}

const std::string& instruction_text(InstructionMode mode) {
    static const std::string non_guided = "Generate the BRIEF HOSPITAL COURSE summary.";
    static const std::string guided =
        "Generate the BRIEF HOSPITAL COURSE summary using only the medical entities (PROBLEMS, TREATMENTS, and "
        "TESTS) provided.";
    static const std::string speer =
        "Retrieve a subset of the medical entities in double brackets {{ }} and use them to generate the next "
        "sentence of the BRIEF HOSPITAL COURSE summary.";
    switch (mode) {
        case InstructionMode::NonGuided: return non_guided;
        case InstructionMode::Guided: return guided;
        case InstructionMode::Speer: return speer;
    }
    throw ValidationError("instruction mode: unknown value");
}

std::string GuidancePrompt::render() const {
    std::string out;
    auto block = [&](const char* heading, const std::vector<std::string>& lines) {
        out += heading;
        out += ":\n";
        for (const auto& l : lines) out += l + "\n";
    };
    block("PROBLEMS", problems);
    block("TREATMENTS", treatments);
    block("TESTS", tests);
    return out;
}

GuidancePrompt guidance_prompt(const EsgIndex& index, const std::vector<std::string>& esg_ids,
                               std::optional<std::uint64_t> shuffle_seed) {
    std::vector<std::string> order = esg_ids;
    std::set<std::string> seen;
    for (const auto& id : order) {
        if (!index.group(id)) throw NotFoundError("guidance: unknown ESG '" + id + "'");
        if (!seen.insert(id).second) throw ValidationError("guidance: ESG '" + id + "' listed twice");
    }
    if (shuffle_seed) {
        Rng rng(*shuffle_seed);
        rng.shuffle(order);
    }
    GuidancePrompt prompt;
    for (const auto& id : order) {
        const auto& g = *index.group(id);
        std::vector<std::string> texts;
        std::set<std::string> norms;
        for (const auto* m : index.members(g)) {
            if (norms.insert(normalize_mention(m->text)).second) texts.push_back(m->text);
        }
        std::vector<std::string>* target = nullptr;
        switch (g.semantic_type) {
            case SemanticType::Problem: target = &prompt.problems; break;
            case SemanticType::Treatment: target = &prompt.treatments; break;
            case SemanticType::Test: target = &prompt.tests; break;
            case SemanticType::Other: break;
        }
        if (!target) continue;
        target->push_back(join(texts, "; "));
        prompt.esg_ids.push_back(id);
    }
    return prompt;
}

GuidancePrompt oracle_guidance(const EsgIndex& index, const std::string& admission_id, std::uint64_t seed) {
    std::vector<std::string> ids;
    for (const auto& g : index.groups()) {
        if (g.source_salient) ids.push_back(g.esg_id);
    }
    return guidance_prompt(index, ids, derive_seed(seed, "guidance/" + admission_id));
}

// ---------------------------------------------------------------------------
// Marks
// ---------------------------------------------------------------------------

namespace {

bool is_brace(char c) { return c == '{' || c == '}'; }

std::size_t run_length(std::string_view s, std::size_t i) {
    std::size_t j = i;
    while (j < s.size() && s[j] == s[i]) ++j;
    return j - i;
}

}  // namespace

std::string escape_braces(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size();) {
        if (!is_brace(text[i])) {
            out += text[i++];
            continue;
        }
        const std::size_t n = run_length(text, i);
        out.append(n >= 2 ? 2 * n : n, text[i]);
        i += n;
    }
    return out;
}

std::string unmark(std::string_view marked) {
    std::string out;
    out.reserve(marked.size());
    for (std::size_t i = 0; i < marked.size();) {
        if (!is_brace(marked[i])) {
            out += marked[i++];
            continue;
        }
        const std::size_t n = run_length(marked, i);
        if (n == 1) out += marked[i];
        else if (n % 2) throw ValidationError("unmark: ambiguous brace run of length " + std::to_string(n) +
                                              " at byte " + std::to_string(i));
        else if (n >= 4) out.append(n / 2, marked[i]);
        i += n;
    }
    return out;
}

MarkedSource mark_text(std::string_view text, std::vector<EntityMention> mentions) {
    MarkedSource out;
    std::sort(mentions.begin(), mentions.end(), [](const EntityMention& a, const EntityMention& b) {
        const auto la = a.end - a.start, lb = b.end - b.start;
        if (la != lb) return la > lb;
        if (a.start != b.start) return a.start < b.start;
        return a.mention_id < b.mention_id;
    });
    std::vector<const EntityMention*> kept;
    for (const auto& m : mentions) {
        if (m.start >= m.end || m.end > text.size()) {
            out.log.push_back("skipped " + m.mention_id + ": span outside text");
            continue;
        }
        if (text[m.start] == '{' || text[m.end - 1] == '}' || (m.start > 0 && text[m.start - 1] == '{') ||
            (m.end < text.size() && text[m.end] == '}')) {
            out.log.push_back("skipped " + m.mention_id + ": span touches a brace");
            continue;
        }
        const EntityMention* clash = nullptr;
        for (const auto* k : kept) {
            if (m.start < k->end && k->start < m.end) {
                clash = k;
                break;
            }
        }
        if (clash) {
            out.log.push_back("dropped " + m.mention_id + ": overlaps longer span " + clash->mention_id);
            continue;
        }
        kept.push_back(&m);
    }
    std::sort(kept.begin(), kept.end(), [](const auto* a, const auto* b) { return a->start < b->start; });

    std::size_t cursor = 0;
    for (const auto* m : kept) {
        out.text += escape_braces(text.substr(cursor, m->start - cursor));
        out.text += "{{";
        MarkedSpan span{m->mention_id, m->start, m->end, out.text.size(), 0};
        out.text += escape_braces(text.substr(m->start, m->end - m->start));
        span.marked_end = out.text.size();
        out.text += "}}";
        out.spans.push_back(std::move(span));
        cursor = m->end;
    }
    out.text += escape_braces(text.substr(cursor));
    return out;
}

std::vector<MarkedNote> mark_source(const AdmissionRecord& admission, const EsgIndex& index) {
    std::map<std::string, std::vector<EntityMention>> by_note;
    for (const auto& g : index.groups()) {
        if (!g.source_salient) continue;
        for (const auto* m : index.members(g)) {
            if (m->doc.kind == DocKind::Note) by_note[m->doc.id].push_back(*m);
        }
    }
    std::vector<MarkedNote> out;
    for (const auto& note : admission.notes) {
        out.push_back({note.note_id, mark_text(note.text(), by_note[note.note_id])});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Plan documents
// ---------------------------------------------------------------------------

std::string SpeerDocument::summary() const {
    std::vector<std::string> parts;
    for (const auto& s : steps) {
        if (!s.sentence.empty()) parts.push_back(s.sentence);
    }
    return join(parts, " ");
}

namespace {

constexpr std::string_view kEntitiesPrefix = "### Entities ";
constexpr std::string_view kSentencePrefix = "### Sentence ";

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

// Parses "<prefix><n>:" and returns n and the remainder, or nullopt.
std::optional<std::pair<std::size_t, std::string_view>> header(std::string_view line, std::string_view prefix) {
    if (!line.starts_with(prefix)) return std::nullopt;
    std::size_t i = prefix.size(), n = 0;
    const std::size_t digits_start = i;
    while (i < line.size() && line[i] >= '0' && line[i] <= '9') n = n * 10 + static_cast<std::size_t>(line[i++] - '0');
    if (i == digits_start || i >= line.size() || line[i] != ':') return std::nullopt;
    return std::make_pair(n, line.substr(i + 1));
}

std::vector<std::string> parse_plan(std::string_view rest, std::size_t line_no) {
    std::vector<std::string> spans;
    std::size_t i = 0;
    while (true) {
        while (i < rest.size() && is_space(rest[i])) ++i;
        if (i >= rest.size()) break;
        if (rest[i] != '{' || run_length(rest, i) != 2)
            throw ParseError("entities line: expected '{{' at column " + std::to_string(i + 1), line_no);
        i += 2;
        std::string raw;
        bool closed = false;
        while (i < rest.size()) {
            if (!is_brace(rest[i])) {
                raw += rest[i++];
                continue;
            }
            const std::size_t n = run_length(rest, i);
            if (rest[i] == '}' && n == 2) {
                i += 2;
                closed = true;
                break;
            }
            if (n != 1 && n % 2)
                throw ParseError("entities line: ambiguous brace run at column " + std::to_string(i + 1), line_no);
            if (n == 2) throw ParseError("entities line: nested '{{' at column " + std::to_string(i + 1), line_no);
            raw.append(n, rest[i]);
            i += n;
        }
        if (!closed) throw ParseError("entities line: unterminated span", line_no);
        if (i < rest.size() && !is_space(rest[i]))
            throw ParseError("entities line: text after '}}' at column " + std::to_string(i + 1), line_no);
        spans.push_back(unmark(raw));
    }
    return spans;
}

}  // namespace

std::string serialize_speer(const SpeerDocument& doc) {
    std::string out;
    for (std::size_t k = 0; k < doc.steps.size(); ++k) {
        const auto& step = doc.steps[k];
        const std::string n = std::to_string(k + 1);
        out += std::string(kEntitiesPrefix) + n + ":";
        for (const auto& span : step.plan) {
            if (span.find_first_of("\r\n") != std::string::npos)
                throw ValidationError("step " + n + ": plan span contains a line break");
            if (!span.empty() && (span.front() == '{' || span.back() == '}'))
                throw ValidationError("step " + n + ": plan span starts or ends with a brace");
            out += " {{" + escape_braces(span) + "}}";
        }
        out += "\n";
        if (step.sentence.find_first_of("\r\n") != std::string::npos)
            throw ValidationError("step " + n + ": sentence contains a line break");
        if (!step.sentence.empty() && (is_space(step.sentence.back()) || is_space(step.sentence.front())))
            throw ValidationError("step " + n + ": sentence has surrounding whitespace");
        out += std::string(kSentencePrefix) + n + ":";
        if (!step.sentence.empty()) out += " " + step.sentence;
        out += "\n";
    }
    return out;
}

SpeerDocument parse_speer(std::string_view text) {
    SpeerDocument doc;
    std::optional<std::vector<std::string>> pending;
    std::size_t pending_line = 0, pos = 0, line_no = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        while (!line.empty() && is_space(line.back())) line.remove_suffix(1);
        if (line.empty()) {
            if (nl == text.size()) break;
            continue;
        }
        const std::size_t expected = doc.steps.size() + 1;
        if (auto h = header(line, kEntitiesPrefix)) {
            if (pending) throw ParseError("entities line without a following sentence line", pending_line);
            if (h->first != expected)
                throw ParseError("expected step " + std::to_string(expected) + ", got " + std::to_string(h->first),
                                 line_no);
            pending = parse_plan(h->second, line_no);
            pending_line = line_no;
        } else if (auto s = header(line, kSentencePrefix)) {
            if (!pending) throw ParseError("sentence line before its entities line", line_no);
            if (s->first != expected)
                throw ParseError("expected sentence " + std::to_string(expected) + ", got " + std::to_string(s->first),
                                 line_no);
            std::string_view body = s->second;
            if (!body.empty() && body.front() == ' ') body.remove_prefix(1);
            doc.steps.push_back({std::move(*pending), std::string(body)});
            pending.reset();
        } else {
            throw ParseError("expected '### Entities' or '### Sentence' line", line_no);
        }
        if (nl == text.size()) break;
    }
    if (pending) throw ParseError("entities line without a following sentence line", pending_line);
    return doc;
}

SpeerDocument oracle_plan(const AdmissionRecord& admission, const EsgIndex& index, const SynonymPredicate& predicate) {
    const auto ref = mentions_in(admission, DocRef::reference());
    SpeerDocument doc;
    for (const auto& sentence : reference_sentences(admission)) {
        SpeerStep step;
        step.sentence = sentence.text;
        for (const auto& m : mentions_within(ref, DocRef::reference(), sentence.begin, sentence.end)) {
            for (const auto& id : index.matching_groups(m, predicate)) {
                if (index.group(id)->source_salient) {
                    step.plan.push_back(m.text);
                    break;
                }
            }
        }
        doc.steps.push_back(std::move(step));
    }
    return doc;
}

Adherence adherence_sets(const std::set<std::string>& used, const std::set<std::string>& guidance) {
    Adherence a;
    a.used = used.size();
    a.guidance = guidance.size();
    if (used.empty() && guidance.empty()) {
        a.recall = a.precision = a.f1 = 1.0;
        return a;
    }
    std::size_t hit = 0;
    for (const auto& g : guidance) hit += used.contains(g);
    a.recall = guidance.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(guidance.size());
    a.precision = used.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(used.size());
    a.f1 = a.recall + a.precision > 0.0 ? 2.0 * a.recall * a.precision / (a.recall + a.precision) : 0.0;
    return a;
}

Adherence adherence(const std::vector<EntityMention>& generated, const std::set<std::string>& guidance,
                    const EsgIndex& index, const SynonymPredicate& predicate) {
    std::set<std::string> used;
    for (const auto& m : generated) {
        auto groups = index.matching_groups(m, predicate);
        if (groups.empty()) used.insert("unmatched:" + normalize_mention(m.text));
        used.insert(groups.begin(), groups.end());
    }
    return adherence_sets(used, guidance);
}

// ---------------------------------------------------------------------------
// Prompt assembly
// ---------------------------------------------------------------------------

std::string assemble_prompt(const AdmissionRecord& admission, InstructionMode mode, const GuidancePrompt* guidance,
                            const std::vector<MarkedNote>* marked) {
    if (mode == InstructionMode::Guided && !guidance)
        throw ValidationError("guided prompt requires a guidance block");
    if (mode == InstructionMode::Speer && !marked) throw ValidationError("speer prompt requires marked notes");
    std::string out = instruction_text(mode) + "\n\n";
    for (std::size_t i = 0; i < admission.notes.size(); ++i) {
        const auto& note = admission.notes[i];
        out += format_note_header(note) + "\n";
        if (mode == InstructionMode::Speer) {
            auto it = std::find_if(marked->begin(), marked->end(),
                                   [&](const MarkedNote& m) { return m.note_id == note.note_id; });
            if (it == marked->end()) throw NotFoundError("speer prompt: no marked text for note " + note.note_id);
            out += it->source.text;
        } else {
            out += note.text();
        }
        out += "\n\n";
    }
    if (mode == InstructionMode::Guided) out += guidance->render() + "\n";
    out += kSummaryTerminator;
    return out;
}

json to_json(const SpeerDocument& doc) {
    json steps = json::array();
    for (const auto& s : doc.steps) steps.push_back({{"plan", s.plan}, {"sentence", s.sentence}});
    return {{"steps", steps}, {"summary", doc.summary()}};
}

json to_json(const Adherence& a) {
    return {{"recall", a.recall}, {"precision", a.precision}, {"f1", a.f1}, {"used", a.used},
            {"guidance", a.guidance}};
}

}  // namespace coursekit
