#include "coursekit/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>
#include <sstream>

namespace coursekit {

using nlohmann::json;

// ---------------------------------------------------------------------------
// DocRef / SemanticType
// ---------------------------------------------------------------------------

DocRef DocRef::parse(std::string_view text) {
    if (text == "REFERENCE") return reference();
    if (text == "GENERATED") return generated();
    if (text.starts_with("GENERATED:")) return generated(std::string(text.substr(10)));
    if (text.empty()) throw ValidationError("doc_ref: empty");
    return note(std::string(text));
}

std::string DocRef::str() const {
    switch (kind) {
        case DocKind::Note: return id;
        case DocKind::Reference: return "REFERENCE";
        case DocKind::Generated: return id.empty() ? "GENERATED" : "GENERATED:" + id;
    }
    return {};
}

std::string_view to_string(SemanticType type) {
    switch (type) {
        case SemanticType::Problem: return "PROBLEM";
        case SemanticType::Test: return "TEST";
        case SemanticType::Treatment: return "TREATMENT";
        case SemanticType::Other: return "OTHER";
    }
    return "OTHER";
}

SemanticType parse_semantic_type(std::string_view text) {
    if (text == "PROBLEM") return SemanticType::Problem;
    if (text == "TEST") return SemanticType::Test;
    if (text == "TREATMENT") return SemanticType::Treatment;
    if (text == "OTHER") return SemanticType::Other;
    throw ValidationError("semantic_type: unknown value '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Timestamp
// ---------------------------------------------------------------------------

namespace {

bool parse_fixed_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
    out = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
        out = out * 10 + (s[i] - '0');
    }
    return true;
}

int days_in_month(int year, int month) {
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    return month == 2 && leap ? 29 : kDays[month - 1];
}

}  // namespace

Timestamp Timestamp::parse(std::string_view s) {
    Timestamp t;
    bool ok = s.size() == 19 && s[4] == '-' && s[7] == '-' && s[10] == 'T' && s[13] == ':' &&
              s[16] == ':' && parse_fixed_int(s, 0, 4, t.year) && parse_fixed_int(s, 5, 2, t.month) &&
              parse_fixed_int(s, 8, 2, t.day) && parse_fixed_int(s, 11, 2, t.hour) &&
              parse_fixed_int(s, 14, 2, t.minute) && parse_fixed_int(s, 17, 2, t.second);
    ok = ok && t.month >= 1 && t.month <= 12 && t.day >= 1 && t.day <= days_in_month(t.year, t.month) &&
         t.hour < 24 && t.minute < 60 && t.second < 60;
    if (!ok) throw ValidationError("timestamp: expected YYYY-MM-DDTHH:MM:SS, got '" + std::string(s) + "'");
    return t;
}

std::string Timestamp::iso() const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d", year, month, day, hour, minute, second);
    return buf;
}

std::string Timestamp::iso_date() const { return iso().substr(0, 10); }

// ---------------------------------------------------------------------------
// Note / AdmissionRecord
// ---------------------------------------------------------------------------

std::string Note::text() const {
    std::string out;
    for (std::size_t i = 0; i < sections.size(); ++i) {
        if (i) out += "\n\n";
        out += sections[i].header;
        out += '\n';
        out += sections[i].text;
    }
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> Note::section_body_ranges() const {
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    std::size_t offset = 0;
    for (std::size_t i = 0; i < sections.size(); ++i) {
        if (i) offset += 2;
        offset += sections[i].header.size() + 1;
        ranges.emplace_back(offset, offset + sections[i].text.size());
        offset += sections[i].text.size();
    }
    return ranges;
}

const Note* AdmissionRecord::find_note(std::string_view note_id) const {
    for (const auto& n : notes) {
        if (n.note_id == note_id) return &n;
    }
    return nullptr;
}

const std::string& AdmissionRecord::document_text(const DocRef& ref) const {
    // Note texts are materialised lazily; cache per call site is the caller's job.
    static thread_local std::string scratch;
    switch (ref.kind) {
        case DocKind::Reference: return reference;
        case DocKind::Generated: {
            auto it = generated.find(ref.id);
            if (it == generated.end() && ref.id.empty() && generated.size() == 1) return generated.begin()->second;
            if (it == generated.end()) throw NotFoundError("no generated summary '" + ref.id + "'");
            return it->second;
        }
        case DocKind::Note: {
            const Note* n = find_note(ref.id);
            if (!n) throw NotFoundError("no note '" + ref.id + "'");
            scratch = n->text();
            return scratch;
        }
    }
    throw NotFoundError("bad doc ref");
}

// ---------------------------------------------------------------------------
// Tokenisation and sentence splitting
// ---------------------------------------------------------------------------

namespace {

// Byte length of a Unicode whitespace sequence starting at text[i], 0 if none.
std::size_t whitespace_len(std::string_view text, std::size_t i) {
    auto c = static_cast<unsigned char>(text[i]);
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') return 1;
    if (c == 0xC2 && i + 1 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0xA0) return 2;
    if (c == 0xE2 && i + 2 < text.size()) {
        auto c1 = static_cast<unsigned char>(text[i + 1]);
        auto c2 = static_cast<unsigned char>(text[i + 2]);
        // U+2000..U+200A, U+2028, U+2029, U+202F, U+205F
        if (c1 == 0x80 && (c2 <= 0x8A || c2 == 0xA8 || c2 == 0xA9 || c2 == 0xAF)) return 3;
        if (c1 == 0x81 && c2 == 0x9F) return 3;
    }
    if (c == 0xE3 && i + 2 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x80 &&
        static_cast<unsigned char>(text[i + 2]) == 0x80)
        return 3;  // U+3000
    return 0;
}

bool is_ascii_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> token_offsets(std::string_view text) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    std::size_t begin = std::string_view::npos;
    auto flush = [&](std::size_t end) {
        if (begin != std::string_view::npos) spans.emplace_back(begin, end);
        begin = std::string_view::npos;
    };
    for (std::size_t i = 0; i < text.size();) {
        if (auto ws = whitespace_len(text, i)) {
            flush(i);
            i += ws;
            continue;
        }
        if (is_ascii_punct(text[i])) {
            flush(i);
            spans.emplace_back(i, i + 1);
            ++i;
            continue;
        }
        if (begin == std::string_view::npos) begin = i;
        ++i;
    }
    flush(text.size());
    return spans;
}

TokenList tokenize(std::string_view text) {
    TokenList tokens;
    for (const auto& [b, e] : token_offsets(text)) tokens.push_back(to_lower_ascii(text.substr(b, e - b)));
    return tokens;
}

std::vector<Sentence> split_sentences(std::string_view text, const DocRef& doc) {
    std::vector<Sentence> out;
    auto emit = [&](std::size_t b, std::size_t e) {
        while (b < e && whitespace_len(text, b)) b += whitespace_len(text, b);
        while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
        // trailing multi-byte whitespace
        while (e > b) {
            bool trimmed = false;
            for (std::size_t w : {2u, 3u}) {
                if (e >= b + w && whitespace_len(text, e - w) == w) {
                    e -= w;
                    trimmed = true;
                    break;
                }
            }
            if (!trimmed) break;
        }
        if (e <= b) return;
        Sentence s;
        s.doc = doc;
        s.index = static_cast<int>(out.size());
        s.text = std::string(text.substr(b, e - b));
        s.tokens = tokenize(s.text);
        s.begin = b;
        s.end = e;
        out.push_back(std::move(s));
    };

    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '\n') {
            emit(start, i);
            start = i + 1;
            continue;
        }
        if (c == '.' || c == '!' || c == '?') {
            std::size_t j = i + 1;
            std::size_t ws_total = 0;
            while (j < text.size() && text[j] != '\n') {
                auto ws = whitespace_len(text, j);
                if (!ws) break;
                j += ws;
                ws_total += ws;
            }
            if (ws_total > 0 && j < text.size() && std::isupper(static_cast<unsigned char>(text[j]))) {
                emit(start, i + 1);
                start = i + 1;
            }
        }
    }
    emit(start, text.size());
    return out;
}

std::vector<SourceSentence> source_sentences(const AdmissionRecord& admission) {
    std::vector<SourceSentence> out;
    for (std::size_t n = 0; n < admission.notes.size(); ++n) {
        const Note& note = admission.notes[n];
        const auto ranges = note.section_body_ranges();
        int index = 0;
        for (std::size_t s = 0; s < note.sections.size(); ++s) {
            auto sentences = split_sentences(note.sections[s].text, DocRef::note(note.note_id));
            for (auto& sent : sentences) {
                sent.index = index++;
                sent.begin += ranges[s].first;
                sent.end += ranges[s].first;
                SourceSentence ss;
                ss.sentence = std::move(sent);
                ss.note_ordinal = n;
                ss.section = s;
                ss.position = out.size();
                out.push_back(std::move(ss));
            }
        }
    }
    return out;
}

std::vector<Sentence> reference_sentences(const AdmissionRecord& admission) {
    return split_sentences(admission.reference, DocRef::reference());
}

std::string format_note_header(const Note& note) {
    std::string out = note.title + " — " + note.timestamp.iso_date() + " — Day " +
                      std::to_string(note.day_index) + " of " + std::to_string(note.total_days);
    if (note.day_index == 1) out += " (On Admission)";
    if (note.day_index == note.total_days) out += " (On Discharge)";
    return out;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace {

const json& require(const json& j, const char* field, const std::string& ctx) {
    if (!j.is_object()) throw ValidationError(ctx + ": expected an object");
    auto it = j.find(field);
    if (it == j.end()) throw ValidationError(ctx + field + ": missing required field");
    return *it;
}

std::string require_string(const json& j, const char* field, const std::string& ctx) {
    const json& v = require(j, field, ctx);
    if (!v.is_string()) throw ValidationError(ctx + field + ": expected a string");
    return v.get<std::string>();
}

long long require_int(const json& j, const char* field, const std::string& ctx) {
    const json& v = require(j, field, ctx);
    if (!v.is_number_integer()) throw ValidationError(ctx + field + ": expected an integer");
    return v.get<long long>();
}

}  // namespace

json to_json(const EntityMention& m) {
    return json{{"mention_id", m.mention_id}, {"doc_ref", m.doc.str()},
                {"start", m.start},           {"end", m.end},
                {"text", m.text},             {"semantic_type", std::string(to_string(m.semantic_type))},
                {"codes", m.codes}};
}

EntityMention mention_from_json(const json& j) {
    const std::string ctx = "mentions[].";
    EntityMention m;
    m.mention_id = require_string(j, "mention_id", ctx);
    if (m.mention_id.empty()) throw ValidationError(ctx + "mention_id: must be non-empty");
    m.doc = DocRef::parse(require_string(j, "doc_ref", ctx));
    auto start = require_int(j, "start", ctx);
    auto end = require_int(j, "end", ctx);
    if (start < 0 || end < start) throw ValidationError(ctx + "start/end: invalid span");
    m.start = static_cast<std::size_t>(start);
    m.end = static_cast<std::size_t>(end);
    m.text = require_string(j, "text", ctx);
    m.semantic_type = parse_semantic_type(require_string(j, "semantic_type", ctx));
    if (auto it = j.find("codes"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) throw ValidationError(ctx + "codes: expected an array of strings");
        for (const auto& c : *it) {
            if (!c.is_string()) throw ValidationError(ctx + "codes: expected an array of strings");
            m.codes.push_back(c.get<std::string>());
        }
    }
    return m;
}

json to_json(const AdmissionRecord& r) {
    json notes = json::array();
    for (const auto& n : r.notes) {
        json sections = json::array();
        for (const auto& s : n.sections) sections.push_back({{"header", s.header}, {"text", s.text}});
        notes.push_back({{"note_id", n.note_id},
                         {"title", n.title},
                         {"timestamp", n.timestamp.iso()},
                         {"day_index", n.day_index},
                         {"total_days", n.total_days},
                         {"sections", sections}});
    }
    json j{{"admission_id", r.admission_id}, {"reference", r.reference}, {"notes", notes}};
    if (!r.mentions.empty()) {
        json ms = json::array();
        for (const auto& m : r.mentions) ms.push_back(to_json(m));
        j["mentions"] = ms;
    }
    if (!r.generated.empty()) j["generated"] = r.generated;
    return j;
}

AdmissionRecord admission_from_json(const json& j) {
    AdmissionRecord r;
    r.admission_id = require_string(j, "admission_id", "");
    if (r.admission_id.empty()) throw ValidationError("admission_id: must be non-empty");
    r.reference = require_string(j, "reference", "");
    const json& notes = require(j, "notes", "");
    if (!notes.is_array()) throw ValidationError("notes: expected an array");
    std::set<std::string> note_ids;
    for (const auto& jn : notes) {
        const std::string ctx = "notes[].";
        Note n;
        n.note_id = require_string(jn, "note_id", ctx);
        if (n.note_id.empty()) throw ValidationError(ctx + "note_id: must be non-empty");
        if (n.note_id == "REFERENCE" || n.note_id.starts_with("GENERATED"))
            throw ValidationError(ctx + "note_id: reserved value '" + n.note_id + "'");
        if (!note_ids.insert(n.note_id).second)
            throw ValidationError(ctx + "note_id: duplicate '" + n.note_id + "'");
        n.title = require_string(jn, "title", ctx);
        n.timestamp = Timestamp::parse(require_string(jn, "timestamp", ctx));
        auto day = require_int(jn, "day_index", ctx);
        auto total = require_int(jn, "total_days", ctx);
        if (day < 1) throw ValidationError(ctx + "day_index: must be >= 1");
        if (total < 1) throw ValidationError(ctx + "total_days: must be >= 1");
        if (day > total) throw ValidationError(ctx + "day_index: exceeds total_days");
        n.day_index = static_cast<int>(day);
        n.total_days = static_cast<int>(total);
        const json& secs = require(jn, "sections", ctx);
        if (!secs.is_array()) throw ValidationError(ctx + "sections: expected an array");
        for (const auto& js : secs) {
            Section s{require_string(js, "header", ctx + "sections[]."), require_string(js, "text", ctx + "sections[].")};
            if (trim(s.text).empty()) continue;  // empty bodies are filtered at ingestion
            n.sections.push_back(std::move(s));
        }
        r.notes.push_back(std::move(n));
    }
    // Timestamp ties keep file order.
    std::stable_sort(r.notes.begin(), r.notes.end(),
                     [](const Note& a, const Note& b) { return a.timestamp < b.timestamp; });

    if (auto it = j.find("generated"); it != j.end() && !it->is_null()) {
        if (it->is_string()) {
            r.generated[""] = it->get<std::string>();
        } else if (it->is_object()) {
            for (auto& [k, v] : it->items()) {
                if (!v.is_string()) throw ValidationError("generated." + k + ": expected a string");
                r.generated[k] = v.get<std::string>();
            }
        } else {
            throw ValidationError("generated: expected an object or string");
        }
    }

    if (auto it = j.find("mentions"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) throw ValidationError("mentions: expected an array");
        std::set<std::string> ids;
        std::map<std::string, std::string> note_text;
        for (const auto& n : r.notes) note_text[n.note_id] = n.text();
        for (const auto& jm : *it) {
            EntityMention m = mention_from_json(jm);
            if (!ids.insert(m.mention_id).second)
                throw ValidationError("mentions[].mention_id: duplicate '" + m.mention_id + "'");
            const std::string* doc = nullptr;
            if (m.doc.kind == DocKind::Note) {
                auto nt = note_text.find(m.doc.id);
                if (nt == note_text.end())
                    throw ValidationError("mentions[].doc_ref: unknown note '" + m.doc.id + "'");
                doc = &nt->second;
            } else if (m.doc.kind == DocKind::Reference) {
                doc = &r.reference;
            } else {
                auto g = r.generated.find(m.doc.id);
                if (g == r.generated.end())
                    throw ValidationError("mentions[].doc_ref: unknown generated summary '" + m.doc.str() + "'");
                doc = &g->second;
            }
            if (m.end > doc->size() || m.start >= m.end)
                throw ValidationError("mentions[].start/end: span out of range for " + m.mention_id);
            if (doc->compare(m.start, m.end - m.start, m.text) != 0)
                throw ValidationError("mentions[].text: does not match document span for " + m.mention_id);
            r.mentions.push_back(std::move(m));
        }
    }
    return r;
}

Corpus parse_corpus(std::string_view jsonl) {
    Corpus corpus;
    std::set<std::string> ids;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= jsonl.size()) {
        std::size_t nl = jsonl.find('\n', pos);
        if (nl == std::string_view::npos) nl = jsonl.size();
        std::string_view line = jsonl.substr(pos, nl - pos);
        ++line_no;
        pos = nl + 1;
        if (trim(line).empty()) {
            if (nl == jsonl.size()) break;
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
        }
        try {
            AdmissionRecord r = admission_from_json(j);
            if (!ids.insert(r.admission_id).second)
                throw ValidationError("admission_id: duplicate '" + r.admission_id + "'");
            corpus.push_back(std::move(r));
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (nl == jsonl.size()) break;
    }
    return corpus;
}

Corpus load_corpus(const std::string& path) { return parse_corpus(read_file(path)); }

std::string serialize_corpus(const Corpus& corpus) {
    std::string out;
    for (const auto& r : corpus) {
        out += to_json(r).dump();
        out += '\n';
    }
    return out;
}

}  // namespace coursekit
