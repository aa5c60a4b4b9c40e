// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <array>
#include <unordered_set>

#include "instructmine/corpus.hpp"
#include "instructmine/error.hpp"
#include "instructmine/text.hpp"

namespace instructmine::corpus {

namespace {

constexpr std::array<std::pair<Source, std::string_view>, 6> kSourceNames{{
    {Source::alpaca, "alpaca"},
    {Source::open_assistant, "open_assistant"},
    {Source::stack_exchange, "stack_exchange"},
    {Source::wikihow, "wikihow"},
    {Source::dolly, "dolly"},
    {Source::custom, "custom"},
}};

// Tags removed by strip_html. Anything else in angle brackets is left alone,
// since answers routinely contain literal comparisons and generics.
constexpr std::array<std::string_view, 48> kHtmlTags{
    "a",      "abbr",  "b",     "blockquote", "br",     "caption", "cite",  "code",
    "col",    "dd",    "del",   "div",        "dl",     "dt",      "em",    "font",
    "h1",     "h2",    "h3",    "h4",         "h5",     "h6",      "hr",    "i",
    "img",    "ins",   "kbd",   "li",         "ol",     "p",       "pre",   "q",
    "s",      "samp",  "small", "span",       "strike", "strong",  "sub",   "sup",
    "table",  "tbody", "td",    "tfoot",      "th",     "thead",   "tr",    "ul",
};

bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_alnum(char c) { return is_alpha(c) || (c >= '0' && c <= '9'); }

bool known_tag(std::string_view name) {
    const std::string lower = text::lower_ascii(name);
    return std::find(kHtmlTags.begin(), kHtmlTags.end(), lower) != kHtmlTags.end();
}

// Length of a listed tag starting at s[pos] == '<', or 0 when there is none.
std::size_t match_tag(std::string_view s, std::size_t pos) {
    std::size_t i = pos + 1;
    if (i < s.size() && s[i] == '/') ++i;
    const std::size_t name_begin = i;
    if (i >= s.size() || !is_alpha(s[i])) return 0;
    while (i < s.size() && is_alnum(s[i])) ++i;
    if (!known_tag(s.substr(name_begin, i - name_begin))) return 0;
    if (i >= s.size()) return 0;
    const char after = s[i];
    if (after != '>' && after != '/' && after != ' ' && after != '\t' && after != '\n' &&
        after != '\r') {
        return 0;
    }
    char quote = 0;
    for (; i < s.size(); ++i) {
        const char c = s[i];
        if (quote != 0) {
            if (c == quote) quote = 0;
        } else if (c == '"' || c == '\'') {
            quote = c;
        } else if (c == '>') {
            return i + 1 - pos;
        } else if (c == '<') {
            return 0;
        }
    }
    return 0;
}

std::string decode_entities(std::string_view s) {
    static constexpr std::array<std::pair<std::string_view, char>, 6> entities{{
        {"&amp;", '&'},
        {"&lt;", '<'},
        {"&gt;", '>'},
        {"&quot;", '"'},
        {"&#39;", '\''},
        {"&apos;", '\''},
    }};
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        bool replaced = false;
        if (s[i] == '&') {
            for (const auto& [entity, ch] : entities) {
                if (s.substr(i, entity.size()) == entity) {
                    out.push_back(ch);
                    i += entity.size();
                    replaced = true;
                    break;
                }
            }
        }
        if (!replaced) out.push_back(s[i++]);
    }
    return out;
}

std::string require_string(const Json& value, const char* key) {
    auto it = value.find(key);
    if (it == value.end()) throw DataError(std::string("missing field \"") + key + "\"");
    if (!it->is_string()) throw DataError(std::string("field \"") + key + "\" is not a string");
    return it->get<std::string>();
}

}  // namespace

std::string_view to_string(Source source) {
    for (const auto& [s, name] : kSourceNames) {
        if (s == source) return name;
    }
    return "custom";
}

Source parse_source(std::string_view name) {
    std::string normalized = text::lower_ascii(name);
    std::replace(normalized.begin(), normalized.end(), '-', '_');
    if (normalized == "oasst" || normalized == "openassistant") return Source::open_assistant;
    if (normalized == "stackexchange") return Source::stack_exchange;
    for (const auto& [s, n] : kSourceNames) {
        if (n == normalized) return s;
    }
    throw UsageError("unknown source \"" + std::string(name) + "\"");
}

std::string InstructionSample::full_instruction() const {
    return text::join_instruction(instruction, input.value_or(""));
}

std::unordered_map<std::string, std::size_t> Corpus::index() const {
    std::unordered_map<std::string, std::size_t> out;
    out.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!out.emplace(samples[i].id, i).second) {
            throw DataError("duplicate sample id \"" + samples[i].id + "\" in corpus " + name);
        }
    }
    return out;
}

std::size_t IngestReport::dropped_total() const {
    std::size_t total = 0;
    for (const auto& [reason, count] : dropped) total += count;
    return total;
}

Json IngestReport::to_json() const {
    Json out;
    out["records"] = records;
    out["retained"] = retained;
    out["dropped"] = Json::object();
    for (const auto& [reason, count] : dropped) out["dropped"][reason] = count;
    out["errors"] = Json::array();
    for (const auto& e : errors) out["errors"].push_back({{"line", e.line}, {"message", e.message}});
    out["warnings"] = warnings;
    return out;
}

std::string strip_html(std::string_view html) {
    std::string stripped;
    stripped.reserve(html.size());
    for (std::size_t i = 0; i < html.size();) {
        if (html[i] == '<') {
            if (html.substr(i, 4) == "<!--") {
                const std::size_t close = html.find("-->", i + 4);
                if (close != std::string_view::npos) {
                    i = close + 3;
                    continue;
                }
            }
            if (const std::size_t len = match_tag(html, i); len > 0) {
                i += len;
                continue;
            }
        }
        stripped.push_back(html[i++]);
    }
    return decode_entities(stripped);
}

bool contains_html_tag(std::string_view s) {
    for (std::size_t i = s.find('<'); i != std::string_view::npos; i = s.find('<', i + 1)) {
        if (match_tag(s, i) > 0) return true;
    }
    return false;
}

Json to_json(const InstructionSample& sample) {
    Json out;
    out["id"] = sample.id;
    out["instruction"] = sample.instruction;
    out["input"] = sample.input ? Json(*sample.input) : Json(nullptr);
    out["response"] = sample.response;
    out["source"] = std::string(to_string(sample.source));
    out["meta"] = sample.meta.is_object() ? sample.meta : Json::object();
    return out;
}

InstructionSample sample_from_json(const Json& value) {
    static constexpr std::array<std::string_view, 6> fields{"id",       "instruction", "input",
                                                            "response", "source",      "meta"};
    if (!value.is_object()) throw DataError("store record is not an object");
    for (const auto& [key, v] : value.items()) {
        if (std::find(fields.begin(), fields.end(), key) == fields.end()) {
            throw DataError("unexpected store field \"" + key + "\"");
        }
    }
    InstructionSample sample;
    sample.id = require_string(value, "id");
    sample.instruction = require_string(value, "instruction");
    sample.response = require_string(value, "response");
    sample.source = parse_source(require_string(value, "source"));
    auto input = value.find("input");
    if (input == value.end()) throw DataError("missing field \"input\"");
    if (input->is_string()) {
        sample.input = input->get<std::string>();
    } else if (!input->is_null()) {
        throw DataError("field \"input\" must be a string or null");
    }
    auto meta = value.find("meta");
    if (meta == value.end() || !meta->is_object()) throw DataError("field \"meta\" must be an object");
    sample.meta = *meta;
    if (sample.id.empty()) throw DataError("empty sample id");
    if (text::trim(sample.instruction).empty() || text::trim(sample.response).empty()) {
        throw DataError("sample \"" + sample.id + "\" has an empty instruction or response");
    }
    return sample;
}

std::string serialize_store(const Corpus& corpus) {
    std::string out;
    for (const auto& sample : corpus.samples) out += to_line(to_json(sample));
    return out;
}

void write_store(const Corpus& corpus, const std::filesystem::path& path) {
    corpus.index();  // rejects duplicate ids before anything is written
    write_new_file(path, serialize_store(corpus));
}

Corpus read_store(const std::filesystem::path& path) {
    Corpus corpus;
    corpus.name = path.stem().string();
    std::unordered_set<std::string> seen;
    for_each_record(path, [&](const RawRecord& record) {
        const std::string where = path.string() + ":" + std::to_string(record.line) + ": ";
        if (!record.error.empty()) throw DataError(where + record.error);
        try {
            InstructionSample sample = sample_from_json(record.value);
            if (!seen.insert(sample.id).second) throw DataError("duplicate id \"" + sample.id + "\"");
            corpus.samples.push_back(std::move(sample));
        } catch (const UsageError& e) {
            throw DataError(where + e.what());
        } catch (const DataError& e) {
            throw DataError(where + e.what());
        }
    });
    return corpus;
}

}  // namespace instructmine::corpus
