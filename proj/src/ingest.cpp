// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <array>
#include <map>
#include <unordered_set>

#include "instructmine/corpus.hpp"
#include "instructmine/error.hpp"
#include "instructmine/kmeans.hpp"
#include "instructmine/rng.hpp"
#include "instructmine/text.hpp"

namespace instructmine::corpus {

namespace {

// A record's own "id" wins; otherwise "<source>-<ordinal>" over all records.
std::string record_id(const Json& record, Source source, std::size_t ordinal) {
    if (record.is_object()) {
        auto it = record.find("id");
        if (it != record.end()) {
            if (it->is_string()) return it->get<std::string>();
            if (it->is_number_integer()) return std::to_string(it->get<std::int64_t>());
        }
    }
    return std::string(to_string(source)) + "-" + std::to_string(ordinal);
}

std::optional<std::string> optional_string(const Json& record, const char* key) {
    auto it = record.find(key);
    if (it == record.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw DataError(std::string("field \"") + key + "\" is not a string");
    return it->get<std::string>();
}

std::string required_string(const Json& record, const char* key) {
    auto value = optional_string(record, key);
    if (!value) throw DataError(std::string("missing field \"") + key + "\"");
    return *value;
}

std::string trimmed(std::string_view s) { return std::string(text::trim(s)); }

std::optional<std::string> non_empty(std::optional<std::string> s) {
    if (!s) return std::nullopt;
    std::string t = trimmed(*s);
    if (t.empty()) return std::nullopt;
    return t;
}

// Shared loop: parse errors and DataErrors raised by `handle` become
// record-level errors; one bad line never aborts the pass.
template <typename Handler>
void scan_records(const std::filesystem::path& path, IngestReport& report, Handler handle) {
    std::size_t ordinal = 0;
    for_each_record(path, [&](const RawRecord& record) {
        const std::size_t this_ordinal = ordinal++;
        ++report.records;
        if (!record.error.empty()) {
            report.errors.push_back({record.line, record.error});
            report.drop("malformed");
            return;
        }
        try {
            if (!record.value.is_object()) throw DataError("record is not an object");
            handle(record.value, this_ordinal);
        } catch (const DataError& e) {
            report.errors.push_back({record.line, e.what()});
            report.drop("malformed");
        }
    });
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
    std::size_t n = 0;
    for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos;
         pos = haystack.find(needle, pos + needle.size())) {
        ++n;
    }
    return n;
}

constexpr std::array<std::string_view, 64> kEnglishStopwords{
    "a",     "about", "after", "all",   "also",  "an",    "and",   "any",  "are",   "as",
    "at",    "be",    "been",  "but",   "by",    "can",   "could", "do",   "does",  "for",
    "from",  "had",   "has",   "have",  "he",    "her",   "his",   "how",  "i",     "if",
    "in",    "is",    "it",    "its",   "my",    "not",   "of",    "on",   "or",    "our",
    "she",   "so",    "that",  "the",   "their", "them",  "then",  "there", "these", "they",
    "this",  "to",    "was",   "we",    "were",  "what",  "when",  "which", "who",   "will",
    "with",  "would", "you",   "your",
};

bool is_ascii_punct(char c) {
    return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
           (c >= '{' && c <= '~');
}

bool counts_as_letter(char32_t c) {
    if (c < 0x80) return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    if (text::is_space(c)) return false;
    if (c >= 0x2000 && c <= 0x2BFF) return false;  // punctuation, symbols, arrows
    if (c >= 0x3000 && c <= 0x303F) return false;  // CJK punctuation
    if (c >= 0x1F000) return false;                // emoji and pictographs
    return c != 0xFFFD;
}

}  // namespace

bool looks_english(std::string_view input) {
    std::size_t ascii_letters = 0;
    std::size_t letters = 0;
    for (char32_t c : text::decode_utf8(input)) {
        if (!counts_as_letter(c)) continue;
        ++letters;
        if (c < 0x80) ++ascii_letters;
    }
    if (letters == 0) return false;
    if (static_cast<double>(ascii_letters) < 0.85 * static_cast<double>(letters)) return false;

    std::size_t tokens = 0;
    std::size_t stopwords = 0;
    for (const auto& raw : text::split_whitespace(text::lower_ascii(input))) {
        std::string_view token = raw;
        while (!token.empty() && is_ascii_punct(token.front())) token.remove_prefix(1);
        while (!token.empty() && is_ascii_punct(token.back())) token.remove_suffix(1);
        if (token.empty()) continue;
        ++tokens;
        if (std::find(kEnglishStopwords.begin(), kEnglishStopwords.end(), token) !=
            kEnglishStopwords.end()) {
            ++stopwords;
        }
    }
    if (tokens < 5) return true;
    return static_cast<double>(stopwords) >= 0.08 * static_cast<double>(tokens);
}

IngestResult ingest_alpaca(const std::filesystem::path& path, std::size_t cap, std::uint64_t seed) {
    IngestResult result;
    result.corpus.name = "alpaca";
    std::vector<InstructionSample> all;
    scan_records(path, result.report, [&](const Json& record, std::size_t ordinal) {
        InstructionSample sample;
        sample.source = Source::alpaca;
        sample.id = record_id(record, Source::alpaca, ordinal);
        auto instruction = non_empty(required_string(record, "instruction"));
        auto response = non_empty(required_string(record, "output"));
        if (!instruction || !response) {
            result.report.drop("empty_field");
            return;
        }
        sample.instruction = std::move(*instruction);
        sample.response = std::move(*response);
        sample.input = non_empty(optional_string(record, "input"));
        all.push_back(std::move(sample));
    });

    if (all.size() > cap) {
        Rng rng(seed, "ingest/alpaca");
        auto picked = rng.sample_indices(all.size(), cap);
        std::sort(picked.begin(), picked.end());
        result.report.dropped["subsampled_out"] += all.size() - cap;
        for (std::size_t idx : picked) result.corpus.samples.push_back(std::move(all[idx]));
    } else {
        result.corpus.samples = std::move(all);
    }
    result.report.retained = result.corpus.size();
    result.corpus.index();
    return result;
}

IngestResult ingest_open_assistant(const std::filesystem::path& path,
                                   const LanguageDetector& is_english) {
    IngestResult result;
    result.corpus.name = "open_assistant";
    scan_records(path, result.report, [&](const Json& record, std::size_t ordinal) {
        const std::string conversation = required_string(record, "text");
        const std::size_t humans = count_occurrences(conversation, kHumanMarker);
        const std::size_t assistants = count_occurrences(conversation, kAssistantMarker);
        if (humans == 0 || assistants == 0) {
            result.report.drop("missing_markers");
            return;
        }
        if (humans > 1 || assistants > 1) {
            result.report.drop("multi_turn");
            return;
        }
        const std::size_t human_at = conversation.find(kHumanMarker);
        const std::size_t assistant_at = conversation.find(kAssistantMarker);
        if (assistant_at < human_at) {
            result.report.drop("missing_markers");
            return;
        }
        const std::size_t instruction_begin = human_at + kHumanMarker.size();
        std::string instruction =
            trimmed(std::string_view(conversation).substr(instruction_begin, assistant_at - instruction_begin));
        std::string response =
            trimmed(std::string_view(conversation).substr(assistant_at + kAssistantMarker.size()));
        if (instruction.empty() || response.empty()) {
            result.report.drop("empty_field");
            return;
        }
        if (!is_english(instruction + "\n" + response)) {
            result.report.drop("non_english");
            return;
        }
        InstructionSample sample;
        sample.source = Source::open_assistant;
        sample.id = record_id(record, Source::open_assistant, ordinal);
        sample.instruction = std::move(instruction);
        sample.response = std::move(response);
        sample.meta["language"] = "en";
        result.corpus.samples.push_back(std::move(sample));
    });
    result.report.retained = result.corpus.size();
    result.corpus.index();
    return result;
}

namespace {

struct StackAnswer {
    const Json* node;
    std::string id;
};

std::optional<std::int64_t> vote_count(const Json& answer) {
    for (const char* key : {"votes", "pm_score", "score"}) {
        auto it = answer.find(key);
        if (it == answer.end() || it->is_null()) continue;
        if (it->is_number_integer()) return it->get<std::int64_t>();
        if (it->is_number_float()) {
            const double v = it->get<double>();
            if (v == static_cast<double>(static_cast<std::int64_t>(v))) return static_cast<std::int64_t>(v);
        }
        return std::nullopt;
    }
    return std::nullopt;
}

// A record is either one question with an "answers" array or one flat
// question/answer pair.
std::vector<StackAnswer> stack_answers(const Json& record, const std::string& base_id) {
    std::vector<StackAnswer> out;
    auto answers = record.find("answers");
    if (answers != record.end()) {
        if (!answers->is_array()) throw DataError("field \"answers\" is not an array");
        std::size_t k = 0;
        for (const auto& answer : *answers) {
            if (!answer.is_object()) throw DataError("answer is not an object");
            std::string id = base_id + "-";
            auto aid = answer.find("answer_id");
            if (aid != answer.end() && aid->is_number_integer()) {
                id += std::to_string(aid->get<std::int64_t>());
            } else if (aid != answer.end() && aid->is_string()) {
                id += aid->get<std::string>();
            } else {
                id += std::to_string(k);
            }
            ++k;
            out.push_back({&answer, std::move(id)});
        }
    } else {
        out.push_back({&record, base_id});
    }
    return out;
}

std::string answer_text(const Json& node) {
    for (const char* key : {"text", "answer", "body"}) {
        auto value = optional_string(node, key);
        if (value) return *value;
    }
    throw DataError("answer has no text");
}

std::string stack_base_id(const Json& record, std::size_t ordinal) {
    auto qid = record.find("qid");
    if (qid != record.end() && qid->is_number_integer()) {
        return "stack_exchange-" + std::to_string(qid->get<std::int64_t>());
    }
    return record_id(record, Source::stack_exchange, ordinal);
}

}  // namespace

IngestResult ingest_stack_exchange(const std::filesystem::path& path,
                                   const StackExchangeOptions& options) {
    struct Candidate {
        std::int64_t votes;
        std::size_t order;
        InstructionSample sample;
    };
    IngestResult result;
    result.corpus.name = "stack_exchange";
    std::map<std::string, std::vector<Candidate>> by_exchange;
    std::size_t order = 0;

    scan_records(path, result.report, [&](const Json& record, std::size_t ordinal) {
        const std::string exchange = required_string(record, "exchange");
        const std::string question = trimmed(strip_html(required_string(record, "question")));
        const std::string base_id = stack_base_id(record, ordinal);
        for (const auto& answer : stack_answers(record, base_id)) {
            auto votes = vote_count(*answer.node);
            if (!votes) {
                result.report.drop("missing_votes");
                continue;
            }
            if (*votes < options.min_votes) {
                result.report.drop("low_votes");
                continue;
            }
            std::string body = trimmed(strip_html(answer_text(*answer.node)));
            if (question.empty() || body.empty()) {
                result.report.drop("empty_field");
                continue;
            }
            if (contains_html_tag(body)) {
                result.report.drop("residual_markup");
                continue;
            }
            const std::size_t chars = text::char_count(body);
            if (chars < options.min_chars || chars > options.max_chars) {
                result.report.drop("length");
                continue;
            }
            InstructionSample sample;
            sample.source = Source::stack_exchange;
            sample.id = answer.id;
            sample.instruction = question;
            sample.response = std::move(body);
            sample.meta["exchange"] = exchange;
            sample.meta["votes"] = *votes;
            by_exchange[exchange].push_back({*votes, order++, std::move(sample)});
        }
    });

    std::vector<Candidate> kept;
    for (auto& [exchange, candidates] : by_exchange) {
        std::stable_sort(candidates.begin(), candidates.end(),
                         [](const Candidate& a, const Candidate& b) { return a.votes > b.votes; });
        if (candidates.size() > options.per_exchange) {
            result.report.dropped["exchange_cap"] += candidates.size() - options.per_exchange;
            candidates.resize(options.per_exchange);
        }
        for (auto& c : candidates) kept.push_back(std::move(c));
    }
    std::sort(kept.begin(), kept.end(),
              [](const Candidate& a, const Candidate& b) { return a.order < b.order; });
    for (auto& c : kept) result.corpus.samples.push_back(std::move(c.sample));
    result.report.retained = result.corpus.size();
    result.corpus.index();
    return result;
}

IngestResult ingest_wikihow(const std::filesystem::path& path, const EmbeddingLookup& embeddings,
                            const WikihowOptions& options) {
    IngestResult result;
    result.corpus.name = "wikihow";
    std::vector<InstructionSample> all;
    scan_records(path, result.report, [&](const Json& record, std::size_t ordinal) {
        auto title = non_empty(required_string(record, "title"));
        auto body = non_empty(optional_string(record, "text"));
        if (!body) body = non_empty(optional_string(record, "body"));
        if (!title || !body) {
            result.report.drop("empty_field");
            return;
        }
        InstructionSample sample;
        sample.source = Source::wikihow;
        sample.id = record_id(record, Source::wikihow, ordinal);
        sample.instruction = std::move(*title);
        sample.response = std::move(*body);
        all.push_back(std::move(sample));
    });

    std::vector<std::string> missing;
    std::vector<std::vector<double>> points;
    points.reserve(all.size());
    for (const auto& sample : all) {
        auto it = embeddings.find(sample.id);
        if (it == embeddings.end()) {
            missing.push_back(sample.id);
        } else {
            points.push_back(it->second);
        }
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
        throw DataError("wikihow: no title embedding for " + std::to_string(missing.size()) +
                        " sample(s): " + list);
    }

    if (all.size() <= options.target) {
        if (all.size() < options.target) {
            result.report.warnings.push_back("wikihow: target " + std::to_string(options.target) +
                                             " exceeds the " + std::to_string(all.size()) +
                                             " usable records; returning all of them");
        }
        result.corpus.samples = std::move(all);
        result.report.retained = result.corpus.size();
        result.corpus.index();
        return result;
    }
    if (options.clusters == 0) throw UsageError("wikihow: clusters must be positive");

    const std::size_t k = std::min(options.clusters, all.size());
    const KMeansResult clustering = kmeans(points, k, derive_seed(options.seed, "ingest/wikihow/kmeans"));
    std::vector<std::vector<std::size_t>> remaining(k);
    for (std::size_t i = 0; i < all.size(); ++i) remaining[clustering.assignment[i]].push_back(i);

    Rng rng(options.seed, "ingest/wikihow/draw");
    std::vector<bool> chosen(all.size(), false);
    for (std::size_t selected = 0; selected < options.target; ++selected) {
        std::vector<std::size_t> open;
        for (std::size_t c = 0; c < k; ++c) {
            if (!remaining[c].empty()) open.push_back(c);
        }
        auto& members = remaining[open[rng.below(open.size())]];
        const std::size_t slot = rng.below(members.size());
        chosen[members[slot]] = true;
        members[slot] = members.back();
        members.pop_back();
    }
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (!chosen[i]) continue;
        all[i].meta["cluster"] = clustering.assignment[i];
        result.corpus.samples.push_back(std::move(all[i]));
    }
    result.report.dropped["subsampled_out"] += all.size() - options.target;
    result.report.retained = result.corpus.size();
    result.corpus.index();
    return result;
}

IngestResult ingest_dolly(const std::filesystem::path& path) {
    IngestResult result;
    result.corpus.name = "dolly";
    scan_records(path, result.report, [&](const Json& record, std::size_t ordinal) {
        auto instruction = non_empty(required_string(record, "instruction"));
        auto response = non_empty(required_string(record, "response"));
        if (!instruction || !response) {
            result.report.drop("empty_field");
            return;
        }
        InstructionSample sample;
        sample.source = Source::dolly;
        sample.id = record_id(record, Source::dolly, ordinal);
        sample.instruction = std::move(*instruction);
        sample.response = std::move(*response);
        sample.input = non_empty(optional_string(record, "context"));
        if (auto category = optional_string(record, "category")) sample.meta["category"] = *category;
        result.corpus.samples.push_back(std::move(sample));
    });
    result.report.retained = result.corpus.size();
    result.corpus.index();
    return result;
}

std::vector<std::string> raw_ids(const std::filesystem::path& path, Source source) {
    std::vector<std::string> ids;
    std::size_t ordinal = 0;
    for_each_record(path, [&](const RawRecord& record) {
        const std::size_t this_ordinal = ordinal++;
        if (!record.error.empty() || !record.value.is_object()) return;
        if (source == Source::stack_exchange) {
            try {
                for (const auto& a : stack_answers(record.value, stack_base_id(record.value, this_ordinal))) {
                    ids.push_back(a.id);
                }
            } catch (const DataError&) {
            }
            return;
        }
        ids.push_back(record_id(record.value, source, this_ordinal));
    });
    return ids;
}

}  // namespace instructmine::corpus
