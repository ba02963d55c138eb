#pragma once

// Document annotation: knowledge-element occurrence counts per document.

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hks/automaton.hpp"
#include "hks/pool.hpp"
#include "hks/unicode.hpp"

namespace hks {

struct Document {
    std::string id;
    std::string text;
    std::map<std::string, std::string> meta;
};

enum class OverlapMode {
    /// Every automaton match, overlapping and nested included.
    all,
    /// Non-overlapping, preferring the earliest then the longest match.
    leftmost_longest,
};

struct MatchOptions {
    OverlapMode overlap = OverlapMode::all;
};

struct DomainCounts {
    std::size_t n = 0;         // occurrences of the domain's elements
    std::size_t distinct = 0;  // distinct elements of the domain present

    bool operator==(const DomainCounts &) const = default;
};

struct KnowledgeProfile {
    std::string doc_id;
    std::size_t n_p = 0;
    std::size_t n_k = 0;
    std::size_t n_distinct = 0;
    std::array<DomainCounts, kDomainCount> per_domain{};

    const DomainCounts &domain(Domain d) const { return per_domain[static_cast<std::size_t>(d)]; }
    bool operator==(const KnowledgeProfile &) const = default;
};

/// Token count of `text` under the UAX #29 rule (CJK characters count singly).
inline std::size_t tokenize_count(std::string_view text) {
    thread_local unicode::TokenCounter counter;
    return counter.count(text);
}

inline std::vector<Match> select_matches(std::vector<Match> matches, OverlapMode mode) {
    if (mode == OverlapMode::all) return matches;
    std::sort(matches.begin(), matches.end(), [](const Match &a, const Match &b) {
        if (a.begin != b.begin) return a.begin < b.begin;
        return a.end > b.end;
    });
    std::vector<Match> kept;
    std::size_t last_end = 0;
    for (const Match &m : matches) {
        if (!kept.empty() && m.begin < last_end) continue;
        kept.push_back(m);
        last_end = m.end;
    }
    return kept;
}

/// Counts matches in already-normalized text with a known token count.
inline KnowledgeProfile profile_text(std::string_view normalized_text, std::size_t n_p,
                                     const Automaton &automaton, const KnowledgePool &pool,
                                     const MatchOptions &options = {}) {
    KnowledgeProfile p;
    p.n_p = n_p;
    std::vector<uint32_t> hits;
    if (options.overlap == OverlapMode::all) {
        automaton.scan(normalized_text, [&](const Match &m) { hits.push_back(m.pattern); });
    } else {
        for (const Match &m : select_matches(automaton.find_all(normalized_text), options.overlap)) {
            hits.push_back(m.pattern);
        }
    }
    p.n_k = hits.size();
    for (uint32_t id : hits) ++p.per_domain[static_cast<std::size_t>(pool[id].domain)].n;
    std::sort(hits.begin(), hits.end());
    hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
    p.n_distinct = hits.size();
    for (uint32_t id : hits) ++p.per_domain[static_cast<std::size_t>(pool[id].domain)].distinct;
    return p;
}

/// Per-worker annotation context. The automaton and pool are shared
/// read-only; the text preparer holds ICU state and is not shareable.
class Annotator {
   public:
    Annotator(const Automaton &automaton, const KnowledgePool &pool, NormalizeOptions normalize = {},
              MatchOptions match = {})
        : automaton_(&automaton), pool_(&pool), preparer_(normalize), match_(match) {}

    KnowledgeProfile annotate(const Document &doc) { return annotate(doc.id, doc.text); }

    KnowledgeProfile annotate(std::string_view id, std::string_view text) {
        const unicode::PreparedText prepared = preparer_.prepare(text);
        KnowledgeProfile p = profile_text(prepared.text, prepared.n_p, *automaton_, *pool_, match_);
        p.doc_id = std::string(id);
        return p;
    }

   private:
    const Automaton *automaton_;
    const KnowledgePool *pool_;
    unicode::TextPreparer preparer_;
    MatchOptions match_;
};

inline KnowledgeProfile annotate(const Document &doc, const Automaton &automaton,
                                 const KnowledgePool &pool, NormalizeOptions normalize = {},
                                 MatchOptions match = {}) {
    return Annotator(automaton, pool, normalize, match).annotate(doc);
}

inline nlohmann::ordered_json to_json(const KnowledgeProfile &p) {
    nlohmann::ordered_json j;
    j["id"] = p.doc_id;
    j["n_p"] = p.n_p;
    j["n_k"] = p.n_k;
    j["n_distinct"] = p.n_distinct;
    nlohmann::ordered_json domains = nlohmann::ordered_json::object();
    for (Domain d : kAllDomains) {
        const auto &c = p.domain(d);
        domains[std::string(domain_name(d))] = {{"n", c.n}, {"distinct", c.distinct}};
    }
    j["domains"] = domains;
    return j;
}

inline KnowledgeProfile profile_from_json(const nlohmann::json &j) {
    KnowledgeProfile p;
    p.doc_id = j.at("id").get<std::string>();
    p.n_p = j.at("n_p").get<std::size_t>();
    p.n_k = j.at("n_k").get<std::size_t>();
    p.n_distinct = j.at("n_distinct").get<std::size_t>();
    if (auto it = j.find("domains"); it != j.end()) {
        for (auto &[name, v] : it->items()) {
            if (auto d = parse_domain(name)) {
                auto &c = p.per_domain[static_cast<std::size_t>(*d)];
                c.n = v.at("n").get<std::size_t>();
                c.distinct = v.at("distinct").get<std::size_t>();
            }
        }
    }
    return p;
}

}  // namespace hks
