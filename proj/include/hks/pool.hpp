#pragma once

// Categorized knowledge-element pool: loading, normalization, filtering,
// deduplication and per-domain totals.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "hks/error.hpp"
#include "hks/unicode.hpp"

namespace hks {

enum class Domain : uint8_t { science = 0, society, culture, art, life };

inline constexpr std::size_t kDomainCount = 5;
inline constexpr std::array<Domain, kDomainCount> kAllDomains = {
    Domain::science, Domain::society, Domain::culture, Domain::art, Domain::life};

inline std::string_view domain_name(Domain d) {
    static constexpr std::array<std::string_view, kDomainCount> names = {
        "science", "society", "culture", "art", "life"};
    return names[static_cast<std::size_t>(d)];
}

inline std::optional<Domain> parse_domain(std::string_view s) {
    std::string lower;
    lower.reserve(s.size());
    for (char ch : s) {
        if (ch == ' ' || ch == '\t' || ch == '\r') continue;
        lower.push_back(static_cast<char>(ch >= 'A' && ch <= 'Z' ? ch - 'A' + 'a' : ch));
    }
    for (Domain d : kAllDomains) {
        if (domain_name(d) == lower) return d;
    }
    return std::nullopt;
}

enum class Source : uint8_t { title_keyword = 0, model_extracted, unknown };

inline std::string_view source_name(Source s) {
    switch (s) {
        case Source::title_keyword: return "title_keyword";
        case Source::model_extracted: return "model_extracted";
        case Source::unknown: break;
    }
    return "unknown";
}

inline std::optional<Source> parse_source(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
    if (s.empty() || s == "unknown") return Source::unknown;
    if (s == "title_keyword") return Source::title_keyword;
    if (s == "model_extracted") return Source::model_extracted;
    return std::nullopt;
}

struct KnowledgeElement {
    std::string surface;
    Domain domain = Domain::science;
    Source source = Source::unknown;

    bool operator==(const KnowledgeElement &) const = default;
};

struct PoolOptions {
    NormalizeOptions normalize;
    /// Surfaces shorter than this many Unicode scalar values are dropped.
    std::size_t min_length = 2;
    bool strict = false;
    std::size_t max_diagnostics = 1000;
};

struct Diagnostic {
    std::size_t line = 0;
    std::string message;
};

/// What happened to every input record during load_pool.
struct LoadReport {
    std::size_t lines = 0;
    std::size_t accepted = 0;
    std::size_t too_short = 0;
    std::size_t unknown_domain = 0;
    std::size_t duplicates = 0;
    /// Subset of duplicates whose domain differs from the kept element.
    std::size_t domain_conflicts = 0;
    std::size_t malformed = 0;
    std::vector<Diagnostic> diagnostics;

    std::size_t dropped() const noexcept {
        return too_short + unknown_domain + duplicates + malformed;
    }
};

/// Immutable, deduplicated element set. Element index is the pattern id used
/// by the matcher.
class KnowledgePool {
   public:
    KnowledgePool() = default;

    /// Builds a pool from already-normalized, unique surfaces.
    static KnowledgePool from_elements(std::vector<KnowledgeElement> elements) {
        KnowledgePool pool;
        pool.elements_ = std::move(elements);
        pool.index();
        return pool;
    }

    std::size_t total() const noexcept { return elements_.size(); }
    std::size_t domain_total(Domain d) const noexcept {
        return per_domain_total_[static_cast<std::size_t>(d)];
    }
    const std::array<std::size_t, kDomainCount> &per_domain_total() const noexcept {
        return per_domain_total_;
    }
    bool empty() const noexcept { return elements_.empty(); }

    std::span<const KnowledgeElement> elements() const noexcept { return elements_; }
    const KnowledgeElement &operator[](std::size_t i) const { return elements_[i]; }

    /// Element indexes in byte-lexicographic order of surface.
    std::span<const uint32_t> sorted_order() const noexcept { return sorted_; }

    std::optional<std::size_t> find(std::string_view surface) const {
        auto it = std::lower_bound(sorted_.begin(), sorted_.end(), surface,
                                   [this](uint32_t id, std::string_view s) {
                                       return std::string_view(elements_[id].surface) < s;
                                   });
        if (it == sorted_.end() || elements_[*it].surface != surface) return std::nullopt;
        return *it;
    }

    bool operator==(const KnowledgePool &other) const { return elements_ == other.elements_; }

   private:
    void index() {
        per_domain_total_.fill(0);
        for (const auto &e : elements_) ++per_domain_total_[static_cast<std::size_t>(e.domain)];
        sorted_.resize(elements_.size());
        for (std::size_t i = 0; i < sorted_.size(); ++i) sorted_[i] = static_cast<uint32_t>(i);
        std::sort(sorted_.begin(), sorted_.end(), [this](uint32_t a, uint32_t b) {
            return elements_[a].surface < elements_[b].surface;
        });
        for (std::size_t i = 1; i < sorted_.size(); ++i) {
            if (elements_[sorted_[i - 1]].surface == elements_[sorted_[i]].surface) {
                throw DataError("duplicate surface in pool: " + elements_[sorted_[i]].surface);
            }
        }
    }

    std::vector<KnowledgeElement> elements_;
    std::array<std::size_t, kDomainCount> per_domain_total_{};
    std::vector<uint32_t> sorted_;
};

/// Streaming loader for `surface<TAB>domain[<TAB>source]` records.
class PoolBuilder {
   public:
    explicit PoolBuilder(PoolOptions options = {}) : options_(options) {}

    void add_line(std::string_view line) {
        ++report_.lines;
        const std::size_t lineno = report_.lines;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) return;

        const auto tab1 = line.find('\t');
        if (tab1 == std::string_view::npos) {
            malformed(lineno, "expected surface<TAB>domain[<TAB>source]");
            return;
        }
        const std::string_view raw_surface = line.substr(0, tab1);
        std::string_view rest = line.substr(tab1 + 1);
        std::string_view raw_domain = rest;
        std::string_view raw_source;
        if (const auto tab2 = rest.find('\t'); tab2 != std::string_view::npos) {
            raw_domain = rest.substr(0, tab2);
            raw_source = rest.substr(tab2 + 1);
            if (raw_source.find('\t') != std::string_view::npos) {
                malformed(lineno, "too many fields");
                return;
            }
        }
        if (!unicode::is_valid_utf8(raw_surface)) {
            malformed(lineno, "surface is not valid UTF-8");
            return;
        }
        const auto source = parse_source(raw_source);
        if (!source) {
            malformed(lineno, "unknown source tag '" + std::string(raw_source) + "'");
            return;
        }
        const auto domain = parse_domain(raw_domain);
        if (!domain) {
            ++report_.unknown_domain;
            note(lineno, "unknown domain '" + std::string(raw_domain) + "'");
            return;
        }
        add(raw_surface, *domain, *source, lineno);
    }

    void add(std::string_view raw_surface, Domain domain, Source source = Source::unknown,
             std::size_t lineno = 0) {
        std::string surface = unicode::normalize(raw_surface, options_.normalize);
        if (unicode::codepoint_count(surface) < options_.min_length) {
            ++report_.too_short;
            return;
        }
        if (auto it = seen_.find(surface); it != seen_.end()) {
            ++report_.duplicates;
            const Domain kept = elements_[it->second].domain;
            if (kept != domain) {
                ++report_.domain_conflicts;
                note(lineno, "duplicate '" + surface + "' with conflicting domain " +
                                 std::string(domain_name(domain)) + " (kept " +
                                 std::string(domain_name(kept)) + ")");
            }
            return;
        }
        elements_.push_back({std::move(surface), domain, source});
        seen_.emplace(elements_.back().surface, static_cast<uint32_t>(elements_.size() - 1));
        ++report_.accepted;
    }

    const LoadReport &report() const noexcept { return report_; }

    /// Consumes the builder. Throws EmptyPoolError when nothing survived.
    KnowledgePool finish() && {
        if (elements_.empty()) {
            throw EmptyPoolError("knowledge pool is empty after filtering (" +
                                 std::to_string(report_.lines) + " lines read)");
        }
        seen_.clear();
        std::vector<KnowledgeElement> out(std::make_move_iterator(elements_.begin()),
                                          std::make_move_iterator(elements_.end()));
        elements_.clear();
        return KnowledgePool::from_elements(std::move(out));
    }

   private:
    void malformed(std::size_t lineno, const std::string &msg) {
        ++report_.malformed;
        if (options_.strict) {
            throw DataError("pool line " + std::to_string(lineno) + ": " + msg);
        }
        note(lineno, msg);
    }

    void note(std::size_t lineno, std::string msg) {
        if (report_.diagnostics.size() < options_.max_diagnostics) {
            report_.diagnostics.push_back({lineno, std::move(msg)});
        }
    }

    PoolOptions options_;
    LoadReport report_;
    // deque keeps surfaces at stable addresses for the string_view keys.
    std::deque<KnowledgeElement> elements_;
    std::unordered_map<std::string_view, uint32_t> seen_;
};

inline KnowledgePool load_pool(std::istream &in, const PoolOptions &options = {},
                               LoadReport *report = nullptr) {
    PoolBuilder builder(options);
    std::string line;
    while (std::getline(in, line)) builder.add_line(line);
    if (in.bad()) throw IoError("error reading pool stream");
    if (report) *report = builder.report();
    return std::move(builder).finish();
}

inline KnowledgePool load_pool_file(const std::string &path, const PoolOptions &options = {},
                                    LoadReport *report = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open pool file: " + path);
    return load_pool(in, options, report);
}

/// Writes the pool back out in the TSV load format.
inline void dump_pool(const KnowledgePool &pool, std::ostream &out) {
    for (const auto &e : pool.elements()) {
        out << e.surface << '\t' << domain_name(e.domain) << '\t' << source_name(e.source) << '\n';
    }
}

/// A pool restricted to one domain (or the whole pool when unrestricted).
class PoolView {
   public:
    explicit PoolView(const KnowledgePool &pool) : pool_(&pool) {}
    PoolView(const KnowledgePool &pool, Domain domain, bool empty = false)
        : pool_(&pool), domain_(domain), empty_(empty) {}

    const KnowledgePool &pool() const noexcept { return *pool_; }
    std::optional<Domain> domain() const noexcept { return domain_; }

    std::size_t total() const noexcept {
        if (empty_) return 0;
        return domain_ ? pool_->domain_total(*domain_) : pool_->total();
    }

    bool contains(std::size_t element) const noexcept {
        if (empty_) return false;
        return !domain_ || (*pool_)[element].domain == *domain_;
    }

    std::vector<std::size_t> element_indexes() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < pool_->total(); ++i) {
            if (contains(i)) out.push_back(i);
        }
        return out;
    }

    bool operator==(const PoolView &o) const noexcept {
        return pool_ == o.pool_ && domain_ == o.domain_ && empty_ == o.empty_;
    }

   private:
    const KnowledgePool *pool_;
    std::optional<Domain> domain_;
    bool empty_ = false;
};

inline PoolView restrict_to_domain(const PoolView &view, Domain m) {
    if (view.domain() == m) return view;
    if (view.domain()) return PoolView(view.pool(), m, true);
    return PoolView(view.pool(), m);
}

inline PoolView restrict_to_domain(const KnowledgePool &pool, Domain m) {
    return restrict_to_domain(PoolView(pool), m);
}

struct PoolStats {
    std::size_t total = 0;
    std::array<std::size_t, kDomainCount> per_domain{};
    std::array<std::size_t, 3> per_source{};
    /// surface length in Unicode scalar values -> element count
    std::map<std::size_t, std::size_t> length_histogram;
};

inline PoolStats pool_stats(const KnowledgePool &pool) {
    PoolStats s;
    s.total = pool.total();
    s.per_domain = pool.per_domain_total();
    for (const auto &e : pool.elements()) {
        ++s.per_source[static_cast<std::size_t>(e.source)];
        ++s.length_histogram[unicode::codepoint_count(e.surface)];
    }
    return s;
}

inline nlohmann::ordered_json to_json(const PoolStats &s) {
    nlohmann::ordered_json j;
    j["total"] = s.total;
    // nlohmann::json objects are key-sorted, giving domain-name order.
    nlohmann::json domains = nlohmann::json::object();
    for (Domain d : kAllDomains) {
        domains[std::string(domain_name(d))] = s.per_domain[static_cast<std::size_t>(d)];
    }
    j["domains"] = domains;
    nlohmann::json sources = nlohmann::json::object();
    for (std::size_t i = 0; i < s.per_source.size(); ++i) {
        sources[std::string(source_name(static_cast<Source>(i)))] = s.per_source[i];
    }
    j["sources"] = sources;
    nlohmann::ordered_json hist = nlohmann::ordered_json::array();
    for (const auto &[len, count] : s.length_histogram) hist.push_back({{"length", len}, {"count", count}});
    j["length_histogram"] = hist;
    return j;
}

inline nlohmann::ordered_json to_json(const LoadReport &r) {
    nlohmann::ordered_json j;
    j["lines"] = r.lines;
    j["accepted"] = r.accepted;
    j["too_short"] = r.too_short;
    j["unknown_domain"] = r.unknown_domain;
    j["duplicates"] = r.duplicates;
    j["domain_conflicts"] = r.domain_conflicts;
    j["malformed"] = r.malformed;
    return j;
}

}  // namespace hks
