#pragma once

// Knowledge density, coverage and the f(d) * g(c) scoring family.

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hks/error.hpp"
#include "hks/matcher.hpp"
#include "hks/pool.hpp"

namespace hks {

/// d = n_k / n_p. Throws DegenerateDocumentError when the document has no tokens.
inline double density(const KnowledgeProfile &p) {
    if (p.n_p == 0) throw DegenerateDocumentError("document '" + p.doc_id + "' has zero tokens");
    return static_cast<double>(p.n_k) / static_cast<double>(p.n_p);
}

/// c = n_distinct / N_k.
inline double coverage(const KnowledgeProfile &p, const KnowledgePool &pool) {
    if (pool.total() == 0) throw EmptyPoolError("coverage against an empty pool");
    return static_cast<double>(p.n_distinct) / static_cast<double>(pool.total());
}

/// d * ln(1 + c).
inline double hks_score(double d, double c) {
    if (!(d >= 0.0) || !(c >= 0.0) || c > 1.0) {
        throw ContractViolation("hks_score requires d >= 0 and c in [0, 1]");
    }
    return d * std::log1p(c);
}

struct DomainScore {
    double d = 0.0;
    double c = 0.0;
    double score = 0.0;
};

inline DomainScore domain_score(const KnowledgeProfile &p, const KnowledgePool &pool, Domain m) {
    const std::size_t total = pool.domain_total(m);
    if (total == 0) {
        throw EmptyPoolError("domain '" + std::string(domain_name(m)) + "' has no pool elements");
    }
    if (p.n_p == 0) throw DegenerateDocumentError("document '" + p.doc_id + "' has zero tokens");
    const auto &counts = p.domain(m);
    DomainScore s;
    s.d = static_cast<double>(counts.n) / static_cast<double>(p.n_p);
    s.c = static_cast<double>(counts.distinct) / static_cast<double>(total);
    s.score = hks_score(s.d, s.c);
    return s;
}

enum class ComponentFn { identity = 0, sin, ln1p };

inline double apply(ComponentFn fn, double x) {
    switch (fn) {
        case ComponentFn::identity: return x;
        case ComponentFn::sin: return std::sin(x);
        case ComponentFn::ln1p: return std::log1p(x);
    }
    return x;
}

inline std::string_view component_name(ComponentFn fn) {
    switch (fn) {
        case ComponentFn::identity: return "identity";
        case ComponentFn::sin: return "sin";
        case ComponentFn::ln1p: return "ln1p";
    }
    return "identity";
}

struct ScoreFunction {
    ComponentFn f = ComponentFn::identity;
    ComponentFn g = ComponentFn::ln1p;

    bool operator==(const ScoreFunction &) const = default;

    /// Human-readable formula, e.g. "d*ln(c+1)".
    std::string formula() const {
        auto term = [](ComponentFn fn, char var) {
            switch (fn) {
                case ComponentFn::identity: return std::string(1, var);
                case ComponentFn::sin: return "sin(" + std::string(1, var) + ")";
                case ComponentFn::ln1p: return "ln(" + std::string(1, var) + "+1)";
            }
            return std::string(1, var);
        };
        return term(f, 'd') + "*" + term(g, 'c');
    }
};

/// f(d) * g(c); d is passed through unclamped even when it exceeds 1.
inline double eval_score_function(const ScoreFunction &sf, double d, double c) {
    return apply(sf.f, d) * apply(sf.g, c);
}

/// The 3 x 3 candidate family, f-major.
inline std::array<ScoreFunction, 9> all_score_functions() {
    std::array<ScoreFunction, 9> out{};
    std::size_t i = 0;
    for (auto f : {ComponentFn::identity, ComponentFn::ln1p, ComponentFn::sin}) {
        for (auto g : {ComponentFn::identity, ComponentFn::ln1p, ComponentFn::sin}) out[i++] = {f, g};
    }
    return out;
}

struct DomainScoreRecord {
    std::size_t n = 0;
    std::size_t distinct = 0;
    std::size_t total = 0;  // N_km
    double d = 0.0;
    double c = 0.0;
    double score = 0.0;
};

/// One scored document, the unit persisted between pipeline stages.
/// d and c stay recoverable exactly as n_k / n_p and n_distinct / pool_total.
struct ScoreRecord {
    std::string doc_id;
    std::size_t n_p = 0;
    std::size_t n_k = 0;
    std::size_t n_distinct = 0;
    std::size_t pool_total = 0;
    double d = 0.0;
    double c = 0.0;
    double hks = 0.0;
    std::array<std::optional<DomainScoreRecord>, kDomainCount> domains{};
    std::map<std::string, std::string> meta;

    const std::optional<DomainScoreRecord> &domain(Domain m) const {
        return domains[static_cast<std::size_t>(m)];
    }
};

inline ScoreRecord score_profile(const KnowledgeProfile &p, const KnowledgePool &pool,
                                 const std::vector<Domain> &domains = {}) {
    ScoreRecord r;
    r.doc_id = p.doc_id;
    r.n_p = p.n_p;
    r.n_k = p.n_k;
    r.n_distinct = p.n_distinct;
    r.pool_total = pool.total();
    r.d = density(p);
    r.c = coverage(p, pool);
    r.hks = hks_score(r.d, r.c);
    for (Domain m : domains) {
        const DomainScore s = domain_score(p, pool, m);
        const auto &counts = p.domain(m);
        r.domains[static_cast<std::size_t>(m)] =
            DomainScoreRecord{counts.n, counts.distinct, pool.domain_total(m), s.d, s.c, s.score};
    }
    return r;
}

/// Value of a named score column: hks, d, c, a domain name (its score),
/// or <domain>.d / <domain>.c.
inline std::optional<double> field_value(const ScoreRecord &r, std::string_view field) {
    if (field == "hks") return r.hks;
    if (field == "d") return r.d;
    if (field == "c") return r.c;
    std::string_view name = field;
    std::string_view part = "score";
    if (const auto dot = field.find('.'); dot != std::string_view::npos) {
        name = field.substr(0, dot);
        part = field.substr(dot + 1);
    }
    const auto m = parse_domain(name);
    if (!m) return std::nullopt;
    const auto &ds = r.domain(*m);
    if (!ds) return std::nullopt;
    if (part == "score") return ds->score;
    if (part == "d") return ds->d;
    if (part == "c") return ds->c;
    return std::nullopt;
}

inline std::vector<std::string> available_fields(const ScoreRecord &r) {
    std::vector<std::string> out{"hks", "d", "c"};
    for (Domain m : kAllDomains) {
        if (r.domain(m)) {
            const std::string n(domain_name(m));
            out.insert(out.end(), {n, n + ".d", n + ".c"});
        }
    }
    return out;
}

inline nlohmann::ordered_json to_json(const ScoreRecord &r) {
    nlohmann::ordered_json j;
    j["id"] = r.doc_id;
    j["n_p"] = r.n_p;
    j["n_k"] = r.n_k;
    j["n_distinct"] = r.n_distinct;
    j["N_k"] = r.pool_total;
    j["d"] = r.d;
    j["c"] = r.c;
    j["hks"] = r.hks;
    if (r.d > 1.0) j["d_over_one"] = true;
    nlohmann::ordered_json domains = nlohmann::ordered_json::object();
    for (Domain m : kAllDomains) {
        if (const auto &ds = r.domain(m)) {
            domains[std::string(domain_name(m))] = {{"n_km", ds->n},   {"n_distinct", ds->distinct},
                                                    {"N_km", ds->total}, {"d", ds->d},
                                                    {"c", ds->c},       {"score", ds->score}};
        }
    }
    j["domains"] = domains;
    if (!r.meta.empty()) j["meta"] = r.meta;
    return j;
}

inline ScoreRecord record_from_json(const nlohmann::json &j) {
    ScoreRecord r;
    r.doc_id = j.at("id").get<std::string>();
    r.n_p = j.at("n_p").get<std::size_t>();
    r.n_k = j.value("n_k", std::size_t{0});
    r.n_distinct = j.value("n_distinct", std::size_t{0});
    r.pool_total = j.value("N_k", std::size_t{0});
    r.d = j.at("d").get<double>();
    r.c = j.at("c").get<double>();
    r.hks = j.at("hks").get<double>();
    if (auto it = j.find("domains"); it != j.end()) {
        for (auto &[name, v] : it->items()) {
            if (auto m = parse_domain(name)) {
                r.domains[static_cast<std::size_t>(*m)] = DomainScoreRecord{
                    v.value("n_km", std::size_t{0}), v.value("n_distinct", std::size_t{0}),
                    v.value("N_km", std::size_t{0}), v.at("d").get<double>(), v.at("c").get<double>(),
                    v.at("score").get<double>()};
            }
        }
    }
    if (auto it = j.find("meta"); it != j.end() && it->is_object()) {
        for (auto &[k, v] : it->items()) r.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    return r;
}

}  // namespace hks
