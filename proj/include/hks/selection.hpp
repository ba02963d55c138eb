#pragma once

// Data selection over scored records: budgeted top-k, Gumbel top-k sampling
// from the tempered softmax, and threshold split + stratified mixtures.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hks/error.hpp"
#include "hks/metrics.hpp"
#include "hks/random.hpp"

namespace hks {

enum class Strategy { topk, gumbel_sample, threshold_mix };
enum class BudgetUnit { tokens, documents };

/// Minimal view of a scored record used by every selection routine.
struct Candidate {
    std::string id;
    double score = 0.0;
    std::size_t n_p = 0;

    bool operator==(const Candidate &) const = default;
};

struct SelectionSpec {
    Strategy strategy = Strategy::topk;
    std::size_t budget = 0;
    BudgetUnit unit = BudgetUnit::tokens;
    double tau = 2.0;
    double alpha = 1.0;
    uint64_t seed = 0;
    std::string score_field = "hks";
    /// Min-max normalize scores to [0, 1] before the softmax temperature.
    bool normalize = true;
    /// Token budget of the high stratum for threshold_mix.
    std::size_t split_budget = 0;

    void validate() const {
        if (!(tau > 0.0) || !std::isfinite(tau)) throw ContractViolation("tau must be > 0");
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractViolation("alpha must be in [0, 1]");
    }
};

struct SelectionResult {
    std::vector<std::string> selected_ids;
    std::size_t total_tokens = 0;
    std::optional<double> threshold;
    uint64_t seed_used = 0;
    /// Set when the budget could not be met because the corpus ran out.
    bool budget_exceeds_corpus = false;
    std::optional<double> requested_alpha;
    std::optional<double> realized_alpha;
    std::size_t high_tokens = 0;
    std::size_t low_tokens = 0;
    /// For mixtures: selected_ids[0, high_selected) came from the high stratum.
    std::size_t high_selected = 0;
};

/// Pulls (id, score on `field`, n_p) out of score records.
inline std::vector<Candidate> candidates(std::span<const ScoreRecord> records,
                                         const std::string &field) {
    std::vector<Candidate> out;
    out.reserve(records.size());
    for (const auto &r : records) {
        const auto v = field_value(r, field);
        if (!v) {
            std::string names;
            for (const auto &f : available_fields(r)) names += (names.empty() ? "" : ", ") + f;
            throw UsageError("score field '" + field + "' missing for record '" + r.doc_id +
                             "'; available: " + names);
        }
        out.push_back({r.doc_id, *v, r.n_p});
    }
    return out;
}

namespace detail {

/// Indexes sorted by key descending, ties broken by id ascending.
template <class Key>
std::vector<std::size_t> ranked(std::span<const Candidate> items, Key key) {
    std::vector<double> keys(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) keys[i] = key(i);
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (keys[a] != keys[b]) return keys[a] > keys[b];
        return items[a].id < items[b].id;
    });
    return order;
}

/// Takes items in `order` while the budget is not yet met. The item that
/// crosses a token budget is kept whole.
inline SelectionResult take_budget(std::span<const Candidate> items,
                                   std::span<const std::size_t> order, std::size_t budget,
                                   BudgetUnit unit) {
    SelectionResult r;
    std::size_t docs = 0;
    for (std::size_t idx : order) {
        const std::size_t used = unit == BudgetUnit::tokens ? r.total_tokens : docs;
        if (used >= budget) break;
        r.selected_ids.push_back(items[idx].id);
        r.total_tokens += items[idx].n_p;
        ++docs;
        const double s = items[idx].score;
        if (!r.threshold || s < *r.threshold) r.threshold = s;
    }
    const std::size_t used = unit == BudgetUnit::tokens ? r.total_tokens : docs;
    r.budget_exceeds_corpus = used < budget;
    return r;
}

inline std::vector<double> minmax_normalized(std::span<const Candidate> items) {
    std::vector<double> out(items.size(), 0.0);
    if (items.empty()) return out;
    auto [lo, hi] = std::minmax_element(items.begin(), items.end(),
                                        [](const auto &a, const auto &b) { return a.score < b.score; });
    const double range = hi->score - lo->score;
    if (range > 0.0) {
        for (std::size_t i = 0; i < items.size(); ++i) out[i] = (items[i].score - lo->score) / range;
    }
    return out;
}

}  // namespace detail

inline SelectionResult top_k(std::span<const Candidate> items, const SelectionSpec &spec) {
    const auto order = detail::ranked(items, [&](std::size_t i) { return items[i].score; });
    SelectionResult r = detail::take_budget(items, order, spec.budget, spec.unit);
    r.seed_used = spec.seed;
    return r;
}

/// Gumbel keys score/tau + G for each item (scores min-max normalized first
/// when spec.normalize).
inline std::vector<double> gumbel_keys(std::span<const Candidate> items, const SelectionSpec &spec) {
    spec.validate();
    std::vector<double> scores;
    if (spec.normalize) {
        scores = detail::minmax_normalized(items);
    } else {
        scores.reserve(items.size());
        for (const auto &c : items) scores.push_back(c.score);
    }
    std::vector<double> keys(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        keys[i] = scores[i] / spec.tau + random::keyed_gumbel(spec.seed, items[i].id);
    }
    return keys;
}

/// Sampling without replacement from softmax(score / tau): take items in
/// descending Gumbel-perturbed key order until the budget is met.
inline SelectionResult gumbel_topk_sample(std::span<const Candidate> items,
                                          const SelectionSpec &spec) {
    const auto keys = gumbel_keys(items, spec);
    const auto order = detail::ranked(items, [&](std::size_t i) { return keys[i]; });
    SelectionResult r = detail::take_budget(items, order, spec.budget, spec.unit);
    r.seed_used = spec.seed;
    return r;
}

struct SplitResult {
    std::vector<Candidate> high;
    std::vector<Candidate> low;
    std::optional<double> threshold;
    std::size_t high_tokens = 0;
    std::size_t low_tokens = 0;
    bool budget_exceeds_corpus = false;
};

/// High stratum: every record scoring at least the lowest score inside the
/// token-budgeted top-k prefix. Low stratum: the rest.
inline SplitResult threshold_split(std::span<const Candidate> items, std::size_t token_budget) {
    SelectionSpec spec;
    spec.budget = token_budget;
    const SelectionResult prefix = top_k(items, spec);
    SplitResult s;
    s.threshold = prefix.threshold;
    s.budget_exceeds_corpus = prefix.budget_exceeds_corpus;
    for (const auto &c : items) {
        const bool high = s.threshold && c.score >= *s.threshold;
        (high ? s.high : s.low).push_back(c);
        (high ? s.high_tokens : s.low_tokens) += c.n_p;
    }
    return s;
}

/// Uniformly samples about alpha * budget tokens from `high` and the rest
/// from `low` (whole documents, greedy until each target is reached).
inline SelectionResult mix(std::span<const Candidate> high, std::span<const Candidate> low,
                           double alpha, std::size_t total_token_budget, uint64_t seed) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractViolation("alpha must be in [0, 1]");
    const auto high_target =
        static_cast<std::size_t>(std::llround(alpha * static_cast<double>(total_token_budget)));
    const std::size_t low_target = total_token_budget - std::min(high_target, total_token_budget);

    SelectionResult r;
    r.seed_used = seed;
    r.requested_alpha = alpha;
    auto draw = [&](std::span<const Candidate> stratum, std::size_t target, const char *name,
                    uint64_t stream) -> std::size_t {
        std::size_t available = 0;
        for (const auto &c : stratum) available += c.n_p;
        if (available < target) {
            throw StratumExhaustedError(name, std::string(name) + " stratum has " +
                                                  std::to_string(available) + " tokens, " +
                                                  std::to_string(target) + " requested");
        }
        const auto order = detail::ranked(stratum, [&](std::size_t i) {
            return random::keyed_uniform(seed, stratum[i].id, stream);
        });
        const SelectionResult part = detail::take_budget(stratum, order, target, BudgetUnit::tokens);
        r.selected_ids.insert(r.selected_ids.end(), part.selected_ids.begin(), part.selected_ids.end());
        return part.total_tokens;
    };
    r.high_tokens = draw(high, high_target, "high", 1);
    r.high_selected = r.selected_ids.size();
    r.low_tokens = draw(low, low_target, "low", 2);
    r.total_tokens = r.high_tokens + r.low_tokens;
    if (r.total_tokens > 0) {
        r.realized_alpha = static_cast<double>(r.high_tokens) / static_cast<double>(r.total_tokens);
    }
    return r;
}

/// Dispatches on spec.strategy. threshold_mix splits at spec.split_budget
/// tokens and mixes spec.budget tokens at spec.alpha.
inline SelectionResult select(std::span<const Candidate> items, const SelectionSpec &spec) {
    spec.validate();
    switch (spec.strategy) {
        case Strategy::topk: return top_k(items, spec);
        case Strategy::gumbel_sample: return gumbel_topk_sample(items, spec);
        case Strategy::threshold_mix: {
            const SplitResult split = threshold_split(items, spec.split_budget);
            SelectionResult r = mix(split.high, split.low, spec.alpha, spec.budget, spec.seed);
            r.threshold = split.threshold;
            return r;
        }
    }
    return {};
}

inline std::string_view strategy_name(Strategy s) {
    switch (s) {
        case Strategy::topk: return "topk";
        case Strategy::gumbel_sample: return "sample";
        case Strategy::threshold_mix: return "mix";
    }
    return "topk";
}

inline nlohmann::ordered_json summary_json(const SelectionResult &r, const SelectionSpec &spec) {
    nlohmann::ordered_json j;
    j["strategy"] = strategy_name(spec.strategy);
    j["score_field"] = spec.score_field;
    j["budget"] = spec.budget;
    j["budget_unit"] = spec.unit == BudgetUnit::tokens ? "tokens" : "documents";
    if (spec.strategy == Strategy::gumbel_sample) {
        j["tau"] = spec.tau;
        j["normalize"] = spec.normalize;
    }
    j["seed"] = r.seed_used;
    j["selected"] = r.selected_ids.size();
    j["total_tokens"] = r.total_tokens;
    j["threshold"] = r.threshold ? nlohmann::ordered_json(*r.threshold) : nlohmann::ordered_json();
    if (r.requested_alpha) {
        j["split_budget"] = spec.split_budget;
        j["requested_alpha"] = *r.requested_alpha;
        j["realized_alpha"] = r.realized_alpha ? nlohmann::ordered_json(*r.realized_alpha)
                                               : nlohmann::ordered_json();
        j["high_tokens"] = r.high_tokens;
        j["low_tokens"] = r.low_tokens;
    }
    j["budget_exceeds_corpus"] = r.budget_exceeds_corpus;
    return j;
}

}  // namespace hks
