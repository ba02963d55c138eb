#pragma once

// Corpus diagnostics: per-group score histograms, Spearman rank correlation,
// and ranking candidate scoring functions against pairwise preferences.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hks/error.hpp"
#include "hks/metrics.hpp"

namespace hks {

struct BucketHistogram {
    std::string metric;
    std::vector<double> edges;  // n_buckets + 1, strictly increasing
    std::map<std::string, std::vector<std::size_t>> counts;
    std::size_t unknown_group = 0;  // records lacking the group key
};

/// Equal-width buckets between the global min and max of `metric`, counted
/// per value of meta[group_by]. Records missing the key go to "unknown".
inline BucketHistogram bucket_distribution(std::span<const ScoreRecord> records,
                                           const std::string &metric, const std::string &group_by,
                                           std::size_t n_buckets) {
    if (n_buckets == 0) throw ContractViolation("n_buckets must be >= 1");
    BucketHistogram h;
    h.metric = metric;
    std::vector<double> values;
    values.reserve(records.size());
    for (const auto &r : records) {
        const auto v = field_value(r, metric);
        if (!v) throw UsageError("metric '" + metric + "' missing for record '" + r.doc_id + "'");
        values.push_back(*v);
    }
    double lo = 0.0, hi = 1.0;
    if (!values.empty()) {
        const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
        lo = *mn;
        hi = *mx > *mn ? *mx : *mn + 1.0;
    }
    const double width = (hi - lo) / static_cast<double>(n_buckets);
    h.edges.resize(n_buckets + 1);
    for (std::size_t i = 0; i <= n_buckets; ++i) h.edges[i] = lo + width * static_cast<double>(i);
    h.edges.back() = hi;
    for (std::size_t i = 0; i < records.size(); ++i) {
        std::string group = "unknown";
        if (auto it = records[i].meta.find(group_by); it != records[i].meta.end()) {
            group = it->second;
        } else {
            ++h.unknown_group;
        }
        auto &row = h.counts[group];
        if (row.empty()) row.assign(n_buckets, 0);
        auto b = static_cast<std::size_t>(std::floor((values[i] - lo) / width));
        ++row[std::min(b, n_buckets - 1)];
    }
    return h;
}

inline void write_csv(const BucketHistogram &h, std::ostream &out) {
    out << "group,bucket,lower,upper,count\n";
    const auto old = out.precision(17);
    for (const auto &[group, row] : h.counts) {
        for (std::size_t b = 0; b < row.size(); ++b) {
            out << group << ',' << b << ',' << h.edges[b] << ',' << h.edges[b + 1] << ',' << row[b]
                << '\n';
        }
    }
    out.precision(old);
}

/// Fractional (average) ranks, 1-based.
inline std::vector<double> average_ranks(std::span<const double> xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(xs.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i + 1;
        while (j < order.size() && xs[order[j]] == xs[order[i]]) ++j;
        const double r = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
        i = j;
    }
    return ranks;
}

/// Spearman's rho with average ranks for ties. Tie-free inputs use the
/// closed form 1 - 6 sum(d^2) / (n (n^2 - 1)) evaluated in exact integers.
inline double spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw DataError("spearman: length mismatch");
    if (xs.size() < 2) throw DataError("spearman: need at least 2 observations");
    const auto rx = average_ranks(xs);
    const auto ry = average_ranks(ys);
    const auto n = static_cast<long double>(xs.size());
    const long double mean = (n + 1.0L) / 2.0L;
    long double sxx = 0, syy = 0, sxy = 0;
    bool integral = true;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        const long double a = rx[i] - mean, b = ry[i] - mean;
        sxx += a * a;
        syy += b * b;
        sxy += a * b;
        integral = integral && rx[i] == std::floor(rx[i]) && ry[i] == std::floor(ry[i]);
    }
    if (sxx == 0 || syy == 0) throw DataError("spearman: constant input has no rank variance");

    // Integral ranks with distinct values on both sides means no ties.
    if (integral) {
        std::vector<bool> seen_x(xs.size() + 1), seen_y(xs.size() + 1);
        bool tie_free = true;
        for (std::size_t i = 0; i < rx.size() && tie_free; ++i) {
            const auto a = static_cast<std::size_t>(rx[i]), b = static_cast<std::size_t>(ry[i]);
            tie_free = !seen_x[a] && !seen_y[b];
            seen_x[a] = seen_y[b] = true;
        }
        if (tie_free) {
            __int128 sum_sq = 0;
            for (std::size_t i = 0; i < rx.size(); ++i) {
                const auto diff = static_cast<__int128>(rx[i]) - static_cast<__int128>(ry[i]);
                sum_sq += diff * diff;
            }
            const auto m = static_cast<__int128>(xs.size());
            const __int128 denom = m * (m * m - 1);
            return static_cast<double>(denom - 6 * sum_sq) / static_cast<double>(denom);
        }
    }
    return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

/// Two texts described by their (d, c) and the graded preference for b:
/// 0 = a preferred, 1 = b preferred, fractions average several annotators.
struct PreferencePair {
    double d_a = 0.0, c_a = 0.0;
    double d_b = 0.0, c_b = 0.0;
    double label = 0.0;
};

enum class NormalizationScope { global, per_pair };

/// Per-pair softmax probability of b under `sf` after min-max score
/// normalization (over all texts, or within each pair).
inline std::vector<double> pair_probabilities(std::span<const PreferencePair> pairs,
                                              const ScoreFunction &sf,
                                              NormalizationScope scope = NormalizationScope::global) {
    std::vector<double> sa(pairs.size()), sb(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        sa[i] = eval_score_function(sf, pairs[i].d_a, pairs[i].c_a);
        sb[i] = eval_score_function(sf, pairs[i].d_b, pairs[i].c_b);
    }
    auto normalize = [](double x, double lo, double hi) { return hi > lo ? (x - lo) / (hi - lo) : 0.0; };
    if (scope == NormalizationScope::global && !pairs.empty()) {
        double lo = std::min(*std::min_element(sa.begin(), sa.end()), *std::min_element(sb.begin(), sb.end()));
        double hi = std::max(*std::max_element(sa.begin(), sa.end()), *std::max_element(sb.begin(), sb.end()));
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            sa[i] = normalize(sa[i], lo, hi);
            sb[i] = normalize(sb[i], lo, hi);
        }
    } else {
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const double lo = std::min(sa[i], sb[i]), hi = std::max(sa[i], sb[i]);
            sa[i] = normalize(sa[i], lo, hi);
            sb[i] = normalize(sb[i], lo, hi);
        }
    }
    std::vector<double> p(pairs.size());
    // softmax over two entries: 1 / (1 + exp(a - b))
    for (std::size_t i = 0; i < pairs.size(); ++i) p[i] = 1.0 / (1.0 + std::exp(sa[i] - sb[i]));
    return p;
}

inline double pairwise_function_correlation(std::span<const PreferencePair> pairs,
                                            const ScoreFunction &sf,
                                            NormalizationScope scope = NormalizationScope::global) {
    if (pairs.size() < 2) throw DataError("function correlation needs at least 2 pairs");
    std::vector<double> labels(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (!(pairs[i].label >= 0.0 && pairs[i].label <= 1.0)) {
            throw DataError("preference label outside [0, 1] at pair " + std::to_string(i));
        }
        labels[i] = pairs[i].label;
    }
    if (std::all_of(labels.begin(), labels.end(), [&](double l) { return l == labels[0]; })) {
        throw DataError("all preference labels are equal; correlation undefined");
    }
    const auto p = pair_probabilities(pairs, sf, scope);
    return spearman(p, labels);
}

struct FunctionSearchRow {
    ScoreFunction function;
    double rho = 0.0;
};

/// All nine f(d) * g(c) candidates ranked by rho, descending; ties keep the
/// candidate family order.
inline std::vector<FunctionSearchRow> function_search(std::span<const PreferencePair> pairs,
                                                      NormalizationScope scope = NormalizationScope::global) {
    std::vector<FunctionSearchRow> rows;
    for (const auto &sf : all_score_functions()) {
        rows.push_back({sf, pairwise_function_correlation(pairs, sf, scope)});
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto &a, const auto &b) { return a.rho > b.rho; });
    return rows;
}

inline void write_csv(std::span<const FunctionSearchRow> rows, std::ostream &out) {
    out << "rank,formula,f,g,rho\n";
    const auto old = out.precision(17);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto &r = rows[i];
        out << i + 1 << ',' << r.function.formula() << ',' << component_name(r.function.f) << ','
            << component_name(r.function.g) << ',' << r.rho << '\n';
    }
    out.precision(old);
}

/// Accepts {"a": {"d":..,"c":..}, "b": {...}, "label": x}.
inline PreferencePair pair_from_json(const nlohmann::json &j) {
    PreferencePair p;
    p.d_a = j.at("a").at("d").get<double>();
    p.c_a = j.at("a").at("c").get<double>();
    p.d_b = j.at("b").at("d").get<double>();
    p.c_b = j.at("b").at("c").get<double>();
    p.label = j.at("label").get<double>();
    return p;
}

/// Pairwise Spearman matrix over named, equally long columns.
inline nlohmann::ordered_json correlation_matrix(const std::vector<std::string> &names,
                                                 const std::vector<std::vector<double>> &columns) {
    nlohmann::ordered_json j;
    j["columns"] = names;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t a = 0; a < columns.size(); ++a) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (std::size_t b = 0; b < columns.size(); ++b) {
            row.push_back(spearman(columns[a], columns[b]));
        }
        rows.push_back(row);
    }
    j["spearman"] = rows;
    j["n"] = columns.empty() ? 0 : columns[0].size();
    return j;
}

}  // namespace hks
