#pragma once

// End-to-end drivers behind the `hks` command line: sharded corpus scoring
// with resumable outputs, selection, splitting and analyses over score files.

#include <sys/resource.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "hks/analysis.hpp"
#include "hks/automaton.hpp"
#include "hks/error.hpp"
#include "hks/io.hpp"
#include "hks/matcher.hpp"
#include "hks/metrics.hpp"
#include "hks/pool.hpp"
#include "hks/random.hpp"
#include "hks/selection.hpp"

namespace hks {

inline constexpr std::string_view kVersion = "1.0.0";

struct RunConfig {
    std::string pool_path;
    std::string corpus_glob;
    std::string output_dir;
    std::size_t workers = 1;
    NormalizeOptions normalize;
    bool word_boundaries = true;
    OverlapMode overlap = OverlapMode::all;
    std::vector<Domain> domains;
    /// Score every domain that has pool elements (replaces `domains`).
    bool all_domains = false;
    bool strict = false;
    bool emit_profiles = false;
    uint64_t seed = 0;
    std::size_t chunk_lines = 4096;

    void validate() const {
        if (workers < 1) throw UsageError("worker count must be >= 1");
        if (pool_path.empty()) throw UsageError("pool path is required");
        if (corpus_glob.empty()) throw UsageError("corpus glob is required");
        if (output_dir.empty()) throw UsageError("output directory is required");
        if (chunk_lines < 1) throw UsageError("chunk size must be >= 1");
    }
};

/// Settings that influence output bytes. Paths and worker count are excluded.
inline nlohmann::ordered_json config_json(const RunConfig &c) {
    nlohmann::ordered_json j;
    j["nfc"] = c.normalize.nfc;
    j["casefold"] = c.normalize.casefold;
    j["collapse_whitespace"] = c.normalize.collapse_whitespace;
    j["word_boundaries"] = c.word_boundaries;
    j["overlap"] = c.overlap == OverlapMode::all ? "all" : "leftmost-longest";
    nlohmann::ordered_json domains = nlohmann::ordered_json::array();
    for (Domain d : c.domains) domains.push_back(domain_name(d));
    j["domains"] = domains;
    j["strict"] = c.strict;
    j["profiles"] = c.emit_profiles;
    j["seed"] = c.seed;
    return j;
}

struct ShardSummary {
    std::string input;
    std::string input_sha256;
    std::string output;
    std::string output_sha256;
    std::string profiles_sha256;
    std::size_t records = 0;
    std::size_t degenerate = 0;
    std::size_t malformed = 0;
    std::size_t repaired_utf8 = 0;
    std::size_t input_bytes = 0;
    bool reused = false;
};

struct RunSummary {
    std::vector<ShardSummary> shards;
    std::size_t documents = 0;
    std::size_t degenerate = 0;
    std::size_t malformed = 0;
    std::size_t duplicate_ids = 0;
    std::size_t regenerated = 0;
    double seconds = 0.0;
    std::size_t bytes_processed = 0;
    std::string pool_sha256;
    std::string config_sha256;
    nlohmann::ordered_json manifest;
    nlohmann::ordered_json stats;
};

inline std::size_t max_rss_bytes() {
    rusage ru{};
    getrusage(RUSAGE_SELF, &ru);
    return static_cast<std::size_t>(ru.ru_maxrss) * 1024;
}

inline std::string json_line(const nlohmann::ordered_json &j) {
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

namespace detail {

enum class LineStatus { blank, ok, malformed, degenerate };

struct LineResult {
    LineStatus status = LineStatus::blank;
    bool repaired = false;
    std::string id;
    std::string score_line;
    std::string profile_line;
    std::string message;
};

inline LineResult process_line(std::string line, Annotator &annotator, const KnowledgePool &pool,
                               const RunConfig &cfg) {
    LineResult r;
    if (line.find_first_not_of(" \t\r") == std::string::npos) return r;
    r.status = LineStatus::malformed;
    if (!unicode::is_valid_utf8(line)) {
        if (cfg.strict) {
            r.message = "invalid UTF-8";
            return r;
        }
        io::repair_utf8(line);
        r.repaired = true;
    }
    const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        r.message = "not a JSON object";
        return r;
    }
    const auto id = j.find("id");
    if (id == j.end() || !id->is_string() || id->get_ref<const std::string &>().empty()) {
        r.message = "missing or empty string field 'id'";
        return r;
    }
    const auto text = j.find("text");
    if (text == j.end() || !text->is_string()) {
        r.message = "missing string field 'text'";
        return r;
    }
    r.id = id->get<std::string>();
    std::map<std::string, std::string> meta;
    if (auto m = j.find("meta"); m != j.end() && m->is_object()) {
        for (auto &[k, v] : m->items()) meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }

    KnowledgeProfile profile = annotator.annotate(r.id, text->get_ref<const std::string &>());
    if (profile.n_p == 0) {
        r.status = LineStatus::degenerate;
        r.message = "document '" + r.id + "' has zero tokens";
        return r;
    }
    ScoreRecord record = score_profile(profile, pool, cfg.domains);
    record.meta = std::move(meta);
    r.score_line = json_line(to_json(record));
    if (cfg.emit_profiles) r.profile_line = json_line(to_json(profile));
    r.status = LineStatus::ok;
    return r;
}

inline std::string shard_name(std::size_t index, std::string_view suffix) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "shard-%05zu", index);
    return std::string(buf) + std::string(suffix);
}

inline void collect_id_hashes(const std::string &scores_path, std::vector<uint64_t> &out) {
    io::LineReader reader(scores_path);
    std::string line;
    while (reader.next(line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_object() && j.contains("id")) out.push_back(random::fnv1a64(j["id"].get<std::string>()));
    }
}

}  // namespace detail

/// Scores every document of every corpus shard into <output>/shard-NNNNN.scores.jsonl
/// and writes manifest.json (deterministic) plus run_stats.json (timings).
/// Shards whose outputs and sidecar still match the inputs and configuration
/// are reused instead of recomputed.
inline RunSummary run_score(RunConfig cfg, std::ostream *log = nullptr) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    auto warn = [&](const std::string &msg) {
        if (log) *log << "warning: " << msg << '\n';
    };

    const auto inputs = io::expand_glob(cfg.corpus_glob);
    if (inputs.empty()) throw IoError("corpus glob matched no files: " + cfg.corpus_glob);
    for (const auto &p : inputs) {
        if (!std::filesystem::is_regular_file(p)) throw IoError("corpus input is not a file: " + p);
    }

    PoolOptions pool_options;
    pool_options.normalize = cfg.normalize;
    pool_options.strict = cfg.strict;
    LoadReport load_report;
    const KnowledgePool pool = load_pool_file(cfg.pool_path, pool_options, &load_report);
    const double pool_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (load_report.dropped() > 0) {
        warn("pool: dropped " + std::to_string(load_report.dropped()) + " of " +
             std::to_string(load_report.lines) + " records");
    }
    if (cfg.all_domains) {
        cfg.domains.clear();
        for (Domain m : kAllDomains) {
            if (pool.domain_total(m) > 0) cfg.domains.push_back(m);
        }
    }
    for (Domain m : cfg.domains) {
        if (pool.domain_total(m) == 0) {
            throw DataError("requested domain '" + std::string(domain_name(m)) +
                            "' has no pool elements");
        }
    }
    std::ostringstream pool_dump;
    dump_pool(pool, pool_dump);

    RunSummary summary;
    summary.pool_sha256 = io::sha256_hex(pool_dump.str());
    const auto cfg_json = config_json(cfg);
    summary.config_sha256 = io::sha256_hex(cfg_json.dump());

    const auto t_build = std::chrono::steady_clock::now();
    const Automaton automaton(pool, AutomatonOptions{cfg.word_boundaries});
    const double build_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_build).count();

    std::filesystem::create_directories(cfg.output_dir);
    const std::filesystem::path out_dir(cfg.output_dir);

    std::vector<Annotator> annotators;
    annotators.reserve(cfg.workers);
    for (std::size_t w = 0; w < cfg.workers; ++w) {
        annotators.emplace_back(automaton, pool, cfg.normalize, MatchOptions{cfg.overlap});
    }

    std::vector<uint64_t> id_hashes;
    std::size_t logged = 0;
    const auto t_corpus = std::chrono::steady_clock::now();
    for (std::size_t index = 0; index < inputs.size(); ++index) {
        const std::string &input = inputs[index];
        ShardSummary shard;
        shard.input = std::filesystem::path(input).filename().string();
        shard.input_sha256 = io::sha256_file(input);
        shard.input_bytes = std::filesystem::file_size(input);
        shard.output = detail::shard_name(index, ".scores.jsonl");
        const auto scores_path = (out_dir / shard.output).string();
        const auto profiles_path = (out_dir / detail::shard_name(index, ".profiles.jsonl")).string();
        const auto meta_path = (out_dir / detail::shard_name(index, ".meta.json")).string();

        // Resume: reuse a shard only if everything it was derived from matches.
        if (std::filesystem::exists(scores_path) && std::filesystem::exists(meta_path) &&
            (!cfg.emit_profiles || std::filesystem::exists(profiles_path))) {
            const auto meta = nlohmann::json::parse(io::read_file(meta_path), nullptr, false);
            if (meta.is_object() && meta.value("config_sha256", "") == summary.config_sha256 &&
                meta.value("pool_sha256", "") == summary.pool_sha256 &&
                meta.value("input_sha256", "") == shard.input_sha256 &&
                meta.value("output_sha256", "") == io::sha256_file(scores_path) &&
                (!cfg.emit_profiles ||
                 meta.value("profiles_sha256", "") == io::sha256_file(profiles_path))) {
                shard.output_sha256 = meta["output_sha256"].get<std::string>();
                shard.profiles_sha256 = meta.value("profiles_sha256", "");
                shard.records = meta.value("records", std::size_t{0});
                shard.degenerate = meta.value("degenerate", std::size_t{0});
                shard.malformed = meta.value("malformed", std::size_t{0});
                shard.repaired_utf8 = meta.value("repaired_utf8", std::size_t{0});
                shard.reused = true;
                detail::collect_id_hashes(scores_path, id_hashes);
                summary.shards.push_back(shard);
                continue;
            }
        }

        io::LineReader reader(input);
        std::string scores_out, profiles_out;
        std::vector<std::string> lines;
        std::vector<detail::LineResult> results;
        std::size_t line_base = 0;
        bool eof = false;
        while (!eof) {
            lines.clear();
            std::string line;
            while (lines.size() < cfg.chunk_lines) {
                if (!reader.next(line)) {
                    eof = true;
                    break;
                }
                lines.push_back(std::move(line));
            }
            results.assign(lines.size(), {});
            std::atomic<std::size_t> next{0};
            auto work = [&](std::size_t w) {
                for (std::size_t i = next++; i < lines.size(); i = next++) {
                    results[i] = detail::process_line(std::move(lines[i]), annotators[w], pool, cfg);
                }
            };
            const std::size_t nthreads = std::min(cfg.workers, std::max<std::size_t>(lines.size(), 1));
            if (nthreads <= 1) {
                work(0);
            } else {
                std::vector<std::thread> threads;
                for (std::size_t w = 0; w < nthreads; ++w) threads.emplace_back(work, w);
                for (auto &t : threads) t.join();
            }
            // Results are consumed in input order regardless of which worker ran them.
            for (std::size_t i = 0; i < results.size(); ++i) {
                auto &r = results[i];
                const std::size_t lineno = line_base + i + 1;
                if (r.repaired) ++shard.repaired_utf8;
                switch (r.status) {
                    case detail::LineStatus::blank: break;
                    case detail::LineStatus::malformed:
                        if (cfg.strict) {
                            throw DataError(input + ":" + std::to_string(lineno) + ": " + r.message);
                        }
                        ++shard.malformed;
                        if (logged++ < 20) warn(input + ":" + std::to_string(lineno) + ": " + r.message);
                        break;
                    case detail::LineStatus::degenerate:
                        ++shard.degenerate;
                        if (logged++ < 20) warn(input + ":" + std::to_string(lineno) + ": " + r.message);
                        break;
                    case detail::LineStatus::ok:
                        ++shard.records;
                        id_hashes.push_back(random::fnv1a64(r.id));
                        scores_out += r.score_line;
                        scores_out += '\n';
                        if (cfg.emit_profiles) {
                            profiles_out += r.profile_line;
                            profiles_out += '\n';
                        }
                        break;
                }
            }
            line_base += lines.size();
        }

        io::write_file_atomic(scores_path, scores_out);
        shard.output_sha256 = io::sha256_hex(scores_out);
        if (cfg.emit_profiles) {
            io::write_file_atomic(profiles_path, profiles_out);
            shard.profiles_sha256 = io::sha256_hex(profiles_out);
        }
        nlohmann::ordered_json meta;
        meta["input"] = shard.input;
        meta["input_sha256"] = shard.input_sha256;
        meta["config_sha256"] = summary.config_sha256;
        meta["pool_sha256"] = summary.pool_sha256;
        meta["output_sha256"] = shard.output_sha256;
        if (cfg.emit_profiles) meta["profiles_sha256"] = shard.profiles_sha256;
        meta["records"] = shard.records;
        meta["degenerate"] = shard.degenerate;
        meta["malformed"] = shard.malformed;
        meta["repaired_utf8"] = shard.repaired_utf8;
        io::write_file_atomic(meta_path, meta.dump(2) + "\n");
        ++summary.regenerated;
        summary.bytes_processed += shard.input_bytes;
        summary.shards.push_back(shard);
    }

    const double corpus_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_corpus).count();
    std::sort(id_hashes.begin(), id_hashes.end());
    for (std::size_t i = 1; i < id_hashes.size(); ++i) {
        if (id_hashes[i] == id_hashes[i - 1]) ++summary.duplicate_ids;
    }
    if (summary.duplicate_ids > 0) {
        if (cfg.strict) {
            throw DataError(std::to_string(summary.duplicate_ids) + " duplicate document ids");
        }
        warn(std::to_string(summary.duplicate_ids) + " duplicate document ids");
    }

    nlohmann::ordered_json shards_json = nlohmann::ordered_json::array();
    std::size_t total_bytes = 0;
    for (const auto &s : summary.shards) {
        summary.documents += s.records;
        summary.degenerate += s.degenerate;
        summary.malformed += s.malformed;
        total_bytes += s.input_bytes;
        nlohmann::ordered_json sj;
        sj["input"] = s.input;
        sj["input_sha256"] = s.input_sha256;
        sj["output"] = s.output;
        sj["output_sha256"] = s.output_sha256;
        if (cfg.emit_profiles) sj["profiles_sha256"] = s.profiles_sha256;
        sj["records"] = s.records;
        sj["degenerate"] = s.degenerate;
        sj["malformed"] = s.malformed;
        sj["repaired_utf8"] = s.repaired_utf8;
        shards_json.push_back(sj);
    }
    if (summary.documents == 0) warn("no documents were scored");

    nlohmann::ordered_json pool_json;
    pool_json["file"] = std::filesystem::path(cfg.pool_path).filename().string();
    pool_json["sha256"] = summary.pool_sha256;
    pool_json["total"] = pool.total();
    nlohmann::json per_domain = nlohmann::json::object();
    for (Domain d : kAllDomains) per_domain[std::string(domain_name(d))] = pool.domain_total(d);
    pool_json["per_domain"] = per_domain;
    pool_json["load"] = to_json(load_report);

    auto &m = summary.manifest;
    m["tool"] = "hks";
    m["version"] = kVersion;
    m["pool"] = pool_json;
    m["config"] = cfg_json;
    m["config_sha256"] = summary.config_sha256;
    m["documents"] = summary.documents;
    m["degenerate"] = summary.degenerate;
    m["malformed"] = summary.malformed;
    m["duplicate_ids"] = summary.duplicate_ids;
    m["shards"] = shards_json;
    io::write_file_atomic((out_dir / "manifest.json").string(), m.dump(2) + "\n");

    summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    auto &st = summary.stats;
    st["workers"] = cfg.workers;
    st["seconds"] = summary.seconds;
    st["pool_load_seconds"] = pool_seconds;
    st["automaton_build_seconds"] = build_seconds;
    st["corpus_seconds"] = corpus_seconds;
    st["automaton_states"] = automaton.state_count();
    st["automaton_bytes"] = automaton.memory_bytes();
    st["shards_regenerated"] = summary.regenerated;
    st["shards_reused"] = summary.shards.size() - summary.regenerated;
    st["bytes_processed"] = summary.bytes_processed;
    st["corpus_bytes"] = total_bytes;
    // corpus phase only: annotation, scoring and shard writes
    st["throughput_mb_per_s"] =
        corpus_seconds > 0 ? static_cast<double>(summary.bytes_processed) / 1e6 / corpus_seconds : 0.0;
    st["max_rss_bytes"] = max_rss_bytes();
    io::write_file_atomic((out_dir / "run_stats.json").string(), st.dump(2) + "\n");
    return summary;
}

/// Reads every score record of a run, in manifest shard order.
inline std::vector<ScoreRecord> load_scores(const std::string &dir) {
    const std::filesystem::path base(dir);
    std::vector<std::string> files;
    const auto manifest_path = base / "manifest.json";
    if (std::filesystem::exists(manifest_path)) {
        const auto m = nlohmann::json::parse(io::read_file(manifest_path.string()), nullptr, false);
        if (m.is_discarded()) throw DataError("unreadable manifest: " + manifest_path.string());
        for (const auto &s : m.at("shards")) files.push_back((base / s.at("output").get<std::string>()).string());
    } else {
        files = io::expand_glob((base / "*.scores.jsonl").string());
        if (files.empty() && std::filesystem::is_regular_file(base)) files.push_back(dir);
    }
    if (files.empty()) throw IoError("no score shards found in " + dir);
    std::vector<ScoreRecord> records;
    for (const auto &f : files) {
        io::LineReader reader(f);
        std::string line;
        std::size_t lineno = 0;
        while (reader.next(line)) {
            ++lineno;
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded()) throw DataError(f + ":" + std::to_string(lineno) + ": invalid JSON");
            try {
                records.push_back(record_from_json(j));
            } catch (const nlohmann::json::exception &e) {
                throw DataError(f + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
    }
    return records;
}

inline void write_candidates(const std::string &path, std::span<const Candidate> items) {
    std::string out;
    for (const auto &c : items) {
        nlohmann::ordered_json j;
        j["id"] = c.id;
        j["n_p"] = c.n_p;
        j["score"] = c.score;
        out += json_line(j);
        out += '\n';
    }
    io::write_file_atomic(path, out);
}

inline std::vector<Candidate> read_candidates(const std::string &path) {
    std::vector<Candidate> out;
    io::LineReader reader(path);
    std::string line;
    while (reader.next(line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw DataError(path + ": invalid JSON line");
        out.push_back({j.at("id").get<std::string>(), j.at("score").get<double>(),
                       j.at("n_p").get<std::size_t>()});
    }
    return out;
}

struct SelectOutputs {
    std::string out_dir;
    /// When set, selected documents are copied from this corpus glob.
    std::string corpus_glob;
    /// For threshold_mix: directory holding high.jsonl / low.jsonl from run_split.
    std::string split_dir;
};

/// Writes <out>/selected.jsonl (one {"id","n_p","score"} per selected document,
/// in selection order) and <out>/summary.json.
inline SelectionResult run_select(const std::string &score_dir, const SelectionSpec &spec,
                                  const SelectOutputs &outputs, std::ostream *log = nullptr) {
    spec.validate();
    SelectionResult result;
    std::vector<Candidate> items;
    std::vector<Candidate> high, low;
    std::optional<double> split_threshold;
    std::size_t split_budget = spec.split_budget;
    if (spec.strategy == Strategy::threshold_mix && !outputs.split_dir.empty()) {
        const std::filesystem::path sd(outputs.split_dir);
        high = read_candidates((sd / "high.jsonl").string());
        low = read_candidates((sd / "low.jsonl").string());
        const auto s = nlohmann::json::parse(io::read_file((sd / "split_summary.json").string()));
        if (!s["threshold"].is_null()) split_threshold = s["threshold"].get<double>();
        split_budget = s.value("split_budget", std::size_t{0});
    } else {
        const auto records = load_scores(score_dir);
        items = candidates(records, spec.score_field);
    }
    if (spec.strategy == Strategy::threshold_mix) {
        if (outputs.split_dir.empty()) {
            SplitResult split = threshold_split(items, spec.split_budget);
            high = std::move(split.high);
            low = std::move(split.low);
            split_threshold = split.threshold;
        }
        result = mix(high, low, spec.alpha, spec.budget, spec.seed);
        result.threshold = split_threshold;
        items = high;
        items.insert(items.end(), low.begin(), low.end());
    } else {
        result = select(items, spec);
    }
    if (result.budget_exceeds_corpus && log) {
        *log << "warning: budget exceeds corpus; selected all " << result.selected_ids.size()
             << " documents\n";
    }

    std::unordered_map<std::string_view, const Candidate *> by_id;
    by_id.reserve(items.size());
    for (const auto &c : items) by_id.emplace(c.id, &c);

    std::filesystem::create_directories(outputs.out_dir);
    const std::filesystem::path out(outputs.out_dir);
    std::string lines;
    for (std::size_t i = 0; i < result.selected_ids.size(); ++i) {
        const Candidate &c = *by_id.at(result.selected_ids[i]);
        nlohmann::ordered_json j;
        j["id"] = c.id;
        j["n_p"] = c.n_p;
        j["score"] = c.score;
        if (spec.strategy == Strategy::threshold_mix) j["stratum"] = i < result.high_selected ? "high" : "low";
        lines += json_line(j);
        lines += '\n';
    }
    io::write_file_atomic((out / "selected.jsonl").string(), lines);
    auto summary = summary_json(result, spec);
    if (spec.strategy == Strategy::threshold_mix) summary["split_budget"] = split_budget;
    summary["corpus_documents"] = items.size();
    io::write_file_atomic((out / "summary.json").string(), summary.dump(2) + "\n");

    if (!outputs.corpus_glob.empty()) {
        const std::unordered_set<std::string> wanted(result.selected_ids.begin(), result.selected_ids.end());
        std::string selected_corpus;
        for (const auto &path : io::expand_glob(outputs.corpus_glob)) {
            io::LineReader reader(path);
            std::string line;
            while (reader.next(line)) {
                const auto j = nlohmann::json::parse(line, nullptr, false);
                if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) continue;
                if (wanted.count(j["id"].get<std::string>())) {
                    selected_corpus += line;
                    selected_corpus += '\n';
                }
            }
        }
        io::write_file_atomic((out / "selected_corpus.jsonl").string(), selected_corpus);
    }
    return result;
}

/// Splits a scored corpus at the threshold of a token-budgeted top-k prefix
/// into <out>/high.jsonl and <out>/low.jsonl plus split_summary.json.
inline SplitResult run_split(const std::string &score_dir, const std::string &field,
                             std::size_t token_budget, const std::string &out_dir,
                             std::ostream *log = nullptr) {
    const auto records = load_scores(score_dir);
    const auto items = candidates(records, field);
    SplitResult split = threshold_split(items, token_budget);
    if (split.budget_exceeds_corpus && log) *log << "warning: split budget exceeds corpus; all records high\n";
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path out(out_dir);
    write_candidates((out / "high.jsonl").string(), split.high);
    write_candidates((out / "low.jsonl").string(), split.low);
    nlohmann::ordered_json s;
    s["score_field"] = field;
    s["split_budget"] = token_budget;
    s["threshold"] = split.threshold ? nlohmann::ordered_json(*split.threshold) : nlohmann::ordered_json();
    s["high_documents"] = split.high.size();
    s["low_documents"] = split.low.size();
    s["high_tokens"] = split.high_tokens;
    s["low_tokens"] = split.low_tokens;
    s["budget_exceeds_corpus"] = split.budget_exceeds_corpus;
    io::write_file_atomic((out / "split_summary.json").string(), s.dump(2) + "\n");
    return split;
}

/// Columns named as score fields, or ext:<name> for values joined by id from
/// external JSONL files ({"id": ..., "<name>": ...}). Rows lacking any
/// requested value are dropped.
inline nlohmann::ordered_json run_correlation(const std::vector<ScoreRecord> &records,
                                              const std::vector<std::string> &columns,
                                              const std::vector<std::string> &ext_files) {
    std::unordered_map<std::string, std::unordered_map<std::string, double>> ext;
    for (const auto &path : ext_files) {
        io::LineReader reader(path);
        std::string line;
        while (reader.next(line)) {
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line, nullptr, false);
            if (!j.is_object() || !j.contains("id")) throw DataError(path + ": line without id");
            const std::string id = j["id"].get<std::string>();
            for (auto &[k, v] : j.items()) {
                if (k != "id" && v.is_number()) ext[k][id] = v.get<double>();
            }
        }
    }
    std::vector<std::vector<double>> values(columns.size());
    std::size_t dropped = 0;
    for (const auto &r : records) {
        std::vector<double> row;
        bool complete = true;
        for (const auto &col : columns) {
            std::optional<double> v;
            if (col.rfind("ext:", 0) == 0) {
                const auto name = col.substr(4);
                auto it = ext.find(name);
                if (it == ext.end()) throw UsageError("no external column '" + name + "'");
                if (auto jt = it->second.find(r.doc_id); jt != it->second.end()) v = jt->second;
            } else {
                v = field_value(r, col);
                if (!v) throw UsageError("score field '" + col + "' missing for record '" + r.doc_id + "'");
            }
            if (!v) {
                complete = false;
                break;
            }
            row.push_back(*v);
        }
        if (!complete) {
            ++dropped;
            continue;
        }
        for (std::size_t c = 0; c < columns.size(); ++c) values[c].push_back(row[c]);
    }
    auto j = correlation_matrix(columns, values);
    j["dropped"] = dropped;
    return j;
}

inline std::vector<PreferencePair> load_pairs(const std::string &path) {
    std::vector<PreferencePair> pairs;
    io::LineReader reader(path);
    std::string line;
    std::size_t lineno = 0;
    while (reader.next(line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw DataError(path + ":" + std::to_string(lineno) + ": invalid JSON");
        try {
            pairs.push_back(pair_from_json(j));
        } catch (const nlohmann::json::exception &e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return pairs;
}

}  // namespace hks
