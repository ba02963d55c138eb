// hks: knowledge-content scoring and data selection over JSONL corpora.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hks/hks.hpp"

namespace {

std::vector<hks::Domain> parse_domains(const std::string &list) {
    std::vector<hks::Domain> out;
    if (list.empty()) return out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto d = hks::parse_domain(item);
        if (!d) throw hks::UsageError("unknown domain '" + item + "'");
        if (std::find(out.begin(), out.end(), *d) == out.end()) out.push_back(*d);
    }
    return out;
}

std::vector<std::string> split_list(const std::string &list) {
    std::vector<std::string> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void emit(const std::string &path, const std::string &content) {
    if (path.empty() || path == "-") {
        std::cout << content;
    } else {
        hks::io::write_file_atomic(path, content);
    }
}

struct NormalizeFlags {
    bool no_nfc = false;
    bool no_casefold = false;
    bool no_whitespace = false;

    void add(CLI::App *app) {
        app->add_flag("--no-nfc", no_nfc, "Skip NFC normalization");
        app->add_flag("--no-casefold", no_casefold, "Match case-sensitively");
        app->add_flag("--no-collapse-whitespace", no_whitespace, "Keep whitespace runs as-is");
    }
    hks::NormalizeOptions options() const { return {!no_nfc, !no_casefold, !no_whitespace}; }
};

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Knowledge-content scoring and high-knowledge data selection"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(hks::kVersion));

    // pool stats
    auto *pool_cmd = app.add_subcommand("pool", "Knowledge-element pool utilities");
    pool_cmd->require_subcommand(1);
    auto *stats_cmd = pool_cmd->add_subcommand("stats", "Load a pool and report per-domain statistics");
    std::string pool_path, stats_json;
    bool pool_strict = false;
    NormalizeFlags pool_norm;
    stats_cmd->add_option("--pool", pool_path, "Pool TSV (surface<TAB>domain[<TAB>source])")->required();
    stats_cmd->add_option("--json", stats_json, "Write statistics JSON here instead of stdout");
    stats_cmd->add_flag("--strict", pool_strict, "Abort on the first malformed record");
    pool_norm.add(stats_cmd);

    // score
    auto *score_cmd = app.add_subcommand("score", "Annotate and score a sharded JSONL corpus");
    hks::RunConfig run;
    std::string domains_arg, boundary = "word", overlap = "all";
    NormalizeFlags score_norm;
    score_cmd->add_option("--pool", run.pool_path, "Pool TSV")->required();
    score_cmd->add_option("--corpus", run.corpus_glob, "Corpus JSONL glob (.gz accepted)")->required();
    score_cmd->add_option("--out", run.output_dir, "Output directory")->required();
    score_cmd->add_option("--workers", run.workers, "Annotation worker threads (HKS_WORKERS overrides)")
        ->check(CLI::PositiveNumber);
    score_cmd->add_option("--domains", domains_arg, "Domain scores to add: comma list, or 'all' for every domain present in the pool");
    score_cmd->add_option("--boundary", boundary, "Word-boundary rule")->check(CLI::IsMember({"word", "none"}));
    score_cmd->add_option("--overlap", overlap, "Occurrence semantics")
        ->check(CLI::IsMember({"all", "leftmost-longest"}));
    score_cmd->add_flag("--strict", run.strict, "Abort on malformed input instead of skipping it");
    score_cmd->add_flag("--profiles", run.emit_profiles, "Also write per-document knowledge profiles");
    score_cmd->add_option("--seed", run.seed, "Run seed recorded in the manifest");
    score_cmd->add_option("--chunk-lines", run.chunk_lines, "Lines per parallel batch")->check(CLI::PositiveNumber);
    score_norm.add(score_cmd);

    // select
    auto *select_cmd = app.add_subcommand("select", "Select documents from scored shards");
    std::string scores_dir, strategy = "topk";
    hks::SelectionSpec spec;
    hks::SelectOutputs sel_out;
    std::size_t budget_tokens = 0, budget_docs = 0;
    bool no_normalize = false;
    select_cmd->add_option("--scores", scores_dir, "Score directory written by `hks score`")->required();
    select_cmd->add_option("--out", sel_out.out_dir, "Output directory")->required();
    select_cmd->add_option("--strategy", strategy, "Selection strategy")
        ->check(CLI::IsMember({"topk", "sample", "mix"}));
    auto *bt = select_cmd->add_option("--budget-tokens", budget_tokens, "Token budget");
    auto *bd = select_cmd->add_option("--budget-docs", budget_docs, "Document budget");
    bt->excludes(bd);
    select_cmd->add_option("--tau", spec.tau, "Softmax temperature for sampling");
    select_cmd->add_option("--alpha", spec.alpha, "High-stratum token fraction for mix");
    select_cmd->add_option("--seed", spec.seed, "Random seed");
    select_cmd->add_option("--score-field", spec.score_field, "hks, d, c, or a domain name");
    select_cmd->add_flag("--no-normalize", no_normalize, "Use raw scores in the sampling softmax");
    select_cmd->add_option("--split-tokens", spec.split_budget, "Top-k token budget defining the high stratum (mix)");
    select_cmd->add_option("--split-dir", sel_out.split_dir, "Reuse strata written by `hks split` (mix)");
    select_cmd->add_option("--corpus", sel_out.corpus_glob, "Copy selected documents from this corpus glob");

    // split
    auto *split_cmd = app.add_subcommand("split", "Split scored records into high/low strata at a threshold");
    std::string split_scores, split_out, split_field = "hks";
    std::size_t split_tokens = 0;
    split_cmd->add_option("--scores", split_scores, "Score directory")->required();
    split_cmd->add_option("--out", split_out, "Output directory")->required();
    split_cmd->add_option("--budget-tokens", split_tokens, "Top-k token budget")->required();
    split_cmd->add_option("--score-field", split_field, "hks, d, c, or a domain name");

    // analyze
    auto *analyze_cmd = app.add_subcommand("analyze", "Diagnostics over scored shards");
    analyze_cmd->require_subcommand(1);
    auto *hist_cmd = analyze_cmd->add_subcommand("hist", "Per-group bucketed score distribution (CSV)");
    std::string hist_scores, hist_metric = "hks", hist_group = "subset", hist_out;
    std::size_t hist_buckets = 50;
    hist_cmd->add_option("--scores", hist_scores, "Score directory")->required();
    hist_cmd->add_option("--metric", hist_metric, "d, c, hks or a domain score");
    hist_cmd->add_option("--group-by", hist_group, "Meta key to group by");
    hist_cmd->add_option("--buckets", hist_buckets, "Number of buckets")->check(CLI::PositiveNumber);
    hist_cmd->add_option("--out", hist_out, "CSV path (stdout if omitted)");

    auto *corr_cmd = analyze_cmd->add_subcommand("corr", "Pairwise Spearman correlation of score columns");
    std::string corr_scores, corr_columns = "d,c,hks", corr_out;
    std::vector<std::string> corr_ext;
    corr_cmd->add_option("--scores", corr_scores, "Score directory")->required();
    corr_cmd->add_option("--columns", corr_columns, "Comma list; ext:<name> for external columns");
    corr_cmd->add_option("--ext", corr_ext, "External JSONL score files joined on id");
    corr_cmd->add_option("--out", corr_out, "JSON path (stdout if omitted)");

    auto *fs_cmd = analyze_cmd->add_subcommand("fsearch", "Rank f(d)*g(c) candidates against preference pairs");
    std::string fs_pairs, fs_out;
    bool fs_per_pair = false;
    fs_cmd->add_option("--pairs", fs_pairs, "Pairs JSONL {\"a\":{d,c},\"b\":{d,c},\"label\":x}")->required();
    fs_cmd->add_option("--out", fs_out, "CSV path (stdout if omitted)");
    fs_cmd->add_flag("--per-pair", fs_per_pair, "Min-max normalize within each pair instead of globally");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) == 0 ? 0 : static_cast<int>(hks::ExitCode::usage);
    }

    try {
        if (*stats_cmd) {
            hks::PoolOptions opts;
            opts.strict = pool_strict;
            opts.normalize = pool_norm.options();
            hks::LoadReport report;
            const auto pool = hks::load_pool_file(pool_path, opts, &report);
            nlohmann::ordered_json j = hks::to_json(hks::pool_stats(pool));
            j["load"] = hks::to_json(report);
            for (const auto &d : report.diagnostics) {
                std::cerr << pool_path << ":" << d.line << ": " << d.message << '\n';
            }
            emit(stats_json, j.dump(2) + "\n");
        } else if (*score_cmd) {
            if (const char *env = std::getenv("HKS_WORKERS"); env && *env) {
                const long w = std::strtol(env, nullptr, 10);
                if (w < 1) throw hks::UsageError("HKS_WORKERS must be a positive integer");
                run.workers = static_cast<std::size_t>(w);
            }
            run.normalize = score_norm.options();
            run.word_boundaries = boundary == "word";
            run.overlap = overlap == "all" ? hks::OverlapMode::all : hks::OverlapMode::leftmost_longest;
            run.all_domains = domains_arg == "all";
            if (!run.all_domains) run.domains = parse_domains(domains_arg);
            const auto summary = hks::run_score(run, &std::cerr);
            std::cerr << "scored " << summary.documents << " documents in " << summary.shards.size()
                      << " shards (" << summary.regenerated << " regenerated) in " << summary.seconds
                      << " s\n";
        } else if (*select_cmd) {
            spec.strategy = strategy == "topk"     ? hks::Strategy::topk
                            : strategy == "sample" ? hks::Strategy::gumbel_sample
                                                   : hks::Strategy::threshold_mix;
            if (*bd) {
                spec.unit = hks::BudgetUnit::documents;
                spec.budget = budget_docs;
            } else if (*bt) {
                spec.budget = budget_tokens;
            } else {
                throw hks::UsageError("one of --budget-tokens or --budget-docs is required");
            }
            if (spec.strategy == hks::Strategy::threshold_mix) {
                if (spec.unit != hks::BudgetUnit::tokens) throw hks::UsageError("mix needs --budget-tokens");
                if (sel_out.split_dir.empty() && spec.split_budget == 0) {
                    throw hks::UsageError("mix needs --split-tokens or --split-dir");
                }
            }
            spec.normalize = !no_normalize;
            hks::run_select(scores_dir, spec, sel_out, &std::cerr);
            std::cout << hks::io::read_file((std::filesystem::path(sel_out.out_dir) / "summary.json").string());
        } else if (*split_cmd) {
            const auto split = hks::run_split(split_scores, split_field, split_tokens, split_out, &std::cerr);
            std::cerr << "high: " << split.high.size() << " documents, low: " << split.low.size() << '\n';
        } else if (*hist_cmd) {
            const auto records = hks::load_scores(hist_scores);
            const auto h = hks::bucket_distribution(records, hist_metric, hist_group, hist_buckets);
            if (h.unknown_group > 0) {
                std::cerr << "warning: " << h.unknown_group << " records lack meta key '" << hist_group
                          << "' (grouped as unknown)\n";
            }
            std::ostringstream csv;
            hks::write_csv(h, csv);
            emit(hist_out, csv.str());
        } else if (*corr_cmd) {
            const auto records = hks::load_scores(corr_scores);
            const auto j = hks::run_correlation(records, split_list(corr_columns), corr_ext);
            emit(corr_out, j.dump(2) + "\n");
        } else if (*fs_cmd) {
            const auto pairs = hks::load_pairs(fs_pairs);
            const auto rows = hks::function_search(
                pairs, fs_per_pair ? hks::NormalizationScope::per_pair : hks::NormalizationScope::global);
            std::ostringstream csv;
            hks::write_csv(rows, csv);
            emit(fs_out, csv.str());
        }
    } catch (const hks::Error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.code());
    } catch (const hks::ContractViolation &e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(hks::ExitCode::usage);
    } catch (const std::bad_alloc &) {
        std::cerr << "error: out of memory\n";
        return static_cast<int>(hks::ExitCode::resource);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(hks::ExitCode::data);
    }
    return 0;
}
