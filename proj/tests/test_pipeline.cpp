#include <catch_amalgamated.hpp>

#include <sys/wait.h>
#include <zlib.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "hks/pipeline.hpp"
#include "support.hpp"

using namespace hks;
using testing::TempDir;

namespace {

const char *kPool =
    "graph theory\tscience\n"
    "neural network\tscience\n"
    "machine learning\tscience\n"
    "renaissance\tart\n"
    "football\tlife\n";

const char *kCorpus =
    R"({"id": "d1", "text": "Graph theory meets neural network research.", "meta": {"subset": "wiki"}})" "\n"
    R"({"id": "d2", "text": "Football, football and more football!", "meta": {"subset": "web"}})" "\n"
    R"({"id": "d3", "text": "Nothing here matches.", "meta": {"subset": "web"}})" "\n";

RunConfig config(const TempDir &dir, const std::string &corpus_glob, const std::string &out = "out") {
    RunConfig cfg;
    cfg.pool_path = dir.file("pool.tsv");
    cfg.corpus_glob = corpus_glob;
    cfg.output_dir = dir.file(out);
    return cfg;
}

std::map<std::string, std::string> read_dir(const std::string &dir) {
    std::map<std::string, std::string> out;
    for (const auto &e : std::filesystem::directory_iterator(dir)) {
        if (e.path().filename() == "run_stats.json") continue;
        out[e.path().filename().string()] = io::read_file(e.path().string());
    }
    return out;
}

std::string random_corpus(std::mt19937_64 &rng, std::size_t docs, std::size_t first_id = 0) {
    static const std::vector<std::string> words = {"graph", "theory", "neural", "network", "football", "renaissance",
                                                   "machine", "learning", "the", "of", "and", "Graph", "知识"};
    std::string out;
    for (std::size_t i = 0; i < docs; ++i) {
        std::string text;
        const std::size_t n = 1 + rng() % 60;
        for (std::size_t k = 0; k < n; ++k) text += (k ? " " : "") + words[rng() % words.size()];
        nlohmann::ordered_json j;
        j["id"] = "doc" + std::to_string(first_id + i);
        j["text"] = text;
        out += j.dump() + "\n";
    }
    return out;
}

int run_cli(const std::string &args, std::string *output = nullptr) {
    TempDir tmp("hks-cli");
    const std::string log = tmp.file("log.txt");
    const std::string cmd = std::string(HKS_CLI_PATH) + " " + args + " > " + log + " 2>&1";
    const int status = std::system(cmd.c_str());
    if (output) *output = io::read_file(log);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("toy corpus matches hand-computed scores") {
    TempDir dir;
    dir.write("pool.tsv", kPool);
    dir.write("corpus.jsonl", kCorpus);
    RunConfig cfg = config(dir, dir.file("corpus.jsonl"));
    cfg.domains = {Domain::science, Domain::life};
    const auto summary = run_score(cfg);
    CHECK(summary.documents == 3);

    const auto records = load_scores(cfg.output_dir);
    REQUIRE(records.size() == 3);
    // d1: 6 tokens, "graph theory" + "neural network"
    CHECK(records[0].doc_id == "d1");
    CHECK(records[0].n_p == 6);
    CHECK(records[0].n_k == 2);
    CHECK(records[0].d == 2.0 / 6.0);
    CHECK(records[0].c == 0.4);
    CHECK(records[0].hks == Catch::Approx((2.0 / 6.0) * std::log(1.4)).epsilon(1e-14));
    CHECK(records[0].domain(Domain::science)->c == 2.0 / 3.0);
    CHECK(records[0].domain(Domain::life)->score == 0.0);
    CHECK(records[0].meta.at("subset") == "wiki");
    // d2: 5 tokens, "football" three times
    CHECK(records[1].n_p == 5);
    CHECK(records[1].n_k == 3);
    CHECK(records[1].n_distinct == 1);
    CHECK(records[1].d == 0.6);
    CHECK(records[1].c == 0.2);
    CHECK(records[1].hks == Catch::Approx(0.6 * std::log(1.2)).epsilon(1e-14));
    CHECK(records[1].domain(Domain::life)->c == 1.0);
    // d3: nothing
    CHECK(records[2].n_p == 3);
    CHECK(records[2].hks == 0.0);

    const auto manifest = nlohmann::json::parse(io::read_file(dir.file("out/manifest.json")));
    CHECK(manifest["documents"] == 3);
    CHECK(manifest["pool"]["total"] == 5);
    CHECK(manifest["pool"]["sha256"].get<std::string>().size() == 64);
    CHECK(manifest["config_sha256"].get<std::string>().size() == 64);
    REQUIRE(manifest["shards"].size() == 1);
    CHECK(manifest["shards"][0]["output_sha256"] == io::sha256_file(dir.file("out/shard-00000.scores.jsonl")));
    const auto stats = nlohmann::json::parse(io::read_file(dir.file("out/run_stats.json")));
    CHECK(stats.contains("throughput_mb_per_s"));
    CHECK(stats["max_rss_bytes"].get<std::size_t>() > 0);
}

TEST_CASE("empty corpus yields zero records") {
    TempDir dir;
    dir.write("pool.tsv", kPool);
    dir.write("empty.jsonl", "");
    std::ostringstream log;
    const auto summary = run_score(config(dir, dir.file("empty.jsonl")), &log);
    CHECK(summary.documents == 0);
    CHECK(log.str().find("no documents") != std::string::npos);
    CHECK(io::read_file(dir.file("out/shard-00000.scores.jsonl")).empty());
}

TEST_CASE("missing inputs are startup errors") {
    TempDir dir;
    dir.write("pool.tsv", kPool);
    CHECK_THROWS_AS(run_score(config(dir, dir.file("nothing-*.jsonl"))), IoError);
    dir.write("c.jsonl", kCorpus);
    RunConfig cfg = config(dir, dir.file("c.jsonl"));
    cfg.pool_path = dir.file("missing.tsv");
    CHECK_THROWS_AS(run_score(cfg), IoError);
    cfg = config(dir, dir.file("c.jsonl"));
    cfg.domains = {Domain::culture};
    CHECK_THROWS_AS(run_score(cfg), DataError);
    cfg.domains.clear();
    cfg.workers = 0;
    CHECK_THROWS_AS(run_score(cfg), UsageError);
}

TEST_CASE("reruns, worker counts and resume produce identical bytes") {
    TempDir dir;
    dir.write("pool.tsv", kPool);
    std::mt19937_64 rng(3);
    for (int s = 0; s < 3; ++s) dir.write("part" + std::to_string(s) + ".jsonl", random_corpus(rng, 300, s * 1000));
    const std::string glob = dir.file("part*.jsonl");

    RunConfig cfg = config(dir, glob, "a");
    cfg.all_domains = true;
    cfg.emit_profiles = true;
    cfg.chunk_lines = 37;
    run_score(cfg);
    const auto first = read_dir(cfg.output_dir);
    CHECK(first.size() == 10);

    SECTION("rerun without changes reuses everything") {
        const auto s = run_score(cfg);
        CHECK(s.regenerated == 0);
        CHECK(read_dir(cfg.output_dir) == first);
    }
    SECTION("four workers write the same files as one") {
        RunConfig par = cfg;
        par.output_dir = dir.file("b");
        par.workers = 4;
        run_score(par);
        CHECK(read_dir(par.output_dir) == first);
    }
    SECTION("deleted shards are regenerated identically") {
        std::filesystem::remove(dir.file("a/shard-00001.scores.jsonl"));
        const auto s = run_score(cfg);
        CHECK(s.regenerated == 1);
        CHECK(read_dir(cfg.output_dir) == first);
    }
    SECTION("a corrupted shard is detected and regenerated") {
        std::ofstream(dir.file("a/shard-00002.scores.jsonl"), std::ios::app) << "garbage\n";
        const auto s = run_score(cfg);
        CHECK(s.regenerated == 1);
        CHECK(read_dir(cfg.output_dir) == first);
    }
    SECTION("a changed configuration invalidates every shard") {
        RunConfig other = cfg;
        other.overlap = OverlapMode::leftmost_longest;
        CHECK(run_score(other).regenerated == 3);
    }
}

TEST_CASE("gzip input reads like plain input") {
    TempDir dir;
    dir.write("pool.tsv", kPool);
    dir.write("plain.jsonl", kCorpus);
    gzFile gz = gzopen(dir.file("packed.jsonl.gz").c_str(), "wb");
    gzwrite(gz, kCorpus, static_cast<unsigned>(std::strlen(kCorpus)));
    gzclose(gz);
    run_score(config(dir, dir.file("plain.jsonl"), "p"));
    run_score(config(dir, dir.file("packed.jsonl.gz"), "g"));
    CHECK(io::read_file(dir.file("p/shard-00000.scores.jsonl")) == io::read_file(dir.file("g/shard-00000.scores.jsonl")));
}

TEST_CASE("lenient mode skips malformed lines, strict mode aborts") {
    TempDir dir;
    dir.write("pool.tsv", kPool);
    const std::string bad = std::string(kCorpus) + "not json\n" + R"({"id": 5, "text": "x"})" "\n" +
                            R"({"id": "empty", "text": "  ...  "})" "\n" +
                            "{\"id\": \"mojibake\", \"text\": \"football \xC3\x28 graph theory\"}\n";
    dir.write("bad.jsonl", bad);
    std::ostringstream log;
    const auto s = run_score(config(dir, dir.file("bad.jsonl")), &log);
    CHECK(s.documents == 4);
    CHECK(s.malformed == 2);
    CHECK(s.degenerate == 1);
    CHECK(s.shards[0].repaired_utf8 == 1);
    CHECK(log.str().find("bad.jsonl:4") != std::string::npos);

    RunConfig strict = config(dir, dir.file("bad.jsonl"), "strict");
    strict.strict = true;
    CHECK_THROWS_AS(run_score(strict), DataError);
}

TEST_CASE("duplicate ids are reported") {
    TempDir dir;
    dir.write("pool.tsv", kPool);
    dir.write("dup.jsonl", std::string(kCorpus) + R"({"id": "d1", "text": "again"})" "\n");
    std::ostringstream log;
    CHECK(run_score(config(dir, dir.file("dup.jsonl")), &log).duplicate_ids == 1);
    RunConfig strict = config(dir, dir.file("dup.jsonl"), "strict");
    strict.strict = true;
    CHECK_THROWS_AS(run_score(strict), DataError);
}

TEST_CASE("selection over scored shards") {
    TempDir dir;
    dir.write("pool.tsv", kPool);
    std::mt19937_64 rng(5);
    dir.write("c.jsonl", random_corpus(rng, 800));
    RunConfig cfg = config(dir, dir.file("c.jsonl"));
    run_score(cfg);
    const auto records = load_scores(cfg.output_dir);
    std::size_t corpus_tokens = 0;
    for (const auto &r : records) corpus_tokens += r.n_p;

    SECTION("topk with the whole corpus as budget selects all ids") {
        SelectionSpec spec;
        spec.budget = corpus_tokens;
        const auto r = run_select(cfg.output_dir, spec, {dir.file("sel"), dir.file("c.jsonl"), ""});
        CHECK(r.selected_ids.size() == records.size());
        CHECK(io::read_file(dir.file("sel/selected_corpus.jsonl")) == io::read_file(dir.file("c.jsonl")));
        std::set<std::string> ids(r.selected_ids.begin(), r.selected_ids.end());
        CHECK(ids.size() == records.size());
    }
    SECTION("mix at alpha 0.75 reports the realized alpha") {
        SelectionSpec spec;
        spec.strategy = Strategy::threshold_mix;
        spec.budget = corpus_tokens / 4;
        spec.split_budget = corpus_tokens / 2;
        spec.alpha = 0.75;
        spec.seed = 9;
        const auto r = run_select(cfg.output_dir, spec, {dir.file("mix"), "", ""});
        REQUIRE(r.realized_alpha);
        CHECK(std::abs(*r.realized_alpha - 0.75) <= 0.02);
        const auto summary = nlohmann::json::parse(io::read_file(dir.file("mix/summary.json")));
        CHECK(summary["requested_alpha"] == 0.75);
        CHECK(summary["realized_alpha"] == *r.realized_alpha);

        // routing through split files gives the same selection
        run_split(cfg.output_dir, "hks", spec.split_budget, dir.file("split"));
        const auto via_split = run_select(cfg.output_dir, spec, {dir.file("mix2"), "", dir.file("split")});
        CHECK(via_split.selected_ids == r.selected_ids);
        CHECK(nlohmann::json::parse(io::read_file(dir.file("mix2/summary.json")))["split_budget"] == spec.split_budget);
    }
    SECTION("sampling depends on the seed only") {
        SelectionSpec spec;
        spec.strategy = Strategy::gumbel_sample;
        spec.budget = corpus_tokens / 5;
        spec.seed = 1;
        run_select(cfg.output_dir, spec, {dir.file("s1"), "", ""});
        run_select(cfg.output_dir, spec, {dir.file("s1b"), "", ""});
        spec.seed = 2;
        run_select(cfg.output_dir, spec, {dir.file("s2"), "", ""});
        CHECK(io::read_file(dir.file("s1/selected.jsonl")) == io::read_file(dir.file("s1b/selected.jsonl")));
        CHECK(io::read_file(dir.file("s1/selected.jsonl")) != io::read_file(dir.file("s2/selected.jsonl")));
    }
    SECTION("missing score field names the alternatives") {
        SelectionSpec spec;
        spec.budget = 10;
        spec.score_field = "science";
        CHECK_THROWS_AS(run_select(cfg.output_dir, spec, {dir.file("x"), "", ""}), UsageError);
    }
}

TEST_CASE("correlation joins external columns") {
    TempDir dir;
    dir.write("pool.tsv", kPool);
    dir.write("c.jsonl", kCorpus);
    RunConfig cfg = config(dir, dir.file("c.jsonl"));
    run_score(cfg);
    dir.write("ppl.jsonl", R"({"id": "d1", "ppl": 2.0})" "\n" R"({"id": "d2", "ppl": 3.0})" "\n" R"({"id": "d3", "ppl": 1.0})" "\n");
    const auto j = run_correlation(load_scores(cfg.output_dir), {"hks", "ext:ppl"}, {dir.file("ppl.jsonl")});
    CHECK(j["spearman"][0][1] == 0.5);
    CHECK(j["dropped"] == 0);
}

TEST_CASE("cli end to end and exit codes") {
    TempDir dir;
    dir.write("pool.tsv", kPool);
    dir.write("c.jsonl", kCorpus);
    const std::string p = dir.file("pool.tsv"), c = dir.file("c.jsonl"), out = dir.file("out");
    std::string text;

    CHECK(run_cli("pool stats --pool " + p, &text) == 0);
    CHECK(nlohmann::json::parse(text)["total"] == 5);

    CHECK(run_cli("score --pool " + p + " --corpus " + c + " --out " + out + " --domains all") == 0);
    CHECK(load_scores(out).size() == 3);
    CHECK(run_cli("select --scores " + out + " --out " + dir.file("sel") + " --budget-docs 1") == 0);
    CHECK(io::read_file(dir.file("sel/selected.jsonl")).find("\"d1\"") != std::string::npos);
    CHECK(run_cli("split --scores " + out + " --out " + dir.file("split") + " --budget-tokens 5") == 0);
    CHECK(run_cli("analyze hist --scores " + out + " --metric d --group-by subset --buckets 4 --out " + dir.file("h.csv")) == 0);
    CHECK(io::read_file(dir.file("h.csv")).rfind("group,bucket,lower,upper,count\n", 0) == 0);
    CHECK(run_cli("analyze corr --scores " + out + " --columns d,c,hks --out " + dir.file("corr.json")) == 0);

    SECTION("usage errors exit 1") {
        CHECK(run_cli("score --pool " + p) == 1);
        CHECK(run_cli("select --scores " + out + " --out " + dir.file("x") + " --budget-docs 1 --tau 0 --strategy sample") == 1);
        CHECK(run_cli("select --scores " + out + " --out " + dir.file("x") + " --budget-docs 1 --score-field ppl") == 1);
        CHECK(run_cli("frobnicate") == 1);
    }
    SECTION("data errors exit 2") {
        CHECK(run_cli("score --pool " + dir.file("missing.tsv") + " --corpus " + c + " --out " + out) == 2);
        dir.write("bad.jsonl", "not json\n");
        CHECK(run_cli("score --strict --pool " + p + " --corpus " + dir.file("bad.jsonl") + " --out " + dir.file("o2")) == 2);
        dir.write("pairs.jsonl", R"({"a": {"d": 0.1, "c": 0.2}, "b": {"d": 0.3, "c": 0.4}, "label": 0.5})" "\n");
        CHECK(run_cli("analyze fsearch --pairs " + dir.file("pairs.jsonl")) == 2);
    }
    SECTION("HKS_WORKERS overrides the worker count") {
        CHECK(run_cli("score --pool " + p + " --corpus " + c + " --out " + dir.file("w") + " --workers 1") == 0);
        const std::string cmd = "HKS_WORKERS=3 " + std::string(HKS_CLI_PATH) + " score --pool " + p + " --corpus " + c +
                                " --out " + dir.file("w3") + " > /dev/null 2>&1";
        CHECK(std::system(cmd.c_str()) == 0);
        CHECK(nlohmann::json::parse(io::read_file(dir.file("w3/run_stats.json")))["workers"] == 3);
        CHECK(io::read_file(dir.file("w/manifest.json")) == io::read_file(dir.file("w3/manifest.json")));
    }
}
