#include <doctest.h>

#include <stdexcept>

#include <filesystem>
#include <fstream>
#include <set>

#include "fwl/corpus.hpp"
#include "fwl/io.hpp"
#include "fwl/rng.hpp"

using namespace fwl;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    auto dir = std::filesystem::temp_directory_path() / "fwl_corpus_tests";
    std::filesystem::create_directories(dir);
    auto path = (dir / name).string();
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("tokenize basics") {
    CHECK(tokenize("") == std::vector<std::string>{});
    CHECK(tokenize("The CAT, the hat") == std::vector<std::string>{"the", "cat", "the", "hat"});
    CHECK(tokenize("BM25-v2 scores!") == std::vector<std::string>{"bm25", "v2", "scores"});
    CHECK(tokenize("...") == std::vector<std::string>{});
}

TEST_CASE("build_corpus statistics") {
    SUBCASE("one document") {
        auto c = build_corpus({{"d1", {"a", "b", "a"}}});
        CHECK(c.doc_count == 1);
        CHECK(c.avg_doc_len == doctest::Approx(3.0));
        CHECK(c.df[c.vocabulary.at("a")] == 1);
        CHECK(c.df[c.vocabulary.at("b")] == 1);
    }
    SUBCASE("two documents") {
        auto c = build_corpus({{"d1", {"a"}}, {"d2", {"a", "b"}}});
        CHECK(c.doc_count == 2);
        CHECK(c.avg_doc_len == doctest::Approx(1.5));
        CHECK(c.df[c.vocabulary.at("a")] == 2);
        CHECK(c.df[c.vocabulary.at("b")] == 1);
    }
    SUBCASE("empty collection") {
        auto c = build_corpus({});
        CHECK(c.doc_count == 0);
        CHECK(c.avg_doc_len == 0.0);
        CHECK(c.vocab_size() == 0);
    }
    SUBCASE("duplicate id rejected with the offending id") {
        CHECK_THROWS_WITH_AS(build_corpus({{"dX", {"a"}}, {"dX", {"b"}}}),
                             doctest::Contains("dX"), std::invalid_argument);
    }
    SUBCASE("first-seen vocabulary order") {
        auto c = build_corpus({{"d1", {"z", "y"}}, {"d2", {"y", "x"}}});
        CHECK(c.vocabulary.at("z") == 0);
        CHECK(c.vocabulary.at("y") == 1);
        CHECK(c.vocabulary.at("x") == 2);
    }
}

TEST_CASE("build_corpus matches brute-force recounts on random input") {
    auto rng = make_rng(7);
    std::uniform_int_distribution<int> n_docs(0, 12), len(0, 9), term(0, 5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::pair<std::string, std::vector<std::string>>> docs;
        int nd = n_docs(rng);
        for (int d = 0; d < nd; ++d) {
            std::vector<std::string> toks;
            int l = len(rng);
            for (int i = 0; i < l; ++i) toks.push_back("t" + std::to_string(term(rng)));
            docs.push_back({"d" + std::to_string(d), toks});
        }
        auto c = build_corpus(docs);
        // naive recount
        std::size_t total = 0;
        std::unordered_map<std::string, std::set<std::string>> docs_with_term;
        for (const auto& [id, toks] : docs) {
            total += toks.size();
            for (const auto& t : toks) docs_with_term[t].insert(id);
        }
        CHECK(c.doc_count == docs.size());
        if (!docs.empty())
            CHECK(c.avg_doc_len ==
                  doctest::Approx(static_cast<double>(total) / docs.size()).epsilon(1e-12));
        for (const auto& [t, ids] : docs_with_term)
            CHECK(c.df[c.vocabulary.at(t)] == static_cast<std::int64_t>(ids.size()));
    }
}

TEST_CASE("load_trec parses and validates") {
    auto docs = write_temp("docs.tsv", "d1\tapple pie recipe\nd7\tthe cat sat\n");
    auto queries = write_temp("queries.tsv", "q1\tcat recipe\n");

    SUBCASE("well-formed qrels line maps fields directly") {
        auto qrels = write_temp("qrels.txt", "q1 0 d7 2\n");
        auto loaded = load_trec(docs, queries, qrels);
        REQUIRE(loaded.judgments.size() == 1);
        CHECK(loaded.judgments[0].query_id == "q1");
        CHECK(loaded.judgments[0].doc_id == "d7");
        CHECK(loaded.judgments[0].grade == 2);
    }
    SUBCASE("missing grade is a parse error with a line number") {
        auto qrels = write_temp("qrels_bad.txt", "q1 0 d7 2\nq1 0 d7\n");
        CHECK_THROWS_WITH_AS(load_trec(docs, queries, qrels), doctest::Contains(":2"),
                             std::runtime_error);
    }
    SUBCASE("dangling doc reference names the id") {
        auto qrels = write_temp("qrels_dangling.txt", "q1 0 dX 1\n");
        CHECK_THROWS_WITH_AS(load_trec(docs, queries, qrels), doctest::Contains("dX"),
                             std::runtime_error);
    }
}

TEST_CASE("generate_synthetic determinism and relevance guarantee") {
    SyntheticSpec spec;  // defaults: V=2000, K=8, 500 docs, 60 queries, seed 42

    SUBCASE("invariant violations rejected") {
        SyntheticSpec bad = spec;
        bad.grade_thresholds = {0.8, 0.5};
        CHECK_THROWS_AS(generate_synthetic(bad), std::invalid_argument);
        bad = spec;
        bad.num_topics = 0;
        CHECK_THROWS_AS(generate_synthetic(bad), std::invalid_argument);
    }

    SUBCASE("zero queries yields empty queries and judgments") {
        SyntheticSpec small = spec;
        small.num_docs = 20;
        small.num_queries = 0;
        auto data = generate_synthetic(small);
        CHECK(data.queries.empty());
        CHECK(data.judgments.empty());
        CHECK(data.corpus.doc_count == 20);
    }

    SUBCASE("same spec and seed reproduce byte-identical artifacts") {
        SyntheticSpec small = spec;
        small.num_docs = 40;
        small.num_queries = 8;
        auto a = generate_synthetic(small);
        auto b = generate_synthetic(small);
        auto dir = std::filesystem::temp_directory_path() / "fwl_corpus_tests";
        std::filesystem::create_directories(dir);
        for (int run = 0; run < 2; ++run) {
            const auto& d = run == 0 ? a : b;
            save_corpus_tsv((dir / ("docs" + std::to_string(run))).string(), d.corpus);
            save_queries_tsv((dir / ("queries" + std::to_string(run))).string(), d.corpus,
                             d.queries);
            save_qrels((dir / ("qrels" + std::to_string(run))).string(), d.judgments);
        }
        for (const char* base : {"docs", "queries", "qrels"}) {
            std::ifstream f0((dir / (base + std::string("0"))).string());
            std::ifstream f1((dir / (base + std::string("1"))).string());
            std::stringstream s0, s1;
            s0 << f0.rdbuf();
            s1 << f1.rdbuf();
            CHECK(s0.str() == s1.str());
        }
    }

    SUBCASE("default spec: every query has at least one relevant doc") {
        auto data = generate_synthetic(spec);
        CHECK(data.corpus.doc_count == 500);
        CHECK(data.queries.size() == 60);
        std::unordered_map<std::string, int> best;
        for (const auto& j : data.judgments)
            best[j.query_id] = std::max(best[j.query_id], j.grade);
        for (const auto& q : data.queries) {
            INFO("query ", q.id);
            CHECK(best[q.id] >= 1);
        }
    }
}

TEST_CASE("make_pairs strict-contrast enumeration") {
    SUBCASE("single contrast") {
        std::vector<Judgment> j{{"q1", "d1", 2}, {"q1", "d2", 0}};
        auto pairs = make_pairs(j, 100, 1);
        REQUIRE(pairs.size() == 1);
        CHECK(pairs[0].pos_doc_id == "d1");
        CHECK(pairs[0].neg_doc_id == "d2");
        CHECK(pairs[0].label == 1.0);
        CHECK(pairs[0].label_kind == LabelKind::Strong);
    }
    SUBCASE("no strict contrast yields no pairs") {
        std::vector<Judgment> j{{"q1", "d1", 1}, {"q1", "d2", 1}};
        CHECK(make_pairs(j, 100, 1).empty());
    }
    SUBCASE("three grades enumerate all strict contrasts") {
        std::vector<Judgment> j{{"q1", "d1", 2}, {"q1", "d2", 1}, {"q1", "d3", 0}};
        auto pairs = make_pairs(j, 100, 1);
        std::set<std::pair<std::string, std::string>> got;
        for (const auto& p : pairs) got.insert({p.pos_doc_id, p.neg_doc_id});
        std::set<std::pair<std::string, std::string>> want{
            {"d1", "d2"}, {"d1", "d3"}, {"d2", "d3"}};
        CHECK(got == want);
    }
    SUBCASE("pairs only ever pair higher grade above lower") {
        // brute-force check against the judgments on a random grade table
        auto rng = make_rng(3);
        std::uniform_int_distribution<int> grade(0, 3);
        std::vector<Judgment> j;
        for (int q = 0; q < 5; ++q)
            for (int d = 0; d < 8; ++d)
                j.push_back({"q" + std::to_string(q), "d" + std::to_string(d), grade(rng)});
        auto jm = index_judgments(j);
        auto pairs = make_pairs(j, 7, 99);
        for (const auto& p : pairs)
            CHECK(jm[p.query_id][p.pos_doc_id] > jm[p.query_id][p.neg_doc_id]);
        // capped per query
        std::unordered_map<std::string, int> per_query;
        for (const auto& p : pairs) ++per_query[p.query_id];
        for (const auto& [q, n] : per_query) CHECK(n <= 7);
    }
    SUBCASE("deterministic subsampling") {
        std::vector<Judgment> j;
        for (int d = 0; d < 12; ++d) j.push_back({"q0", "d" + std::to_string(d), d % 3});
        auto a = make_pairs(j, 5, 1234);
        auto b = make_pairs(j, 5, 1234);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].pos_doc_id == b[i].pos_doc_id);
            CHECK(a[i].neg_doc_id == b[i].neg_doc_id);
        }
    }
}
