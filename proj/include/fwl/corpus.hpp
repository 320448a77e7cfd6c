#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace fwl {

using TermId = std::int32_t;

struct Document {
    std::string id;
    std::vector<TermId> tokens;

    std::size_t length() const { return tokens.size(); }
};

struct Query {
    std::string id;
    std::vector<TermId> tokens;
};

/// One relevance judgment: non-negative integer grade for (query, doc).
struct Judgment {
    std::string query_id;
    std::string doc_id;
    int grade = 0;
};

/// Document collection plus the term statistics BM25-style scorers need.
/// Immutable after construction; safe for concurrent reads.
struct Corpus {
    std::vector<Document> documents;
    std::unordered_map<std::string, std::size_t> doc_index;  // id -> position
    std::unordered_map<std::string, TermId> vocabulary;      // term -> dense index
    std::vector<std::string> terms;                          // index -> term
    std::size_t doc_count = 0;
    double avg_doc_len = 0.0;
    std::vector<std::int64_t> df;  // per-term document frequency

    const Document* find_doc(const std::string& id) const {
        auto it = doc_index.find(id);
        return it == doc_index.end() ? nullptr : &documents[it->second];
    }
    std::size_t vocab_size() const { return terms.size(); }
};

enum class LabelKind { Weak, Strong, Soft };

/// The triple <q, d+, d-> with one label channel. `uncertainty` is present
/// exactly when the label is a teacher-generated soft label.
struct PairwiseSample {
    std::string query_id;
    std::string pos_doc_id;
    std::string neg_doc_id;
    double label = 1.0;
    LabelKind label_kind = LabelKind::Strong;
    std::optional<double> uncertainty;
};

struct SyntheticSpec {
    int vocab_size = 2000;
    int num_topics = 8;
    int num_docs = 500;
    int num_queries = 60;
    int doc_len_min = 30;
    int doc_len_max = 80;
    int query_len_min = 2;
    int query_len_max = 5;
    // grade cut points on the query-doc topic-affinity score (cosine);
    // affinity >= thresholds[i] yields grade >= i+1
    std::vector<double> grade_thresholds = {0.55, 0.80};
    std::uint64_t seed = 42;

    void validate() const;  // throws std::invalid_argument naming the field
};

struct SyntheticCorpus {
    Corpus corpus;
    std::vector<Query> queries;
    std::vector<Judgment> judgments;
};

/// Lowercases and splits on non-alphanumeric runs; empty tokens dropped.
std::vector<std::string> tokenize(const std::string& text);

/// Builds corpus statistics over documents given as (id, token strings).
/// Vocabulary indices are assigned in first-seen order.
/// Throws std::invalid_argument on duplicate doc ids.
Corpus build_corpus(const std::vector<std::pair<std::string, std::vector<std::string>>>& docs);

/// Loads a docs/queries/qrels triple in the formats described in the README.
/// Throws std::runtime_error with a line number on malformed input and with
/// the offending ids on dangling references.
SyntheticCorpus load_trec(const std::string& docs_path, const std::string& queries_path,
                          const std::string& qrels_path);

/// Deterministic synthetic corpus: latent topic mixtures drive both token
/// sampling and graded relevance, so ground truth is independent of any
/// term-matching annotator. Every query is guaranteed >= 1 doc of grade >= 1.
SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

/// All strict-contrast pairs (grade(pos) > grade(neg)) per query, capped by
/// deterministic seeded subsampling. Strong pairs carry hard label 1.0.
std::vector<PairwiseSample> make_pairs(const std::vector<Judgment>& judgments,
                                       std::size_t max_pairs_per_query, std::uint64_t seed);

/// Judgment lookup: query -> (doc -> grade).
using JudgmentMap = std::unordered_map<std::string, std::unordered_map<std::string, int>>;
JudgmentMap index_judgments(const std::vector<Judgment>& judgments);

}  // namespace fwl
