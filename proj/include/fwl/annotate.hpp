#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "fwl/corpus.hpp"

namespace fwl {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Pair-labeling annotator of controllable quality: emits the true pair
/// direction with probability `quality`, the flipped one otherwise.
struct SyntheticAnnotator {
    double quality = 0.7;
    std::uint64_t seed = 0;
};

struct AnnotatorKind {
    enum class Tag { BM25, TFIDF, BTO, Synthetic };
    Tag tag = Tag::BM25;
    Bm25Params bm25;
    SyntheticAnnotator synthetic;

    static AnnotatorKind make_bm25(double k1 = 1.2, double b = 0.75);
    static AnnotatorKind make_tfidf() { return AnnotatorKind{Tag::TFIDF, {}, {}}; }
    static AnnotatorKind make_bto() { return AnnotatorKind{Tag::BTO, {}, {}}; }
    static AnnotatorKind make_synthetic(double quality, std::uint64_t seed);

    std::string name() const;
};

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;
};

/// Query-document score under the given annotator.
///   BM25:  sum over query terms of idf(t) * tf*(k1+1) / (tf + k1*(1-b+b*len/avgdl))
///          with idf(t) = ln(1 + (N-df+0.5)/(df+0.5))
///   TFIDF: sum of tf * idf(t)
///   BTO:   count of query terms present in the doc
/// Synthetic annotators label pairs, not documents: throws std::logic_error.
double score(const AnnotatorKind& kind, const Corpus& corpus, const Query& query,
             const Document& doc);

/// Weak pairwise label: logistic(tau * (score_pos - score_neg)).
/// Antisymmetric by construction. Throws on non-finite scores or tau <= 0.
double weak_pairwise_label(double score_pos, double score_neg, double tau);

/// Label for the synthetic annotator: 1-eps (agreeing with true_direction)
/// with probability `quality`, eps otherwise; eps = 0.05. Deterministic per
/// (seed, pair_key).
double synthetic_pair_label(double quality, int true_direction, std::uint64_t seed,
                            const std::string& pair_key);

/// Builds the weak dataset D_w: per query, the top `candidate_pool_size` docs
/// by annotator score form the pool; all distinct-score pairs within the pool
/// are labeled, then capped per query by seeded subsampling. Scores are
/// z-normalized per query pool before the logistic. The synthetic annotator
/// instead labels strict-contrast judged pairs with quality-controlled flips.
std::vector<PairwiseSample> annotate_dataset(const AnnotatorKind& kind, const Corpus& corpus,
                                             const std::vector<Query>& queries,
                                             const std::vector<Judgment>& judgments,
                                             std::size_t candidate_pool_size,
                                             std::size_t max_pairs_per_query, std::uint64_t seed,
                                             double tau = 1.0);

/// Scores every doc in the corpus for the query and returns the top-k by
/// (score desc, id asc). Used for candidate pooling and the WA baseline.
std::vector<ScoredDoc> rank_by_annotator(const AnnotatorKind& kind, const Corpus& corpus,
                                         const Query& query, std::size_t top_k);

/// Ranking induced by the pair-labeling synthetic annotator: tournament score
/// of each candidate is its mean pair label against the others (equal-grade
/// pairs contribute 0.5). Pair flips are drawn once per unordered pair from
/// the annotator's own seed, so the ranking is consistent with the labels
/// annotate_dataset emits.
std::vector<ScoredDoc> rank_by_synthetic(const SyntheticAnnotator& ann, const std::string& query_id,
                                         const std::unordered_map<std::string, int>& grades,
                                         const std::vector<std::string>& candidates);

}  // namespace fwl
