#include "fwl/annotate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "fwl/rng.hpp"

namespace fwl {

AnnotatorKind AnnotatorKind::make_bm25(double k1, double b) {
    if (!(k1 > 0.0)) throw std::invalid_argument("bm25: k1 must be > 0");
    if (b < 0.0 || b > 1.0) throw std::invalid_argument("bm25: b must be in [0,1]");
    AnnotatorKind k;
    k.tag = Tag::BM25;
    k.bm25 = {k1, b};
    return k;
}

AnnotatorKind AnnotatorKind::make_synthetic(double quality, std::uint64_t seed) {
    if (quality < 0.0 || quality > 1.0)
        throw std::invalid_argument("synthetic annotator: quality must be in [0,1]");
    AnnotatorKind k;
    k.tag = Tag::Synthetic;
    k.synthetic = {quality, seed};
    return k;
}

std::string AnnotatorKind::name() const {
    switch (tag) {
        case Tag::BM25: return "bm25";
        case Tag::TFIDF: return "tfidf";
        case Tag::BTO: return "bto";
        case Tag::Synthetic: {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "synthetic(%.2f)", synthetic.quality);
            return buf;
        }
    }
    return "?";
}

namespace {

// tf of each distinct query term in the doc
std::unordered_map<TermId, int> term_freqs(const Document& doc) {
    std::unordered_map<TermId, int> tf;
    for (TermId t : doc.tokens) ++tf[t];
    return tf;
}

}  // namespace

double score(const AnnotatorKind& kind, const Corpus& corpus, const Query& query,
             const Document& doc) {
    if (kind.tag == AnnotatorKind::Tag::Synthetic)
        throw std::logic_error("synthetic annotator labels pairs, not documents");

    auto tf = term_freqs(doc);
    // accumulate over distinct query terms in term-id order so the score is
    // exactly invariant to query token permutations; duplicate query terms
    // weight their term's contribution by multiplicity
    std::vector<std::pair<TermId, int>> qterms;
    {
        std::unordered_map<TermId, int> counts;
        for (TermId t : query.tokens) ++counts[t];
        qterms.assign(counts.begin(), counts.end());
        std::sort(qterms.begin(), qterms.end());
    }

    const double n_docs = static_cast<double>(corpus.doc_count);
    double s = 0.0;
    for (auto [t, mult] : qterms) {
        auto it = tf.find(t);
        double f = it == tf.end() ? 0.0 : static_cast<double>(it->second);
        if (f <= 0.0) continue;
        double contrib = 0.0;
        switch (kind.tag) {
            case AnnotatorKind::Tag::BM25: {
                double df = static_cast<double>(corpus.df[t]);
                double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
                double len_norm =
                    1.0 - kind.bm25.b + kind.bm25.b * (static_cast<double>(doc.length()) /
                                                       (corpus.avg_doc_len > 0 ? corpus.avg_doc_len : 1.0));
                contrib = idf * f * (kind.bm25.k1 + 1.0) / (f + kind.bm25.k1 * len_norm);
                break;
            }
            case AnnotatorKind::Tag::TFIDF: {
                double df = static_cast<double>(corpus.df[t]);
                double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
                contrib = f * idf;
                break;
            }
            case AnnotatorKind::Tag::BTO:
                contrib = 1.0;
                break;
            case AnnotatorKind::Tag::Synthetic:
                break;  // unreachable
        }
        s += static_cast<double>(mult) * contrib;
    }
    return s;
}

double weak_pairwise_label(double score_pos, double score_neg, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("weak_pairwise_label: tau must be > 0");
    if (!std::isfinite(score_pos) || !std::isfinite(score_neg))
        throw std::invalid_argument("weak_pairwise_label: scores must be finite");
    double z = tau * (score_pos - score_neg);
    // evaluate so that label(a,b) + label(b,a) == 1 holds bit-exactly and
    // saturation never escapes the open interval
    double e = std::exp(-std::abs(z));
    double big = 1.0 / (1.0 + e);
    static const double hi = std::nextafter(1.0, 0.0);
    big = std::min(big, hi);
    return z >= 0.0 ? big : 1.0 - big;
}

double synthetic_pair_label(double quality, int true_direction, std::uint64_t seed,
                            const std::string& pair_key) {
    if (quality < 0.0 || quality > 1.0)
        throw std::invalid_argument("synthetic_pair_label: quality must be in [0,1]");
    if (true_direction != 0 && true_direction != 1)
        throw std::invalid_argument("synthetic_pair_label: true_direction must be 0 or 1");
    constexpr double eps = 0.05;
    double u = hash_to_unit(splitmix64(seed ^ fnv1a64(pair_key)));
    bool agree = u < quality;
    int dir = agree ? true_direction : 1 - true_direction;
    return dir == 1 ? 1.0 - eps : eps;
}

std::vector<ScoredDoc> rank_by_annotator(const AnnotatorKind& kind, const Corpus& corpus,
                                         const Query& query, std::size_t top_k) {
    std::vector<ScoredDoc> scored;
    scored.reserve(corpus.documents.size());
    for (const auto& d : corpus.documents) scored.push_back({d.id, score(kind, corpus, query, d)});
    std::sort(scored.begin(), scored.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (scored.size() > top_k) scored.resize(top_k);
    return scored;
}

namespace {

// Canonicalizes the hash key to the id-ordered orientation so that every
// consumer of the synthetic annotator sees the same flip decision for the
// same unordered pair.
double synthetic_label_for(const SyntheticAnnotator& ann, const std::string& qid,
                           const std::string& pos, const std::string& neg) {
    const bool pos_first = pos < neg;
    const std::string& u = pos_first ? pos : neg;
    const std::string& v = pos_first ? neg : pos;
    // true direction in canonical orientation: does u beat v?
    int dir_uv = pos_first ? 1 : 0;
    double label_uv =
        synthetic_pair_label(ann.quality, dir_uv, ann.seed, qid + "|" + u + "|" + v);
    return pos_first ? label_uv : 1.0 - label_uv;
}

std::vector<PairwiseSample> annotate_synthetic(const SyntheticAnnotator& ann,
                                               const std::vector<Judgment>& judgments,
                                               std::size_t max_pairs_per_query,
                                               std::uint64_t seed) {
    // candidate pairs = strict-contrast judged pairs; the annotator then
    // reproduces or flips each true direction according to its quality
    auto pairs = make_pairs(judgments, max_pairs_per_query, derive_seed(seed, "synthetic-pairs"));
    std::vector<PairwiseSample> out;
    out.reserve(pairs.size());
    for (auto& p : pairs) {
        double label = synthetic_label_for(ann, p.query_id, p.pos_doc_id, p.neg_doc_id);
        out.push_back(PairwiseSample{p.query_id, p.pos_doc_id, p.neg_doc_id, label,
                                     LabelKind::Weak, std::nullopt});
    }
    return out;
}

}  // namespace

std::vector<ScoredDoc> rank_by_synthetic(const SyntheticAnnotator& ann, const std::string& query_id,
                                         const std::unordered_map<std::string, int>& grades,
                                         const std::vector<std::string>& candidates) {
    std::vector<std::string> ids = candidates;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    const std::size_t n = ids.size();
    std::vector<double> scores(n, 0.0);
    auto grade_of = [&](const std::string& id) {
        auto it = grades.find(id);
        return it == grades.end() ? 0 : it->second;
    };
    if (n == 1) {
        return {ScoredDoc{ids[0], 0.5}};
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            int gi = grade_of(ids[i]), gj = grade_of(ids[j]);
            double lij;  // label "i beats j"
            if (gi == gj) {
                lij = 0.5;
            } else if (gi > gj) {
                lij = synthetic_label_for(ann, query_id, ids[i], ids[j]);
            } else {
                lij = 1.0 - synthetic_label_for(ann, query_id, ids[j], ids[i]);
            }
            scores[i] += lij;
            scores[j] += 1.0 - lij;
        }
    }
    std::vector<ScoredDoc> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back({ids[i], scores[i] / static_cast<double>(n - 1)});
    std::sort(out.begin(), out.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    return out;
}

std::vector<PairwiseSample> annotate_dataset(const AnnotatorKind& kind, const Corpus& corpus,
                                             const std::vector<Query>& queries,
                                             const std::vector<Judgment>& judgments,
                                             std::size_t candidate_pool_size,
                                             std::size_t max_pairs_per_query, std::uint64_t seed,
                                             double tau) {
    if (corpus.documents.empty())
        throw std::invalid_argument("annotate_dataset: corpus is empty");
    if (kind.tag == AnnotatorKind::Tag::Synthetic)
        return annotate_synthetic(kind.synthetic, judgments, max_pairs_per_query, seed);

    std::vector<PairwiseSample> out;
    for (const auto& q : queries) {
        auto pool = rank_by_annotator(kind, corpus, q, candidate_pool_size);
        // z-normalize pool scores so tau has a stable meaning across queries
        double mean = 0.0;
        for (const auto& sd : pool) mean += sd.score;
        mean /= pool.empty() ? 1.0 : static_cast<double>(pool.size());
        double var = 0.0;
        for (const auto& sd : pool) var += (sd.score - mean) * (sd.score - mean);
        var /= pool.empty() ? 1.0 : static_cast<double>(pool.size());
        double sd_dev = std::sqrt(var);
        if (sd_dev == 0.0) continue;  // no score contrast anywhere in the pool
        std::vector<double> z(pool.size());
        for (std::size_t i = 0; i < pool.size(); ++i) z[i] = (pool[i].score - mean) / sd_dev;

        std::vector<PairwiseSample> pairs;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            for (std::size_t j = i + 1; j < pool.size(); ++j) {
                if (pool[i].score == pool[j].score) continue;
                // pool is sorted descending, so i is the higher-score doc
                double label = weak_pairwise_label(z[i], z[j], tau);
                pairs.push_back(PairwiseSample{q.id, pool[i].doc_id, pool[j].doc_id, label,
                                               LabelKind::Weak, std::nullopt});
            }
        }
        if (pairs.size() > max_pairs_per_query) {
            auto rng = make_rng(derive_seed(seed, "annotate-pairs", fnv1a64(q.id)));
            std::shuffle(pairs.begin(), pairs.end(), rng);
            pairs.resize(max_pairs_per_query);
        }
        out.insert(out.end(), pairs.begin(), pairs.end());
    }
    return out;
}

}  // namespace fwl
