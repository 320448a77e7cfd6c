#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fwl/annotate.hpp"
#include "fwl/corpus.hpp"
#include "fwl/student.hpp"

namespace fwl {

/// Docs ordered by score descending, ties broken by ascending doc id.
struct RankedList {
    std::string query_id;
    std::vector<ScoredDoc> docs;
};

/// Tournament readout for the pairwise student: score(d) is the mean
/// predicted win probability of d against every other candidate. A single
/// candidate scores 0.5 by convention. Output is independent of the
/// candidate input order.
RankedList rank_with_student(const StudentParams& params, const Corpus& corpus, const Query& query,
                             const std::vector<std::string>& candidates);

/// AP over the top `cutoff` ranks; R counts all judged docs with grade >= 1
/// for the query. Returns 0 when R == 0 (such queries are excluded from MAP
/// means by the report builder).
double average_precision(const RankedList& ranked,
                         const std::unordered_map<std::string, int>& grades,
                         std::size_t cutoff = 1000);

/// Graded-gain nDCG: DCG@k = sum (2^grade - 1) / log2(rank + 1), normalized
/// by the ideal DCG over all judged grades. Returns 0 when IDCG == 0.
double ndcg_at(const RankedList& ranked, const std::unordered_map<std::string, int>& grades,
               std::size_t k = 20);

struct MetricReport {
    std::vector<std::string> query_ids;
    std::vector<double> ap;
    std::vector<double> ndcg20;
    std::vector<bool> has_relevant;  // grade >= 1 exists for the query
    double map = 0.0;                // mean AP over queries with relevant docs
    double mean_ndcg20 = 0.0;
};

/// Builds the aggregate report; queries without relevant docs are excluded
/// from both means (TREC convention).
MetricReport make_report(std::vector<std::string> query_ids, std::vector<double> ap,
                         std::vector<double> ndcg20, std::vector<bool> has_relevant);

struct TTestResult {
    double t_stat = 0.0;
    double p_value = 1.0;
    double corrected_p = 1.0;
    bool significant_at_0_05 = false;
    int n = 0;
};

/// Paired two-tailed t-test with Bonferroni correction:
/// corrected_p = min(1, p * num_comparisons). Zero-variance differences use
/// the t=0,p=1 (all zero) / t=+-inf,p=0 (constant nonzero) conventions.
TTestResult paired_ttest(std::span<const double> a, std::span<const double> b,
                         int num_comparisons);

/// Two-tailed p-value of Student's t at `dof` degrees of freedom, via the
/// regularized incomplete beta function.
double t_two_tailed_p(double t, double dof);

/// Regularized incomplete beta I_x(a, b); exposed for the metric oracles.
double incomplete_beta(double a, double b, double x);

struct FoldPlan {
    struct Fold {
        std::vector<std::string> test;
        std::vector<std::string> train;       // 80% of the non-test queries
        std::vector<std::string> validation;  // the held-back 20%
    };
    std::vector<Fold> folds;
    std::uint64_t seed = 0;
};

/// Seeded split of queries into `num_folds` disjoint, exhaustive test folds;
/// within each fold's complement an 80/20 train/validation split.
FoldPlan make_folds(const std::vector<std::string>& query_ids, int num_folds, std::uint64_t seed,
                    double train_fraction = 0.8);

/// Evaluation candidate pool: top `top_n` docs by BM25 union all judged docs.
std::vector<std::string> eval_candidates(const Corpus& corpus, const Query& query,
                                         const JudgmentMap& judgments, std::size_t top_n = 200);

/// Per-query metrics for pre-ranked lists.
MetricReport evaluate_rankings(const std::vector<RankedList>& rankings,
                               const JudgmentMap& judgments);

}  // namespace fwl
