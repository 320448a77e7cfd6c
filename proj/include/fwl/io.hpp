#pragma once

#include <string>
#include <vector>

#include "fwl/corpus.hpp"
#include "fwl/pipeline.hpp"
#include "fwl/student.hpp"
#include "fwl/teacher.hpp"

namespace fwl {

/// Lines prepended (each as "# <line>") to text artifacts: the resolved
/// config echo plus anything run-specific.
using HeaderLines = std::vector<std::string>;

std::string format_double(double v);  // shortest round-trip-exact decimal

// ---- datasets ----------------------------------------------------------

/// One sample per line: <qid>\t<pos>\t<neg>\t<label>\t<kind>.
/// Rejects soft samples (those carry an uncertainty column; see below).
void save_pairwise_tsv(const std::string& path, const std::vector<PairwiseSample>& samples,
                       const HeaderLines& header = {});
std::vector<PairwiseSample> load_pairwise_tsv(const std::string& path);

/// One soft sample per line: <qid>\t<pos>\t<neg>\t<soft_label>\t<sigma>.
void save_soft_tsv(const std::string& path, const std::vector<SoftSample>& samples,
                   const HeaderLines& header = {});
std::vector<SoftSample> load_soft_tsv(const std::string& path);

/// Corpus/queries/qrels in the load_trec formats.
void save_corpus_tsv(const std::string& docs_path, const Corpus& corpus);
void save_queries_tsv(const std::string& path, const Corpus& corpus,
                      const std::vector<Query>& queries);
void save_qrels(const std::string& path, const std::vector<Judgment>& judgments);

// ---- checkpoints -------------------------------------------------------

/// Versioned binary dump with a shape header; round-trips bit-exactly.
void save_student(const std::string& path, const StudentParams& params);
StudentParams load_student(const std::string& path);

// ---- reports -----------------------------------------------------------

struct MetricRow {
    std::string strategy;
    std::uint64_t seed = 0;
    int fold = 0;
    std::string query_id;
    double ap = 0.0;
    double ndcg20 = 0.0;
};

/// CSV with header `strategy,seed,fold,query_id,ap,ndcg20`; deterministic
/// byte-for-byte given identical rows and header lines.
void save_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows,
                      const HeaderLines& header = {});

/// JSON-lines run records, one per (strategy, seed, fold).
struct RunRecord {
    std::string strategy;
    std::uint64_t seed = 0;
    int fold = 0;
    double map = 0.0;
    double mean_ndcg20 = 0.0;
    double wall_clock_sec = 0.0;
    std::string config_echo;
};
void save_run_jsonl(const std::string& path, const std::vector<RunRecord>& records);

void save_significance_json(const std::string& path, const std::string& comparison,
                            const TTestResult& t, const HeaderLines& header = {});

void save_toy1d_csv(const std::string& path, const Toy1dResult& toy,
                    const HeaderLines& header = {});

void save_sensitivity_csv(const std::string& path, const std::vector<SensitivityRow>& rows,
                          const HeaderLines& header = {});

struct BetaSweepRow {
    double beta = 0.0;
    double map = 0.0;
    double mean_ndcg20 = 0.0;
};
void save_beta_sweep_csv(const std::string& path, const std::vector<BetaSweepRow>& rows,
                         const HeaderLines& header = {});

}  // namespace fwl
