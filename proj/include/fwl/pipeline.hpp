#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fwl/annotate.hpp"
#include "fwl/corpus.hpp"
#include "fwl/eval.hpp"
#include "fwl/student.hpp"
#include "fwl/teacher.hpp"

namespace fwl {

enum class StrategyKind { WA, NN_W, NN_S, NN_SplusW, NN_WtoS, FWL };

std::string strategy_name(StrategyKind s);
std::optional<StrategyKind> parse_strategy(const std::string& name);

struct TrainingConfig {
    StudentConfig student;
    LrSchedule sched;          // eta0, decay and Eq.-style beta
    LossConfig loss_cfg;
    KernelParams kernel;       // length_scale <= 0 selects the median heuristic
    int cluster_count = 0;     // <= 0 selects max(1, |D_s| / 50)
    int epochs_step1 = 5;
    int epochs_step3 = 3;
    std::size_t eval_pool = 200;
    std::uint64_t seed = 42;

    void validate() const;
};

/// Everything one strategy run consumes. The corpus/query/judgment refs stay
/// owned by the caller.
struct RunData {
    const Corpus* corpus = nullptr;
    const QueryIndex* queries = nullptr;
    const JudgmentMap* judgments = nullptr;  // full judgments, used for eval
    std::vector<PairwiseSample> weak;        // D_w
    std::vector<PairwiseSample> strong;      // D_s
    std::vector<std::string> test_queries;
    AnnotatorKind annotator = AnnotatorKind::make_bm25();
};

struct RunResult {
    StrategyKind strategy = StrategyKind::FWL;
    std::optional<StudentParams> params;  // absent for WA
    MetricReport metrics;
    double wall_clock_sec = 0.0;
    std::string config_echo;
};

/// Alg. step 1: train the student on the weakly-annotated data (eta2 == 1).
StudentParams step1_pretrain(const RunData& data, const TrainingConfig& config);

/// Step counter value after step 1; step 3 continues the learning-rate
/// schedule from here.
std::int64_t step1_t_end(const RunData& data, const TrainingConfig& config);

/// Alg. step 2: freeze the representation and fit the clustered GP on the
/// strong data in psi-space (both pair orientations, labels 1/0).
ClusteredGP step2_fit_teacher(const StudentParams& params, const RunData& data,
                              const TrainingConfig& config);

/// Alg. step 3: label D_w u D_s with the teacher, then fine-tune with
/// per-sample step size eta1(t) * exp(-beta * Sigma).
StudentParams step3_finetune(StudentParams params, const ClusteredGP& teacher,
                             const RunData& data, const TrainingConfig& config, std::int64_t t0,
                             std::vector<double>* eta2_log = nullptr);

/// Fine-tuning core shared by step 3 and the pretrain-then-finetune baseline.
StudentParams finetune_on_soft(StudentParams params, const std::vector<SoftSample>& soft,
                               const RunData& data, const TrainingConfig& config, std::int64_t t0,
                               std::vector<double>* eta2_log = nullptr);

/// psi under fixed parameters, as the teacher sees it.
RepresentFn make_represent_fn(const StudentParams& params, const Corpus& corpus,
                              const QueryIndex& queries);

/// One epoch of the alternating strong/weak scheme: the shuffled weak samples
/// are consumed exactly once, interleaved with equally many strong samples
/// drawn with replacement.
std::vector<PairwiseSample> make_alternating_epoch(const std::vector<PairwiseSample>& weak,
                                                   const std::vector<PairwiseSample>& strong,
                                                   std::uint64_t seed);

RunResult run_fwl(const RunData& data, const TrainingConfig& config);
RunResult run_baseline(StrategyKind strategy, const RunData& data, const TrainingConfig& config);
RunResult run_strategy(StrategyKind strategy, const RunData& data, const TrainingConfig& config);

/// Ranks the given test queries with a trained student (or the annotator for
/// WA) over the BM25-union-judged candidate pool.
MetricReport evaluate_strategy(const RunResult& result, const RunData& data,
                               const TrainingConfig& config);

/// Dataset construction knobs for the experiment drivers.
struct DatasetOptions {
    std::size_t strong_pairs_per_query = 5;
    std::size_t weak_pool_size = 50;
    std::size_t weak_pairs_per_query = 40;
    double tau = 1.0;
};

struct CvResult {
    FoldPlan plan;
    std::vector<RunResult> fold_results;    // one per fold
    MetricReport aggregated;                // each query counted once
};

/// 3-fold cross validation split by query id: strong pairs come from each
/// fold's 80% train split, weak pairs from all non-test queries, metrics from
/// the held-out fold.
CvResult cross_validate(StrategyKind strategy, const SyntheticCorpus& data,
                        const AnnotatorKind& annotator, const TrainingConfig& config,
                        const DatasetOptions& opts, int num_folds = 3);

struct SensitivitySeedResult {
    std::uint64_t seed = 0;
    double wa_map = 0.0;
    double fwl_map = 0.0;
    double improvement_pct = 0.0;
};

struct SensitivityRow {
    AnnotatorKind annotator;
    std::vector<SensitivitySeedResult> per_seed;
    double median_wa_map = 0.0;
    double median_fwl_map = 0.0;
    double median_improvement_pct = 0.0;
};

/// Runs WA and FWL with shared seeds for each annotator over seeded 70/30
/// train/test query splits. Rows come back ordered by WA metric ascending.
std::vector<SensitivityRow> sensitivity_experiment(const std::vector<AnnotatorKind>& annotators,
                                                   const SyntheticCorpus& data,
                                                   const TrainingConfig& config,
                                                   const DatasetOptions& opts, int num_seeds);

struct Toy1dRow {
    double x = 0.0;
    double true_y = 0.0;
    double weak_y = 0.0;
    double step1_fit = 0.0;
    double teacher_mean = 0.0;
    double teacher_sigma = 0.0;
    double eta2 = 0.0;
    double step3_fit = 0.0;
    bool is_strong = false;
};

struct Toy1dResult {
    std::vector<Toy1dRow> rows;
    double beta = 0.0;
    double noise_var = 0.0;
};

/// Self-contained 1-D illustration of the three training steps: a local-basis
/// student fits a biased weak signal, a GP teacher observes the true function
/// at a handful of points, and confidence-modulated fine-tuning corrects the
/// student only where the teacher is certain.
Toy1dResult toy1d_demo(std::uint64_t seed);

}  // namespace fwl
