#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fwl/annotate.hpp"
#include "fwl/corpus.hpp"
#include "fwl/pipeline.hpp"

namespace fwl {

/// Fully resolved run configuration. Resolution order: built-in defaults,
/// then the config file, then key=value overrides; unknown keys and
/// constraint violations are rejected with the offending key named.
struct Config {
    std::uint64_t seed = 42;

    // corpus.*
    SyntheticSpec synth;
    std::string docs_file;     // when set (with queries/qrels), load instead
    std::string queries_file;  // of generating
    std::string qrels_file;

    // annotate.*
    std::string annotate_kind = "bm25";
    double bm25_k1 = 1.2;
    double bm25_b = 0.75;
    double synthetic_quality = 0.7;
    double tau = 1.0;
    std::size_t pool_size = 50;
    std::size_t weak_pairs_per_query = 40;

    // data.*
    std::size_t strong_pairs_per_query = 5;

    // student.* / train.*
    StudentConfig student;
    LrSchedule sched;
    LossConfig loss_cfg;
    int epochs_step1 = 5;
    int epochs_step3 = 3;

    // teacher.*
    KernelParams kernel{1.0, 0.0, 1e-4};  // length_scale 0 = median heuristic
    int clusters = 0;                     // 0 = auto

    // eval.* / cv.*
    std::size_t eval_pool = 200;
    int cv_folds = 3;
    double train_split = 0.7;

    // sweep.* / sensitivity.*
    std::vector<double> sweep_betas = {0.0, 0.5, 1.0, 2.0, 5.0};
    std::vector<double> sensitivity_qualities = {0.6, 0.7, 0.8, 0.9};
    int sensitivity_seeds = 5;
    bool sensitivity_lexical = true;

    /// Resolved key=value pairs in registry order, for the artifact audit
    /// trail.
    std::vector<std::pair<std::string, std::string>> echo;

    TrainingConfig training() const;
    DatasetOptions dataset_options() const;
    /// Builds the annotator; the synthetic annotator draws its flip seed
    /// from the run seed so datasets and rankings agree.
    AnnotatorKind annotator() const;
};

/// Parses and validates. `path` may be empty (defaults only); `overrides`
/// entries look like "train.beta=2.0". Throws std::runtime_error with the
/// offending key on unknown keys, type mismatches, or constraint violations.
Config parse_config(const std::string& path, const std::vector<std::string>& overrides);

/// The default configuration as a commented config-file text.
std::string default_config_text();

}  // namespace fwl
