#include "fwl/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fwl/rng.hpp"

namespace fwl {

std::string strategy_name(StrategyKind s) {
    switch (s) {
        case StrategyKind::WA: return "wa";
        case StrategyKind::NN_W: return "nn-w";
        case StrategyKind::NN_S: return "nn-s";
        case StrategyKind::NN_SplusW: return "nn-sw";
        case StrategyKind::NN_WtoS: return "nn-wts";
        case StrategyKind::FWL: return "fwl";
    }
    return "?";
}

std::optional<StrategyKind> parse_strategy(const std::string& name) {
    if (name == "wa") return StrategyKind::WA;
    if (name == "nn-w") return StrategyKind::NN_W;
    if (name == "nn-s") return StrategyKind::NN_S;
    if (name == "nn-sw") return StrategyKind::NN_SplusW;
    if (name == "nn-wts") return StrategyKind::NN_WtoS;
    if (name == "fwl") return StrategyKind::FWL;
    return std::nullopt;
}

void TrainingConfig::validate() const {
    if (epochs_step1 < 1) throw std::invalid_argument("config: epochs_step1 must be >= 1");
    if (epochs_step3 < 1) throw std::invalid_argument("config: epochs_step3 must be >= 1");
    if (!(sched.eta0 > 0.0)) throw std::invalid_argument("config: eta0 must be > 0");
    if (sched.decay < 0.0) throw std::invalid_argument("config: decay must be >= 0");
    if (sched.beta < 0.0) throw std::invalid_argument("config: beta must be >= 0");
    if (loss_cfg.l2_lambda < 0.0) throw std::invalid_argument("config: l2_lambda must be >= 0");
    if (!(kernel.signal_var > 0.0)) throw std::invalid_argument("config: signal_var must be > 0");
    if (kernel.noise_var < 0.0) throw std::invalid_argument("config: noise_var must be >= 0");
    if (student.embedding_dim < 1)
        throw std::invalid_argument("config: embedding_dim must be >= 1");
    for (int h : student.hidden)
        if (h < 1) throw std::invalid_argument("config: hidden widths must be >= 1");
}

namespace {

std::string describe(const TrainingConfig& c, StrategyKind s) {
    std::ostringstream os;
    os << "strategy=" << strategy_name(s) << " seed=" << c.seed
       << " embedding_dim=" << c.student.embedding_dim << " hidden=";
    for (std::size_t i = 0; i < c.student.hidden.size(); ++i)
        os << (i ? "," : "") << c.student.hidden[i];
    os << " eta0=" << c.sched.eta0 << " decay=" << c.sched.decay << " beta=" << c.sched.beta
       << " l2_lambda=" << c.loss_cfg.l2_lambda << " epochs_step1=" << c.epochs_step1
       << " epochs_step3=" << c.epochs_step3 << " signal_var=" << c.kernel.signal_var
       << " length_scale=" << c.kernel.length_scale << " noise_var=" << c.kernel.noise_var
       << " clusters=" << c.cluster_count << " eval_pool=" << c.eval_pool;
    return os.str();
}

int resolve_cluster_count(const TrainingConfig& config, std::size_t strong_size) {
    if (config.cluster_count > 0) return config.cluster_count;
    return std::max<int>(1, static_cast<int>(strong_size / 50));
}

}  // namespace

RepresentFn make_represent_fn(const StudentParams& params, const Corpus& corpus,
                              const QueryIndex& queries) {
    return [&params, &corpus, &queries](const PairwiseSample& s) {
        const Query& q = queries.get(s.query_id);
        const Document* pos = corpus.find_doc(s.pos_doc_id);
        const Document* neg = corpus.find_doc(s.neg_doc_id);
        if (!pos) throw std::invalid_argument("unknown doc id: " + s.pos_doc_id);
        if (!neg) throw std::invalid_argument("unknown doc id: " + s.neg_doc_id);
        ForwardTrace tr;
        represent(params, q.tokens, pos->tokens, neg->tokens, tr);
        return Eigen::Map<const Eigen::VectorXd>(tr.rep.data(), tr.rep.size()).eval();
    };
}

StudentParams step1_pretrain(const RunData& data, const TrainingConfig& config) {
    config.validate();
    if (data.weak.empty()) throw std::invalid_argument("step1_pretrain: D_w is empty");
    StudentParams params = init_student(config.student,
                                        static_cast<int>(data.corpus->vocab_size()), config.seed);
    auto train = augment_swapped(data.weak);
    std::int64_t t = 0;
    for (int e = 0; e < config.epochs_step1; ++e) {
        auto stats = train_pass(params, *data.corpus, *data.queries, train, config.sched,
                                config.loss_cfg, t, derive_seed(config.seed, "step1-epoch", e));
        t = stats.t_end;
    }
    return params;
}

std::int64_t step1_t_end(const RunData& data, const TrainingConfig& config) {
    return static_cast<std::int64_t>(config.epochs_step1) * 2 *
           static_cast<std::int64_t>(data.weak.size());
}

ClusteredGP step2_fit_teacher(const StudentParams& params, const RunData& data,
                              const TrainingConfig& config) {
    if (data.strong.empty()) throw std::invalid_argument("step2_fit_teacher: D_s is empty");
    int k = resolve_cluster_count(config, data.strong.size());
    if (static_cast<int>(data.strong.size()) < k)
        throw std::invalid_argument("step2_fit_teacher: |D_s| smaller than cluster count");

    // both pair orientations: the GP sees labels 1 and 0 and learns the
    // direction structure of psi-space rather than a constant
    auto aug = augment_swapped(data.strong);
    auto rep = make_represent_fn(params, *data.corpus, *data.queries);
    Eigen::MatrixXd X(aug.size(), params.rep_dim());
    Eigen::VectorXd y(aug.size());
    for (std::size_t i = 0; i < aug.size(); ++i) {
        X.row(i) = rep(aug[i]).transpose();
        y(i) = aug[i].label;
    }
    KernelParams kp = config.kernel;
    if (kp.length_scale <= 0.0) kp.length_scale = median_heuristic_length(X);
    return fit_clustered(X, y, k, kp, derive_seed(config.seed, "teacher-kmeans"));
}

StudentParams finetune_on_soft(StudentParams params, const std::vector<SoftSample>& soft,
                               const RunData& data, const TrainingConfig& config, std::int64_t t0,
                               std::vector<double>* eta2_log) {
    std::vector<PairwiseSample> samples;
    samples.reserve(soft.size());
    for (const auto& s : soft) samples.push_back(s.sample);
    auto train = augment_swapped(samples);
    std::int64_t t = t0;
    for (int e = 0; e < config.epochs_step3; ++e) {
        auto stats = train_pass(params, *data.corpus, *data.queries, train, config.sched,
                                config.loss_cfg, t, derive_seed(config.seed, "step3-epoch", e),
                                eta2_log);
        t = stats.t_end;
    }
    return params;
}

StudentParams step3_finetune(StudentParams params, const ClusteredGP& teacher,
                             const RunData& data, const TrainingConfig& config, std::int64_t t0,
                             std::vector<double>* eta2_log) {
    std::vector<PairwiseSample> all = data.weak;
    all.insert(all.end(), data.strong.begin(), data.strong.end());
    auto soft = build_soft_dataset(teacher, make_represent_fn(params, *data.corpus, *data.queries),
                                   all);
    return finetune_on_soft(std::move(params), soft, data, config, t0, eta2_log);
}

std::vector<PairwiseSample> make_alternating_epoch(const std::vector<PairwiseSample>& weak,
                                                   const std::vector<PairwiseSample>& strong,
                                                   std::uint64_t seed) {
    if (strong.empty())
        throw std::invalid_argument("make_alternating_epoch: strong set is empty");
    std::vector<std::size_t> worder(weak.size());
    for (std::size_t i = 0; i < worder.size(); ++i) worder[i] = i;
    auto wrng = make_rng(derive_seed(seed, "alt-weak"));
    std::shuffle(worder.begin(), worder.end(), wrng);
    auto srng = make_rng(derive_seed(seed, "alt-strong"));
    std::uniform_int_distribution<std::size_t> pick(0, strong.size() - 1);
    std::vector<PairwiseSample> out;
    out.reserve(2 * weak.size());
    for (std::size_t i : worder) {
        out.push_back(weak[i]);
        out.push_back(strong[pick(srng)]);
    }
    return out;
}

MetricReport evaluate_strategy(const RunResult& result, const RunData& data,
                               const TrainingConfig& config) {
    std::vector<RankedList> rankings;
    rankings.reserve(data.test_queries.size());
    for (const auto& qid : data.test_queries) {
        const Query& q = data.queries->get(qid);
        auto candidates = eval_candidates(*data.corpus, q, *data.judgments, config.eval_pool);
        RankedList ranked;
        if (result.strategy == StrategyKind::WA) {
            ranked.query_id = qid;
            if (data.annotator.tag == AnnotatorKind::Tag::Synthetic) {
                static const std::unordered_map<std::string, int> empty;
                auto it = data.judgments->find(qid);
                ranked.docs = rank_by_synthetic(data.annotator.synthetic, qid,
                                                it == data.judgments->end() ? empty : it->second,
                                                candidates);
            } else {
                for (const auto& id : candidates) {
                    const Document* d = data.corpus->find_doc(id);
                    ranked.docs.push_back({id, score(data.annotator, *data.corpus, q, *d)});
                }
                std::sort(ranked.docs.begin(), ranked.docs.end(),
                          [](const ScoredDoc& a, const ScoredDoc& b) {
                              if (a.score != b.score) return a.score > b.score;
                              return a.doc_id < b.doc_id;
                          });
            }
        } else {
            ranked = rank_with_student(*result.params, *data.corpus, q, candidates);
        }
        rankings.push_back(std::move(ranked));
    }
    return evaluate_rankings(rankings, *data.judgments);
}

RunResult run_fwl(const RunData& data, const TrainingConfig& config) {
    return run_strategy(StrategyKind::FWL, data, config);
}

RunResult run_baseline(StrategyKind strategy, const RunData& data, const TrainingConfig& config) {
    if (strategy == StrategyKind::FWL)
        throw std::invalid_argument("run_baseline: FWL is not a baseline; use run_fwl");
    return run_strategy(strategy, data, config);
}

RunResult run_strategy(StrategyKind strategy, const RunData& data, const TrainingConfig& config) {
    config.validate();
    auto t_start = std::chrono::steady_clock::now();

    RunResult result;
    result.strategy = strategy;
    result.config_echo = describe(config, strategy);

    const int total_epochs = config.epochs_step1 + config.epochs_step3;
    switch (strategy) {
        case StrategyKind::WA:
            break;  // no training
        case StrategyKind::NN_W: {
            if (data.weak.empty()) throw std::invalid_argument("nn-w: D_w is empty");
            StudentParams params = init_student(
                config.student, static_cast<int>(data.corpus->vocab_size()), config.seed);
            auto train = augment_swapped(data.weak);
            std::int64_t t = 0;
            for (int e = 0; e < total_epochs; ++e)
                t = train_pass(params, *data.corpus, *data.queries, train, config.sched,
                               config.loss_cfg, t, derive_seed(config.seed, "step1-epoch", e))
                        .t_end;
            result.params = std::move(params);
            break;
        }
        case StrategyKind::NN_S: {
            if (data.strong.empty()) throw std::invalid_argument("nn-s: D_s is empty");
            StudentParams params = init_student(
                config.student, static_cast<int>(data.corpus->vocab_size()), config.seed);
            auto train = augment_swapped(data.strong);
            std::int64_t t = 0;
            for (int e = 0; e < total_epochs; ++e)
                t = train_pass(params, *data.corpus, *data.queries, train, config.sched,
                               config.loss_cfg, t, derive_seed(config.seed, "step1-epoch", e))
                        .t_end;
            result.params = std::move(params);
            break;
        }
        case StrategyKind::NN_SplusW: {
            if (data.weak.empty()) throw std::invalid_argument("nn-sw: D_w is empty");
            if (data.strong.empty()) throw std::invalid_argument("nn-sw: D_s is empty");
            StudentParams params = init_student(
                config.student, static_cast<int>(data.corpus->vocab_size()), config.seed);
            auto weak_aug = augment_swapped(data.weak);
            auto strong_aug = augment_swapped(data.strong);
            std::int64_t t = 0;
            for (int e = 0; e < total_epochs; ++e) {
                auto epoch = make_alternating_epoch(weak_aug, strong_aug,
                                                    derive_seed(config.seed, "alt-epoch", e));
                t = train_ordered(params, *data.corpus, *data.queries, epoch, config.sched,
                                  config.loss_cfg, t)
                        .t_end;
            }
            result.params = std::move(params);
            break;
        }
        case StrategyKind::NN_WtoS: {
            if (data.strong.empty()) throw std::invalid_argument("nn-wts: D_s is empty");
            StudentParams params = step1_pretrain(data, config);
            // plain fine-tune on D_s: a degenerate teacher that repeats the
            // strong labels with zero uncertainty, so eta2 == 1 throughout
            std::vector<SoftSample> soft;
            soft.reserve(data.strong.size());
            for (const auto& s : data.strong) {
                SoftSample d;
                d.sample = s;
                d.sample.label_kind = LabelKind::Soft;
                d.sample.uncertainty = 0.0;
                d.soft_label = s.label;
                d.uncertainty_value = 0.0;
                soft.push_back(std::move(d));
            }
            result.params = finetune_on_soft(std::move(params), soft, data, config,
                                             step1_t_end(data, config));
            break;
        }
        case StrategyKind::FWL: {
            StudentParams params = step1_pretrain(data, config);
            ClusteredGP teacher = step2_fit_teacher(params, data, config);
            result.params = step3_finetune(std::move(params), teacher, data, config,
                                           step1_t_end(data, config));
            break;
        }
    }

    result.metrics = evaluate_strategy(result, data, config);
    result.wall_clock_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

namespace {

std::vector<Query> filter_queries(const std::vector<Query>& all,
                                  const std::vector<std::string>& keep) {
    std::unordered_map<std::string, bool> keep_set;
    for (const auto& id : keep) keep_set[id] = true;
    std::vector<Query> out;
    for (const auto& q : all)
        if (keep_set.count(q.id)) out.push_back(q);
    return out;
}

std::vector<Judgment> filter_judgments(const std::vector<Judgment>& all,
                                       const std::vector<std::string>& keep) {
    std::unordered_map<std::string, bool> keep_set;
    for (const auto& id : keep) keep_set[id] = true;
    std::vector<Judgment> out;
    for (const auto& j : all)
        if (keep_set.count(j.query_id)) out.push_back(j);
    return out;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

CvResult cross_validate(StrategyKind strategy, const SyntheticCorpus& data,
                        const AnnotatorKind& annotator, const TrainingConfig& config,
                        const DatasetOptions& opts, int num_folds) {
    config.validate();
    std::vector<std::string> qids;
    qids.reserve(data.queries.size());
    for (const auto& q : data.queries) qids.push_back(q.id);
    if (static_cast<int>(qids.size()) < num_folds)
        throw std::invalid_argument("cross_validate: fewer queries than folds");

    QueryIndex qindex(data.queries);
    JudgmentMap jmap = index_judgments(data.judgments);

    CvResult cv;
    cv.plan = make_folds(qids, num_folds, config.seed);
    for (int f = 0; f < num_folds; ++f) {
        const auto& fold = cv.plan.folds[f];
        auto strong_j = filter_judgments(data.judgments, fold.train);
        auto strong = make_pairs(strong_j, opts.strong_pairs_per_query,
                                 derive_seed(config.seed, "strong-pairs", f));

        std::vector<std::string> non_test = fold.train;
        non_test.insert(non_test.end(), fold.validation.begin(), fold.validation.end());
        std::sort(non_test.begin(), non_test.end());
        auto weak_queries = filter_queries(data.queries, non_test);
        auto non_test_j = filter_judgments(data.judgments, non_test);
        auto weak = annotate_dataset(annotator, data.corpus, weak_queries, non_test_j,
                                     opts.weak_pool_size, opts.weak_pairs_per_query,
                                     derive_seed(config.seed, "weak", f), opts.tau);

        RunData rd;
        rd.corpus = &data.corpus;
        rd.queries = &qindex;
        rd.judgments = &jmap;
        rd.weak = std::move(weak);
        rd.strong = std::move(strong);
        rd.test_queries = fold.test;
        rd.annotator = annotator;

        TrainingConfig fc = config;
        fc.seed = derive_seed(config.seed, "fold-run", f);
        cv.fold_results.push_back(run_strategy(strategy, rd, fc));
    }

    std::vector<std::string> all_q;
    std::vector<double> ap, nd;
    std::vector<bool> rel;
    for (const auto& r : cv.fold_results) {
        all_q.insert(all_q.end(), r.metrics.query_ids.begin(), r.metrics.query_ids.end());
        ap.insert(ap.end(), r.metrics.ap.begin(), r.metrics.ap.end());
        nd.insert(nd.end(), r.metrics.ndcg20.begin(), r.metrics.ndcg20.end());
        rel.insert(rel.end(), r.metrics.has_relevant.begin(), r.metrics.has_relevant.end());
    }
    cv.aggregated = make_report(std::move(all_q), std::move(ap), std::move(nd), std::move(rel));
    return cv;
}

std::vector<SensitivityRow> sensitivity_experiment(const std::vector<AnnotatorKind>& annotators,
                                                   const SyntheticCorpus& data,
                                                   const TrainingConfig& config,
                                                   const DatasetOptions& opts, int num_seeds) {
    if (annotators.size() < 2)
        throw std::invalid_argument("sensitivity_experiment: need >= 2 annotator configs");
    if (num_seeds < 1)
        throw std::invalid_argument("sensitivity_experiment: need >= 1 seeds");

    QueryIndex qindex(data.queries);
    JudgmentMap jmap = index_judgments(data.judgments);
    std::vector<std::string> qids;
    for (const auto& q : data.queries) qids.push_back(q.id);
    std::sort(qids.begin(), qids.end());

    std::vector<SensitivityRow> rows;
    for (const auto& annotator : annotators) {
        SensitivityRow row;
        row.annotator = annotator;
        for (int si = 0; si < num_seeds; ++si) {
            // 70/30 train/test query split, shared across annotators per seed
            std::vector<std::string> shuffled = qids;
            auto rng = make_rng(derive_seed(config.seed, "sens-split", si));
            std::shuffle(shuffled.begin(), shuffled.end(), rng);
            std::size_t n_train = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::floor(0.7 * shuffled.size())));
            if (n_train == shuffled.size()) --n_train;
            std::vector<std::string> train_q(shuffled.begin(), shuffled.begin() + n_train);
            std::vector<std::string> test_q(shuffled.begin() + n_train, shuffled.end());

            auto train_j = filter_judgments(data.judgments, train_q);
            auto strong = make_pairs(train_j, opts.strong_pairs_per_query,
                                     derive_seed(config.seed, "sens-strong", si));
            auto weak_queries = filter_queries(data.queries, train_q);
            auto weak = annotate_dataset(annotator, data.corpus, weak_queries, train_j,
                                         opts.weak_pool_size, opts.weak_pairs_per_query,
                                         derive_seed(config.seed, "sens-weak", si), opts.tau);

            RunData rd;
            rd.corpus = &data.corpus;
            rd.queries = &qindex;
            rd.judgments = &jmap;
            rd.weak = std::move(weak);
            rd.strong = std::move(strong);
            rd.test_queries = test_q;
            rd.annotator = annotator;

            TrainingConfig sc = config;
            sc.seed = derive_seed(config.seed, "sens-run", si);

            auto wa = run_strategy(StrategyKind::WA, rd, sc);
            auto fwl = run_strategy(StrategyKind::FWL, rd, sc);

            SensitivitySeedResult r;
            r.seed = sc.seed;
            r.wa_map = wa.metrics.map;
            r.fwl_map = fwl.metrics.map;
            r.improvement_pct =
                wa.metrics.map > 0.0
                    ? 100.0 * (fwl.metrics.map - wa.metrics.map) / wa.metrics.map
                    : 0.0;
            row.per_seed.push_back(r);
        }
        std::vector<double> was, fwls, imps;
        for (const auto& r : row.per_seed) {
            was.push_back(r.wa_map);
            fwls.push_back(r.fwl_map);
            imps.push_back(r.improvement_pct);
        }
        row.median_wa_map = median(was);
        row.median_fwl_map = median(fwls);
        row.median_improvement_pct = median(imps);
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [](const SensitivityRow& a, const SensitivityRow& b) {
        return a.median_wa_map < b.median_wa_map;
    });
    return rows;
}

namespace {

// Overlapping hat functions on a fixed grid: a piecewise-linear one-hidden-
// layer net whose output weights are the only trainable parameters. The
// compact support keeps parameter updates spatially local, which is what the
// demo needs to show untouched regions staying untouched.
// Half-width equal to the center spacing makes the hats a partition of
// unity: the span is exactly the piecewise-linear interpolants on the grid.
struct HatBasis {
    std::vector<double> centers;
    double half_width = 0.2;

    double eval(const std::vector<double>& v, double x) const {
        double y = 0.0;
        for (std::size_t j = 0; j < centers.size(); ++j) {
            double a = 1.0 - std::abs(x - centers[j]) / half_width;
            if (a > 0.0) y += v[j] * a;
        }
        return y;
    }
    void sgd(std::vector<double>& v, double x, double target, double eta) const {
        if (eta == 0.0) return;
        double delta = 2.0 * (eval(v, x) - target);
        for (std::size_t j = 0; j < centers.size(); ++j) {
            double a = 1.0 - std::abs(x - centers[j]) / half_width;
            if (a > 0.0) v[j] -= eta * delta * a;
        }
    }
};

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> xs(n);
    for (int i = 0; i < n; ++i)
        xs[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
    return xs;
}

}  // namespace

Toy1dResult toy1d_demo(std::uint64_t seed) {
    auto true_fn = [](double x) { return std::sin(x) + 0.5 * x; };
    auto weak_fn = [&](double x) { return true_fn(x) + 0.7 + 0.3 * std::sin(3.0 * x); };

    // two weak clusters with a sample-free gap; strong observations only in
    // the left cluster, so the teacher is confident there and uncertain
    // everywhere right of it
    std::vector<double> weak_x = linspace(-4.0, 0.2, 50);
    {
        auto right = linspace(2.5, 4.0, 50);
        weak_x.insert(weak_x.end(), right.begin(), right.end());
    }
    std::vector<double> strong_x = linspace(-3.8, 0.2, 8);

    HatBasis basis;
    basis.centers = linspace(-4.0, 4.0, 41);
    std::vector<double> v(basis.centers.size(), 0.0);

    const int epochs = 300;
    const double beta = 40.0;
    // annealed step size; constant-rate SGD would hover in a noise ball far
    // above the least-squares fit
    auto lr_at = [](int epoch) { return 0.2 / (1.0 + 0.05 * epoch); };

    // step 1: fit the weak signal
    std::vector<std::size_t> order(weak_x.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int e = 0; e < epochs; ++e) {
        auto rng = make_rng(derive_seed(seed, "toy-step1", e));
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i : order) basis.sgd(v, weak_x[i], weak_fn(weak_x[i]), lr_at(e));
    }
    std::vector<double> v_step1 = v;

    // step 2: GP teacher on the raw 1-D input (psi is the identity here)
    Eigen::MatrixXd X(strong_x.size(), 1);
    Eigen::VectorXd y(strong_x.size());
    for (std::size_t i = 0; i < strong_x.size(); ++i) {
        X(i, 0) = strong_x[i];
        y(i) = true_fn(strong_x[i]);
    }
    KernelParams kp;
    kp.signal_var = 1.0;
    kp.noise_var = 1e-4;
    kp.length_scale = median_heuristic_length(X);
    GPPosterior post = gp_fit(X, y, kp);

    // soft targets and uncertainties for every sample location
    std::vector<double> all_x = weak_x;
    all_x.insert(all_x.end(), strong_x.begin(), strong_x.end());
    std::vector<double> soft_mean(all_x.size()), soft_var(all_x.size());
    for (std::size_t i = 0; i < all_x.size(); ++i) {
        Eigen::VectorXd q(1);
        q(0) = all_x[i];
        auto p = gp_predict(post, q);
        soft_mean[i] = p.mean;
        soft_var[i] = uncertainty(p.var);
    }

    // step 3: confidence-modulated fine-tuning on the soft dataset
    std::vector<std::size_t> order3(all_x.size());
    for (std::size_t i = 0; i < order3.size(); ++i) order3[i] = i;
    for (int e = 0; e < epochs; ++e) {
        auto rng = make_rng(derive_seed(seed, "toy-step3", e));
        std::shuffle(order3.begin(), order3.end(), rng);
        for (std::size_t i : order3)
            basis.sgd(v, all_x[i], soft_mean[i], lr_at(e) * fidelity_lr(soft_var[i], beta));
    }

    Toy1dResult result;
    result.beta = beta;
    result.noise_var = kp.noise_var;
    auto add_row = [&](double x, bool is_strong) {
        Eigen::VectorXd q(1);
        q(0) = x;
        auto p = gp_predict(post, q);
        Toy1dRow row;
        row.x = x;
        row.true_y = true_fn(x);
        row.weak_y = weak_fn(x);
        row.step1_fit = basis.eval(v_step1, x);
        row.teacher_mean = p.mean;
        row.teacher_sigma = uncertainty(p.var);
        row.eta2 = fidelity_lr(row.teacher_sigma, beta);
        row.step3_fit = basis.eval(v, x);
        row.is_strong = is_strong;
        result.rows.push_back(row);
    };
    for (double x : linspace(-4.0, 4.0, 201)) add_row(x, false);
    for (double x : strong_x) add_row(x, true);
    std::stable_sort(result.rows.begin(), result.rows.end(),
                     [](const Toy1dRow& a, const Toy1dRow& b) { return a.x < b.x; });
    return result;
}

}  // namespace fwl
