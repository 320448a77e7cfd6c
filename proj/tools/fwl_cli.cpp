// fwl: fidelity-weighted learning experiments on ranking data.
//
// Subcommands: synth, annotate, train, eval, cv, sweep-beta, sensitivity,
// toy1d. Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>

#include "fwl/config.hpp"
#include "fwl/corpus.hpp"
#include "fwl/eval.hpp"
#include "fwl/io.hpp"
#include "fwl/pipeline.hpp"
#include "fwl/rng.hpp"

namespace {

struct CliState {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
    std::string strategy = "fwl";
    std::string checkpoint;
    long long seed_override = -1;
};

std::string default_out_dir() {
    const char* env = std::getenv("FWL_OUT");
    return env && *env ? env : "out";
}

fwl::Config resolve_config(const CliState& st) {
    auto overrides = st.overrides;
    if (st.seed_override >= 0) overrides.push_back("seed=" + std::to_string(st.seed_override));
    return fwl::parse_config(st.config_path, overrides);
}

fwl::HeaderLines config_header(const fwl::Config& cfg) {
    fwl::HeaderLines h;
    for (const auto& [k, v] : cfg.echo) h.push_back(k + " = " + v);
    return h;
}

fwl::SyntheticCorpus load_or_generate(const fwl::Config& cfg) {
    if (!cfg.docs_file.empty() || !cfg.queries_file.empty() || !cfg.qrels_file.empty()) {
        if (cfg.docs_file.empty() || cfg.queries_file.empty() || cfg.qrels_file.empty())
            throw std::runtime_error(
                "config: corpus.docs_file, corpus.queries_file and corpus.qrels_file "
                "must be set together");
        return fwl::load_trec(cfg.docs_file, cfg.queries_file, cfg.qrels_file);
    }
    return fwl::generate_synthetic(cfg.synth);
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

// 70/30-style single split used by train, sweep-beta and sensitivity runs.
void single_split(const fwl::SyntheticCorpus& data, double train_fraction, std::uint64_t seed,
                  std::vector<std::string>& train_q, std::vector<std::string>& test_q) {
    std::vector<std::string> qids;
    for (const auto& q : data.queries) qids.push_back(q.id);
    std::sort(qids.begin(), qids.end());
    auto rng = fwl::make_rng(fwl::derive_seed(seed, "train-split"));
    std::shuffle(qids.begin(), qids.end(), rng);
    std::size_t n_train = std::max<std::size_t>(
        1, static_cast<std::size_t>(train_fraction * static_cast<double>(qids.size())));
    if (n_train >= qids.size()) n_train = qids.size() - 1;
    train_q.assign(qids.begin(), qids.begin() + n_train);
    test_q.assign(qids.begin() + n_train, qids.end());
}

struct SplitRun {
    fwl::QueryIndex qindex;
    fwl::JudgmentMap jmap;
    fwl::RunData rd;
};

// Builds RunData for a single split. The returned object owns the index maps
// the RunData points into.
std::unique_ptr<SplitRun> make_split_run(const fwl::SyntheticCorpus& data, const fwl::Config& cfg,
                                         std::uint64_t seed) {
    auto run = std::make_unique<SplitRun>();
    run->qindex = fwl::QueryIndex(data.queries);
    run->jmap = fwl::index_judgments(data.judgments);

    std::vector<std::string> train_q, test_q;
    single_split(data, cfg.train_split, seed, train_q, test_q);

    std::vector<fwl::Judgment> train_j;
    {
        std::unordered_map<std::string, bool> keep;
        for (const auto& id : train_q) keep[id] = true;
        for (const auto& j : data.judgments)
            if (keep.count(j.query_id)) train_j.push_back(j);
    }
    auto strong = fwl::make_pairs(train_j, cfg.strong_pairs_per_query,
                                  fwl::derive_seed(seed, "strong-pairs"));
    std::vector<fwl::Query> weak_queries;
    {
        std::unordered_map<std::string, bool> keep;
        for (const auto& id : train_q) keep[id] = true;
        for (const auto& q : data.queries)
            if (keep.count(q.id)) weak_queries.push_back(q);
    }
    auto weak = fwl::annotate_dataset(cfg.annotator(), data.corpus, weak_queries, train_j,
                                      cfg.pool_size, cfg.weak_pairs_per_query,
                                      fwl::derive_seed(seed, "weak"), cfg.tau);

    run->rd.corpus = &data.corpus;
    run->rd.queries = &run->qindex;
    run->rd.judgments = &run->jmap;
    run->rd.weak = std::move(weak);
    run->rd.strong = std::move(strong);
    run->rd.test_queries = test_q;
    run->rd.annotator = cfg.annotator();
    return run;
}

int cmd_synth(const CliState& st) {
    auto cfg = resolve_config(st);
    auto data = fwl::generate_synthetic(cfg.synth);
    fwl::save_corpus_tsv(join_path(st.out_dir, "docs.tsv"), data.corpus);
    fwl::save_queries_tsv(join_path(st.out_dir, "queries.tsv"), data.corpus, data.queries);
    fwl::save_qrels(join_path(st.out_dir, "qrels.txt"), data.judgments);
    {
        auto hdr = config_header(cfg);
        std::ofstream meta(join_path(st.out_dir, "synth_config.txt"));
        for (const auto& line : hdr) meta << "# " << line << "\n";
        meta << "docs = " << data.corpus.doc_count << "\n";
        meta << "queries = " << data.queries.size() << "\n";
        meta << "judgments = " << data.judgments.size() << "\n";
    }
    std::cout << "wrote docs.tsv, queries.tsv, qrels.txt to " << st.out_dir << "\n";
    return 0;
}

int cmd_annotate(const CliState& st) {
    auto cfg = resolve_config(st);
    auto data = load_or_generate(cfg);
    auto weak = fwl::annotate_dataset(cfg.annotator(), data.corpus, data.queries, data.judgments,
                                      cfg.pool_size, cfg.weak_pairs_per_query,
                                      fwl::derive_seed(cfg.seed, "weak"), cfg.tau);
    fwl::save_pairwise_tsv(join_path(st.out_dir, "weak.tsv"), weak, config_header(cfg));
    std::cout << "wrote " << weak.size() << " weak pairs to "
              << join_path(st.out_dir, "weak.tsv") << "\n";
    return 0;
}

int cmd_train(const CliState& st) {
    auto cfg = resolve_config(st);
    auto strategy = fwl::parse_strategy(st.strategy);
    if (!strategy) {
        std::cerr << "unknown strategy '" << st.strategy
                  << "'; choose one of wa, nn-w, nn-s, nn-sw, nn-wts, fwl\n";
        return 2;
    }
    auto data = load_or_generate(cfg);
    auto split = make_split_run(data, cfg, cfg.seed);
    auto result = fwl::run_strategy(*strategy, split->rd, cfg.training());

    std::vector<fwl::RunRecord> records{{fwl::strategy_name(*strategy), cfg.seed, 0,
                                         result.metrics.map, result.metrics.mean_ndcg20,
                                         result.wall_clock_sec, result.config_echo}};
    auto name = fwl::strategy_name(*strategy);
    fwl::save_run_jsonl(join_path(st.out_dir, "run_" + name + ".jsonl"), records);
    std::vector<fwl::MetricRow> rows;
    for (std::size_t i = 0; i < result.metrics.query_ids.size(); ++i)
        rows.push_back({name, cfg.seed, 0, result.metrics.query_ids[i], result.metrics.ap[i],
                        result.metrics.ndcg20[i]});
    fwl::save_metrics_csv(join_path(st.out_dir, "metrics_" + name + ".csv"), rows,
                          config_header(cfg));
    if (result.params)
        fwl::save_student(join_path(st.out_dir, "student_" + name + ".ckpt"), *result.params);
    std::cout << name << ": MAP=" << result.metrics.map
              << " nDCG@20=" << result.metrics.mean_ndcg20 << " (test queries "
              << result.metrics.query_ids.size() << ")\n";
    return 0;
}

int cmd_eval(const CliState& st) {
    auto cfg = resolve_config(st);
    auto data = load_or_generate(cfg);
    fwl::QueryIndex qindex(data.queries);
    auto jmap = fwl::index_judgments(data.judgments);

    std::vector<fwl::RankedList> rankings;
    std::string label;
    if (!st.checkpoint.empty()) {
        auto params = fwl::load_student(st.checkpoint);
        label = "student";
        for (const auto& q : data.queries) {
            auto candidates = fwl::eval_candidates(data.corpus, q, jmap, cfg.eval_pool);
            rankings.push_back(fwl::rank_with_student(params, data.corpus, q, candidates));
        }
    } else {
        label = cfg.annotator().name();
        for (const auto& q : data.queries) {
            auto candidates = fwl::eval_candidates(data.corpus, q, jmap, cfg.eval_pool);
            fwl::RankedList r;
            r.query_id = q.id;
            for (const auto& id : candidates) {
                const fwl::Document* d = data.corpus.find_doc(id);
                r.docs.push_back({id, fwl::score(cfg.annotator(), data.corpus, q, *d)});
            }
            std::sort(r.docs.begin(), r.docs.end(),
                      [](const fwl::ScoredDoc& a, const fwl::ScoredDoc& b) {
                          if (a.score != b.score) return a.score > b.score;
                          return a.doc_id < b.doc_id;
                      });
            rankings.push_back(std::move(r));
        }
    }
    auto report = fwl::evaluate_rankings(rankings, jmap);
    std::vector<fwl::MetricRow> rows;
    for (std::size_t i = 0; i < report.query_ids.size(); ++i)
        rows.push_back({label, cfg.seed, 0, report.query_ids[i], report.ap[i], report.ndcg20[i]});
    fwl::save_metrics_csv(join_path(st.out_dir, "metrics.csv"), rows, config_header(cfg));
    std::cout << label << ": MAP=" << report.map << " nDCG@20=" << report.mean_ndcg20 << "\n";
    return 0;
}

int cmd_cv(const CliState& st) {
    auto cfg = resolve_config(st);
    auto strategy = fwl::parse_strategy(st.strategy);
    if (!strategy) {
        std::cerr << "unknown strategy '" << st.strategy
                  << "'; choose one of wa, nn-w, nn-s, nn-sw, nn-wts, fwl\n";
        return 2;
    }
    auto data = load_or_generate(cfg);
    auto cv = fwl::cross_validate(*strategy, data, cfg.annotator(), cfg.training(),
                                  cfg.dataset_options(), cfg.cv_folds);
    auto name = fwl::strategy_name(*strategy);
    std::vector<fwl::MetricRow> rows;
    std::vector<fwl::RunRecord> records;
    for (std::size_t f = 0; f < cv.fold_results.size(); ++f) {
        const auto& r = cv.fold_results[f];
        for (std::size_t i = 0; i < r.metrics.query_ids.size(); ++i)
            rows.push_back({name, cfg.seed, static_cast<int>(f), r.metrics.query_ids[i],
                            r.metrics.ap[i], r.metrics.ndcg20[i]});
        records.push_back({name, cfg.seed, static_cast<int>(f), r.metrics.map,
                           r.metrics.mean_ndcg20, r.wall_clock_sec, r.config_echo});
    }
    fwl::save_metrics_csv(join_path(st.out_dir, "cv_metrics_" + name + ".csv"), rows,
                          config_header(cfg));
    fwl::save_run_jsonl(join_path(st.out_dir, "cv_runs_" + name + ".jsonl"), records);
    std::cout << name << ": MAP=" << cv.aggregated.map
              << " nDCG@20=" << cv.aggregated.mean_ndcg20 << " over "
              << cv.aggregated.query_ids.size() << " queries, " << cv.fold_results.size()
              << " folds\n";
    return 0;
}

int cmd_sweep_beta(const CliState& st) {
    auto cfg = resolve_config(st);
    auto data = load_or_generate(cfg);
    std::vector<fwl::BetaSweepRow> rows;
    for (double beta : cfg.sweep_betas) {
        auto split = make_split_run(data, cfg, cfg.seed);
        auto tc = cfg.training();
        tc.sched.beta = beta;
        auto result = fwl::run_strategy(fwl::StrategyKind::FWL, split->rd, tc);
        rows.push_back({beta, result.metrics.map, result.metrics.mean_ndcg20});
        std::cout << "beta=" << beta << " MAP=" << result.metrics.map << "\n";
    }
    fwl::save_beta_sweep_csv(join_path(st.out_dir, "beta_sweep.csv"), rows, config_header(cfg));
    return 0;
}

int cmd_sensitivity(const CliState& st) {
    auto cfg = resolve_config(st);
    auto data = load_or_generate(cfg);
    std::vector<fwl::AnnotatorKind> annotators;
    if (cfg.sensitivity_lexical) {
        annotators.push_back(fwl::AnnotatorKind::make_bto());
        annotators.push_back(fwl::AnnotatorKind::make_tfidf());
        annotators.push_back(fwl::AnnotatorKind::make_bm25(cfg.bm25_k1, cfg.bm25_b));
    }
    for (std::size_t i = 0; i < cfg.sensitivity_qualities.size(); ++i)
        annotators.push_back(fwl::AnnotatorKind::make_synthetic(
            cfg.sensitivity_qualities[i], fwl::derive_seed(cfg.seed, "synth-annotator", i)));
    auto rows = fwl::sensitivity_experiment(annotators, data, cfg.training(),
                                            cfg.dataset_options(), cfg.sensitivity_seeds);
    fwl::save_sensitivity_csv(join_path(st.out_dir, "sensitivity.csv"), rows, config_header(cfg));
    for (const auto& r : rows)
        std::cout << r.annotator.name() << ": WA MAP=" << r.median_wa_map
                  << " FWL MAP=" << r.median_fwl_map << " improvement="
                  << r.median_improvement_pct << "%\n";
    return 0;
}

int cmd_toy1d(const CliState& st) {
    auto cfg = resolve_config(st);
    auto toy = fwl::toy1d_demo(cfg.seed);
    auto header = config_header(cfg);
    header.push_back("toy_beta = " + fwl::format_double(toy.beta));
    header.push_back("toy_noise_var = " + fwl::format_double(toy.noise_var));
    fwl::save_toy1d_csv(join_path(st.out_dir, "toy1d.csv"), toy, header);
    std::cout << "wrote " << toy.rows.size() << " rows to " << join_path(st.out_dir, "toy1d.csv")
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fidelity-weighted learning for ranking: teacher-confidence-modulated "
                 "fine-tuning with weak annotators, baselines and evaluation"};
    app.require_subcommand(1);
    CliState st;
    st.out_dir = default_out_dir();

    app.add_option("-c,--config", st.config_path, "config file (key = value lines)");
    app.add_option("-s,--set", st.overrides, "override, e.g. --set train.beta=2.0")
        ->take_all();
    app.add_option("-o,--out", st.out_dir, "output directory (default $FWL_OUT or ./out)");
    app.add_option("--seed", st.seed_override, "override the global seed");

    auto* synth = app.add_subcommand("synth", "generate the synthetic corpus");
    auto* annotate = app.add_subcommand("annotate", "build the weak dataset");
    auto* train = app.add_subcommand("train", "train one strategy on a single split");
    train->add_option("--strategy", st.strategy, "wa | nn-w | nn-s | nn-sw | nn-wts | fwl");
    auto* eval = app.add_subcommand("eval", "rank all judged queries and report metrics");
    eval->add_option("--checkpoint", st.checkpoint, "student checkpoint to evaluate");
    auto* cv = app.add_subcommand("cv", "k-fold cross-validation for one strategy");
    cv->add_option("--strategy", st.strategy, "wa | nn-w | nn-s | nn-sw | nn-wts | fwl");
    auto* sweep = app.add_subcommand("sweep-beta", "FWL across the configured beta grid");
    auto* sens = app.add_subcommand("sensitivity", "weak-annotator quality sweep (WA vs FWL)");
    auto* toy = app.add_subcommand("toy1d", "1-D illustration of the three training steps");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(st);
        if (annotate->parsed()) return cmd_annotate(st);
        if (train->parsed()) return cmd_train(st);
        if (eval->parsed()) return cmd_eval(st);
        if (cv->parsed()) return cmd_cv(st);
        if (sweep->parsed()) return cmd_sweep_beta(st);
        if (sens->parsed()) return cmd_sensitivity(st);
        if (toy->parsed()) return cmd_toy1d(st);
    } catch (const std::runtime_error& e) {
        // config errors carry the offending key; treat them as usage errors
        std::string msg = e.what();
        std::cerr << "error: " << msg << "\n";
        return msg.rfind("config", 0) == 0 ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
