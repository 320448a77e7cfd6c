#include "fwl/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "fwl/rng.hpp"

namespace fwl {

namespace {

struct KeyDef {
    std::string key;
    std::string default_value;
    std::string help;
};

// Registry of every recognized key; order fixes the echo layout.
const std::vector<KeyDef>& registry() {
    static const std::vector<KeyDef> defs = {
        {"seed", "42", "global seed"},
        {"corpus.vocab_size", "2000", "synthetic vocabulary size"},
        {"corpus.num_topics", "8", "latent topics"},
        {"corpus.num_docs", "500", "documents"},
        {"corpus.num_queries", "60", "queries"},
        {"corpus.doc_len_min", "30", "min doc length"},
        {"corpus.doc_len_max", "80", "max doc length"},
        {"corpus.query_len_min", "2", "min query length"},
        {"corpus.query_len_max", "5", "max query length"},
        {"corpus.grade_thresholds", "0.55,0.80", "grade cut points, strictly increasing"},
        {"corpus.docs_file", "", "load docs from TSV instead of generating"},
        {"corpus.queries_file", "", "load queries from TSV"},
        {"corpus.qrels_file", "", "load qrels"},
        {"annotate.kind", "bm25", "bm25 | tfidf | bto | synthetic"},
        {"annotate.k1", "1.2", "BM25 k1 > 0"},
        {"annotate.b", "0.75", "BM25 b in [0,1]"},
        {"annotate.quality", "0.7", "synthetic annotator quality in [0,1]"},
        {"annotate.tau", "1.0", "logistic sharpness > 0"},
        {"annotate.pool_size", "50", "weak candidate pool per query"},
        {"annotate.max_pairs_per_query", "40", "weak pair cap per query"},
        {"data.strong_pairs_per_query", "5", "strong pair cap per query"},
        {"student.embedding_dim", "16", "embedding width e"},
        {"student.hidden", "32", "comma-separated tanh widths"},
        {"train.eta0", "0.05", "base learning rate > 0"},
        {"train.decay", "1e-4", "learning-rate decay >= 0"},
        {"train.beta", "2.0", "uncertainty sensitivity beta >= 0"},
        {"train.l2_lambda", "1e-5", "L2 weight >= 0"},
        {"train.epochs_step1", "5", "pretraining epochs >= 1"},
        {"train.epochs_step3", "3", "fine-tuning epochs >= 1"},
        {"teacher.signal_var", "1.0", "kernel signal variance > 0"},
        {"teacher.length_scale", "0", "kernel length scale; 0 = median heuristic"},
        {"teacher.noise_var", "1e-4", "kernel noise variance >= 0"},
        {"teacher.clusters", "0", "GP cluster count; 0 = auto"},
        {"eval.pool", "200", "BM25 candidate pool for evaluation"},
        {"cv.folds", "3", "cross-validation folds >= 2"},
        {"train.split", "0.7", "train fraction for single-split runs"},
        {"sweep.betas", "0,0.5,1,2,5", "beta grid for sweep-beta"},
        {"sensitivity.qualities", "0.6,0.7,0.8,0.9", "synthetic quality grid"},
        {"sensitivity.seeds", "5", "seeds per sensitivity cell"},
        {"sensitivity.lexical", "true", "include bto/tfidf/bm25 rows"},
    };
    return defs;
}

// convenience shorthands accepted in files and overrides
const std::map<std::string, std::string>& aliases() {
    static const std::map<std::string, std::string> a = {
        {"beta", "train.beta"},
        {"eta0", "train.eta0"},
        {"quality", "annotate.quality"},
    };
    return a;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& key, const std::string& why) {
    throw std::runtime_error("config key '" + key + "': " + why);
}

std::int64_t as_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        long long r = std::stoll(v, &pos);
        if (pos != v.size()) fail(key, "expected an integer, got '" + v + "'");
        return r;
    } catch (const std::runtime_error&) {
        throw;
    } catch (const std::exception&) {
        fail(key, "expected an integer, got '" + v + "'");
    }
}

double as_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) fail(key, "expected a number, got '" + v + "'");
        return r;
    } catch (const std::runtime_error&) {
        throw;
    } catch (const std::exception&) {
        fail(key, "expected a number, got '" + v + "'");
    }
}

bool as_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(key, "expected a boolean, got '" + v + "'");
}

std::vector<double> as_double_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) fail(key, "empty list element");
        out.push_back(as_double(key, item));
    }
    if (out.empty()) fail(key, "expected a non-empty list");
    return out;
}

std::vector<int> as_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    for (double d : as_double_list(key, v)) out.push_back(static_cast<int>(d));
    return out;
}

}  // namespace

Config parse_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::map<std::string, std::string> values;
    for (const auto& d : registry()) values[d.key] = d.default_value;

    auto resolve_key = [&](std::string key) {
        auto al = aliases().find(key);
        if (al != aliases().end()) key = al->second;
        if (!values.count(key)) throw std::runtime_error("config key '" + key + "': unknown key");
        return key;
    };

    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("config file not readable: " + path);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": expected 'key = value'");
            std::string key = resolve_key(trim(line.substr(0, eq)));
            values[key] = trim(line.substr(eq + 1));
        }
    }
    for (const auto& ov : overrides) {
        auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("override '" + ov + "': expected key=value");
        std::string key = resolve_key(trim(ov.substr(0, eq)));
        values[key] = trim(ov.substr(eq + 1));
    }

    Config c;
    auto geti = [&](const char* k, std::int64_t lo, std::int64_t hi) {
        std::int64_t v = as_int(k, values[k]);
        if (v < lo || v > hi)
            fail(k, "value " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                        std::to_string(hi) + "]");
        return v;
    };
    auto getd = [&](const char* k, double lo, double hi) {
        double v = as_double(k, values[k]);
        if (!(v >= lo && v <= hi)) fail(k, "value " + values[k] + " outside allowed range");
        return v;
    };

    c.seed = static_cast<std::uint64_t>(as_int("seed", values["seed"]));
    c.synth.vocab_size = static_cast<int>(geti("corpus.vocab_size", 1, 1'000'000));
    c.synth.num_topics = static_cast<int>(geti("corpus.num_topics", 1, 1024));
    if (c.synth.num_topics > c.synth.vocab_size)
        fail("corpus.num_topics", "must be <= corpus.vocab_size");
    c.synth.num_docs = static_cast<int>(geti("corpus.num_docs", 1, 10'000'000));
    c.synth.num_queries = static_cast<int>(geti("corpus.num_queries", 0, 10'000'000));
    c.synth.doc_len_min = static_cast<int>(geti("corpus.doc_len_min", 1, 1'000'000));
    c.synth.doc_len_max = static_cast<int>(geti("corpus.doc_len_max", 1, 1'000'000));
    if (c.synth.doc_len_max < c.synth.doc_len_min)
        fail("corpus.doc_len_max", "must be >= corpus.doc_len_min");
    c.synth.query_len_min = static_cast<int>(geti("corpus.query_len_min", 1, 1'000'000));
    c.synth.query_len_max = static_cast<int>(geti("corpus.query_len_max", 1, 1'000'000));
    if (c.synth.query_len_max < c.synth.query_len_min)
        fail("corpus.query_len_max", "must be >= corpus.query_len_min");
    c.synth.grade_thresholds =
        as_double_list("corpus.grade_thresholds", values["corpus.grade_thresholds"]);
    for (std::size_t i = 1; i < c.synth.grade_thresholds.size(); ++i)
        if (c.synth.grade_thresholds[i] <= c.synth.grade_thresholds[i - 1])
            fail("corpus.grade_thresholds", "must be strictly increasing");
    c.synth.seed = c.seed;
    c.docs_file = values["corpus.docs_file"];
    c.queries_file = values["corpus.queries_file"];
    c.qrels_file = values["corpus.qrels_file"];

    c.annotate_kind = values["annotate.kind"];
    if (c.annotate_kind != "bm25" && c.annotate_kind != "tfidf" && c.annotate_kind != "bto" &&
        c.annotate_kind != "synthetic")
        fail("annotate.kind", "must be one of bm25, tfidf, bto, synthetic");
    c.bm25_k1 = as_double("annotate.k1", values["annotate.k1"]);
    if (!(c.bm25_k1 > 0.0)) fail("annotate.k1", "must be > 0");
    c.bm25_b = getd("annotate.b", 0.0, 1.0);
    c.synthetic_quality = getd("annotate.quality", 0.0, 1.0);
    c.tau = as_double("annotate.tau", values["annotate.tau"]);
    if (!(c.tau > 0.0)) fail("annotate.tau", "must be > 0");
    c.pool_size = static_cast<std::size_t>(geti("annotate.pool_size", 2, 1'000'000));
    c.weak_pairs_per_query =
        static_cast<std::size_t>(geti("annotate.max_pairs_per_query", 1, 10'000'000));
    c.strong_pairs_per_query =
        static_cast<std::size_t>(geti("data.strong_pairs_per_query", 1, 10'000'000));

    c.student.embedding_dim = static_cast<int>(geti("student.embedding_dim", 1, 4096));
    c.student.hidden = as_int_list("student.hidden", values["student.hidden"]);
    for (int h : c.student.hidden)
        if (h < 1) fail("student.hidden", "widths must be >= 1");

    c.sched.eta0 = as_double("train.eta0", values["train.eta0"]);
    if (!(c.sched.eta0 > 0.0)) fail("train.eta0", "must be > 0");
    c.sched.decay = as_double("train.decay", values["train.decay"]);
    if (c.sched.decay < 0.0) fail("train.decay", "must be >= 0");
    c.sched.beta = as_double("train.beta", values["train.beta"]);
    if (c.sched.beta < 0.0) fail("train.beta", "must be >= 0");
    c.loss_cfg.l2_lambda = as_double("train.l2_lambda", values["train.l2_lambda"]);
    if (c.loss_cfg.l2_lambda < 0.0) fail("train.l2_lambda", "must be >= 0");
    c.epochs_step1 = static_cast<int>(geti("train.epochs_step1", 1, 100000));
    c.epochs_step3 = static_cast<int>(geti("train.epochs_step3", 1, 100000));

    c.kernel.signal_var = as_double("teacher.signal_var", values["teacher.signal_var"]);
    if (!(c.kernel.signal_var > 0.0)) fail("teacher.signal_var", "must be > 0");
    c.kernel.length_scale = as_double("teacher.length_scale", values["teacher.length_scale"]);
    c.kernel.noise_var = as_double("teacher.noise_var", values["teacher.noise_var"]);
    if (c.kernel.noise_var < 0.0) fail("teacher.noise_var", "must be >= 0");
    c.clusters = static_cast<int>(geti("teacher.clusters", 0, 100000));

    c.eval_pool = static_cast<std::size_t>(geti("eval.pool", 1, 10'000'000));
    c.cv_folds = static_cast<int>(geti("cv.folds", 2, 1000));
    c.train_split = getd("train.split", 0.05, 0.95);

    c.sweep_betas = as_double_list("sweep.betas", values["sweep.betas"]);
    for (double b : c.sweep_betas)
        if (b < 0.0) fail("sweep.betas", "betas must be >= 0");
    c.sensitivity_qualities =
        as_double_list("sensitivity.qualities", values["sensitivity.qualities"]);
    for (double q : c.sensitivity_qualities)
        if (q < 0.0 || q > 1.0) fail("sensitivity.qualities", "qualities must be in [0,1]");
    c.sensitivity_seeds = static_cast<int>(geti("sensitivity.seeds", 1, 1000));
    c.sensitivity_lexical = as_bool("sensitivity.lexical", values["sensitivity.lexical"]);

    for (const auto& d : registry()) c.echo.emplace_back(d.key, values[d.key]);
    return c;
}

TrainingConfig Config::training() const {
    TrainingConfig t;
    t.student = student;
    t.sched = sched;
    t.loss_cfg = loss_cfg;
    t.kernel = kernel;
    t.cluster_count = clusters;
    t.epochs_step1 = epochs_step1;
    t.epochs_step3 = epochs_step3;
    t.eval_pool = eval_pool;
    t.seed = seed;
    return t;
}

DatasetOptions Config::dataset_options() const {
    DatasetOptions d;
    d.strong_pairs_per_query = strong_pairs_per_query;
    d.weak_pool_size = pool_size;
    d.weak_pairs_per_query = weak_pairs_per_query;
    d.tau = tau;
    return d;
}

AnnotatorKind Config::annotator() const {
    if (annotate_kind == "bm25") return AnnotatorKind::make_bm25(bm25_k1, bm25_b);
    if (annotate_kind == "tfidf") return AnnotatorKind::make_tfidf();
    if (annotate_kind == "bto") return AnnotatorKind::make_bto();
    return AnnotatorKind::make_synthetic(synthetic_quality, derive_seed(seed, "synth-annotator"));
}

std::string default_config_text() {
    std::ostringstream os;
    os << "# fwl configuration (key = value; '#' starts a comment)\n";
    for (const auto& d : registry()) os << d.key << " = " << d.default_value
                                        << (d.help.empty() ? "" : "   # " + d.help) << "\n";
    return os.str();
}

}  // namespace fwl
