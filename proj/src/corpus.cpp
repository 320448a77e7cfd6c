#include "fwl/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fwl/rng.hpp"

namespace fwl {

void SyntheticSpec::validate() const {
    if (vocab_size < 1) throw std::invalid_argument("synthetic spec: vocab_size must be >= 1");
    if (num_topics < 1) throw std::invalid_argument("synthetic spec: num_topics must be >= 1");
    if (vocab_size < num_topics)
        throw std::invalid_argument("synthetic spec: vocab_size must be >= num_topics");
    if (num_docs < 1) throw std::invalid_argument("synthetic spec: num_docs must be >= 1");
    if (num_queries < 0) throw std::invalid_argument("synthetic spec: num_queries must be >= 0");
    if (doc_len_min < 1 || doc_len_max < doc_len_min)
        throw std::invalid_argument("synthetic spec: bad doc length range");
    if (query_len_min < 1 || query_len_max < query_len_min)
        throw std::invalid_argument("synthetic spec: bad query length range");
    if (grade_thresholds.empty())
        throw std::invalid_argument("synthetic spec: grade_thresholds must be non-empty");
    for (std::size_t i = 1; i < grade_thresholds.size(); ++i)
        if (grade_thresholds[i] <= grade_thresholds[i - 1])
            throw std::invalid_argument("synthetic spec: grade_thresholds must be strictly increasing");
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

Corpus build_corpus(const std::vector<std::pair<std::string, std::vector<std::string>>>& docs) {
    Corpus c;
    c.documents.reserve(docs.size());
    std::int64_t total_len = 0;
    for (const auto& [id, toks] : docs) {
        if (c.doc_index.count(id))
            throw std::invalid_argument("duplicate doc id: " + id);
        Document d;
        d.id = id;
        d.tokens.reserve(toks.size());
        for (const auto& t : toks) {
            auto it = c.vocabulary.find(t);
            TermId tid;
            if (it == c.vocabulary.end()) {
                tid = static_cast<TermId>(c.terms.size());
                c.vocabulary.emplace(t, tid);
                c.terms.push_back(t);
                c.df.push_back(0);
            } else {
                tid = it->second;
            }
            d.tokens.push_back(tid);
        }
        total_len += static_cast<std::int64_t>(d.tokens.size());
        c.doc_index.emplace(id, c.documents.size());
        c.documents.push_back(std::move(d));
    }
    c.doc_count = c.documents.size();
    c.avg_doc_len = c.doc_count == 0 ? 0.0 : static_cast<double>(total_len) / c.doc_count;
    // df: count each term once per document
    std::vector<std::int64_t> seen_at(c.terms.size(), -1);
    for (std::size_t di = 0; di < c.documents.size(); ++di) {
        for (TermId t : c.documents[di].tokens) {
            if (seen_at[t] != static_cast<std::int64_t>(di)) {
                seen_at[t] = static_cast<std::int64_t>(di);
                ++c.df[t];
            }
        }
    }
    return c;
}

namespace {

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

}  // namespace

SyntheticCorpus load_trec(const std::string& docs_path, const std::string& queries_path,
                          const std::string& qrels_path) {
    SyntheticCorpus out;

    std::vector<std::pair<std::string, std::vector<std::string>>> docs;
    {
        auto lines = read_lines(docs_path);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (lines[i].empty()) continue;
            auto tab = lines[i].find('\t');
            if (tab == std::string::npos)
                throw std::runtime_error(docs_path + ":" + std::to_string(i + 1) +
                                         ": expected <doc_id>\\t<text>");
            docs.emplace_back(lines[i].substr(0, tab), tokenize(lines[i].substr(tab + 1)));
        }
    }
    out.corpus = build_corpus(docs);

    {
        auto lines = read_lines(queries_path);
        std::unordered_map<std::string, bool> seen;
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (lines[i].empty()) continue;
            auto tab = lines[i].find('\t');
            if (tab == std::string::npos)
                throw std::runtime_error(queries_path + ":" + std::to_string(i + 1) +
                                         ": expected <query_id>\\t<text>");
            Query q;
            q.id = lines[i].substr(0, tab);
            if (seen[q.id])
                throw std::runtime_error(queries_path + ":" + std::to_string(i + 1) +
                                         ": duplicate query id " + q.id);
            seen[q.id] = true;
            auto toks = tokenize(lines[i].substr(tab + 1));
            if (toks.empty())
                throw std::runtime_error(queries_path + ":" + std::to_string(i + 1) +
                                         ": query " + q.id + " has no tokens");
            for (const auto& t : toks) {
                auto it = out.corpus.vocabulary.find(t);
                // query-only terms get no corpus stats; keep them out of the id space
                if (it != out.corpus.vocabulary.end()) q.tokens.push_back(it->second);
            }
            if (q.tokens.empty())
                throw std::runtime_error(queries_path + ":" + std::to_string(i + 1) + ": query " +
                                         q.id + " shares no terms with the corpus vocabulary");
            out.queries.push_back(std::move(q));
        }
    }

    {
        auto lines = read_lines(qrels_path);
        std::unordered_map<std::string, bool> have_query;
        for (const auto& q : out.queries) have_query[q.id] = true;
        std::vector<std::string> dangling;
        std::unordered_map<std::string, std::unordered_map<std::string, bool>> dup;
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (lines[i].empty()) continue;
            std::istringstream ss(lines[i]);
            std::string qid, ignored, did;
            long long grade;
            if (!(ss >> qid >> ignored >> did >> grade))
                throw std::runtime_error(qrels_path + ":" + std::to_string(i + 1) +
                                         ": expected <query_id> <ignored> <doc_id> <grade>");
            if (grade < 0)
                throw std::runtime_error(qrels_path + ":" + std::to_string(i + 1) +
                                         ": negative grade");
            if (dup[qid][did])
                throw std::runtime_error(qrels_path + ":" + std::to_string(i + 1) +
                                         ": duplicate judgment for (" + qid + ", " + did + ")");
            dup[qid][did] = true;
            if (!have_query.count(qid)) dangling.push_back("query " + qid);
            if (!out.corpus.doc_index.count(did)) dangling.push_back("doc " + did);
            out.judgments.push_back(Judgment{qid, did, static_cast<int>(grade)});
        }
        if (!dangling.empty()) {
            std::string msg = qrels_path + ": judgments reference unknown ids:";
            for (const auto& d : dangling) msg += " " + d;
            throw std::runtime_error(msg);
        }
    }
    return out;
}

namespace {

// Latent topic mixture over K topics, unit L2 norm for cosine affinity.
// Mixtures are bi-topical (a primary and a secondary topic plus noise) so
// that affinity varies continuously inside one primary-topic cluster: high
// grades require agreement on both topics, not just the primary.
std::vector<double> draw_mixture(std::mt19937_64& rng, int num_topics, double min_sharp,
                                 double max_sharp) {
    std::uniform_int_distribution<int> topic_pick(0, num_topics - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int primary = topic_pick(rng);
    int secondary = primary;
    if (num_topics > 1)
        while (secondary == primary) secondary = topic_pick(rng);
    double sharp = min_sharp + (max_sharp - min_sharp) * unit(rng);
    double second = (1.0 - sharp) * (0.6 + 0.4 * unit(rng));
    std::vector<double> theta(num_topics, 0.0);
    double rest = std::max(0.0, 1.0 - sharp - second);
    for (int k = 0; k < num_topics; ++k) theta[k] = rest * unit(rng);
    theta[primary] += sharp;
    theta[secondary] += second;
    double norm = 0.0;
    for (double v : theta) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : theta) v /= norm;
    return theta;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return dot;  // both unit-norm
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    auto rng = make_rng(derive_seed(spec.seed, "synthetic-corpus"));

    const int V = spec.vocab_size;
    const int K = spec.num_topics;

    // Term t belongs to home topic t % K. Each topic's vocabulary is split
    // into a query-side quarter and a doc-side rest; queries speak the
    // query-side dialect while documents mostly use doc-side terms. The
    // controlled vocabulary gap keeps exact term matching (BM25) informative
    // but far from perfect, while topical co-occurrence still exposes the
    // full relevance structure to representation learners.
    std::vector<double> zipf(V);
    for (int t = 0; t < V; ++t) zipf[t] = 1.0 / std::pow(static_cast<double>(t + 1), 0.7);
    auto query_side = [&](int t) { return (t / K) % 4 == 0; };
    std::vector<std::vector<int>> doc_terms(K), query_terms(K);
    std::vector<std::vector<double>> doc_w(K), query_w(K);
    for (int t = 0; t < V; ++t) {
        int k = t % K;
        if (query_side(t)) {
            query_terms[k].push_back(t);
            query_w[k].push_back(zipf[t]);
        } else {
            doc_terms[k].push_back(t);
            doc_w[k].push_back(zipf[t]);
        }
    }
    for (int k = 0; k < K; ++k)
        if (query_terms[k].empty() || doc_terms[k].empty())
            throw std::invalid_argument(
                "synthetic spec: vocab_size too small for the topic vocabulary split");
    std::discrete_distribution<int> background(zipf.begin(), zipf.end());
    std::vector<std::discrete_distribution<int>> doc_topical, query_topical;
    for (int k = 0; k < K; ++k) {
        doc_topical.emplace_back(doc_w[k].begin(), doc_w[k].end());
        query_topical.emplace_back(query_w[k].begin(), query_w[k].end());
    }

    auto term_name = [](int t) {
        return "t" + std::to_string(t);
    };

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    // fraction of topical doc tokens drawn from the query-side dialect: the
    // term-overlap knob that sets how well exact matching can do
    constexpr double kDialectLeak = 0.15;
    constexpr double kBackground = 0.15;

    // Documents
    std::vector<std::vector<double>> doc_theta(spec.num_docs);
    std::vector<std::pair<std::string, std::vector<std::string>>> raw_docs(spec.num_docs);
    std::uniform_int_distribution<int> doc_len(spec.doc_len_min, spec.doc_len_max);
    for (int d = 0; d < spec.num_docs; ++d) {
        doc_theta[d] = draw_mixture(rng, K, 0.5, 0.9);
        std::discrete_distribution<int> topic_of(doc_theta[d].begin(), doc_theta[d].end());
        int len = doc_len(rng);
        std::vector<std::string> toks;
        toks.reserve(len);
        for (int i = 0; i < len; ++i) {
            int t;
            if (unit(rng) < kBackground) {
                t = background(rng);
            } else {
                int k = topic_of(rng);
                t = unit(rng) < kDialectLeak ? query_terms[k][query_topical[k](rng)]
                                             : doc_terms[k][doc_topical[k](rng)];
            }
            toks.push_back(term_name(t));
        }
        char buf[16];
        std::snprintf(buf, sizeof(buf), "d%04d", d);
        raw_docs[d] = {buf, std::move(toks)};
    }

    SyntheticCorpus out;
    out.corpus = build_corpus(raw_docs);

    // Queries: sharper mixtures, query-side topical keywords.
    std::uniform_int_distribution<int> query_len(spec.query_len_min, spec.query_len_max);
    const int max_redraws = 100;
    for (int q = 0; q < spec.num_queries; ++q) {
        std::vector<double> theta;
        bool ok = false;
        for (int attempt = 0; attempt < max_redraws && !ok; ++attempt) {
            theta = draw_mixture(rng, K, 0.7, 0.95);
            for (int d = 0; d < spec.num_docs && !ok; ++d)
                ok = cosine(theta, doc_theta[d]) >= spec.grade_thresholds[0];
        }
        if (!ok) {
            // align to a random doc's mixture; self-affinity 1.0 guarantees relevance
            std::uniform_int_distribution<int> pick(0, spec.num_docs - 1);
            theta = doc_theta[pick(rng)];
        }
        std::discrete_distribution<int> topic_of(theta.begin(), theta.end());
        int len = query_len(rng);
        Query query;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "q%03d", q);
        query.id = buf;
        for (int i = 0; i < len; ++i) {
            int k = topic_of(rng);
            int t = query_terms[k][query_topical[k](rng)];
            auto it = out.corpus.vocabulary.find(term_name(t));
            if (it != out.corpus.vocabulary.end()) query.tokens.push_back(it->second);
        }
        if (query.tokens.empty()) {
            // extremely unlikely; fall back to the most frequent corpus term
            query.tokens.push_back(0);
        }

        // judgments: all relevant docs + near-miss and random grade-0 docs
        std::vector<std::pair<double, int>> affinity(spec.num_docs);
        for (int d = 0; d < spec.num_docs; ++d) affinity[d] = {cosine(theta, doc_theta[d]), d};
        std::vector<Judgment> rel, zero_near;
        for (int d = 0; d < spec.num_docs; ++d) {
            double a = affinity[d].first;
            int grade = 0;
            for (std::size_t g = 0; g < spec.grade_thresholds.size(); ++g)
                if (a >= spec.grade_thresholds[g]) grade = static_cast<int>(g) + 1;
            if (grade > 0) rel.push_back(Judgment{query.id, raw_docs[d].first, grade});
        }
        std::sort(affinity.begin(), affinity.end(), [](const auto& x, const auto& y) {
            if (x.first != y.first) return x.first > y.first;
            return x.second < y.second;
        });
        std::size_t near_quota = 10;
        for (const auto& [a, d] : affinity) {
            if (zero_near.size() >= near_quota) break;
            if (a < spec.grade_thresholds[0])
                zero_near.push_back(Judgment{query.id, raw_docs[d].first, 0});
        }
        std::vector<Judgment> zero_rand;
        {
            std::uniform_int_distribution<int> pick(0, spec.num_docs - 1);
            std::unordered_map<int, bool> taken;
            int want = std::min(20, spec.num_docs);
            int guard = 0;
            while (static_cast<int>(zero_rand.size()) < want && guard++ < 10 * want) {
                int d = pick(rng);
                if (taken[d]) continue;
                taken[d] = true;
                if (cosine(theta, doc_theta[d]) < spec.grade_thresholds[0])
                    zero_rand.push_back(Judgment{query.id, raw_docs[d].first, 0});
            }
        }
        std::unordered_map<std::string, bool> judged;
        for (auto& j : rel) {
            judged[j.doc_id] = true;
            out.judgments.push_back(std::move(j));
        }
        for (auto* pool : {&zero_near, &zero_rand})
            for (auto& j : *pool)
                if (!judged[j.doc_id]) {
                    judged[j.doc_id] = true;
                    out.judgments.push_back(std::move(j));
                }
        out.queries.push_back(std::move(query));
    }
    return out;
}

std::vector<PairwiseSample> make_pairs(const std::vector<Judgment>& judgments,
                                       std::size_t max_pairs_per_query, std::uint64_t seed) {
    // group by query, preserving first-seen query order
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<const Judgment*>> by_query;
    for (const auto& j : judgments) {
        auto& v = by_query[j.query_id];
        if (v.empty()) order.push_back(j.query_id);
        v.push_back(&j);
    }

    std::vector<PairwiseSample> out;
    for (const auto& qid : order) {
        auto docs = by_query[qid];
        std::sort(docs.begin(), docs.end(), [](const Judgment* a, const Judgment* b) {
            if (a->grade != b->grade) return a->grade > b->grade;
            return a->doc_id < b->doc_id;
        });
        std::vector<PairwiseSample> pairs;
        for (std::size_t i = 0; i < docs.size(); ++i)
            for (std::size_t j = i + 1; j < docs.size(); ++j)
                if (docs[i]->grade > docs[j]->grade)
                    pairs.push_back(PairwiseSample{qid, docs[i]->doc_id, docs[j]->doc_id, 1.0,
                                                   LabelKind::Strong, std::nullopt});
        if (pairs.size() > max_pairs_per_query) {
            auto rng = make_rng(derive_seed(seed, "make-pairs", fnv1a64(qid)));
            std::shuffle(pairs.begin(), pairs.end(), rng);
            pairs.resize(max_pairs_per_query);
        }
        out.insert(out.end(), pairs.begin(), pairs.end());
    }
    return out;
}

JudgmentMap index_judgments(const std::vector<Judgment>& judgments) {
    JudgmentMap m;
    for (const auto& j : judgments) m[j.query_id][j.doc_id] = j.grade;
    return m;
}

}  // namespace fwl
