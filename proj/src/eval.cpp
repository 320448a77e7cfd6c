#include "fwl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

#include "fwl/rng.hpp"

namespace fwl {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

double clamp_open_unit(double v) {
    static const double lo = std::nextafter(0.0, 1.0);
    static const double hi = std::nextafter(1.0, 0.0);
    return std::min(std::max(v, lo), hi);
}

}  // namespace

RankedList rank_with_student(const StudentParams& params, const Corpus& corpus,
                             const Query& query, const std::vector<std::string>& candidates) {
    if (candidates.empty())
        throw std::invalid_argument("rank_with_student: candidates must be non-empty");

    // canonical candidate order makes scores independent of input order
    std::vector<std::string> ids = candidates;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    const std::size_t n = ids.size();

    RankedList out;
    out.query_id = query.id;
    if (n == 1) {
        out.docs.push_back({ids[0], 0.5});
        return out;
    }

    const int e = params.embedding_dim;
    const LayerParams& first = params.layers.front();
    const int h = first.out;

    // The first predictor layer factors across the three rep components;
    // per-doc partial products turn the O(n^2) tournament into cheap sums.
    std::vector<double> rep_q = component_rep(params, query.tokens);
    std::vector<double> zq(h, 0.0);
    for (int o = 0; o < h; ++o) {
        const double* wrow = first.w.data() + static_cast<std::size_t>(o) * first.in;
        double s = 0.0;
        for (int j = 0; j < e; ++j) s += wrow[j] * rep_q[j];
        zq[o] = s;
    }
    std::vector<std::vector<double>> za(n, std::vector<double>(h, 0.0));
    std::vector<std::vector<double>> zb(n, std::vector<double>(h, 0.0));
    for (std::size_t d = 0; d < n; ++d) {
        const Document* doc = corpus.find_doc(ids[d]);
        if (!doc) throw std::invalid_argument("rank_with_student: unknown doc id " + ids[d]);
        std::vector<double> rep_d = component_rep(params, doc->tokens);
        for (int o = 0; o < h; ++o) {
            const double* wrow = first.w.data() + static_cast<std::size_t>(o) * first.in;
            double sa = 0.0, sb = 0.0;
            for (int j = 0; j < e; ++j) {
                sa += wrow[e + j] * rep_d[j];
                sb += wrow[2 * e + j] * rep_d[j];
            }
            za[d][o] = sa;
            zb[d][o] = sb;
        }
    }

    const bool first_is_output = params.layers.size() == 1;
    std::vector<double> x(h), next;
    std::vector<double> scores(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            for (int o = 0; o < h; ++o) x[o] = first.b[o] + zq[o] + za[i][o] + zb[j][o];
            double z_out;
            if (first_is_output) {
                z_out = x[0];
            } else {
                for (int o = 0; o < h; ++o) x[o] = std::tanh(x[o]);
                for (std::size_t l = 1; l + 1 < params.layers.size(); ++l) {
                    const LayerParams& layer = params.layers[l];
                    next.assign(layer.out, 0.0);
                    for (int o = 0; o < layer.out; ++o) {
                        const double* wrow = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
                        double z = layer.b[o];
                        for (int k = 0; k < layer.in; ++k) z += wrow[k] * x[k];
                        next[o] = std::tanh(z);
                    }
                    x = next;
                }
                const LayerParams& last = params.layers.back();
                double z = last.b[0];
                for (int k = 0; k < last.in; ++k) z += last.w[k] * x[k];
                z_out = z;
            }
            sum += clamp_open_unit(sigmoid(z_out));
        }
        scores[i] = sum / static_cast<double>(n - 1);
    }

    out.docs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.docs.push_back({ids[i], scores[i]});
    std::sort(out.docs.begin(), out.docs.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    return out;
}

double average_precision(const RankedList& ranked,
                         const std::unordered_map<std::string, int>& grades, std::size_t cutoff) {
    if (cutoff < 1) throw std::invalid_argument("average_precision: cutoff must be >= 1");
    std::size_t total_relevant = 0;
    for (const auto& [id, g] : grades)
        if (g >= 1) ++total_relevant;
    if (total_relevant == 0) return 0.0;

    double ap = 0.0;
    std::size_t hits = 0;
    std::size_t depth = std::min(cutoff, ranked.docs.size());
    for (std::size_t i = 0; i < depth; ++i) {
        auto it = grades.find(ranked.docs[i].doc_id);
        if (it != grades.end() && it->second >= 1) {
            ++hits;
            ap += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    return ap / static_cast<double>(total_relevant);
}

double ndcg_at(const RankedList& ranked, const std::unordered_map<std::string, int>& grades,
               std::size_t k) {
    if (k < 1) throw std::invalid_argument("ndcg_at: k must be >= 1");
    double dcg = 0.0;
    std::size_t depth = std::min(k, ranked.docs.size());
    for (std::size_t i = 0; i < depth; ++i) {
        auto it = grades.find(ranked.docs[i].doc_id);
        int g = it == grades.end() ? 0 : it->second;
        if (g > 0) dcg += (std::pow(2.0, g) - 1.0) / std::log2(static_cast<double>(i + 2));
    }
    std::vector<int> ideal;
    ideal.reserve(grades.size());
    for (const auto& [id, g] : grades)
        if (g > 0) ideal.push_back(g);
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i)
        idcg += (std::pow(2.0, ideal[i]) - 1.0) / std::log2(static_cast<double>(i + 2));
    return idcg > 0.0 ? dcg / idcg : 0.0;
}

MetricReport make_report(std::vector<std::string> query_ids, std::vector<double> ap,
                         std::vector<double> ndcg20, std::vector<bool> has_relevant) {
    MetricReport r;
    r.query_ids = std::move(query_ids);
    r.ap = std::move(ap);
    r.ndcg20 = std::move(ndcg20);
    r.has_relevant = std::move(has_relevant);
    double ap_sum = 0.0, nd_sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < r.query_ids.size(); ++i) {
        if (!r.has_relevant[i]) continue;
        ap_sum += r.ap[i];
        nd_sum += r.ndcg20[i];
        ++counted;
    }
    r.map = counted ? ap_sum / static_cast<double>(counted) : 0.0;
    r.mean_ndcg20 = counted ? nd_sum / static_cast<double>(counted) : 0.0;
    return r;
}

namespace {

// Continued fraction for the incomplete beta function (Lentz's method).
double betacf(double a, double b, double x) {
    constexpr double fpmin = 1e-30;
    constexpr double eps = 1e-14;
    constexpr int maxit = 300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= maxit; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) return h;
    }
    throw std::runtime_error("incomplete_beta: continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x < 0.0 || x > 1.0) throw std::invalid_argument("incomplete_beta: x must be in [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                   b * std::log(1.0 - x);
    double bt = std::exp(ln_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double t_two_tailed_p(double t, double dof) {
    if (dof <= 0.0) throw std::invalid_argument("t_two_tailed_p: dof must be > 0");
    if (std::isinf(t)) return 0.0;
    return incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
}

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b,
                         int num_comparisons) {
    if (a.size() != b.size()) throw std::invalid_argument("paired_ttest: length mismatch");
    if (a.size() < 2) throw std::invalid_argument("paired_ttest: need n >= 2");
    if (num_comparisons < 1)
        throw std::invalid_argument("paired_ttest: num_comparisons must be >= 1");

    const std::size_t n = a.size();
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = (a[i] - b[i]) - mean;
        ss += d * d;
    }
    double sd = std::sqrt(ss / static_cast<double>(n - 1));

    TTestResult r;
    r.n = static_cast<int>(n);
    if (sd == 0.0) {
        if (mean == 0.0) {
            r.t_stat = 0.0;
            r.p_value = 1.0;
        } else {
            r.t_stat = mean > 0 ? std::numeric_limits<double>::infinity()
                                : -std::numeric_limits<double>::infinity();
            r.p_value = 0.0;
        }
    } else {
        r.t_stat = mean / (sd / std::sqrt(static_cast<double>(n)));
        r.p_value = t_two_tailed_p(r.t_stat, static_cast<double>(n - 1));
    }
    r.corrected_p = std::min(1.0, r.p_value * num_comparisons);
    r.significant_at_0_05 = r.corrected_p < 0.05;
    return r;
}

FoldPlan make_folds(const std::vector<std::string>& query_ids, int num_folds, std::uint64_t seed,
                    double train_fraction) {
    if (num_folds < 2) throw std::invalid_argument("make_folds: need >= 2 folds");
    if (static_cast<int>(query_ids.size()) < num_folds)
        throw std::invalid_argument("make_folds: fewer queries than folds");
    if (!(train_fraction > 0.0 && train_fraction <= 1.0))
        throw std::invalid_argument("make_folds: train_fraction must be in (0,1]");

    std::vector<std::string> ids = query_ids;
    std::sort(ids.begin(), ids.end());
    auto rng = make_rng(derive_seed(seed, "fold-split"));
    std::shuffle(ids.begin(), ids.end(), rng);

    FoldPlan plan;
    plan.seed = seed;
    plan.folds.resize(num_folds);
    for (std::size_t i = 0; i < ids.size(); ++i)
        plan.folds[i % num_folds].test.push_back(ids[i]);
    for (int f = 0; f < num_folds; ++f) {
        std::vector<std::string> rest;
        for (int g = 0; g < num_folds; ++g)
            if (g != f) rest.insert(rest.end(), plan.folds[g].test.begin(), plan.folds[g].test.end());
        auto vrng = make_rng(derive_seed(seed, "train-val-split", static_cast<std::uint64_t>(f)));
        std::shuffle(rest.begin(), rest.end(), vrng);
        std::size_t n_train = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::floor(train_fraction * rest.size())));
        plan.folds[f].train.assign(rest.begin(), rest.begin() + n_train);
        plan.folds[f].validation.assign(rest.begin() + n_train, rest.end());
    }
    return plan;
}

std::vector<std::string> eval_candidates(const Corpus& corpus, const Query& query,
                                         const JudgmentMap& judgments, std::size_t top_n) {
    auto pool = rank_by_annotator(AnnotatorKind::make_bm25(), corpus, query, top_n);
    std::vector<std::string> ids;
    ids.reserve(pool.size() + 32);
    for (const auto& sd : pool) ids.push_back(sd.doc_id);
    auto it = judgments.find(query.id);
    if (it != judgments.end())
        for (const auto& [doc_id, grade] : it->second) ids.push_back(doc_id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

MetricReport evaluate_rankings(const std::vector<RankedList>& rankings,
                               const JudgmentMap& judgments) {
    static const std::unordered_map<std::string, int> empty;
    std::vector<std::string> qids;
    std::vector<double> ap, nd;
    std::vector<bool> has_rel;
    for (const auto& r : rankings) {
        auto it = judgments.find(r.query_id);
        const auto& grades = it == judgments.end() ? empty : it->second;
        bool rel = false;
        for (const auto& [id, g] : grades)
            if (g >= 1) rel = true;
        qids.push_back(r.query_id);
        ap.push_back(average_precision(r, grades));
        nd.push_back(ndcg_at(r, grades));
        has_rel.push_back(rel);
    }
    return make_report(std::move(qids), std::move(ap), std::move(nd), std::move(has_rel));
}

}  // namespace fwl
