#include "fwl/student.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fwl/rng.hpp"

namespace fwl {

const Query& QueryIndex::get(const std::string& id) const {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw std::invalid_argument("unknown query id: " + id);
    return *it->second;
}

bool StudentParams::same_shape(const StudentParams& o) const {
    if (vocab_size != o.vocab_size || embedding_dim != o.embedding_dim) return false;
    if (layers.size() != o.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].in != o.layers[i].in || layers[i].out != o.layers[i].out) return false;
    return true;
}

StudentParams init_student(const StudentConfig& cfg, int vocab_size, std::uint64_t seed) {
    if (cfg.embedding_dim < 1) throw std::invalid_argument("student: embedding_dim must be >= 1");
    for (int h : cfg.hidden)
        if (h < 1) throw std::invalid_argument("student: hidden widths must be >= 1");
    if (vocab_size < 1) throw std::invalid_argument("student: vocab_size must be >= 1");

    StudentParams p;
    p.vocab_size = vocab_size;
    p.embedding_dim = cfg.embedding_dim;
    auto rng = make_rng(derive_seed(seed, "student-init"));

    const double emb_bound = 1.0 / std::sqrt(static_cast<double>(cfg.embedding_dim));
    std::uniform_real_distribution<double> emb_dist(-emb_bound, emb_bound);
    p.embeddings.resize(static_cast<std::size_t>(vocab_size) * cfg.embedding_dim);
    for (auto& v : p.embeddings) v = emb_dist(rng);
    p.importance.assign(vocab_size, 0.0);

    int in = p.rep_dim();
    auto add_layer = [&](int out) {
        LayerParams l;
        l.in = in;
        l.out = out;
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        l.w.resize(static_cast<std::size_t>(out) * in);
        for (auto& v : l.w) v = dist(rng);
        l.b.assign(out, 0.0);
        p.layers.push_back(std::move(l));
        in = out;
    };
    for (int h : cfg.hidden) add_layer(h);
    add_layer(1);
    return p;
}

namespace {

double clamp_open_unit(double v) {
    static const double lo = std::nextafter(0.0, 1.0);
    static const double hi = std::nextafter(1.0, 0.0);
    return std::min(std::max(v, lo), hi);
}

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    double e = std::exp(z);
    return e / (1.0 + e);
}

void component_into(const StudentParams& p, std::span<const TermId> tokens,
                    std::vector<TermId>& ids, std::vector<double>& mix, bool& all_oov,
                    double* rep_out) {
    const int e = p.embedding_dim;
    ids.clear();
    mix.clear();
    for (TermId t : tokens)
        if (t >= 0 && t < p.vocab_size) ids.push_back(t);
    std::fill(rep_out, rep_out + e, 0.0);
    if (ids.empty()) {
        all_oov = true;
        return;
    }
    all_oov = false;
    double m = p.importance[ids[0]];
    for (TermId t : ids) m = std::max(m, p.importance[t]);
    double z = 0.0;
    mix.reserve(ids.size());
    for (TermId t : ids) {
        double a = std::exp(p.importance[t] - m);
        mix.push_back(a);
        z += a;
    }
    for (auto& a : mix) a /= z;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const double* row = p.embeddings.data() + static_cast<std::size_t>(ids[i]) * e;
        for (int j = 0; j < e; ++j) rep_out[j] += mix[i] * row[j];
    }
}

void ff_forward(const StudentParams& p, std::span<const double> rep,
                std::vector<std::vector<double>>* pre, std::vector<std::vector<double>>* act,
                double& y_hat) {
    if (static_cast<int>(rep.size()) != p.rep_dim())
        throw std::invalid_argument("predict: representation width mismatch");
    const std::size_t L = p.layers.size();
    if (pre) pre->resize(L);
    if (act) act->resize(L > 0 ? L - 1 : 0);
    std::vector<double> cur(rep.begin(), rep.end());
    std::vector<double> next;
    for (std::size_t l = 0; l < L; ++l) {
        const LayerParams& layer = p.layers[l];
        next.assign(layer.out, 0.0);
        for (int o = 0; o < layer.out; ++o) {
            const double* wrow = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
            double z = layer.b[o];
            for (int i = 0; i < layer.in; ++i) z += wrow[i] * cur[i];
            next[o] = z;
        }
        if (pre) (*pre)[l] = next;
        if (l + 1 < L) {
            for (auto& v : next) v = std::tanh(v);
            if (act) (*act)[l] = next;
        }
        cur.swap(next);
    }
    y_hat = clamp_open_unit(sigmoid(cur[0]));
}

// Data part of the gradients (no regularizer). Layer grads are accumulated
// into `gl`, embedding/importance grads into the dense demb/dimp buffers;
// every vocabulary row written is appended to `touched` exactly once (rows
// are flagged through `touched_flag`). All target slots must be zero on
// entry for the rows/layers being written.
void accumulate_data_grads(const StudentParams& p, const ForwardTrace& tr, double label,
                           std::vector<LayerParams>& gl, std::vector<double>& demb,
                           std::vector<double>& dimp, std::vector<TermId>& touched,
                           std::vector<char>& touched_flag) {
    const std::size_t L = p.layers.size();
    const int e = p.embedding_dim;

    // delta at the output pre-activation; standard BCE/sigmoid identity
    std::vector<double> delta{tr.y_hat - label};
    std::vector<double> dx;
    for (std::size_t li = L; li-- > 0;) {
        const LayerParams& layer = p.layers[li];
        const std::vector<double>& input = li == 0 ? tr.rep : tr.act[li - 1];
        LayerParams& g = gl[li];
        for (int o = 0; o < layer.out; ++o) {
            double d = delta[o];
            double* gw = g.w.data() + static_cast<std::size_t>(o) * layer.in;
            for (int i = 0; i < layer.in; ++i) gw[i] += d * input[i];
            g.b[o] += d;
        }
        dx.assign(layer.in, 0.0);
        for (int o = 0; o < layer.out; ++o) {
            double d = delta[o];
            const double* wrow = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
            for (int i = 0; i < layer.in; ++i) dx[i] += wrow[i] * d;
        }
        if (li > 0) {
            // through tanh: act holds tanh(pre)
            delta.assign(layer.in, 0.0);
            const std::vector<double>& a = tr.act[li - 1];
            for (int i = 0; i < layer.in; ++i) delta[i] = dx[i] * (1.0 - a[i] * a[i]);
        }
    }
    // dx now holds dL/d rep
    std::vector<double> u;
    for (int c = 0; c < 3; ++c) {
        if (tr.all_oov[c]) continue;
        const double* g = dx.data() + static_cast<std::size_t>(c) * e;
        const auto& ids = tr.tokens[c];
        const auto& mix = tr.mix[c];
        u.assign(ids.size(), 0.0);
        double ubar = 0.0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const double* row = p.embeddings.data() + static_cast<std::size_t>(ids[i]) * e;
            double dot = 0.0;
            for (int j = 0; j < e; ++j) dot += g[j] * row[j];
            u[i] = dot;
            ubar += mix[i] * dot;
        }
        for (std::size_t i = 0; i < ids.size(); ++i) {
            TermId row = ids[i];
            if (!touched_flag[row]) {
                touched_flag[row] = 1;
                touched.push_back(row);
            }
            double* dr = demb.data() + static_cast<std::size_t>(row) * e;
            for (int j = 0; j < e; ++j) dr[j] += mix[i] * g[j];
            dimp[row] += mix[i] * (u[i] - ubar);
        }
    }
}

void check_trace(const StudentParams& p, const ForwardTrace& tr) {
    if (static_cast<int>(tr.rep.size()) != p.rep_dim())
        throw std::invalid_argument("backward: stale trace (representation width mismatch)");
    if (tr.pre.size() != p.layers.size())
        throw std::invalid_argument("backward: stale trace (layer count mismatch)");
    for (std::size_t l = 0; l + 1 < p.layers.size(); ++l)
        if (static_cast<int>(tr.act[l].size()) != p.layers[l].out)
            throw std::invalid_argument("backward: stale trace (activation width mismatch)");
}

}  // namespace

std::vector<double> component_rep(const StudentParams& params, std::span<const TermId> tokens) {
    std::vector<double> rep(params.embedding_dim, 0.0);
    std::vector<TermId> ids;
    std::vector<double> mix;
    bool oov = false;
    component_into(params, tokens, ids, mix, oov, rep.data());
    return rep;
}

void represent(const StudentParams& params, std::span<const TermId> query_tokens,
               std::span<const TermId> pos_tokens, std::span<const TermId> neg_tokens,
               ForwardTrace& trace) {
    const int e = params.embedding_dim;
    trace.rep.assign(3 * e, 0.0);
    std::span<const TermId> comps[3] = {query_tokens, pos_tokens, neg_tokens};
    for (int c = 0; c < 3; ++c) {
        bool oov = false;
        component_into(params, comps[c], trace.tokens[c], trace.mix[c], oov,
                       trace.rep.data() + static_cast<std::size_t>(c) * e);
        trace.all_oov[c] = oov;
    }
}

double predict(const StudentParams& params, std::span<const double> rep) {
    double y = 0.5;
    ff_forward(params, rep, nullptr, nullptr, y);
    return y;
}

double predict(const StudentParams& params, ForwardTrace& trace) {
    ff_forward(params, trace.rep, &trace.pre, &trace.act, trace.y_hat);
    return trace.y_hat;
}

ForwardTrace forward_sample(const StudentParams& params, const Corpus& corpus,
                            const QueryIndex& queries, const PairwiseSample& sample) {
    const Query& q = queries.get(sample.query_id);
    const Document* pos = corpus.find_doc(sample.pos_doc_id);
    const Document* neg = corpus.find_doc(sample.neg_doc_id);
    if (!pos) throw std::invalid_argument("unknown doc id: " + sample.pos_doc_id);
    if (!neg) throw std::invalid_argument("unknown doc id: " + sample.neg_doc_id);
    ForwardTrace tr;
    represent(params, q.tokens, pos->tokens, neg->tokens, tr);
    predict(params, tr);
    return tr;
}

double loss(double y_hat, double label, const StudentParams& params, const LossConfig& cfg) {
    if (!(y_hat > 0.0 && y_hat < 1.0))
        throw std::invalid_argument("loss: y_hat must lie in (0,1)");
    if (label < 0.0 || label > 1.0) throw std::invalid_argument("loss: label must lie in [0,1]");
    double ce = -(label * std::log(y_hat) + (1.0 - label) * std::log(1.0 - y_hat));
    if (cfg.l2_lambda == 0.0) return ce;
    double sq = 0.0;
    for (const auto& l : params.layers)
        for (double w : l.w) sq += w * w;
    for (double v : params.embeddings) sq += v * v;
    return ce + 0.5 * cfg.l2_lambda * sq;
}

void backward(const StudentParams& params, const ForwardTrace& trace, double label,
              const LossConfig& cfg, StudentParams& grads) {
    check_trace(params, trace);
    grads.vocab_size = params.vocab_size;
    grads.embedding_dim = params.embedding_dim;
    grads.embeddings.assign(params.embeddings.size(), 0.0);
    grads.importance.assign(params.importance.size(), 0.0);
    grads.layers.resize(params.layers.size());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        grads.layers[l].in = params.layers[l].in;
        grads.layers[l].out = params.layers[l].out;
        grads.layers[l].w.assign(params.layers[l].w.size(), 0.0);
        grads.layers[l].b.assign(params.layers[l].b.size(), 0.0);
    }
    std::vector<TermId> touched;
    std::vector<char> flags(params.vocab_size, 0);
    accumulate_data_grads(params, trace, label, grads.layers, grads.embeddings,
                          grads.importance, touched, flags);
    if (cfg.l2_lambda != 0.0) {
        for (std::size_t l = 0; l < params.layers.size(); ++l)
            for (std::size_t i = 0; i < params.layers[l].w.size(); ++i)
                grads.layers[l].w[i] += cfg.l2_lambda * params.layers[l].w[i];
        for (std::size_t i = 0; i < params.embeddings.size(); ++i)
            grads.embeddings[i] += cfg.l2_lambda * params.embeddings[i];
    }
}

StudentParams backward(const StudentParams& params, const ForwardTrace& trace, double label,
                       const LossConfig& cfg) {
    StudentParams g;
    backward(params, trace, label, cfg, g);
    return g;
}

double fidelity_lr(double sigma, double beta) {
    if (sigma < 0.0) throw std::invalid_argument("fidelity_lr: sigma must be >= 0");
    if (beta < 0.0) throw std::invalid_argument("fidelity_lr: beta must be >= 0");
    return std::exp(-beta * sigma);
}

double lr_schedule(const LrSchedule& sched, std::int64_t t) {
    if (t < 0) throw std::invalid_argument("lr_schedule: t must be >= 0");
    return sched.eta0 / (1.0 + sched.decay * static_cast<double>(t));
}

void sgd_step(StudentParams& params, const StudentParams& grads, double eta_t) {
    if (!(eta_t >= 0.0)) throw std::invalid_argument("sgd_step: eta_t must be >= 0");
    if (!params.same_shape(grads)) throw std::invalid_argument("sgd_step: shape mismatch");
    for (std::size_t i = 0; i < params.embeddings.size(); ++i)
        params.embeddings[i] -= eta_t * grads.embeddings[i];
    for (std::size_t i = 0; i < params.importance.size(); ++i)
        params.importance[i] -= eta_t * grads.importance[i];
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        for (std::size_t i = 0; i < params.layers[l].w.size(); ++i)
            params.layers[l].w[i] -= eta_t * grads.layers[l].w[i];
        for (std::size_t i = 0; i < params.layers[l].b.size(); ++i)
            params.layers[l].b[i] -= eta_t * grads.layers[l].b[i];
    }
}

namespace {

// Reused buffers for the per-sample update inside train_pass.
struct TrainScratch {
    std::vector<LayerParams> gl;
    std::vector<double> demb, dimp;
    std::vector<TermId> touched;
    std::vector<char> flags;

    explicit TrainScratch(const StudentParams& p) {
        gl.resize(p.layers.size());
        for (std::size_t l = 0; l < p.layers.size(); ++l) {
            gl[l].in = p.layers[l].in;
            gl[l].out = p.layers[l].out;
            gl[l].w.assign(p.layers[l].w.size(), 0.0);
            gl[l].b.assign(p.layers[l].b.size(), 0.0);
        }
        demb.assign(p.embeddings.size(), 0.0);
        dimp.assign(p.importance.size(), 0.0);
        flags.assign(p.vocab_size, 0);
    }
};

// Applies one SGD step. Produces exactly the same parameter values as
// backward() followed by sgd_step(), but only materializes gradients for
// the vocabulary rows the sample touches.
void fused_update(StudentParams& p, const ForwardTrace& tr, double label, const LossConfig& cfg,
                  double eta, TrainScratch& s) {
    if (eta == 0.0) return;  // zero step leaves parameters bit-identical

    for (auto& g : s.gl) {
        std::fill(g.w.begin(), g.w.end(), 0.0);
        std::fill(g.b.begin(), g.b.end(), 0.0);
    }
    accumulate_data_grads(p, tr, label, s.gl, s.demb, s.dimp, s.touched, s.flags);

    const double lambda = cfg.l2_lambda;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        auto& layer = p.layers[l];
        const auto& g = s.gl[l];
        if (lambda != 0.0) {
            for (std::size_t i = 0; i < layer.w.size(); ++i)
                layer.w[i] -= eta * (g.w[i] + lambda * layer.w[i]);
        } else {
            for (std::size_t i = 0; i < layer.w.size(); ++i) layer.w[i] -= eta * g.w[i];
        }
        for (std::size_t i = 0; i < layer.b.size(); ++i) layer.b[i] -= eta * g.b[i];
    }

    const int e = p.embedding_dim;
    if (lambda != 0.0) {
        // weight decay applies to every embedding row, touched or not
        for (int row = 0; row < p.vocab_size; ++row) {
            double* w = p.embeddings.data() + static_cast<std::size_t>(row) * e;
            if (s.flags[row]) {
                const double* g = s.demb.data() + static_cast<std::size_t>(row) * e;
                for (int j = 0; j < e; ++j) w[j] -= eta * (g[j] + lambda * w[j]);
            } else {
                for (int j = 0; j < e; ++j) w[j] -= eta * (lambda * w[j]);
            }
        }
        for (TermId row : s.touched) p.importance[row] -= eta * s.dimp[row];
    } else {
        for (TermId row : s.touched) {
            double* w = p.embeddings.data() + static_cast<std::size_t>(row) * e;
            const double* g = s.demb.data() + static_cast<std::size_t>(row) * e;
            for (int j = 0; j < e; ++j) w[j] -= eta * g[j];
            p.importance[row] -= eta * s.dimp[row];
        }
    }

    for (TermId row : s.touched) {
        double* g = s.demb.data() + static_cast<std::size_t>(row) * e;
        std::fill(g, g + e, 0.0);
        s.dimp[row] = 0.0;
        s.flags[row] = 0;
    }
    s.touched.clear();
}

struct ResolvedSample {
    const std::vector<TermId>* q;
    const std::vector<TermId>* pos;
    const std::vector<TermId>* neg;
    double label;
    double sigma;
};

}  // namespace

namespace {

TrainStats train_core(StudentParams& params, const Corpus& corpus, const QueryIndex& queries,
                      const std::vector<PairwiseSample>& samples,
                      std::span<const std::size_t> order, const LrSchedule& sched,
                      const LossConfig& cfg, std::int64_t t0, std::vector<double>* eta2_log) {
    if (samples.empty()) throw std::invalid_argument("train_pass: samples must be non-empty");
    if (t0 < 0) throw std::invalid_argument("train_pass: t0 must be >= 0");

    std::vector<ResolvedSample> resolved;
    resolved.reserve(samples.size());
    for (const auto& s : samples) {
        const Query& q = queries.get(s.query_id);
        const Document* pos = corpus.find_doc(s.pos_doc_id);
        const Document* neg = corpus.find_doc(s.neg_doc_id);
        if (!pos) throw std::invalid_argument("unknown doc id: " + s.pos_doc_id);
        if (!neg) throw std::invalid_argument("unknown doc id: " + s.neg_doc_id);
        double sigma = s.label_kind == LabelKind::Soft && s.uncertainty ? *s.uncertainty : 0.0;
        resolved.push_back({&q.tokens, &pos->tokens, &neg->tokens, s.label, sigma});
    }

    TrainScratch scratch(params);
    ForwardTrace trace;
    double loss_sum = 0.0;
    std::int64_t t = t0;
    for (std::size_t idx : order) {
        const ResolvedSample& s = resolved[idx];
        represent(params, *s.q, *s.pos, *s.neg, trace);
        predict(params, trace);
        loss_sum += loss(trace.y_hat, s.label, params, cfg);
        double eta2 = fidelity_lr(s.sigma, sched.beta);
        if (eta2_log) eta2_log->push_back(eta2);
        double eta = lr_schedule(sched, t) * eta2;
        fused_update(params, trace, s.label, cfg, eta, scratch);
        ++t;
    }
    return {t, loss_sum / static_cast<double>(resolved.size())};
}

}  // namespace

TrainStats train_pass(StudentParams& params, const Corpus& corpus, const QueryIndex& queries,
                      const std::vector<PairwiseSample>& samples, const LrSchedule& sched,
                      const LossConfig& cfg, std::int64_t t0, std::uint64_t seed,
                      std::vector<double>* eta2_log) {
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto rng = make_rng(derive_seed(seed, "train-pass-shuffle"));
    std::shuffle(order.begin(), order.end(), rng);
    return train_core(params, corpus, queries, samples, order, sched, cfg, t0, eta2_log);
}

TrainStats train_ordered(StudentParams& params, const Corpus& corpus, const QueryIndex& queries,
                         const std::vector<PairwiseSample>& samples, const LrSchedule& sched,
                         const LossConfig& cfg, std::int64_t t0, std::vector<double>* eta2_log) {
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    return train_core(params, corpus, queries, samples, order, sched, cfg, t0, eta2_log);
}

std::vector<PairwiseSample> augment_swapped(const std::vector<PairwiseSample>& samples) {
    std::vector<PairwiseSample> out;
    out.reserve(samples.size() * 2);
    out = samples;
    for (const auto& s : samples) {
        PairwiseSample sw = s;
        std::swap(sw.pos_doc_id, sw.neg_doc_id);
        sw.label = 1.0 - s.label;
        out.push_back(std::move(sw));
    }
    return out;
}

}  // namespace fwl
