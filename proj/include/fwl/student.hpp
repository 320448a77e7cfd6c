#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fwl/corpus.hpp"

namespace fwl {

struct QueryIndex {
    std::unordered_map<std::string, const Query*> by_id;
    QueryIndex() = default;
    explicit QueryIndex(const std::vector<Query>& qs) {
        for (const auto& q : qs) by_id.emplace(q.id, &q);
    }
    const Query& get(const std::string& id) const;
};

struct LossConfig {
    double l2_lambda = 1e-5;  // weight of the L2 regularizer
};

/// eta1(t) = eta0 / (1 + decay*t); eta2(x) = exp(-beta * Sigma(x)).
struct LrSchedule {
    double eta0 = 0.05;
    double decay = 1e-4;
    double beta = 2.0;
};

struct StudentConfig {
    int embedding_dim = 16;          // e; representation width m = 3e
    std::vector<int> hidden = {32};  // tanh hidden layer widths
};

struct LayerParams {
    int in = 0;
    int out = 0;
    std::vector<double> w;  // row-major, out x in
    std::vector<double> b;  // out
};

/// All trainable state: token embeddings, global term-importance weights
/// used to compose them, and the feed-forward predictor.
struct StudentParams {
    int vocab_size = 0;
    int embedding_dim = 0;
    std::vector<double> embeddings;  // vocab_size x embedding_dim, row-major
    std::vector<double> importance;  // vocab_size
    std::vector<LayerParams> layers; // hidden layers then the 1-wide output layer

    int rep_dim() const { return 3 * embedding_dim; }
    bool same_shape(const StudentParams& o) const;
};

StudentParams init_student(const StudentConfig& cfg, int vocab_size, std::uint64_t seed);

/// Everything backward() needs from the forward pass.
struct ForwardTrace {
    std::array<std::vector<TermId>, 3> tokens;  // in-vocabulary tokens per component
    std::array<std::vector<double>, 3> mix;     // softmax mixing weights per component
    std::array<bool, 3> all_oov{};              // component collapsed to the zero vector
    std::vector<double> rep;                    // concatenated representation, width 3e
    std::vector<std::vector<double>> pre;       // per-layer pre-activations
    std::vector<std::vector<double>> act;       // per-hidden-layer activations
    double y_hat = 0.5;
};

/// Representation of one component: softmax over the tokens' importance
/// weights gives mixing weights; result is the weighted embedding average.
/// Out-of-vocabulary tokens are skipped; all-OOV yields the zero vector.
std::vector<double> component_rep(const StudentParams& params, std::span<const TermId> tokens);

/// psi(q, d+, d-): fills trace.tokens/mix/rep for the three components.
void represent(const StudentParams& params, std::span<const TermId> query_tokens,
               std::span<const TermId> pos_tokens, std::span<const TermId> neg_tokens,
               ForwardTrace& trace);

/// phi: tanh hidden layers, sigmoid output, clamped to the open interval (0,1).
/// The trace overload also records pre-activations for backward().
double predict(const StudentParams& params, std::span<const double> rep);
double predict(const StudentParams& params, ForwardTrace& trace);

/// represent + predict for a pairwise sample resolved against corpus/queries.
ForwardTrace forward_sample(const StudentParams& params, const Corpus& corpus,
                            const QueryIndex& queries, const PairwiseSample& sample);

/// Binary cross-entropy plus (l2_lambda/2) * (||ff weights||^2 + ||embeddings||^2).
/// Biases and importance weights are not regularized.
double loss(double y_hat, double label, const StudentParams& params, const LossConfig& cfg);

/// Exact gradient of loss() w.r.t. every parameter, including embeddings and
/// importance weights through the softmax composition. `grads` is resized to
/// match params and fully overwritten.
void backward(const StudentParams& params, const ForwardTrace& trace, double label,
              const LossConfig& cfg, StudentParams& grads);
StudentParams backward(const StudentParams& params, const ForwardTrace& trace, double label,
                       const LossConfig& cfg);

/// eta2 = exp(-beta * sigma). Rejects negative inputs.
double fidelity_lr(double sigma, double beta);

/// eta1(t) = eta0 / (1 + decay * t).
double lr_schedule(const LrSchedule& sched, std::int64_t t);

/// params -= eta_t * grads, elementwise. Rejects shape mismatch and eta_t < 0.
void sgd_step(StudentParams& params, const StudentParams& grads, double eta_t);

struct TrainStats {
    std::int64_t t_end = 0;
    double mean_loss = 0.0;
};

/// One seeded-shuffle pass of per-sample SGD. Per-sample learning rate is
/// eta1(t) * eta2(Sigma); Sigma is the sample's uncertainty for soft labels
/// and 0 otherwise. The step counter is threaded through via t0/t_end.
/// When eta2_log is given, the eta2 of every step is appended to it.
TrainStats train_pass(StudentParams& params, const Corpus& corpus, const QueryIndex& queries,
                      const std::vector<PairwiseSample>& samples, const LrSchedule& sched,
                      const LossConfig& cfg, std::int64_t t0, std::uint64_t seed,
                      std::vector<double>* eta2_log = nullptr);

/// train_pass without the shuffle: consumes samples in the given order.
/// Used where the draw order is itself part of the training scheme.
TrainStats train_ordered(StudentParams& params, const Corpus& corpus, const QueryIndex& queries,
                         const std::vector<PairwiseSample>& samples, const LrSchedule& sched,
                         const LossConfig& cfg, std::int64_t t0,
                         std::vector<double>* eta2_log = nullptr);

/// Appends, for every sample, its swapped copy: (q, neg, pos) with label
/// 1 - label and the same uncertainty. Training on both orientations keeps
/// y_hat(a,b) ~= 1 - y_hat(b,a) without a structural constraint.
std::vector<PairwiseSample> augment_swapped(const std::vector<PairwiseSample>& samples);

}  // namespace fwl
