#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "fwl/corpus.hpp"

namespace fwl {

struct KernelParams {
    double signal_var = 1.0;   // sigma_f^2
    double length_scale = 1.0; // ell
    double noise_var = 1e-4;   // sigma_n^2

    void validate() const;
};

/// Exact GP posterior: Cholesky factor of K + sigma_n^2 I and the dual
/// coefficients alpha = (K + sigma_n^2 I)^-1 (y - prior_mean).
struct GPPosterior {
    Eigen::MatrixXd train_inputs;  // n x m
    Eigen::MatrixXd chol_lower;    // L, lower triangular
    Eigen::VectorXd dual_coefs;    // alpha
    KernelParams kernel;
    double prior_mean = 0.0;

    Eigen::Index size() const { return train_inputs.rows(); }
};

struct GPPrediction {
    double mean = 0.0;
    double var = 0.0;
};

/// Separate GP per k-means region; queries are routed to the nearest centroid.
struct ClusteredGP {
    Eigen::MatrixXd centroids;  // k x m
    std::vector<GPPosterior> members;
};

struct SoftSample {
    PairwiseSample sample;  // label/label_kind rewritten to the soft channel
    double soft_label = 0.0;
    double uncertainty_value = 0.0;
};

/// sigma_f^2 * exp(-||a-b||^2 / (2 ell^2)).
double kernel_rbf(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const KernelParams& kp);

/// Fits an exact GP. Prior mean is mean(y). On Cholesky failure the diagonal
/// jitter escalates from 1e-10 to 1e-6 before giving up with a conditioning
/// error.
GPPosterior gp_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const KernelParams& kp);

/// Posterior mean and variance at x; the variance is computed through
/// triangular solves and clamped at 0 from below.
GPPrediction gp_predict(const GPPosterior& post, const Eigen::VectorXd& x);

/// Median of pairwise Euclidean distances between rows of X; 1.0 when the
/// median degenerates to 0. The standard parameter-free length scale choice.
double median_heuristic_length(const Eigen::MatrixXd& X);

/// Deterministic k-means: seeded farthest-point initialization, at most 100
/// Lloyd iterations, empty clusters re-seeded from the farthest point.
struct KMeansResult {
    Eigen::MatrixXd centroids;          // k x m
    std::vector<int> assignment;        // n
};
KMeansResult kmeans(const Eigen::MatrixXd& X, int k, std::uint64_t seed);

/// k-means over X, then one GP per cluster on its member rows.
ClusteredGP fit_clustered(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int k,
                          const KernelParams& kp, std::uint64_t seed);

/// Delegates to the GP of the nearest centroid (ties: lowest cluster index).
GPPrediction predict_clustered(const ClusteredGP& cgp, const Eigen::VectorXd& x);

/// g(.): clamps the regression mean into the label space [0,1].
double soft_label(double mean);

/// h(.): identity on the scalar posterior variance. Rejects negative input.
double uncertainty(double var);

using RepresentFn = std::function<Eigen::VectorXd(const PairwiseSample&)>;
using TeacherFn = std::function<GPPrediction(const Eigen::VectorXd&)>;

/// Labels every sample of D_w u D_s (after dedup by (qid, pos, neg)) with the
/// teacher's soft label and uncertainty under the frozen representation.
std::vector<SoftSample> build_soft_dataset(const TeacherFn& teacher,
                                           const RepresentFn& represent_fn,
                                           const std::vector<PairwiseSample>& samples);
std::vector<SoftSample> build_soft_dataset(const ClusteredGP& teacher,
                                           const RepresentFn& represent_fn,
                                           const std::vector<PairwiseSample>& samples);

}  // namespace fwl
