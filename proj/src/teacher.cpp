#include "fwl/teacher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

#include "fwl/rng.hpp"

namespace fwl {

void KernelParams::validate() const {
    if (!(signal_var > 0.0)) throw std::invalid_argument("kernel: signal_var must be > 0");
    if (!(length_scale > 0.0)) throw std::invalid_argument("kernel: length_scale must be > 0");
    if (noise_var < 0.0) throw std::invalid_argument("kernel: noise_var must be >= 0");
}

double kernel_rbf(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const KernelParams& kp) {
    if (a.size() != b.size()) throw std::invalid_argument("kernel_rbf: width mismatch");
    double d2 = (a - b).squaredNorm();
    return kp.signal_var * std::exp(-d2 / (2.0 * kp.length_scale * kp.length_scale));
}

GPPosterior gp_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const KernelParams& kp) {
    kp.validate();
    const Eigen::Index n = X.rows();
    if (n < 1) throw std::invalid_argument("gp_fit: need at least one training point");
    if (y.size() != n) throw std::invalid_argument("gp_fit: X/y size mismatch");
    if (!X.allFinite() || !y.allFinite())
        throw std::invalid_argument("gp_fit: inputs must be finite");

    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            double v = kernel_rbf(X.row(i).transpose(), X.row(j).transpose(), kp);
            K(i, j) = v;
            K(j, i) = v;
        }
        K(i, i) += kp.noise_var;
    }

    GPPosterior post;
    post.train_inputs = X;
    post.kernel = kp;
    post.prior_mean = y.mean();

    Eigen::LLT<Eigen::MatrixXd> llt(K);
    double jitter = 1e-10;
    while (llt.info() != Eigen::Success && jitter <= 1e-6) {
        Eigen::MatrixXd Kj = K + jitter * Eigen::MatrixXd::Identity(n, n);
        llt.compute(Kj);
        jitter *= 10.0;
    }
    if (llt.info() != Eigen::Success)
        throw std::runtime_error(
            "gp_fit: covariance not positive definite after jitter escalation to 1e-6 "
            "(n=" + std::to_string(n) + "); inputs may contain duplicates with zero noise");

    post.chol_lower = llt.matrixL();
    Eigen::VectorXd centered = y.array() - post.prior_mean;
    post.dual_coefs = llt.solve(centered);
    return post;
}

GPPrediction gp_predict(const GPPosterior& post, const Eigen::VectorXd& x) {
    const Eigen::Index n = post.size();
    if (x.size() != post.train_inputs.cols())
        throw std::invalid_argument("gp_predict: width mismatch");
    Eigen::VectorXd kstar(n);
    for (Eigen::Index i = 0; i < n; ++i)
        kstar(i) = kernel_rbf(post.train_inputs.row(i).transpose(), x, post.kernel);
    GPPrediction out;
    out.mean = post.prior_mean + kstar.dot(post.dual_coefs);
    Eigen::VectorXd v = post.chol_lower.triangularView<Eigen::Lower>().solve(kstar);
    double var = post.kernel.signal_var - v.squaredNorm();
    out.var = std::max(0.0, var);
    return out;
}

double median_heuristic_length(const Eigen::MatrixXd& X) {
    const Eigen::Index n = X.rows();
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            d.push_back((X.row(i) - X.row(j)).norm());
    if (d.empty()) return 1.0;
    std::sort(d.begin(), d.end());
    double med = d.size() % 2 == 1 ? d[d.size() / 2]
                                   : 0.5 * (d[d.size() / 2 - 1] + d[d.size() / 2]);
    return med > 0.0 ? med : 1.0;
}

KMeansResult kmeans(const Eigen::MatrixXd& X, int k, std::uint64_t seed) {
    const Eigen::Index n = X.rows();
    if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
    if (n < k) throw std::invalid_argument("kmeans: need n >= k points");

    KMeansResult res;
    res.centroids.resize(k, X.cols());
    res.assignment.assign(n, 0);

    // farthest-point init: seeded first pick, then argmax of distance to the
    // chosen set (ties -> lowest index)
    auto rng = make_rng(derive_seed(seed, "kmeans-init"));
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    std::vector<Eigen::Index> chosen{pick(rng)};
    Eigen::VectorXd min_d2 = (X.rowwise() - X.row(chosen[0])).rowwise().squaredNorm();
    while (static_cast<int>(chosen.size()) < k) {
        Eigen::Index best = 0;
        double best_d = -1.0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (min_d2(i) > best_d) {
                best_d = min_d2(i);
                best = i;
            }
        chosen.push_back(best);
        Eigen::VectorXd d2 = (X.rowwise() - X.row(best)).rowwise().squaredNorm();
        min_d2 = min_d2.cwiseMin(d2);
    }
    for (int c = 0; c < k; ++c) res.centroids.row(c) = X.row(chosen[c]);

    auto assign = [&](std::vector<int>& out) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = (X.row(i) - res.centroids.row(0)).squaredNorm();
            for (int c = 1; c < k; ++c) {
                double d = (X.row(i) - res.centroids.row(c)).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (out[i] != best) changed = true;
            out[i] = best;
        }
        return changed;
    };

    assign(res.assignment);
    for (int iter = 0; iter < 100; ++iter) {
        // recompute means; re-seed empty clusters from the globally farthest point
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, X.cols());
        std::vector<int> counts(k, 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(res.assignment[i]) += X.row(i);
            ++counts[res.assignment[i]];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                res.centroids.row(c) = sums.row(c) / counts[c];
            } else {
                Eigen::Index far = 0;
                double far_d = -1.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    double d = (X.row(i) - res.centroids.row(res.assignment[i])).squaredNorm();
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                res.centroids.row(c) = X.row(far);
            }
        }
        if (!assign(res.assignment)) break;
    }
    return res;
}

ClusteredGP fit_clustered(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int k,
                          const KernelParams& kp, std::uint64_t seed) {
    if (X.rows() < k)
        throw std::invalid_argument("fit_clustered: fewer points than clusters");
    auto km = kmeans(X, k, seed);

    ClusteredGP out;
    out.centroids = km.centroids;
    out.members.reserve(k);
    for (int c = 0; c < k; ++c) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            if (km.assignment[i] == c) rows.push_back(i);
        if (rows.empty())
            throw std::runtime_error("fit_clustered: empty cluster survived re-seeding");
        Eigen::MatrixXd Xc(rows.size(), X.cols());
        Eigen::VectorXd yc(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            Xc.row(r) = X.row(rows[r]);
            yc(r) = y(rows[r]);
        }
        out.members.push_back(gp_fit(Xc, yc, kp));
    }
    return out;
}

GPPrediction predict_clustered(const ClusteredGP& cgp, const Eigen::VectorXd& x) {
    if (cgp.members.empty()) throw std::invalid_argument("predict_clustered: no clusters");
    int best = 0;
    double best_d = (cgp.centroids.row(0).transpose() - x).squaredNorm();
    for (int c = 1; c < cgp.centroids.rows(); ++c) {
        double d = (cgp.centroids.row(c).transpose() - x).squaredNorm();
        if (d < best_d) {  // strict: ties go to the lowest index
            best_d = d;
            best = c;
        }
    }
    return gp_predict(cgp.members[best], x);
}

double soft_label(double mean) {
    if (!std::isfinite(mean)) throw std::invalid_argument("soft_label: mean must be finite");
    return std::clamp(mean, 0.0, 1.0);
}

double uncertainty(double var) {
    if (var < 0.0) throw std::invalid_argument("uncertainty: variance must be >= 0");
    return var;
}

std::vector<SoftSample> build_soft_dataset(const TeacherFn& teacher,
                                           const RepresentFn& represent_fn,
                                           const std::vector<PairwiseSample>& samples) {
    std::vector<SoftSample> out;
    out.reserve(samples.size());
    std::unordered_set<std::string> seen;
    for (const auto& s : samples) {
        std::string key = s.query_id + "|" + s.pos_doc_id + "|" + s.neg_doc_id;
        if (!seen.insert(key).second) continue;
        GPPrediction p = teacher(represent_fn(s));
        SoftSample soft;
        soft.soft_label = soft_label(p.mean);
        soft.uncertainty_value = uncertainty(p.var);
        soft.sample = s;
        soft.sample.label = soft.soft_label;
        soft.sample.label_kind = LabelKind::Soft;
        soft.sample.uncertainty = soft.uncertainty_value;
        out.push_back(std::move(soft));
    }
    return out;
}

std::vector<SoftSample> build_soft_dataset(const ClusteredGP& teacher,
                                           const RepresentFn& represent_fn,
                                           const std::vector<PairwiseSample>& samples) {
    return build_soft_dataset(
        [&teacher](const Eigen::VectorXd& x) { return predict_clustered(teacher, x); },
        represent_fn, samples);
}

}  // namespace fwl
