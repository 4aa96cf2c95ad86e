#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace protonesy {

using Embedding = std::vector<double>;

// Probabilities over one concept group's classes; positive, summing to 1.
using GroupProbs = std::vector<double>;

enum class CentroidStatus { Missing, Labelled, ZeroShot };

// Per concept group: one centroid per class, each an m_i-vector, with a
// labelled / zero-shot provenance flag. Mutated only between episodes;
// read-only during forward/backward.
class CentroidBank {
public:
    CentroidBank() = default;
    CentroidBank(std::vector<int> class_counts, std::vector<int> dims);

    int num_groups() const { return static_cast<int>(class_counts_.size()); }
    int num_classes(int group) const { return class_counts_[static_cast<std::size_t>(group)]; }
    int dim(int group) const { return dims_[static_cast<std::size_t>(group)]; }

    const Embedding& centroid(int group, int cls) const;
    CentroidStatus status(int group, int cls) const;
    void set_labelled(int group, int cls, Embedding centroid);
    void set_zero_shot(int group, int cls, Embedding centroid);
    void clear_group(int group);

    // True when every class in the group has a centroid.
    bool group_complete(int group) const;

    int labelled_count(int group) const;

private:
    std::vector<int> class_counts_;
    std::vector<int> dims_;
    std::vector<std::vector<Embedding>> centroids_;        // [group][class]
    std::vector<std::vector<CentroidStatus>> status_;

    void check_group(int group) const;
    void check_class(int group, int cls) const;
};

// Centroid = arithmetic mean of the class's support embeddings (labelled).
void compute_centroids(CentroidBank& bank, int group,
                       const std::vector<std::pair<int, std::vector<Embedding>>>& class_supports);

// y_c = exp(-||z - c_c||^2) / sum_c' exp(-||z - c_c'||^2), max-subtracted.
GroupProbs distance_softmax(const Embedding& z, const CentroidBank& bank, int group);

// Squared Euclidean distances ||z - c_c||^2 for every class of the group.
std::vector<double> squared_distances(const Embedding& z, const CentroidBank& bank, int group);

// Lower-tail quantile of the chi-squared distribution with m degrees of
// freedom: the q with P(chi^2_m <= q) = p, via bisection on the regularized
// lower incomplete gamma function. 1 <= m <= 4096, 0 < p < 1.
double chi2_quantile(int m, double p);

// Regularized lower incomplete gamma P(a, x); exposed for the quantile's
// callers and cross-checks.
double regularized_gamma_p(double a, double x);

// Zero-shot centroids for every class of `group` without a labelled centroid:
//   c = mu_H + eps,  eps ~ N(0, (max_c ||mu_H - c_c||^2 / chi2_{m,p}) I),
// mu_H the mean of the group's labelled centroids. Requires >= 2 labelled
// centroids. Deterministic per rng_seed; classes are filled in ascending
// order.
void init_unlabelled_centroids(CentroidBank& bank, int group, double p, std::uint64_t rng_seed);

struct HeadGradients {
    Embedding grad_z;
    std::vector<Embedding> grad_centroids;  // one per class of the group
};

// Backward pass through the distance softmax given upstream grad_y = dL/dy.
// grad_z follows the closed form
//   grad_z = 2 sum_c (dL/dy_c) y_c (c_c - sum_c' y_c' c_c'),
// grad_centroids completes the chain rule with respect to each centroid:
//   grad_{c_j} = 2 y_j (sum_c (dL/dy_c) y_c - dL/dy_j) (c_j - z).
HeadGradients head_backward(const Embedding& z, const CentroidBank& bank, int group,
                            const std::vector<double>& grad_y);

// Probability-weighted centroid average sum_c' y_c' c_c'.
Embedding center_of_belief(const CentroidBank& bank, int group, const GroupProbs& y);

}  // namespace protonesy
