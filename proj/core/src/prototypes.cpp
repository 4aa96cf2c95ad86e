#include "protonesy/prototypes.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "protonesy/rng.hpp"

namespace protonesy {

CentroidBank::CentroidBank(std::vector<int> class_counts, std::vector<int> dims)
    : class_counts_(std::move(class_counts)), dims_(std::move(dims)) {
    if (class_counts_.size() != dims_.size())
        throw std::invalid_argument("CentroidBank: class_counts and dims length mismatch");
    centroids_.resize(class_counts_.size());
    status_.resize(class_counts_.size());
    for (std::size_t g = 0; g < class_counts_.size(); ++g) {
        centroids_[g].assign(static_cast<std::size_t>(class_counts_[g]), Embedding());
        status_[g].assign(static_cast<std::size_t>(class_counts_[g]), CentroidStatus::Missing);
    }
}

void CentroidBank::check_group(int group) const {
    if (group < 0 || group >= num_groups()) throw std::out_of_range("CentroidBank: group out of range");
}

void CentroidBank::check_class(int group, int cls) const {
    check_group(group);
    if (cls < 0 || cls >= num_classes(group))
        throw std::out_of_range("CentroidBank: class out of range");
}

const Embedding& CentroidBank::centroid(int group, int cls) const {
    check_class(group, cls);
    const Embedding& c = centroids_[static_cast<std::size_t>(group)][static_cast<std::size_t>(cls)];
    if (c.empty()) throw std::logic_error("CentroidBank: centroid missing");
    return c;
}

CentroidStatus CentroidBank::status(int group, int cls) const {
    check_class(group, cls);
    return status_[static_cast<std::size_t>(group)][static_cast<std::size_t>(cls)];
}

void CentroidBank::set_labelled(int group, int cls, Embedding centroid) {
    check_class(group, cls);
    if (static_cast<int>(centroid.size()) != dim(group))
        throw std::invalid_argument("CentroidBank: centroid dimension mismatch");
    centroids_[static_cast<std::size_t>(group)][static_cast<std::size_t>(cls)] = std::move(centroid);
    status_[static_cast<std::size_t>(group)][static_cast<std::size_t>(cls)] = CentroidStatus::Labelled;
}

void CentroidBank::set_zero_shot(int group, int cls, Embedding centroid) {
    check_class(group, cls);
    if (static_cast<int>(centroid.size()) != dim(group))
        throw std::invalid_argument("CentroidBank: centroid dimension mismatch");
    centroids_[static_cast<std::size_t>(group)][static_cast<std::size_t>(cls)] = std::move(centroid);
    status_[static_cast<std::size_t>(group)][static_cast<std::size_t>(cls)] = CentroidStatus::ZeroShot;
}

void CentroidBank::clear_group(int group) {
    check_group(group);
    for (int c = 0; c < num_classes(group); ++c) {
        centroids_[static_cast<std::size_t>(group)][static_cast<std::size_t>(c)].clear();
        status_[static_cast<std::size_t>(group)][static_cast<std::size_t>(c)] = CentroidStatus::Missing;
    }
}

bool CentroidBank::group_complete(int group) const {
    check_group(group);
    for (int c = 0; c < num_classes(group); ++c)
        if (status(group, c) == CentroidStatus::Missing) return false;
    return true;
}

int CentroidBank::labelled_count(int group) const {
    check_group(group);
    int n = 0;
    for (int c = 0; c < num_classes(group); ++c)
        if (status(group, c) == CentroidStatus::Labelled) ++n;
    return n;
}

void compute_centroids(CentroidBank& bank, int group,
                       const std::vector<std::pair<int, std::vector<Embedding>>>& class_supports) {
    const int m = bank.dim(group);
    for (const auto& [cls, supports] : class_supports) {
        if (supports.empty())
            throw std::invalid_argument("compute_centroids: empty support for class " + std::to_string(cls));
        Embedding mean(static_cast<std::size_t>(m), 0.0);
        for (const Embedding& e : supports) {
            if (static_cast<int>(e.size()) != m)
                throw std::invalid_argument("compute_centroids: embedding dimension mismatch");
            for (int j = 0; j < m; ++j) mean[static_cast<std::size_t>(j)] += e[static_cast<std::size_t>(j)];
        }
        const double inv = 1.0 / static_cast<double>(supports.size());
        for (double& v : mean) v *= inv;
        bank.set_labelled(group, cls, std::move(mean));
    }
}

std::vector<double> squared_distances(const Embedding& z, const CentroidBank& bank, int group) {
    if (static_cast<int>(z.size()) != bank.dim(group))
        throw std::invalid_argument("distance: embedding dimension mismatch");
    const int h = bank.num_classes(group);
    std::vector<double> d(static_cast<std::size_t>(h), 0.0);
    for (int c = 0; c < h; ++c) {
        if (bank.status(group, c) == CentroidStatus::Missing)
            throw std::logic_error("distance: missing centroid for class " + std::to_string(c));
        const Embedding& cc = bank.centroid(group, c);
        double acc = 0.0;
        for (std::size_t j = 0; j < z.size(); ++j) {
            const double diff = z[j] - cc[j];
            acc += diff * diff;
        }
        d[static_cast<std::size_t>(c)] = acc;
    }
    return d;
}

GroupProbs distance_softmax(const Embedding& z, const CentroidBank& bank, int group) {
    const std::vector<double> d = squared_distances(z, bank, group);
    const double d_min = *std::min_element(d.begin(), d.end());
    GroupProbs y(d.size(), 0.0);
    double total = 0.0;
    for (std::size_t c = 0; c < d.size(); ++c) {
        y[c] = std::exp(-(d[c] - d_min));  // max logit subtracted
        total += y[c];
    }
    for (double& v : y) v /= total;
    return y;
}

namespace {

// Series expansion of P(a, x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x) = 1 - P(a, x), valid for x >= a + 1.
double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double regularized_gamma_p(double a, double x) {
    if (a <= 0.0) throw std::invalid_argument("regularized_gamma_p: a must be positive");
    if (x < 0.0) throw std::invalid_argument("regularized_gamma_p: x must be nonnegative");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_contfrac(a, x);
}

double chi2_quantile(int m, double p) {
    if (m < 1 || m > 4096) throw std::invalid_argument("chi2_quantile: m must be in [1, 4096]");
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("chi2_quantile: p must be in (0, 1)");
    const double a = 0.5 * static_cast<double>(m);
    double lo = 0.0;
    double hi = static_cast<double>(m) + 100.0 * std::sqrt(static_cast<double>(m)) + 100.0;
    while (regularized_gamma_p(a, 0.5 * hi) < p) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (regularized_gamma_p(a, 0.5 * mid) < p)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-9) break;
    }
    return 0.5 * (lo + hi);
}

void init_unlabelled_centroids(CentroidBank& bank, int group, double p, std::uint64_t rng_seed) {
    const int h = bank.num_classes(group);
    const int m = bank.dim(group);
    std::vector<int> labelled;
    for (int c = 0; c < h; ++c)
        if (bank.status(group, c) == CentroidStatus::Labelled) labelled.push_back(c);
    if (labelled.size() < 2)
        throw std::logic_error("init_unlabelled_centroids: needs >= 2 labelled centroids in the group");

    Embedding mu(static_cast<std::size_t>(m), 0.0);
    for (int c : labelled) {
        const Embedding& cc = bank.centroid(group, c);
        for (int j = 0; j < m; ++j) mu[static_cast<std::size_t>(j)] += cc[static_cast<std::size_t>(j)];
    }
    for (double& v : mu) v /= static_cast<double>(labelled.size());

    double radius_sq = 0.0;
    for (int c : labelled) {
        const Embedding& cc = bank.centroid(group, c);
        double d = 0.0;
        for (int j = 0; j < m; ++j) {
            const double diff = mu[static_cast<std::size_t>(j)] - cc[static_cast<std::size_t>(j)];
            d += diff * diff;
        }
        radius_sq = std::max(radius_sq, d);
    }

    const double sigma = std::sqrt(radius_sq / chi2_quantile(m, p));
    Rng rng(rng_seed);
    for (int c = 0; c < h; ++c) {
        if (bank.status(group, c) == CentroidStatus::Labelled) continue;
        Embedding centroid(static_cast<std::size_t>(m));
        for (int j = 0; j < m; ++j)
            centroid[static_cast<std::size_t>(j)] = mu[static_cast<std::size_t>(j)] + sigma * rng.normal();
        bank.set_zero_shot(group, c, std::move(centroid));
    }
}

HeadGradients head_backward(const Embedding& z, const CentroidBank& bank, int group,
                            const std::vector<double>& grad_y) {
    const int h = bank.num_classes(group);
    const int m = bank.dim(group);
    if (static_cast<int>(grad_y.size()) != h)
        throw std::invalid_argument("head_backward: grad_y size does not match the group");

    const GroupProbs y = distance_softmax(z, bank, group);
    const Embedding belief = center_of_belief(bank, group, y);

    HeadGradients out;
    out.grad_z.assign(static_cast<std::size_t>(m), 0.0);
    out.grad_centroids.assign(static_cast<std::size_t>(h),
                              Embedding(static_cast<std::size_t>(m), 0.0));

    double weighted_grad = 0.0;  // sum_c (dL/dy_c) y_c
    for (int c = 0; c < h; ++c)
        weighted_grad += grad_y[static_cast<std::size_t>(c)] * y[static_cast<std::size_t>(c)];

    for (int c = 0; c < h; ++c) {
        const Embedding& cc = bank.centroid(group, c);
        const double gz = 2.0 * grad_y[static_cast<std::size_t>(c)] * y[static_cast<std::size_t>(c)];
        const double gc =
            2.0 * y[static_cast<std::size_t>(c)] * (weighted_grad - grad_y[static_cast<std::size_t>(c)]);
        for (int j = 0; j < m; ++j) {
            out.grad_z[static_cast<std::size_t>(j)] +=
                gz * (cc[static_cast<std::size_t>(j)] - belief[static_cast<std::size_t>(j)]);
            out.grad_centroids[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)] =
                gc * (cc[static_cast<std::size_t>(j)] - z[static_cast<std::size_t>(j)]);
        }
    }
    return out;
}

Embedding center_of_belief(const CentroidBank& bank, int group, const GroupProbs& y) {
    const int h = bank.num_classes(group);
    const int m = bank.dim(group);
    if (static_cast<int>(y.size()) != h)
        throw std::invalid_argument("center_of_belief: probability vector size mismatch");
    Embedding out(static_cast<std::size_t>(m), 0.0);
    for (int c = 0; c < h; ++c) {
        const Embedding& cc = bank.centroid(group, c);
        for (int j = 0; j < m; ++j)
            out[static_cast<std::size_t>(j)] += y[static_cast<std::size_t>(c)] * cc[static_cast<std::size_t>(j)];
    }
    return out;
}

}  // namespace protonesy
