#include "protonesy/semloss.hpp"

#include <algorithm>
#include <cmath>

namespace protonesy {

std::vector<double> OutputProbs::clamped() const {
    std::vector<double> out = values;
    for (double& v : out) v = std::min(std::max(v, epsilon), 1.0 - epsilon);
    return out;
}

namespace {

// Posterior weights p(nu | y, nu |= K) for every model, plus the total wmc
// as loss = -ln wmc. Log-space path for large sets.
void model_posterior(const std::vector<double>& y, const ModelSet& models,
                     std::vector<double>& weights, double& wmc, double& loss) {
    const std::size_t n_models = models.size();
    const std::size_t n_atoms = y.size();
    weights.assign(n_models, 0.0);

    if (n_models <= 64) {
        double total = 0.0;
        for (std::size_t m = 0; m < n_models; ++m) {
            const Assignment& nu = models.models[m];
            double p = 1.0;
            for (std::size_t c = 0; c < n_atoms; ++c) p *= nu[c] ? y[c] : (1.0 - y[c]);
            weights[m] = p;
            total += p;
        }
        wmc = total;
        loss = -std::log(total);
        for (double& w : weights) w /= total;
        return;
    }

    std::vector<double> logp(n_models, 0.0);
    double max_log = -HUGE_VAL;
    for (std::size_t m = 0; m < n_models; ++m) {
        const Assignment& nu = models.models[m];
        double lp = 0.0;
        for (std::size_t c = 0; c < n_atoms; ++c)
            lp += nu[c] ? std::log(y[c]) : std::log1p(-y[c]);
        logp[m] = lp;
        max_log = std::max(max_log, lp);
    }
    double sum_exp = 0.0;
    for (std::size_t m = 0; m < n_models; ++m) {
        weights[m] = std::exp(logp[m] - max_log);
        sum_exp += weights[m];
    }
    const double log_wmc = max_log + std::log(sum_exp);
    wmc = std::exp(log_wmc);
    loss = -log_wmc;
    for (double& w : weights) w /= sum_exp;
}

}  // namespace

SemLossResult semantic_loss(const OutputProbs& y, const ModelSet& models) {
    if (models.empty()) throw UnsatisfiableKnowledgeError();
    const std::vector<double> probs = y.clamped();
    if (static_cast<int>(probs.size()) != models.num_atoms)
        throw std::invalid_argument("semantic_loss: output size does not match the model set");

    SemLossResult result;
    std::vector<double> weights;
    model_posterior(probs, models, weights, result.wmc, result.loss);

    const std::size_t n_atoms = probs.size();
    result.cond_exp.assign(n_atoms, 0.0);
    for (std::size_t m = 0; m < models.size(); ++m) {
        const Assignment& nu = models.models[m];
        for (std::size_t c = 0; c < n_atoms; ++c)
            if (nu[c]) result.cond_exp[c] += weights[m];
    }

    result.grad_y.assign(n_atoms, 0.0);
    for (std::size_t c = 0; c < n_atoms; ++c) {
        result.grad_y[c] = (probs[c] - result.cond_exp[c]) / (probs[c] * (1.0 - probs[c]));
    }
    return result;
}

double conditional_expectation(const OutputProbs& y, const ModelSet& models, int atom_index) {
    if (atom_index < 0 || atom_index >= models.num_atoms)
        throw std::out_of_range("conditional_expectation: atom index out of range");
    return semantic_loss(y, models).cond_exp[static_cast<std::size_t>(atom_index)];
}

std::vector<double> semloss_grad_outputs(const OutputProbs& y, const ModelSet& models) {
    return semantic_loss(y, models).grad_y;
}

}  // namespace protonesy
