#pragma once

#include <stdexcept>
#include <vector>

#include "protonesy/knowledge.hpp"

namespace protonesy {

class UnsatisfiableKnowledgeError : public std::runtime_error {
public:
    UnsatisfiableKnowledgeError()
        : std::runtime_error("semantic loss over an empty model set: knowledge is unsatisfiable") {}
};

// One Bernoulli parameter per atom of a ConceptSpace, clamped away from
// {0, 1} before any loss or gradient evaluation.
struct OutputProbs {
    std::vector<double> values;    // flattened over groups, length = num_atoms
    double epsilon = 1e-7;

    // Returns a copy with every entry clamped to [epsilon, 1 - epsilon].
    std::vector<double> clamped() const;
};

struct SemLossResult {
    double loss = 0.0;                 // -ln(wmc), nonnegative
    double wmc = 0.0;                  // weighted model count, in (0, 1]
    std::vector<double> grad_y;        // dL/dy_c per atom (analytic closed form)
    std::vector<double> cond_exp;      // E[Y_c | y, nu |= K] per atom
};

// Weighted model count of the model set under independent Bernoulli outputs:
//   wmc = sum_{nu in models} prod_c y_c^{nu(c)} (1-y_c)^{1-nu(c)},
// loss = -ln wmc. grad_y uses the closed form
//   dL/dy_c = (y_c - E[Y_c | nu |= K]) / (y_c (1 - y_c)),
// never a differentiated enumeration. Model sets larger than 64 entries are
// accumulated in log space and combined with log-sum-exp.
SemLossResult semantic_loss(const OutputProbs& y, const ModelSet& models);

double conditional_expectation(const OutputProbs& y, const ModelSet& models, int atom_index);

std::vector<double> semloss_grad_outputs(const OutputProbs& y, const ModelSet& models);

}  // namespace protonesy
