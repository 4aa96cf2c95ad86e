#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "protonesy/knowledge.hpp"
#include "protonesy/metrics.hpp"

namespace protonesy {

class SearchBudgetError : public std::runtime_error {
public:
    explicit SearchBudgetError(std::uint64_t budget)
        : std::runtime_error("count_optima: search budget of " + std::to_string(budget) +
                             " nodes exceeded") {}
};

enum class MapMode { Shared, PerGroup };

// Idealized ground-truth task: the support of G, the deterministic label map
// beta, and the supervised class sets H_i. In Shared mode all groups have the
// same cardinality and a single class map applies to every position.
struct GroundTruthTask {
    ConceptSpace space;
    MapMode map_mode = MapMode::Shared;
    std::vector<std::vector<int>> support;        // ground-truth tuples g
    std::map<std::vector<int>, int> label_table;  // beta_K, total on the support
    std::vector<std::vector<int>> supervised;     // H_i per group

    void validate() const;
    int label_of(const std::vector<int>& tuple) const;  // throws if absent
};

// A deterministic concept map alpha. components has one entry in Shared mode
// and one per group in PerGroup mode; value -1 marks a class outside the
// map's domain (not appearing in the task support and not supervised).
struct ClassMap {
    MapMode mode = MapMode::Shared;
    std::vector<std::vector<int>> components;

    int apply(int group, int cls) const;
    bool is_identity_on_domain() const;
};

struct ShortcutCensus {
    std::int64_t optima_count = 0;
    // optima minus the identity map when the identity is itself an optimum.
    std::int64_t shortcut_count = 0;
    bool identity_is_optimum = false;
    bool catalogue_complete = false;  // catalogue kept only up to 10^4 optima
    std::vector<ClassMap> catalogue;
    std::uint64_t nodes_explored = 0;
};

// Exact count of deterministic optima: maps alpha with alpha_i(c) = c for
// every supervised class c in H_i, and beta(alpha(g)) = beta(g) for every
// support tuple. Enumeration runs over all functions on the classes that
// appear in the support (or are supervised), by backtracking with support
// constraints checked as soon as their classes are decided.
ShortcutCensus count_optima(const GroundTruthTask& task,
                            std::uint64_t node_budget = 1000000000ULL);

// True iff alpha satisfies the optimum conditions and differs from the
// identity on at least one class appearing in the support.
bool is_shortcut(const ClassMap& alpha, const GroundTruthTask& task);

struct OptimumCheckReport {
    enum class Kind { Identity, CataloguedShortcut, UncataloguedOptimum, NotAnOptimum, Stochastic };
    Kind kind = Kind::Stochastic;
    int catalogue_index = -1;
    ClassMap realized_map;
    std::string description;
};

// Reads the trained predictor's argmax concept map off its confusion
// matrices (one matrix in Shared mode, one per group otherwise) and reports
// which deterministic optimum, if any, it realizes. A row whose argmax
// holds less than dominance_threshold of its mass marks the predictor
// as stochastic.
OptimumCheckReport empirical_optimum_check(const std::vector<ConfusionMatrix>& confusions,
                                           const GroundTruthTask& task,
                                           const ShortcutCensus* census = nullptr,
                                           double dominance_threshold = 0.9);

// Task-spec file: JSON with sizes, map_mode, support tuples, the explicit
// label table and supervised sets. Census serializes to JSON with counts
// and the optional catalogue.
GroundTruthTask load_task_spec(const std::string& path);
GroundTruthTask parse_task_spec(const std::string& json_text);
std::string census_to_json(const ShortcutCensus& census, const GroundTruthTask& task);

}  // namespace protonesy
