#include "protonesy/shortcuts.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

namespace protonesy {

void GroundTruthTask::validate() const {
    const int k = space.num_groups();
    if (map_mode == MapMode::Shared) {
        for (int i = 1; i < k; ++i)
            if (space.group_size(i) != space.group_size(0))
                throw std::invalid_argument("shared map mode requires equal group cardinalities");
    }
    if (static_cast<int>(supervised.size()) != k)
        throw std::invalid_argument("supervised sets must list one set per group");
    for (int i = 0; i < k; ++i)
        for (int c : supervised[static_cast<std::size_t>(i)])
            if (c < 0 || c >= space.group_size(i))
                throw std::invalid_argument("supervised class out of range");
    for (const auto& tuple : support) {
        if (static_cast<int>(tuple.size()) != k)
            throw std::invalid_argument("support tuple arity mismatch");
        for (int i = 0; i < k; ++i)
            if (tuple[static_cast<std::size_t>(i)] < 0 ||
                tuple[static_cast<std::size_t>(i)] >= space.group_size(i))
                throw std::invalid_argument("support tuple class out of range");
        if (label_table.find(tuple) == label_table.end())
            throw std::invalid_argument("label table is not total on the support");
    }
}

int GroundTruthTask::label_of(const std::vector<int>& tuple) const {
    auto it = label_table.find(tuple);
    if (it == label_table.end())
        throw std::out_of_range("label table has no entry for the requested tuple");
    return it->second;
}

int ClassMap::apply(int group, int cls) const {
    const std::vector<int>& comp =
        components[mode == MapMode::Shared ? 0 : static_cast<std::size_t>(group)];
    if (cls < 0 || cls >= static_cast<int>(comp.size()))
        throw std::out_of_range("ClassMap: class out of range");
    const int v = comp[static_cast<std::size_t>(cls)];
    if (v < 0) throw std::logic_error("ClassMap: class outside the map's domain");
    return v;
}

bool ClassMap::is_identity_on_domain() const {
    for (const auto& comp : components)
        for (std::size_t c = 0; c < comp.size(); ++c)
            if (comp[c] >= 0 && comp[c] != static_cast<int>(c)) return false;
    return true;
}

namespace {

// One enumeration variable: the value of class `cls` under component `comp`
// (component 0 in shared mode, the group index otherwise).
struct Variable {
    int comp;
    int cls;
};

struct SearchContext {
    const GroundTruthTask& task;
    int num_components;
    int component_size(int comp) const {
        return task.map_mode == MapMode::Shared ? task.space.group_size(0)
                                                : task.space.group_size(comp);
    }
    int component_of_group(int group) const {
        return task.map_mode == MapMode::Shared ? 0 : group;
    }
};

}  // namespace

ShortcutCensus count_optima(const GroundTruthTask& task, std::uint64_t node_budget) {
    task.validate();
    const int k = task.space.num_groups();
    SearchContext ctx{task, task.map_mode == MapMode::Shared ? 1 : k};

    // Domain: classes appearing in the support plus the supervised classes.
    std::vector<std::set<int>> domain(static_cast<std::size_t>(ctx.num_components));
    for (const auto& tuple : task.support)
        for (int i = 0; i < k; ++i)
            domain[static_cast<std::size_t>(ctx.component_of_group(i))].insert(
                tuple[static_cast<std::size_t>(i)]);
    for (int i = 0; i < k; ++i)
        for (int c : task.supervised[static_cast<std::size_t>(i)])
            domain[static_cast<std::size_t>(ctx.component_of_group(i))].insert(c);

    // Assignment buffers, -1 = undecided. Supervised classes are pinned to
    // themselves up front (the Prop. 1 concept-supervision conjunct).
    std::vector<std::vector<int>> values(static_cast<std::size_t>(ctx.num_components));
    for (int comp = 0; comp < ctx.num_components; ++comp)
        values[static_cast<std::size_t>(comp)].assign(
            static_cast<std::size_t>(ctx.component_size(comp)), -1);
    for (int i = 0; i < k; ++i)
        for (int c : task.supervised[static_cast<std::size_t>(i)])
            values[static_cast<std::size_t>(ctx.component_of_group(i))][static_cast<std::size_t>(c)] = c;

    // Free variables in deterministic (component, class) order.
    std::vector<Variable> free_vars;
    for (int comp = 0; comp < ctx.num_components; ++comp)
        for (int c : domain[static_cast<std::size_t>(comp)])
            if (values[static_cast<std::size_t>(comp)][static_cast<std::size_t>(c)] < 0)
                free_vars.push_back(Variable{comp, c});

    // For constraint propagation: after deciding variable v, check every
    // support tuple whose undecided-variable count drops to zero.
    std::vector<int> undecided(task.support.size(), 0);
    std::vector<std::vector<int>> tuples_of_var(free_vars.size());
    {
        std::map<std::pair<int, int>, int> var_index;
        for (std::size_t v = 0; v < free_vars.size(); ++v)
            var_index[{free_vars[v].comp, free_vars[v].cls}] = static_cast<int>(v);
        for (std::size_t t = 0; t < task.support.size(); ++t) {
            std::set<int> vars;
            for (int i = 0; i < k; ++i) {
                auto it = var_index.find(
                    {ctx.component_of_group(i), task.support[t][static_cast<std::size_t>(i)]});
                if (it != var_index.end()) vars.insert(it->second);
            }
            undecided[t] = static_cast<int>(vars.size());
            for (int v : vars) tuples_of_var[static_cast<std::size_t>(v)].push_back(static_cast<int>(t));
        }
    }

    ShortcutCensus census;
    constexpr std::int64_t kCatalogueLimit = 10000;

    auto tuple_satisfied = [&](std::size_t t) {
        const std::vector<int>& g = task.support[t];
        std::vector<int> mapped(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i)
            mapped[static_cast<std::size_t>(i)] =
                values[static_cast<std::size_t>(ctx.component_of_group(i))]
                      [static_cast<std::size_t>(g[static_cast<std::size_t>(i)])];
        auto it = task.label_table.find(mapped);
        if (it == task.label_table.end()) return false;  // beta undefined on the image
        return it->second == task.label_of(g);
    };

    // Tuples with no free variables (fully pinned) must hold for any count
    // to be nonzero.
    for (std::size_t t = 0; t < task.support.size(); ++t)
        if (undecided[t] == 0 && !tuple_satisfied(t)) return census;

    auto record_solution = [&]() {
        census.optima_count += 1;
        if (census.optima_count <= kCatalogueLimit) {
            ClassMap map;
            map.mode = task.map_mode;
            map.components = values;
            census.catalogue.push_back(std::move(map));
        }
    };

    std::uint64_t nodes = 0;
    // Depth-first over the free variables, values ascending; a tuple is
    // checked the moment its last variable is decided.
    std::function<void(std::size_t)> dfs = [&](std::size_t depth) {
        if (depth == free_vars.size()) {
            record_solution();
            return;
        }
        const Variable var = free_vars[depth];
        for (int t : tuples_of_var[depth]) --undecided[static_cast<std::size_t>(t)];
        const int limit = ctx.component_size(var.comp);
        for (int value = 0; value < limit; ++value) {
            if (++nodes > node_budget) throw SearchBudgetError(node_budget);
            values[static_cast<std::size_t>(var.comp)][static_cast<std::size_t>(var.cls)] = value;
            bool ok = true;
            for (int t : tuples_of_var[depth]) {
                if (undecided[static_cast<std::size_t>(t)] == 0 &&
                    !tuple_satisfied(static_cast<std::size_t>(t))) {
                    ok = false;
                    break;
                }
            }
            if (ok) dfs(depth + 1);
        }
        values[static_cast<std::size_t>(var.comp)][static_cast<std::size_t>(var.cls)] = -1;
        for (int t : tuples_of_var[depth]) ++undecided[static_cast<std::size_t>(t)];
    };
    dfs(0);

    census.nodes_explored = nodes;
    census.catalogue_complete = census.optima_count <= kCatalogueLimit;
    if (!census.catalogue_complete) census.catalogue.clear();

    // The identity map fixes every support tuple and every supervised pin,
    // so on a validated task it is always among the optima.
    census.identity_is_optimum = census.optima_count > 0;
    census.shortcut_count = census.identity_is_optimum ? census.optima_count - 1 : census.optima_count;
    return census;
}

bool is_shortcut(const ClassMap& alpha, const GroundTruthTask& task) {
    task.validate();
    const int k = task.space.num_groups();
    if (alpha.mode != task.map_mode)
        throw std::invalid_argument("is_shortcut: map mode does not match the task");

    // Totality on the classes appearing in the support.
    for (const auto& tuple : task.support) {
        for (int i = 0; i < k; ++i) {
            const int comp = task.map_mode == MapMode::Shared ? 0 : i;
            const int cls = tuple[static_cast<std::size_t>(i)];
            if (comp >= static_cast<int>(alpha.components.size()) ||
                cls >= static_cast<int>(alpha.components[static_cast<std::size_t>(comp)].size()) ||
                alpha.components[static_cast<std::size_t>(comp)][static_cast<std::size_t>(cls)] < 0)
                throw std::invalid_argument("is_shortcut: alpha is partial on the support classes");
        }
    }

    // Supervision pinning.
    for (int i = 0; i < k; ++i) {
        const int comp = task.map_mode == MapMode::Shared ? 0 : i;
        for (int c : task.supervised[static_cast<std::size_t>(i)]) {
            const int v = alpha.components[static_cast<std::size_t>(comp)][static_cast<std::size_t>(c)];
            if (v >= 0 && v != c) return false;
        }
    }

    // Label consistency on every support tuple.
    bool deviates = false;
    for (const auto& tuple : task.support) {
        std::vector<int> mapped(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) {
            mapped[static_cast<std::size_t>(i)] = alpha.apply(i, tuple[static_cast<std::size_t>(i)]);
            if (mapped[static_cast<std::size_t>(i)] != tuple[static_cast<std::size_t>(i)]) deviates = true;
        }
        auto it = task.label_table.find(mapped);
        if (it == task.label_table.end() || it->second != task.label_of(tuple)) return false;
    }
    return deviates;
}

OptimumCheckReport empirical_optimum_check(const std::vector<ConfusionMatrix>& confusions,
                                           const GroundTruthTask& task,
                                           const ShortcutCensus* census,
                                           double dominance_threshold) {
    task.validate();
    OptimumCheckReport report;
    const int num_components = task.map_mode == MapMode::Shared ? 1 : task.space.num_groups();
    if (static_cast<int>(confusions.size()) != num_components)
        throw std::invalid_argument("empirical_optimum_check: one confusion matrix per map component");

    ClassMap realized;
    realized.mode = task.map_mode;
    realized.components.resize(static_cast<std::size_t>(num_components));
    for (int comp = 0; comp < num_components; ++comp) {
        const ConfusionMatrix& cm = confusions[static_cast<std::size_t>(comp)];
        auto& entries = realized.components[static_cast<std::size_t>(comp)];
        entries.assign(static_cast<std::size_t>(cm.num_classes), -1);
        for (int truth = 0; truth < cm.num_classes; ++truth) {
            std::int64_t row_total = 0, best = -1;
            int best_pred = -1;
            for (int pred = 0; pred < cm.num_classes; ++pred) {
                row_total += cm.at(truth, pred);
                if (cm.at(truth, pred) > best) {
                    best = cm.at(truth, pred);
                    best_pred = pred;
                }
            }
            if (row_total == 0) continue;  // class absent from the evaluation data
            const double dominance = static_cast<double>(best) / static_cast<double>(row_total);
            if (dominance < dominance_threshold) {
                report.kind = OptimumCheckReport::Kind::Stochastic;
                report.description = "argmax map not deterministic (row dominance " +
                                     std::to_string(dominance) + " below threshold)";
                return report;
            }
            entries[static_cast<std::size_t>(truth)] = best_pred;
        }
    }
    report.realized_map = realized;

    if (realized.is_identity_on_domain()) {
        report.kind = OptimumCheckReport::Kind::Identity;
        report.description = "identity map";
        return report;
    }

    bool shortcut = false;
    try {
        shortcut = is_shortcut(realized, task);
    } catch (const std::invalid_argument&) {
        report.kind = OptimumCheckReport::Kind::Stochastic;
        report.description = "argmax map undefined on part of the support";
        return report;
    }
    if (!shortcut) {
        report.kind = OptimumCheckReport::Kind::NotAnOptimum;
        report.description = "deterministic map that violates the task constraints";
        return report;
    }

    report.kind = OptimumCheckReport::Kind::UncataloguedOptimum;
    report.description = "non-identity deterministic optimum";
    if (census && census->catalogue_complete) {
        for (std::size_t i = 0; i < census->catalogue.size(); ++i) {
            if (census->catalogue[i].components == realized.components) {
                report.kind = OptimumCheckReport::Kind::CataloguedShortcut;
                report.catalogue_index = static_cast<int>(i);
                report.description = "catalogued shortcut #" + std::to_string(i);
                break;
            }
        }
    }
    return report;
}

GroundTruthTask parse_task_spec(const std::string& json_text) {
    const nlohmann::json doc = nlohmann::json::parse(json_text);
    GroundTruthTask task;
    task.space = ConceptSpace(doc.at("sizes").get<std::vector<int>>());
    const std::string mode = doc.value("map_mode", std::string("shared"));
    if (mode == "shared")
        task.map_mode = MapMode::Shared;
    else if (mode == "per_group")
        task.map_mode = MapMode::PerGroup;
    else
        throw std::invalid_argument("task spec: map_mode must be 'shared' or 'per_group'");
    task.support = doc.at("support").get<std::vector<std::vector<int>>>();
    for (const auto& entry : doc.at("label_table")) {
        std::vector<int> row = entry.get<std::vector<int>>();
        if (static_cast<int>(row.size()) != task.space.num_groups() + 1)
            throw std::invalid_argument("task spec: label_table rows must be [g_1..g_k, y]");
        const int y = row.back();
        row.pop_back();
        task.label_table[row] = y;
    }
    if (doc.contains("supervised"))
        task.supervised = doc.at("supervised").get<std::vector<std::vector<int>>>();
    else
        task.supervised.assign(static_cast<std::size_t>(task.space.num_groups()), {});
    task.validate();
    return task;
}

GroundTruthTask load_task_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open task spec: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_task_spec(buffer.str());
}

std::string census_to_json(const ShortcutCensus& census, const GroundTruthTask& task) {
    nlohmann::json doc;
    doc["optima_count"] = census.optima_count;
    doc["shortcut_count"] = census.shortcut_count;
    doc["identity_is_optimum"] = census.identity_is_optimum;
    doc["map_mode"] = task.map_mode == MapMode::Shared ? "shared" : "per_group";
    doc["nodes_explored"] = census.nodes_explored;
    doc["catalogue_complete"] = census.catalogue_complete;
    if (census.catalogue_complete) {
        nlohmann::json maps = nlohmann::json::array();
        for (const ClassMap& map : census.catalogue) maps.push_back(map.components);
        doc["catalogue"] = std::move(maps);
    }
    return doc.dump(2);
}

}  // namespace protonesy
