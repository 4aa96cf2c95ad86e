#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "protonesy/backbone.hpp"
#include "protonesy/knowledge.hpp"
#include "protonesy/metrics.hpp"
#include "protonesy/prototypes.hpp"
#include "protonesy/semloss.hpp"
#include "protonesy/tasks.hpp"

namespace protonesy {

struct EpisodeConfig {
    int classes_per_episode = 0;  // l_i; 0 selects every labelled class
    int supports_per_class = 1;   // s_c
    int queries_per_class = 0;    // q_c; singleton classes fall back to 0
    int episodes_per_epoch = 100;
    int epochs = 10;
    double nesy_weight = 10.0;  // w_sl
    int weak_batch_size = 32;
    std::uint64_t master_seed = 0;
    AdamConfig adam;
    double zero_shot_p = 0.99;
    int embedding_dim = 64;   // m
    std::vector<int> hidden;  // backbone hidden widths
};

struct EpisodeLoss {
    double proto = 0.0;
    double nesy = 0.0;
    double combined = 0.0;  // proto + w_sl * nesy
};

struct EpochLog {
    int epoch = 0;
    double proto_loss = 0.0;  // means over the epoch's episodes
    double nesy_loss = 0.0;
    double combined = 0.0;
};

// Maps a final label to the satisfying assignments of its knowledge.
using KnowledgeProvider = std::function<const ModelSet&(int label)>;

// Cached one-hot model sets of sum_knowledge(y) for y in [0, 18].
KnowledgeProvider make_sum_knowledge_provider();

struct EpisodeSample {
    std::vector<int> classes;                   // sampled classes, draw order
    std::vector<std::vector<int>> support_ids;  // aligned with classes
    std::vector<std::vector<int>> query_ids;
    bool query_fallback = false;  // some class had too few members for q_c
};

// Disjoint support/query draws, uniform without replacement, deterministic
// per episode_seed. Classes with fewer than s_c + q_c members keep their
// full s_c support and shrink the query set (down to empty).
EpisodeSample sample_episode(const SupportIndex& support, const EpisodeConfig& cfg,
                             std::uint64_t episode_seed);

struct ProtoQueryResult {
    double loss = 0.0;
    Embedding grad_z;
    std::vector<Embedding> grad_centroids;
};

// loss = ||z - c_true||^2 + ln sum_c' exp(-||z - c_c'||^2) = -ln y_true,
// with gradients through the distance softmax.
ProtoQueryResult proto_query_loss(const Embedding& z, const CentroidBank& bank, int group,
                                  int true_class);

// Prototypical NeSy predictor for the two-slot sum tasks: one shared
// extractor classifies both slots against one centroid group.
struct PnetModel {
    MlpSpec spec;
    ParamState params;
    CentroidBank bank;  // single group, num_classes centroids
};

// Plain softmax classifier trained only with the semantic loss.
struct BaselineModel {
    MlpSpec spec;
    ParamState params;
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    bool query_fallback_logged = false;
};

// Algorithm-1 training: per episode, recompute labelled centroids from the
// sampled supports, inject zero-shot centroids for unlabelled classes,
// accumulate the prototypical query loss and the semantic loss over one
// weakly labelled batch, and take a single optimizer step. The returned
// bank holds final centroids from the full support sets plus zero-shot
// entries (seeded from master_seed).
PnetModel train_pnet(const BuiltTask& task, const EpisodeConfig& cfg,
                     const KnowledgeProvider& knowledge, TrainLog* log = nullptr);

BaselineModel train_baseline(const BuiltTask& task, const EpisodeConfig& cfg,
                             const KnowledgeProvider& knowledge, TrainLog* log = nullptr);

// Rebuilds the model's centroid bank from the given support index: labelled
// centroids from every support embedding, zero-shot for the rest.
void refresh_bank(PnetModel& model, const BuiltTask& task, const SupportIndex& support,
                  double zero_shot_p, std::uint64_t seed);

EvalResult evaluate_pnet(const PnetModel& model, const BuiltTask& task, const PairDataset& split);
EvalResult evaluate_baseline(const BaselineModel& model, const BuiltTask& task,
                             const PairDataset& split);

}  // namespace protonesy
