#include "protonesy/episodic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>

#include "protonesy/rng.hpp"

namespace protonesy {

KnowledgeProvider make_sum_knowledge_provider() {
    auto cache = std::make_shared<std::map<int, ModelSet>>();
    return [cache](int label) -> const ModelSet& {
        auto it = cache->find(label);
        if (it == cache->end()) {
            const ConceptSpace space({10, 10});
            ModelSet models = enumerate_models(sum_knowledge(label, space), EnumerationMode::OneHot);
            it = cache->emplace(label, std::move(models)).first;
        }
        return it->second;
    };
}

EpisodeSample sample_episode(const SupportIndex& support, const EpisodeConfig& cfg,
                             std::uint64_t episode_seed) {
    const std::vector<int> labelled = support.labelled_classes();
    if (labelled.empty()) throw std::logic_error("sample_episode: no labelled classes");
    const int l = cfg.classes_per_episode > 0
                      ? std::min(cfg.classes_per_episode, static_cast<int>(labelled.size()))
                      : static_cast<int>(labelled.size());

    Rng rng(episode_seed);
    EpisodeSample sample;
    const std::vector<int> picks =
        rng.sample_without_replacement(static_cast<int>(labelled.size()), l);
    for (int p : picks) sample.classes.push_back(labelled[static_cast<std::size_t>(p)]);

    for (int cls : sample.classes) {
        const auto& pool = support.ids[static_cast<std::size_t>(cls)];
        const int n = static_cast<int>(pool.size());
        const int s = std::min(cfg.supports_per_class, n);
        if (s < cfg.supports_per_class)
            throw std::runtime_error("sample_episode: class " + std::to_string(cls) +
                                     " has fewer members than s_c");
        const int q = std::min(cfg.queries_per_class, n - s);
        if (q < cfg.queries_per_class) sample.query_fallback = true;
        const std::vector<int> order = rng.sample_without_replacement(n, s + q);
        std::vector<int> s_ids, q_ids;
        for (int i = 0; i < s; ++i) s_ids.push_back(pool[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
        for (int i = s; i < s + q; ++i)
            q_ids.push_back(pool[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
        sample.support_ids.push_back(std::move(s_ids));
        sample.query_ids.push_back(std::move(q_ids));
    }
    return sample;
}

ProtoQueryResult proto_query_loss(const Embedding& z, const CentroidBank& bank, int group,
                                  int true_class) {
    const std::vector<double> d = squared_distances(z, bank, group);
    if (true_class < 0 || true_class >= static_cast<int>(d.size()))
        throw std::out_of_range("proto_query_loss: class out of range");

    const double d_min = *std::min_element(d.begin(), d.end());
    double sum_exp = 0.0;
    for (double dc : d) sum_exp += std::exp(-(dc - d_min));
    const double lse = -d_min + std::log(sum_exp);  // ln sum exp(-d)

    ProtoQueryResult result;
    result.loss = d[static_cast<std::size_t>(true_class)] + lse;

    const GroupProbs y = distance_softmax(z, bank, group);
    std::vector<double> grad_y(d.size(), 0.0);
    grad_y[static_cast<std::size_t>(true_class)] =
        -1.0 / y[static_cast<std::size_t>(true_class)];
    HeadGradients hg = head_backward(z, bank, group, grad_y);
    result.grad_z = std::move(hg.grad_z);
    result.grad_centroids = std::move(hg.grad_centroids);
    return result;
}

namespace {

constexpr std::uint64_t kStreamEpisode = 0xe7150000ULL;
constexpr std::uint64_t kStreamZeroShot = 0x5a5e0000ULL;
constexpr std::uint64_t kStreamBatch = 0xba7c0000ULL;
constexpr std::uint64_t kStreamFinalBank = 0xf17a1ULL;

struct BatchCursor {
    std::vector<int> order;
    std::size_t next = 0;

    void reshuffle(std::size_t n, Rng& rng) {
        order.resize(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
        rng.shuffle(order);
        next = 0;
    }
    int take() {
        const int v = order[next];
        next = (next + 1) % order.size();
        return v;
    }
};

void check_finite(double v, const std::string& what, int epoch, int episode) {
    if (!std::isfinite(v))
        throw std::runtime_error("non-finite " + what + " at epoch " + std::to_string(epoch) +
                                 ", episode " + std::to_string(episode));
}

void add_scaled(Embedding& acc, const Embedding& v, double scale) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += scale * v[i];
}

}  // namespace

PnetModel train_pnet(const BuiltTask& task, const EpisodeConfig& cfg,
                     const KnowledgeProvider& knowledge, TrainLog* log) {
    const int h = task.num_classes;
    const int m = cfg.embedding_dim;

    PnetModel model;
    model.spec.input_dim = task.items->input_dim();
    model.spec.hidden = cfg.hidden;
    model.spec.output_dim = m;
    model.spec.init_seed = derive_seed(cfg.master_seed, 0x1417ULL);
    model.params = init_params(model.spec);
    model.bank = CentroidBank({h}, {m});

    const std::vector<int> labelled = task.support.labelled_classes();
    if (labelled.size() < 2)
        throw std::runtime_error("train_pnet: needs at least two labelled classes per group");
    const bool has_zero_shot = static_cast<int>(labelled.size()) < h;

    Rng batch_master(derive_seed(cfg.master_seed, kStreamBatch));
    BatchCursor cursor;

    int global_episode = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        cursor.reshuffle(task.train.items.size(), batch_master);
        double epoch_proto = 0.0, epoch_nesy = 0.0;
        for (int episode = 0; episode < cfg.episodes_per_epoch; ++episode, ++global_episode) {
            const EpisodeSample sample = sample_episode(
                task.support, cfg,
                derive_seed(cfg.master_seed, kStreamEpisode + static_cast<std::uint64_t>(global_episode)));

            // Episode centroids from the sampled supports; tapes kept so the
            // centroid gradient can reach the extractor parameters.
            std::vector<std::vector<ForwardTape>> support_tapes(sample.classes.size());
            for (std::size_t ci = 0; ci < sample.classes.size(); ++ci) {
                const int cls = sample.classes[ci];
                Embedding mean(static_cast<std::size_t>(m), 0.0);
                for (int id : sample.support_ids[ci]) {
                    ForwardTape tape;
                    const Embedding z = forward(model.spec, model.params, task.items->input(id), &tape);
                    add_scaled(mean, z, 1.0);
                    support_tapes[ci].push_back(std::move(tape));
                }
                const double inv = 1.0 / static_cast<double>(sample.support_ids[ci].size());
                for (double& v : mean) v *= inv;
                model.bank.set_labelled(0, cls, std::move(mean));
            }
            if (has_zero_shot)
                init_unlabelled_centroids(
                    model.bank, 0, cfg.zero_shot_p,
                    derive_seed(cfg.master_seed,
                                kStreamZeroShot + static_cast<std::uint64_t>(global_episode)));
            if (!model.bank.group_complete(0))
                throw std::runtime_error("train_pnet: incomplete centroid bank (classes_per_episode "
                                         "smaller than the labelled set is unsupported)");

            ParamGrads grads = ParamGrads::zeros_like(model.params);
            std::vector<Embedding> centroid_grads(static_cast<std::size_t>(h),
                                                  Embedding(static_cast<std::size_t>(m), 0.0));

            // Query classification loss, averaged by 1 / (l * max(q, 1)).
            double proto_loss = 0.0;
            const double proto_factor =
                1.0 / (static_cast<double>(sample.classes.size()) *
                       static_cast<double>(std::max(cfg.queries_per_class, 1)));
            for (std::size_t ci = 0; ci < sample.classes.size(); ++ci) {
                for (int id : sample.query_ids[ci]) {
                    ForwardTape tape;
                    const Embedding z = forward(model.spec, model.params, task.items->input(id), &tape);
                    ProtoQueryResult r = proto_query_loss(z, model.bank, 0, sample.classes[ci]);
                    proto_loss += proto_factor * r.loss;
                    Embedding gz = r.grad_z;
                    for (double& v : gz) v *= proto_factor;
                    grads.accumulate(backward(model.spec, model.params, tape, gz, nullptr), 1.0);
                    for (int c = 0; c < h; ++c)
                        add_scaled(centroid_grads[static_cast<std::size_t>(c)],
                                   r.grad_centroids[static_cast<std::size_t>(c)], proto_factor);
                }
            }

            // Semantic loss over one weakly labelled batch (round-robin).
            double nesy_loss = 0.0;
            if (cfg.nesy_weight != 0.0 && !task.train.items.empty()) {
                const int batch = static_cast<int>(
                    std::min<std::size_t>(static_cast<std::size_t>(cfg.weak_batch_size),
                                          task.train.items.size()));
                const double batch_inv = 1.0 / static_cast<double>(batch);
                const double nesy_factor = cfg.nesy_weight * batch_inv;
                for (int b = 0; b < batch; ++b) {
                    const PairItem& pair = task.train.items[static_cast<std::size_t>(cursor.take())];
                    ForwardTape tape_l, tape_r;
                    const Embedding z_l =
                        forward(model.spec, model.params, task.items->input(pair.left), &tape_l);
                    const Embedding z_r =
                        forward(model.spec, model.params, task.items->input(pair.right), &tape_r);
                    const GroupProbs y_l = distance_softmax(z_l, model.bank, 0);
                    const GroupProbs y_r = distance_softmax(z_r, model.bank, 0);

                    OutputProbs probs;
                    probs.values.reserve(static_cast<std::size_t>(2 * h));
                    probs.values.insert(probs.values.end(), y_l.begin(), y_l.end());
                    probs.values.insert(probs.values.end(), y_r.begin(), y_r.end());
                    const SemLossResult res = semantic_loss(probs, knowledge(pair.label));
                    nesy_loss += batch_inv * res.loss;

                    const std::vector<double> g_l(res.grad_y.begin(), res.grad_y.begin() + h);
                    const std::vector<double> g_r(res.grad_y.begin() + h, res.grad_y.end());
                    HeadGradients hb_l = head_backward(z_l, model.bank, 0, g_l);
                    HeadGradients hb_r = head_backward(z_r, model.bank, 0, g_r);
                    for (double& v : hb_l.grad_z) v *= nesy_factor;
                    for (double& v : hb_r.grad_z) v *= nesy_factor;
                    grads.accumulate(backward(model.spec, model.params, tape_l, hb_l.grad_z, nullptr), 1.0);
                    grads.accumulate(backward(model.spec, model.params, tape_r, hb_r.grad_z, nullptr), 1.0);
                    for (int c = 0; c < h; ++c) {
                        add_scaled(centroid_grads[static_cast<std::size_t>(c)],
                                   hb_l.grad_centroids[static_cast<std::size_t>(c)], nesy_factor);
                        add_scaled(centroid_grads[static_cast<std::size_t>(c)],
                                   hb_r.grad_centroids[static_cast<std::size_t>(c)], nesy_factor);
                    }
                }
            }

            // Centroid gradients flow back through the sampled supports
            // (Eq. 3 is differentiable in the support embeddings); zero-shot
            // centroids are sampled constants.
            for (std::size_t ci = 0; ci < sample.classes.size(); ++ci) {
                const int cls = sample.classes[ci];
                const double inv = 1.0 / static_cast<double>(sample.support_ids[ci].size());
                Embedding gc = centroid_grads[static_cast<std::size_t>(cls)];
                for (double& v : gc) v *= inv;
                bool nonzero = false;
                for (double v : gc)
                    if (v != 0.0) nonzero = true;
                if (!nonzero) continue;
                for (const ForwardTape& tape : support_tapes[ci])
                    grads.accumulate(backward(model.spec, model.params, tape, gc, nullptr), 1.0);
            }

            const double combined = proto_loss + cfg.nesy_weight * nesy_loss;
            check_finite(combined, "episode loss", epoch, episode);
            adam_step(model.params, grads, cfg.adam);

            epoch_proto += proto_loss;
            epoch_nesy += nesy_loss;
            if (log && sample.query_fallback) log->query_fallback_logged = true;
        }
        if (log) {
            const double inv = cfg.episodes_per_epoch > 0 ? 1.0 / cfg.episodes_per_epoch : 0.0;
            log->epochs.push_back(EpochLog{epoch, epoch_proto * inv, epoch_nesy * inv,
                                           (epoch_proto + cfg.nesy_weight * epoch_nesy) * inv});
        }
    }

    refresh_bank(model, task, task.support, cfg.zero_shot_p,
                 derive_seed(cfg.master_seed, kStreamFinalBank));
    return model;
}

void refresh_bank(PnetModel& model, const BuiltTask& task, const SupportIndex& support,
                  double zero_shot_p, std::uint64_t seed) {
    const int h = task.num_classes;
    model.bank.clear_group(0);
    std::vector<std::pair<int, std::vector<Embedding>>> class_supports;
    for (int c = 0; c < h; ++c) {
        const auto& ids = support.ids[static_cast<std::size_t>(c)];
        if (ids.empty()) continue;
        std::vector<Embedding> embeddings;
        for (int id : ids)
            embeddings.push_back(forward(model.spec, model.params, task.items->input(id), nullptr));
        class_supports.emplace_back(c, std::move(embeddings));
    }
    compute_centroids(model.bank, 0, class_supports);
    if (!model.bank.group_complete(0)) init_unlabelled_centroids(model.bank, 0, zero_shot_p, seed);
}

BaselineModel train_baseline(const BuiltTask& task, const EpisodeConfig& cfg,
                             const KnowledgeProvider& knowledge, TrainLog* log) {
    const int h = task.num_classes;
    BaselineModel model;
    model.spec.input_dim = task.items->input_dim();
    model.spec.hidden = cfg.hidden;
    model.spec.output_dim = h;  // class logits, no prototype head
    model.spec.init_seed = derive_seed(cfg.master_seed, 0xba5eULL);
    model.params = init_params(model.spec);

    Rng batch_master(derive_seed(cfg.master_seed, kStreamBatch));
    BatchCursor cursor;

    auto stable_softmax = [](const std::vector<double>& u) {
        const double mx = *std::max_element(u.begin(), u.end());
        std::vector<double> y(u.size());
        double total = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            y[i] = std::exp(u[i] - mx);
            total += y[i];
        }
        for (double& v : y) v /= total;
        return y;
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        cursor.reshuffle(task.train.items.size(), batch_master);
        double epoch_nesy = 0.0;
        for (int episode = 0; episode < cfg.episodes_per_epoch; ++episode) {
            ParamGrads grads = ParamGrads::zeros_like(model.params);
            const int batch = static_cast<int>(std::min<std::size_t>(
                static_cast<std::size_t>(cfg.weak_batch_size), task.train.items.size()));
            const double batch_inv = 1.0 / static_cast<double>(batch);
            double nesy_loss = 0.0;
            for (int b = 0; b < batch; ++b) {
                const PairItem& pair = task.train.items[static_cast<std::size_t>(cursor.take())];
                ForwardTape tape_l, tape_r;
                const std::vector<double> u_l =
                    forward(model.spec, model.params, task.items->input(pair.left), &tape_l);
                const std::vector<double> u_r =
                    forward(model.spec, model.params, task.items->input(pair.right), &tape_r);
                const std::vector<double> y_l = stable_softmax(u_l);
                const std::vector<double> y_r = stable_softmax(u_r);

                OutputProbs probs;
                probs.values.insert(probs.values.end(), y_l.begin(), y_l.end());
                probs.values.insert(probs.values.end(), y_r.begin(), y_r.end());
                const SemLossResult res = semantic_loss(probs, knowledge(pair.label));
                nesy_loss += batch_inv * res.loss;

                // Softmax backward: du_j = y_j (g_j - <g, y>).
                auto logits_grad = [&](const std::vector<double>& y, const double* g) {
                    double inner = 0.0;
                    for (std::size_t c = 0; c < y.size(); ++c) inner += g[c] * y[c];
                    std::vector<double> du(y.size());
                    for (std::size_t c = 0; c < y.size(); ++c)
                        du[c] = batch_inv * y[c] * (g[c] - inner);
                    return du;
                };
                grads.accumulate(backward(model.spec, model.params, tape_l,
                                          logits_grad(y_l, res.grad_y.data()), nullptr), 1.0);
                grads.accumulate(backward(model.spec, model.params, tape_r,
                                          logits_grad(y_r, res.grad_y.data() + h), nullptr), 1.0);
            }
            check_finite(nesy_loss, "baseline loss", epoch, episode);
            adam_step(model.params, grads, cfg.adam);
            epoch_nesy += nesy_loss;
        }
        if (log) {
            const double inv = cfg.episodes_per_epoch > 0 ? 1.0 / cfg.episodes_per_epoch : 0.0;
            log->epochs.push_back(EpochLog{epoch, 0.0, epoch_nesy * inv, epoch_nesy * inv});
        }
    }
    return model;
}

namespace {

EvalResult evaluate_sum_predictions(const BuiltTask& task, const PairDataset& split,
                                    const std::function<int(int item_id)>& predict_class) {
    EvalInputs inputs;
    inputs.concept_classes = task.num_classes;
    inputs.label_classes = 2 * (task.num_classes - 1) + 1;
    for (const PairItem& pair : split.items) {
        const int p1 = predict_class(pair.left);
        const int p2 = predict_class(pair.right);
        inputs.concept_truth.push_back(pair.g1);
        inputs.concept_pred.push_back(p1);
        inputs.concept_truth.push_back(pair.g2);
        inputs.concept_pred.push_back(p2);
        inputs.label_truth.push_back(pair.label);
        inputs.label_pred.push_back(p1 + p2);
    }
    return evaluate_predictions(inputs);
}

int argmax(const std::vector<double>& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

EvalResult evaluate_pnet(const PnetModel& model, const BuiltTask& task, const PairDataset& split) {
    return evaluate_sum_predictions(task, split, [&](int id) {
        const Embedding z = forward(model.spec, model.params, task.items->input(id), nullptr);
        return argmax(distance_softmax(z, model.bank, 0));
    });
}

EvalResult evaluate_baseline(const BaselineModel& model, const BuiltTask& task,
                             const PairDataset& split) {
    return evaluate_sum_predictions(task, split, [&](int id) {
        return argmax(forward(model.spec, model.params, task.items->input(id), nullptr));
    });
}

}  // namespace protonesy
