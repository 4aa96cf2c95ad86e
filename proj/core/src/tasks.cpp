#include "protonesy/tasks.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "protonesy/rng.hpp"

namespace protonesy {

std::vector<double> MnistStore::image(int id) const {
    const int dim = image_dim();
    std::vector<double> out(static_cast<std::size_t>(dim));
    const std::uint8_t* base = pixels.data() + static_cast<std::size_t>(id) * dim;
    for (int i = 0; i < dim; ++i) out[static_cast<std::size_t>(i)] = base[i] / 255.0;
    return out;
}

namespace {

std::vector<std::uint8_t> read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

std::uint32_t read_u32_be(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
    if (offset + 4 > bytes.size()) throw std::runtime_error("truncated IDX header");
    return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
           (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
           (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
           static_cast<std::uint32_t>(bytes[offset + 3]);
}

void write_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

MnistStore load_idx(const std::string& images_path, const std::string& labels_path) {
    const std::vector<std::uint8_t> img = read_all(images_path);
    const std::vector<std::uint8_t> lab = read_all(labels_path);

    if (read_u32_be(img, 0) != 2051)
        throw std::runtime_error("wrong magic in " + images_path + " (expected 2051)");
    if (read_u32_be(lab, 0) != 2049)
        throw std::runtime_error("wrong magic in " + labels_path + " (expected 2049)");

    MnistStore store;
    const std::uint32_t n_images = read_u32_be(img, 4);
    store.rows = static_cast<int>(read_u32_be(img, 8));
    store.cols = static_cast<int>(read_u32_be(img, 12));
    const std::uint32_t n_labels = read_u32_be(lab, 4);
    if (n_images != n_labels)
        throw std::runtime_error("image/label count mismatch: " + std::to_string(n_images) + " vs " +
                                 std::to_string(n_labels));

    const std::size_t pixel_bytes =
        static_cast<std::size_t>(n_images) * store.rows * store.cols;
    if (img.size() != 16 + pixel_bytes) throw std::runtime_error("truncated image file: " + images_path);
    if (lab.size() != 8 + n_labels) throw std::runtime_error("truncated label file: " + labels_path);

    store.pixels.assign(img.begin() + 16, img.end());
    store.labels.assign(lab.begin() + 8, lab.end());
    return store;
}

std::vector<std::uint8_t> serialize_idx_images(const MnistStore& store) {
    std::vector<std::uint8_t> out;
    out.reserve(16 + store.pixels.size());
    write_u32_be(out, 2051);
    write_u32_be(out, static_cast<std::uint32_t>(store.size()));
    write_u32_be(out, static_cast<std::uint32_t>(store.rows));
    write_u32_be(out, static_cast<std::uint32_t>(store.cols));
    out.insert(out.end(), store.pixels.begin(), store.pixels.end());
    return out;
}

std::vector<std::uint8_t> serialize_idx_labels(const MnistStore& store) {
    std::vector<std::uint8_t> out;
    out.reserve(8 + store.labels.size());
    write_u32_be(out, 2049);
    write_u32_be(out, static_cast<std::uint32_t>(store.size()));
    out.insert(out.end(), store.labels.begin(), store.labels.end());
    return out;
}

int SupportIndex::num_labelled_classes() const {
    int n = 0;
    for (const auto& v : ids)
        if (!v.empty()) ++n;
    return n;
}

std::vector<int> SupportIndex::labelled_classes() const {
    std::vector<int> out;
    for (std::size_t c = 0; c < ids.size(); ++c)
        if (!ids[c].empty()) out.push_back(static_cast<int>(c));
    return out;
}

MnistPairSource::MnistPairSource(MnistStore train, MnistStore test)
    : train_(std::move(train)), test_(std::move(test)) {
    if (train_.image_dim() != test_.image_dim())
        throw std::invalid_argument("train/test image dimensions differ");
}

std::vector<double> MnistPairSource::input(int id) const {
    if (id < train_.size()) return train_.image(id);
    return test_.image(id - train_.size());
}

std::vector<std::pair<int, int>> load_pair_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open pair file: " + path);
    std::vector<std::pair<int, int>> lines;
    std::string line;
    while (std::getline(in, line)) {
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream row(line);
        int a, b;
        if (row >> a >> b) lines.emplace_back(a, b);
    }
    if (lines.empty()) throw std::runtime_error("pair file has no entries: " + path);
    return lines;
}

namespace {

// Ordered pairs over [h]^2 not among the training lines, ascending.
std::vector<std::pair<int, int>> out_of_distribution_lines(
    const std::vector<std::pair<int, int>>& train_lines, int num_classes) {
    std::set<std::pair<int, int>> seen(train_lines.begin(), train_lines.end());
    std::vector<std::pair<int, int>> out;
    for (int a = 0; a < num_classes; ++a)
        for (int b = 0; b < num_classes; ++b)
            if (!seen.count({a, b})) out.emplace_back(a, b);
    return out;
}

// Per-class draft counts implied by drawing `per_line` pairs per line.
std::vector<std::int64_t> class_needs(const std::vector<std::pair<int, int>>& lines,
                                      std::int64_t per_line, int num_classes) {
    std::vector<std::int64_t> needs(static_cast<std::size_t>(num_classes), 0);
    for (const auto& [a, b] : lines) {
        needs[static_cast<std::size_t>(a)] += per_line;
        needs[static_cast<std::size_t>(b)] += per_line;
    }
    return needs;
}

struct PoolCursor {
    std::vector<std::vector<int>> ids;  // shuffled per class
    std::vector<std::size_t> next;

    int pop(int cls) {
        auto& cursor = next[static_cast<std::size_t>(cls)];
        const auto& pool = ids[static_cast<std::size_t>(cls)];
        if (cursor >= pool.size())
            throw std::runtime_error("insufficient images of class " + std::to_string(cls));
        return pool[cursor++];
    }
    std::int64_t remaining(int cls) const {
        return static_cast<std::int64_t>(ids[static_cast<std::size_t>(cls)].size()) -
               static_cast<std::int64_t>(next[static_cast<std::size_t>(cls)]);
    }
};

PairDataset draw_pairs(PoolCursor& pools, const std::vector<std::pair<int, int>>& lines,
                       int per_line, int remainder, Split split, Rng& rng) {
    PairDataset ds;
    ds.split = split;
    for (std::size_t li = 0; li < lines.size(); ++li) {
        const int count = per_line + (static_cast<int>(li) < remainder ? 1 : 0);
        for (int i = 0; i < count; ++i) {
            PairItem item;
            item.g1 = lines[li].first;
            item.g2 = lines[li].second;
            item.left = pools.pop(item.g1);
            item.right = pools.pop(item.g2);
            item.label = item.g1 + item.g2;
            ds.items.push_back(item);
        }
    }
    rng.shuffle(ds.items);
    return ds;
}

}  // namespace

BuiltTask build_even_odd(MnistStore train_store, MnistStore test_store, const PairPlan& plan) {
    constexpr int kClasses = 10;
    for (const auto& [a, b] : plan.train_lines)
        if (a < 0 || a >= kClasses || b < 0 || b >= kClasses)
            throw std::invalid_argument("pair line digit out of range");

    BuiltTask task;
    task.num_classes = kClasses;
    const int test_offset = train_store.size();

    // Per-class id pools, shuffled once per seed.
    Rng pool_rng(derive_seed(plan.seed, 0x706f6f6cULL));
    PoolCursor train_pools, test_pools;
    train_pools.ids.assign(kClasses, {});
    test_pools.ids.assign(kClasses, {});
    for (int i = 0; i < train_store.size(); ++i)
        train_pools.ids[train_store.labels[static_cast<std::size_t>(i)]].push_back(i);
    for (int i = 0; i < test_store.size(); ++i)
        test_pools.ids[test_store.labels[static_cast<std::size_t>(i)]].push_back(test_offset + i);
    for (auto& pool : train_pools.ids) pool_rng.shuffle(pool);
    for (auto& pool : test_pools.ids) pool_rng.shuffle(pool);
    train_pools.next.assign(kClasses, 0);
    test_pools.next.assign(kClasses, 0);

    // Supports come first so evaluation splits can never contain them.
    task.support.ids.assign(kClasses, {});
    std::vector<int> support_classes = plan.support_classes;
    if (support_classes.empty())
        for (int c = 0; c < kClasses; ++c) support_classes.push_back(c);
    for (int c : support_classes)
        for (int i = 0; i < plan.labels_per_class; ++i)
            task.support.ids[static_cast<std::size_t>(c)].push_back(train_pools.pop(c));

    // Scale the in-distribution splits down when the store is too small.
    const int n_lines = static_cast<int>(plan.train_lines.size());
    double factor = 1.0;
    {
        const std::int64_t per_line_train = plan.train_pairs / n_lines;
        const std::int64_t per_line_val = plan.val_pairs / n_lines;
        const auto needs =
            class_needs(plan.train_lines, per_line_train + per_line_val + 1, kClasses);
        for (int c = 0; c < kClasses; ++c) {
            if (needs[static_cast<std::size_t>(c)] == 0) continue;
            factor = std::min(factor, static_cast<double>(train_pools.remaining(c)) /
                                          static_cast<double>(needs[static_cast<std::size_t>(c)]));
        }
        factor = std::min(factor, 1.0);
    }
    task.scale_factor = factor;
    const int train_total = static_cast<int>(factor * plan.train_pairs);
    const int val_total = static_cast<int>(factor * plan.val_pairs);
    if (train_total < n_lines)
        throw std::runtime_error("insufficient images for even a single pair per line");

    Rng order_rng(derive_seed(plan.seed, 0x6f726465ULL));
    task.train = draw_pairs(train_pools, plan.train_lines, train_total / n_lines,
                            train_total % n_lines, Split::Train, order_rng);
    task.val = draw_pairs(train_pools, plan.train_lines, val_total / n_lines, val_total % n_lines,
                          Split::Val, order_rng);

    const auto ood = out_of_distribution_lines(plan.train_lines, kClasses);
    double test_factor = 1.0;
    {
        const std::int64_t per_line = plan.test_pairs / static_cast<std::int64_t>(ood.size()) + 1;
        const auto needs = class_needs(ood, per_line, kClasses);
        for (int c = 0; c < kClasses; ++c) {
            if (needs[static_cast<std::size_t>(c)] == 0) continue;
            test_factor = std::min(test_factor, static_cast<double>(test_pools.remaining(c)) /
                                                    static_cast<double>(needs[static_cast<std::size_t>(c)]));
        }
        test_factor = std::min(test_factor, 1.0);
    }
    const int test_total = static_cast<int>(test_factor * plan.test_pairs);
    const int test_per_line = test_total / static_cast<int>(ood.size());
    const int test_remainder = test_total % static_cast<int>(ood.size());
    task.test = draw_pairs(test_pools, ood, test_per_line, test_remainder, Split::Test, order_rng);

    task.item_class.assign(static_cast<std::size_t>(train_store.size() + test_store.size()), -1);
    for (int i = 0; i < train_store.size(); ++i)
        task.item_class[static_cast<std::size_t>(i)] = train_store.labels[static_cast<std::size_t>(i)];
    for (int i = 0; i < test_store.size(); ++i)
        task.item_class[static_cast<std::size_t>(test_offset + i)] =
            test_store.labels[static_cast<std::size_t>(i)];
    task.item_in_eval.assign(task.item_class.size(), 0);
    for (const PairItem& p : task.val.items) {
        task.item_in_eval[static_cast<std::size_t>(p.left)] = 1;
        task.item_in_eval[static_cast<std::size_t>(p.right)] = 1;
    }
    for (const PairItem& p : task.test.items) {
        task.item_in_eval[static_cast<std::size_t>(p.left)] = 1;
        task.item_in_eval[static_cast<std::size_t>(p.right)] = 1;
    }

    task.items = std::make_shared<MnistPairSource>(std::move(train_store), std::move(test_store));
    return task;
}

SupportIndex build_support(const BuiltTask& task, int labels_per_class, std::uint64_t seed,
                           const std::vector<int>& classes) {
    if (labels_per_class < 1) throw std::invalid_argument("build_support: labels_per_class must be >= 1");
    std::vector<int> targets = classes;
    if (targets.empty())
        for (int c = 0; c < task.num_classes; ++c) targets.push_back(c);

    std::vector<std::vector<int>> eligible(static_cast<std::size_t>(task.num_classes));
    for (std::size_t id = 0; id < task.item_class.size(); ++id) {
        const int c = task.item_class[id];
        if (c >= 0 && !task.item_in_eval[id]) eligible[static_cast<std::size_t>(c)].push_back(static_cast<int>(id));
    }

    SupportIndex index;
    index.ids.assign(static_cast<std::size_t>(task.num_classes), {});
    Rng rng(derive_seed(seed, 0x73757070ULL));
    for (int c : targets) {
        auto& pool = eligible[static_cast<std::size_t>(c)];
        if (static_cast<int>(pool.size()) < labels_per_class)
            throw std::runtime_error("build_support: class " + std::to_string(c) +
                                     " absent or too small in the dataset");
        const std::vector<int> picks =
            rng.sample_without_replacement(static_cast<int>(pool.size()), labels_per_class);
        for (int p : picks) index.ids[static_cast<std::size_t>(c)].push_back(pool[static_cast<std::size_t>(p)]);
    }
    return index;
}

BuiltTask gen_synthetic(const SyntheticSpec& spec, const std::vector<std::pair<int, int>>& train_lines) {
    if (spec.separation <= 0.0) throw std::invalid_argument("gen_synthetic: separation must be > 0");
    if (spec.num_classes < 2 || spec.dim < 1) throw std::invalid_argument("gen_synthetic: bad sizes");
    const int h = spec.num_classes;
    for (const auto& [a, b] : train_lines)
        if (a < 0 || a >= h || b < 0 || b >= h)
            throw std::invalid_argument("gen_synthetic: pair line class out of range");

    // Class means at separation-scaled orthant corners: basis direction
    // c mod dim, magnitude grows with each wrap so means stay distinct.
    std::vector<std::vector<double>> means(static_cast<std::size_t>(h),
                                           std::vector<double>(static_cast<std::size_t>(spec.dim), 0.0));
    for (int c = 0; c < h; ++c)
        means[static_cast<std::size_t>(c)][static_cast<std::size_t>(c % spec.dim)] =
            spec.separation * (1.0 + static_cast<double>(c / spec.dim));

    const int n_lines = static_cast<int>(train_lines.size());
    const auto ood = out_of_distribution_lines(train_lines, h);
    const int test_per_line = spec.test_pairs / static_cast<int>(ood.size());
    const int test_remainder = spec.test_pairs % static_cast<int>(ood.size());

    // Exact per-class item budget: pairs plus the support reserve.
    std::vector<std::int64_t> needs =
        class_needs(train_lines, spec.train_pairs / n_lines + spec.val_pairs / n_lines + 2, h);
    {
        const auto test_needs = class_needs(ood, test_per_line + 1, h);
        for (int c = 0; c < h; ++c)
            needs[static_cast<std::size_t>(c)] +=
                test_needs[static_cast<std::size_t>(c)] + spec.labels_per_class + 4;
    }

    Rng sample_rng(derive_seed(spec.seed, 0x73796e74ULL));
    std::vector<std::vector<double>> inputs;
    std::vector<int> item_class;
    PoolCursor pools;
    pools.ids.assign(static_cast<std::size_t>(h), {});
    pools.next.assign(static_cast<std::size_t>(h), 0);
    const double std_dev = std::sqrt(spec.variance);
    for (int c = 0; c < h; ++c) {
        for (std::int64_t i = 0; i < needs[static_cast<std::size_t>(c)]; ++i) {
            std::vector<double> x = means[static_cast<std::size_t>(c)];
            for (double& v : x) v += std_dev * sample_rng.normal();
            pools.ids[static_cast<std::size_t>(c)].push_back(static_cast<int>(inputs.size()));
            inputs.push_back(std::move(x));
            item_class.push_back(c);
        }
    }

    BuiltTask task;
    task.num_classes = h;
    task.item_class = item_class;

    task.support.ids.assign(static_cast<std::size_t>(h), {});
    std::vector<int> support_classes = spec.support_classes;
    if (support_classes.empty())
        for (int c = 0; c < h; ++c) support_classes.push_back(c);
    for (int c : support_classes)
        for (int i = 0; i < spec.labels_per_class; ++i)
            task.support.ids[static_cast<std::size_t>(c)].push_back(pools.pop(c));

    Rng order_rng(derive_seed(spec.seed, 0x6f726465ULL));
    task.train = draw_pairs(pools, train_lines, spec.train_pairs / n_lines,
                            spec.train_pairs % n_lines, Split::Train, order_rng);
    task.val = draw_pairs(pools, train_lines, spec.val_pairs / n_lines, spec.val_pairs % n_lines,
                          Split::Val, order_rng);
    task.test = draw_pairs(pools, ood, test_per_line, test_remainder, Split::Test, order_rng);

    task.item_in_eval.assign(inputs.size(), 0);
    for (const PairItem& p : task.val.items) {
        task.item_in_eval[static_cast<std::size_t>(p.left)] = 1;
        task.item_in_eval[static_cast<std::size_t>(p.right)] = 1;
    }
    for (const PairItem& p : task.test.items) {
        task.item_in_eval[static_cast<std::size_t>(p.left)] = 1;
        task.item_in_eval[static_cast<std::size_t>(p.right)] = 1;
    }

    task.items = std::make_shared<VectorSource>(std::move(inputs), spec.dim);
    return task;
}

}  // namespace protonesy
