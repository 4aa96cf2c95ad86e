#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace protonesy {

// Raw MNIST-style store: 28x28 byte images plus digit labels. Pixels stay
// in byte form; image() yields the [0,1]-normalized input vector.
struct MnistStore {
    int rows = 0, cols = 0;
    std::vector<std::uint8_t> pixels;  // size() * rows * cols, row-major
    std::vector<std::uint8_t> labels;

    int size() const { return static_cast<int>(labels.size()); }
    int image_dim() const { return rows * cols; }
    std::vector<double> image(int id) const;
};

// IDX format: big-endian headers, magic 2051 (images) / 2049 (labels).
MnistStore load_idx(const std::string& images_path, const std::string& labels_path);
std::vector<std::uint8_t> serialize_idx_images(const MnistStore& store);
std::vector<std::uint8_t> serialize_idx_labels(const MnistStore& store);

enum class Split { Train, Val, Test };

struct PairItem {
    int left = 0;   // item id of the first slot
    int right = 0;  // item id of the second slot
    int g1 = 0;     // ground-truth class of the first slot
    int g2 = 0;
    int label = 0;  // g1 + g2
};

struct PairDataset {
    std::vector<PairItem> items;
    Split split = Split::Train;
};

// Item ids per concept class.
struct SupportIndex {
    std::vector<std::vector<int>> ids;  // [class] -> item ids

    int num_labelled_classes() const;
    std::vector<int> labelled_classes() const;
};

// Uniform access to raw inputs, shared by the MNIST and synthetic paths.
class ItemSource {
public:
    virtual ~ItemSource() = default;
    virtual int input_dim() const = 0;
    virtual int count() const = 0;
    virtual std::vector<double> input(int id) const = 0;
};

// Ids [0, train.size()) address the training store; the rest the test store.
class MnistPairSource : public ItemSource {
public:
    MnistPairSource(MnistStore train, MnistStore test);
    int input_dim() const override { return train_.image_dim(); }
    int count() const override { return train_.size() + test_.size(); }
    std::vector<double> input(int id) const override;
    const MnistStore& train_store() const { return train_; }
    int test_offset() const { return train_.size(); }

private:
    MnistStore train_, test_;
};

class VectorSource : public ItemSource {
public:
    VectorSource(std::vector<std::vector<double>> inputs, int dim)
        : inputs_(std::move(inputs)), dim_(dim) {}
    int input_dim() const override { return dim_; }
    int count() const override { return static_cast<int>(inputs_.size()); }
    std::vector<double> input(int id) const override { return inputs_[static_cast<std::size_t>(id)]; }

private:
    std::vector<std::vector<double>> inputs_;
    int dim_ = 0;
};

// Ordered pair list, one "g1 g2" per line; '#' starts a comment. The bundled
// MNIST-EvenOdd file lists both orderings of the task's 8 combinations.
std::vector<std::pair<int, int>> load_pair_lines(const std::string& path);

// A fully built sum-pair task: split datasets over one item source plus the
// labelled support index.
struct BuiltTask {
    std::shared_ptr<ItemSource> items;
    int num_classes = 10;
    PairDataset train, val, test;
    SupportIndex support;
    std::vector<int> item_class;            // ground-truth class per item id
    std::vector<std::uint8_t> item_in_eval; // 1 when the id appears in val/test
    double scale_factor = 1.0;              // < 1 when the source had too few images
};

// Restricted-support pair construction shared by MNIST-EvenOdd and the
// synthetic task: train/val draw only the admissible ordered pairs, the
// test split draws the remaining (out-of-distribution) ordered pairs.
// Support ids are reserved first and never appear in val/test.
struct PairPlan {
    std::vector<std::pair<int, int>> train_lines;
    int train_pairs = 6720;
    int val_pairs = 1920;
    int test_pairs = 960;
    int labels_per_class = 1;
    std::vector<int> support_classes;  // empty = every class
    std::uint64_t seed = 0;
};

BuiltTask build_even_odd(MnistStore train_store, MnistStore test_store, const PairPlan& plan);

// Support resampling on an already built task (e.g. to restrict classes).
SupportIndex build_support(const BuiltTask& task, int labels_per_class, std::uint64_t seed,
                           const std::vector<int>& classes = {});

struct SyntheticSpec {
    int num_classes = 10;
    int dim = 16;
    double separation = 10.0;
    double variance = 1.0;
    int train_pairs = 1000;
    int val_pairs = 200;
    int test_pairs = 200;
    int labels_per_class = 1;
    std::vector<int> support_classes;
    std::uint64_t seed = 0;
};

// Gaussian-cluster analogue: class means at separation-scaled orthant
// corners, isotropic samples, same pair/label structure as MNIST-EvenOdd.
BuiltTask gen_synthetic(const SyntheticSpec& spec, const std::vector<std::pair<int, int>>& train_lines);

}  // namespace protonesy
