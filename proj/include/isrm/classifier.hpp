#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "isrm/labels.hpp"
#include "isrm/projection.hpp"
#include "isrm/rng.hpp"

namespace isrm {

inline constexpr double kDefaultTau = 0.07;
inline constexpr int kDefaultEmbeddingDim = 64;

using Embedding = std::vector<double>;

double dot(const Embedding& a, const Embedding& b);
double norm(const Embedding& v);

// One embedding per region label, ordered as the label set.
struct PrototypeSet {
  std::vector<Embedding> features;

  int size() const { return static_cast<int>(features.size()); }
  int dim() const { return features.empty() ? 0 : features[0].size(); }
};

// Random unit prototypes; near-orthogonal for dim >> count.
PrototypeSet random_prototypes(int count, int dim, Rng& rng);

struct ClassifyResult {
  int label = 0;
  std::vector<double> distribution;  // softmax(similarities / tau)
};

// Cosine-similarity classification of one feature against the prototypes.
// The returned distribution is the temperature-scaled softmax of the
// similarities; the label is the argmax (ties to the lowest index).
ClassifyResult classify(const Embedding& feature, const PrototypeSet& protos,
                        double tau = kDefaultTau);

// Contrastive batch: N image features followed by the K text features of the
// distinct labels present, with matching concatenated labels.
struct ContrastiveBatch {
  std::vector<Embedding> features;  // size N + K
  std::vector<int> labels;          // size N + K
  int num_images = 0;               // N
  int num_texts = 0;                // K
  double tau = kDefaultTau;
  std::vector<int> label_text_slot;  // label -> feature slot, -1 if absent

  int size() const { return num_images + num_texts; }
};

ContrastiveBatch build_batch(const std::vector<Embedding>& images,
                             const std::vector<int>& labels,
                             const PrototypeSet& protos, double tau);

struct LossResult {
  double loss = 0.0;
  std::vector<Embedding> grad;  // d loss / d features[i], one per batch slot
};

// Supervised contrastive loss over the concatenated batch: every anchor is
// pulled toward all same-label entries and pushed from the rest. Anchors
// without positives contribute nothing; a batch with no positive pairs at
// all is an error. Log-sum-exp stabilized; gradients are analytic.
LossResult mscl_loss(const ContrastiveBatch& batch);
LossResult mscl_loss_serial(const ContrastiveBatch& batch);

// Symmetric image<->text InfoNCE where each image is paired with its label's
// text feature and duplicate labels are NOT merged, so same-label images
// compete for the same text column.
LossResult infonce_loss(const ContrastiveBatch& batch);
LossResult infonce_loss_serial(const ContrastiveBatch& batch);

enum class ContrastiveLossKind { MSCL, InfoNCE };

// The finetunable visual projection, row-major d_in x d_out.
struct Projection {
  int d_in = 0;
  int d_out = 0;
  std::vector<double> w;

  static Projection identity(int d_in, int d_out);
  double& at(int i, int j) { return w[static_cast<std::size_t>(i) * d_out + j]; }
  double at(int i, int j) const {
    return w[static_cast<std::size_t>(i) * d_out + j];
  }
  // v = x^T W, then L2-normalized. Throws on a zero-norm projected vector.
  Embedding apply(const Embedding& x) const;
  Embedding apply_unnormalized(const Embedding& x) const;
};

struct EmbeddingDataset {
  int dim = 0;
  int num_labels = 0;
  std::vector<Embedding> features;
  std::vector<int> labels;

  int size() const { return static_cast<int>(features.size()); }

  // Binary container: magic "ISRD", D, C, count, then per record the f32
  // feature vector and a u16 label.
  void save(const std::string& path) const;
  static EmbeddingDataset load(const std::string& path);
};

struct SyntheticDatasetConfig {
  int count = 5000;
  double prototype_mix = 0.25;  // weight of a second, wrong prototype
  double noise_sigma = 0.15;    // per-dimension Gaussian noise
  bool misaligned = true;       // rotate into a mismatched feature space
};

// Draws "pretrained backbone" features as noisy prototype mixtures. With
// misalignment enabled the samples live in a seeded random rotation of the
// prototype space, so an identity projection classifies near chance while a
// learned linear projection can recover the labels.
EmbeddingDataset make_synthetic_embedding_dataset(
    const PrototypeSet& protos, const SyntheticDatasetConfig& config,
    Rng& rng);

struct FinetuneConfig {
  ContrastiveLossKind loss = ContrastiveLossKind::MSCL;
  double lr = 1e-2;
  int epochs = 40;
  int batch_size = 32;
  double tau = kDefaultTau;
  std::uint64_t seed = 0;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_acc = 0.0;
};

struct FinetuneResult {
  Projection projection;
  std::vector<EpochStats> history;
};

// Gradient descent on the projection with frozen features and prototypes.
// Deterministic for a fixed seed; aborts if the loss goes non-finite.
FinetuneResult finetune_projection(const EmbeddingDataset& train,
                                   const EmbeddingDataset& val,
                                   const PrototypeSet& protos,
                                   const FinetuneConfig& config);

// Fraction of samples whose projected feature classifies to its label.
double eval_accuracy(const EmbeddingDataset& data, const Projection& proj,
                     const PrototypeSet& protos, double tau = kDefaultTau);

// Row-stochastic confusion between true and predicted region labels.
struct ConfusionMatrix {
  int size = 0;
  std::vector<double> values;  // row-major size x size

  static ConfusionMatrix diagonal(int size, double diag);
  static ConfusionMatrix identity(int size) { return diagonal(size, 1.0); }
  std::span<const double> row(int i) const {
    return {values.data() + static_cast<std::size_t>(i) * size,
            static_cast<std::size_t>(size)};
  }
  void check() const;  // rows must be non-negative and sum to 1
};

// Synthetic classifier over ground-truth per-ray labels: Spatial emits each
// ray's confusion row, Repeated emits the confusion row of the label visible
// on the most rays (ties to the lowest label). Both modes are deterministic;
// the seed is reserved for stochastic variants.
ObservationDistribution synth_classify(const std::vector<int>& ray_labels,
                                       const ConfusionMatrix& confusion,
                                       ObservationMode mode,
                                       std::uint64_t seed = 0);

}  // namespace isrm
