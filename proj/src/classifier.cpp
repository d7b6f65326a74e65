#include "isrm/classifier.hpp"
#include "isrm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace isrm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Pairwise scaled similarities z[i][j] = f_i . f_j / tau.
std::vector<double> similarity_matrix(const ContrastiveBatch& batch) {
  const int m = batch.size();
  std::vector<double> z(static_cast<std::size_t>(m) * m);
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      const double v = dot(batch.features[i], batch.features[j]) / batch.tau;
      z[i * m + j] = v;
      z[j * m + i] = v;
    }
  }
  return z;
}

void check_batch(const ContrastiveBatch& batch) {
  if (batch.num_images < 1) throw std::invalid_argument("empty batch");
  if (batch.tau <= 0.0) throw std::invalid_argument("tau must be positive");
}

// Per-anchor loss terms and the coefficient matrix c[i][s] = dL/dz[i][s].
struct MsclTerms {
  std::vector<double> anchor_loss;  // one slot per anchor, 0 when skipped
  std::vector<double> coeff;        // m x m, zero diagonal
  std::vector<std::uint8_t> has_positive;
};

void mscl_anchor(const ContrastiveBatch& batch, const std::vector<double>& z,
                 int i, MsclTerms& t) {
  const int m = batch.size();
  const double* zi = z.data() + static_cast<std::size_t>(i) * m;
  double max_a = kNegInf, max_b = kNegInf;
  int num_pos = 0;
  for (int a = 0; a < m; ++a) {
    if (a == i) continue;
    max_a = std::max(max_a, zi[a]);
    if (batch.labels[a] == batch.labels[i]) {
      max_b = std::max(max_b, zi[a]);
      ++num_pos;
    }
  }
  if (num_pos == 0) return;  // anchor without positives contributes nothing
  t.has_positive[i] = 1;
  double sum_a = 0.0, sum_b = 0.0;
  for (int a = 0; a < m; ++a) {
    if (a == i) continue;
    sum_a += std::exp(zi[a] - max_a);
    if (batch.labels[a] == batch.labels[i]) sum_b += std::exp(zi[a] - max_b);
  }
  const double lse_a = max_a + std::log(sum_a);
  const double lse_b = max_b + std::log(sum_b);
  t.anchor_loss[i] = lse_a + std::log(static_cast<double>(num_pos)) - lse_b;
  double* ci = t.coeff.data() + static_cast<std::size_t>(i) * m;
  for (int a = 0; a < m; ++a) {
    if (a == i) continue;
    double c = std::exp(zi[a] - lse_a);
    if (batch.labels[a] == batch.labels[i]) c -= std::exp(zi[a] - lse_b);
    ci[a] = c;
  }
}

MsclTerms mscl_terms(const ContrastiveBatch& batch,
                     const std::vector<double>& z, bool parallel) {
  const int m = batch.size();
  MsclTerms t;
  t.anchor_loss.assign(m, 0.0);
  t.coeff.assign(static_cast<std::size_t>(m) * m, 0.0);
  t.has_positive.assign(m, 0);
  if (parallel) {
#pragma omp parallel for schedule(static) if (parallel_kernels_enabled())
    for (int i = 0; i < m; ++i) mscl_anchor(batch, z, i, t);
  } else {
    for (int i = 0; i < m; ++i) mscl_anchor(batch, z, i, t);
  }
  if (std::find(t.has_positive.begin(), t.has_positive.end(), 1) ==
      t.has_positive.end()) {
    throw std::runtime_error("batch has no positive pairs");
  }
  return t;
}

// InfoNCE over the N x N image/text logit matrix. Returns dL/dlogits.
struct InfonceTerms {
  double loss = 0.0;
  std::vector<double> dlogits;  // n x n
};

InfonceTerms infonce_terms(const ContrastiveBatch& batch,
                           const std::vector<int>& text_slot_of_image) {
  const int n = batch.num_images;
  std::vector<double> logits(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      logits[i * n + j] = dot(batch.features[i],
                              batch.features[text_slot_of_image[j]]) /
                          batch.tau;
    }
  }
  InfonceTerms t;
  t.dlogits.assign(static_cast<std::size_t>(n) * n, 0.0);
  const double inv_n = 1.0 / n;
  // image -> text direction, softmax over rows
  for (int i = 0; i < n; ++i) {
    const double* row = logits.data() + static_cast<std::size_t>(i) * n;
    double mx = kNegInf;
    for (int j = 0; j < n; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) sum += std::exp(row[j] - mx);
    const double lse = mx + std::log(sum);
    t.loss += inv_n * (lse - row[i]);
    for (int j = 0; j < n; ++j) {
      t.dlogits[i * n + j] += inv_n * (std::exp(row[j] - lse) - (i == j));
    }
  }
  // text -> image direction, softmax over columns
  for (int j = 0; j < n; ++j) {
    double mx = kNegInf;
    for (int i = 0; i < n; ++i) mx = std::max(mx, logits[i * n + j]);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += std::exp(logits[i * n + j] - mx);
    const double lse = mx + std::log(sum);
    t.loss += inv_n * (lse - logits[j * n + j]);
    for (int i = 0; i < n; ++i) {
      t.dlogits[i * n + j] +=
          inv_n * (std::exp(logits[i * n + j] - lse) - (i == j));
    }
  }
  return t;
}

std::vector<int> image_text_slots(const ContrastiveBatch& batch) {
  std::vector<int> slots(batch.num_images);
  for (int i = 0; i < batch.num_images; ++i) {
    const int slot = batch.label_text_slot[batch.labels[i]];
    if (slot < 0) throw std::logic_error("image label missing text feature");
    slots[i] = slot;
  }
  return slots;
}

}  // namespace

double dot(const Embedding& a, const Embedding& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Embedding& v) { return std::sqrt(dot(v, v)); }

PrototypeSet random_prototypes(int count, int dim, Rng& rng) {
  PrototypeSet protos;
  protos.features.resize(count);
  for (auto& p : protos.features) {
    p.resize(dim);
    double n = 0.0;
    while (n == 0.0) {
      for (double& v : p) v = rng.normal();
      n = norm(p);
    }
    for (double& v : p) v /= n;
  }
  return protos;
}

ClassifyResult classify(const Embedding& feature, const PrototypeSet& protos,
                        double tau) {
  if (tau <= 0.0) throw std::invalid_argument("tau must be positive");
  const double fn = norm(feature);
  if (fn == 0.0) throw std::invalid_argument("zero-norm observation feature");
  const int c = protos.size();
  std::vector<double> sims(c);
  for (int j = 0; j < c; ++j) {
    const double pn = norm(protos.features[j]);
    if (pn == 0.0) throw std::invalid_argument("zero-norm prototype");
    sims[j] = dot(feature, protos.features[j]) / (fn * pn);
  }
  ClassifyResult result;
  result.label = 0;
  for (int j = 1; j < c; ++j) {
    if (sims[j] > sims[result.label]) result.label = j;
  }
  double mx = kNegInf;
  for (double s : sims) mx = std::max(mx, s / tau);
  double sum = 0.0;
  result.distribution.resize(c);
  for (int j = 0; j < c; ++j) {
    result.distribution[j] = std::exp(sims[j] / tau - mx);
    sum += result.distribution[j];
  }
  for (double& v : result.distribution) v /= sum;
  return result;
}

ContrastiveBatch build_batch(const std::vector<Embedding>& images,
                             const std::vector<int>& labels,
                             const PrototypeSet& protos, double tau) {
  if (images.empty()) throw std::invalid_argument("batch needs >= 1 image");
  if (images.size() != labels.size()) {
    throw std::invalid_argument("image/label count mismatch");
  }
  ContrastiveBatch batch;
  batch.tau = tau;
  batch.num_images = static_cast<int>(images.size());
  batch.features = images;
  batch.labels = labels;
  batch.label_text_slot.assign(protos.size(), -1);
  for (int i = 0; i < batch.num_images; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= protos.size()) {
      throw std::invalid_argument("label index out of range: " +
                                  std::to_string(y));
    }
    if (batch.label_text_slot[y] < 0) {
      batch.label_text_slot[y] = static_cast<int>(batch.features.size());
      batch.features.push_back(protos.features[y]);
      batch.labels.push_back(y);
      ++batch.num_texts;
    }
  }
  return batch;
}

LossResult mscl_loss_serial(const ContrastiveBatch& batch) {
  check_batch(batch);
  const int m = batch.size();
  const int d = static_cast<int>(batch.features[0].size());
  const auto z = similarity_matrix(batch);
  const auto t = mscl_terms(batch, z, /*parallel=*/false);

  LossResult result;
  for (double l : t.anchor_loss) result.loss += l;
  result.grad.assign(m, Embedding(d, 0.0));
  const double inv_tau = 1.0 / batch.tau;
  for (int i = 0; i < m; ++i) {
    for (int s = 0; s < m; ++s) {
      const double c = t.coeff[i * m + s];
      if (c == 0.0) continue;
      for (int k = 0; k < d; ++k) {
        result.grad[i][k] += c * inv_tau * batch.features[s][k];
        result.grad[s][k] += c * inv_tau * batch.features[i][k];
      }
    }
  }
  return result;
}

LossResult mscl_loss(const ContrastiveBatch& batch) {
  check_batch(batch);
  const int m = batch.size();
  const int d = static_cast<int>(batch.features[0].size());
  const auto z = similarity_matrix(batch);
  const auto t = mscl_terms(batch, z, /*parallel=*/true);

  LossResult result;
  for (double l : t.anchor_loss) result.loss += l;
  result.grad.assign(m, Embedding(d, 0.0));
  const double inv_tau = 1.0 / batch.tau;
  // Gather per output feature so threads never share a gradient slot.
#pragma omp parallel for schedule(static) if (parallel_kernels_enabled())
  for (int j = 0; j < m; ++j) {
    auto& gj = result.grad[j];
    for (int s = 0; s < m; ++s) {
      const double c = (t.coeff[j * m + s] + t.coeff[s * m + j]) * inv_tau;
      if (c == 0.0) continue;
      for (int k = 0; k < d; ++k) gj[k] += c * batch.features[s][k];
    }
  }
  return result;
}

LossResult infonce_loss_serial(const ContrastiveBatch& batch) {
  check_batch(batch);
  const int n = batch.num_images;
  const int d = static_cast<int>(batch.features[0].size());
  const auto slots = image_text_slots(batch);
  const auto t = infonce_terms(batch, slots);

  LossResult result;
  result.loss = t.loss;
  result.grad.assign(batch.size(), Embedding(d, 0.0));
  const double inv_tau = 1.0 / batch.tau;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double c = t.dlogits[i * n + j] * inv_tau;
      if (c == 0.0) continue;
      const auto& ti = batch.features[slots[j]];
      const auto& ui = batch.features[i];
      for (int k = 0; k < d; ++k) {
        result.grad[i][k] += c * ti[k];
        result.grad[slots[j]][k] += c * ui[k];
      }
    }
  }
  return result;
}

LossResult infonce_loss(const ContrastiveBatch& batch) {
  check_batch(batch);
  const int n = batch.num_images;
  const int d = static_cast<int>(batch.features[0].size());
  const auto slots = image_text_slots(batch);
  const auto t = infonce_terms(batch, slots);

  LossResult result;
  result.loss = t.loss;
  result.grad.assign(batch.size(), Embedding(d, 0.0));
  const double inv_tau = 1.0 / batch.tau;
  const int m = batch.size();
#pragma omp parallel for schedule(static) if (parallel_kernels_enabled())
  for (int slot = 0; slot < m; ++slot) {
    auto& g = result.grad[slot];
    if (slot < n) {
      for (int j = 0; j < n; ++j) {
        const double c = t.dlogits[slot * n + j] * inv_tau;
        if (c == 0.0) continue;
        const auto& tj = batch.features[slots[j]];
        for (int k = 0; k < d; ++k) g[k] += c * tj[k];
      }
    } else {
      for (int j = 0; j < n; ++j) {
        if (slots[j] != slot) continue;
        for (int i = 0; i < n; ++i) {
          const double c = t.dlogits[i * n + j] * inv_tau;
          if (c == 0.0) continue;
          const auto& ui = batch.features[i];
          for (int k = 0; k < d; ++k) g[k] += c * ui[k];
        }
      }
    }
  }
  return result;
}

Projection Projection::identity(int d_in, int d_out) {
  Projection p;
  p.d_in = d_in;
  p.d_out = d_out;
  p.w.assign(static_cast<std::size_t>(d_in) * d_out, 0.0);
  for (int i = 0; i < std::min(d_in, d_out); ++i) p.at(i, i) = 1.0;
  return p;
}

Embedding Projection::apply_unnormalized(const Embedding& x) const {
  if (static_cast<int>(x.size()) != d_in) {
    throw std::invalid_argument("projection input size mismatch");
  }
  Embedding v(d_out, 0.0);
  for (int i = 0; i < d_in; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* row = w.data() + static_cast<std::size_t>(i) * d_out;
    for (int j = 0; j < d_out; ++j) v[j] += xi * row[j];
  }
  return v;
}

Embedding Projection::apply(const Embedding& x) const {
  Embedding v = apply_unnormalized(x);
  const double n = norm(v);
  if (n == 0.0) throw std::runtime_error("projected feature has zero norm");
  for (double& e : v) e /= n;
  return v;
}

void EmbeddingDataset::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  const char magic[4] = {'I', 'S', 'R', 'D'};
  out.write(magic, 4);
  const std::uint32_t d = dim, c = num_labels;
  const std::uint64_t count = features.size();
  out.write(reinterpret_cast<const char*>(&d), 4);
  out.write(reinterpret_cast<const char*>(&c), 4);
  out.write(reinterpret_cast<const char*>(&count), 8);
  std::vector<float> row(dim);
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (int k = 0; k < dim; ++k) row[k] = static_cast<float>(features[i][k]);
    out.write(reinterpret_cast<const char*>(row.data()), 4u * dim);
    const std::uint16_t label = static_cast<std::uint16_t>(labels[i]);
    out.write(reinterpret_cast<const char*>(&label), 2);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

EmbeddingDataset EmbeddingDataset::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "ISRD", 4) != 0) {
    throw std::runtime_error("not a dataset file: " + path);
  }
  std::uint32_t d, c;
  std::uint64_t count;
  in.read(reinterpret_cast<char*>(&d), 4);
  in.read(reinterpret_cast<char*>(&c), 4);
  in.read(reinterpret_cast<char*>(&count), 8);
  EmbeddingDataset data;
  data.dim = static_cast<int>(d);
  data.num_labels = static_cast<int>(c);
  data.features.resize(count, Embedding(d));
  data.labels.resize(count);
  std::vector<float> row(d);
  for (std::uint64_t i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(row.data()), 4u * d);
    std::uint16_t label;
    in.read(reinterpret_cast<char*>(&label), 2);
    if (!in) throw std::runtime_error("truncated dataset file: " + path);
    for (std::uint32_t k = 0; k < d; ++k) data.features[i][k] = row[k];
    data.labels[i] = label;
  }
  return data;
}

EmbeddingDataset make_synthetic_embedding_dataset(
    const PrototypeSet& protos, const SyntheticDatasetConfig& config,
    Rng& rng) {
  const int d = protos.dim();
  const int c = protos.size();
  // Optional hidden rotation, built by Gram-Schmidt on Gaussian rows.
  std::vector<Embedding> rotation;
  if (config.misaligned) {
    rotation.assign(d, Embedding(d));
    for (int i = 0; i < d; ++i) {
      auto& row = rotation[i];
      for (double& v : row) v = rng.normal();
      for (int j = 0; j < i; ++j) {
        const double p = dot(row, rotation[j]);
        for (int k = 0; k < d; ++k) row[k] -= p * rotation[j][k];
      }
      const double n = norm(row);
      for (double& v : row) v /= n;
    }
  }

  EmbeddingDataset data;
  data.dim = d;
  data.num_labels = c;
  data.features.reserve(config.count);
  data.labels.reserve(config.count);
  for (int s = 0; s < config.count; ++s) {
    const int y = static_cast<int>(rng.uniform_int(0, c - 1));
    int other = y;
    if (c > 1) {
      other = static_cast<int>(rng.uniform_int(0, c - 2));
      if (other >= y) ++other;
    }
    Embedding raw(d);
    for (int k = 0; k < d; ++k) {
      raw[k] = (1.0 - config.prototype_mix) * protos.features[y][k] +
               config.prototype_mix * protos.features[other][k] +
               rng.normal(0.0, config.noise_sigma);
    }
    if (config.misaligned) {
      Embedding x(d, 0.0);
      for (int i = 0; i < d; ++i) x[i] = dot(rotation[i], raw);
      data.features.push_back(std::move(x));
    } else {
      data.features.push_back(std::move(raw));
    }
    data.labels.push_back(y);
  }
  return data;
}

FinetuneResult finetune_projection(const EmbeddingDataset& train,
                                   const EmbeddingDataset& val,
                                   const PrototypeSet& protos,
                                   const FinetuneConfig& config) {
  if (train.size() == 0) throw std::invalid_argument("empty training set");
  if (config.batch_size < 1) throw std::invalid_argument("bad batch size");

  FinetuneResult result;
  result.projection = Projection::identity(train.dim, protos.dim());
  Projection& proj = result.projection;
  Rng rng(config.seed);

  std::vector<int> order(train.size());
  for (int i = 0; i < train.size(); ++i) order[i] = i;

  std::vector<double> dw(proj.w.size());
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    int batches = 0;
    for (int begin = 0; begin < train.size(); begin += config.batch_size) {
      const int end = std::min(begin + config.batch_size, train.size());
      const int n = end - begin;
      std::vector<Embedding> raw_v(n), unit(n);
      std::vector<int> labels(n);
      std::vector<double> norms(n);
      for (int b = 0; b < n; ++b) {
        const int idx = order[begin + b];
        raw_v[b] = proj.apply_unnormalized(train.features[idx]);
        norms[b] = norm(raw_v[b]);
        if (norms[b] == 0.0) {
          throw std::runtime_error("projected feature collapsed to zero");
        }
        unit[b] = raw_v[b];
        for (double& e : unit[b]) e /= norms[b];
        labels[b] = train.labels[idx];
      }
      const auto batch = build_batch(unit, labels, protos, config.tau);
      const auto loss = config.loss == ContrastiveLossKind::MSCL
                            ? mscl_loss_serial(batch)
                            : infonce_loss_serial(batch);
      if (!std::isfinite(loss.loss)) {
        throw std::runtime_error(
            "non-finite loss at epoch " + std::to_string(epoch) +
            ", batch starting " + std::to_string(begin));
      }
      epoch_loss += loss.loss;
      ++batches;
      if (config.lr == 0.0) continue;

      std::fill(dw.begin(), dw.end(), 0.0);
      for (int b = 0; b < n; ++b) {
        // Back through the L2 normalization: g_v = (g - (g.u)u) / |v|.
        const auto& g = loss.grad[b];
        const auto& u = unit[b];
        const double gu = dot(g, u);
        const int idx = order[begin + b];
        const auto& x = train.features[idx];
        for (int j = 0; j < proj.d_out; ++j) {
          const double gv = (g[j] - gu * u[j]) / norms[b];
          if (gv == 0.0) continue;
          for (int i = 0; i < proj.d_in; ++i) {
            dw[static_cast<std::size_t>(i) * proj.d_out + j] += x[i] * gv;
          }
        }
      }
      for (std::size_t i = 0; i < proj.w.size(); ++i) {
        proj.w[i] -= config.lr * dw[i];
      }
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / std::max(batches, 1);
    stats.val_acc = val.size() > 0 ? eval_accuracy(val, proj, protos,
                                                   config.tau)
                                   : 0.0;
    result.history.push_back(stats);
  }
  return result;
}

double eval_accuracy(const EmbeddingDataset& data, const Projection& proj,
                     const PrototypeSet& protos, double tau) {
  if (data.size() == 0) return 0.0;
  int correct = 0;
  for (int i = 0; i < data.size(); ++i) {
    const auto projected = proj.apply_unnormalized(data.features[i]);
    if (norm(projected) == 0.0) continue;
    if (classify(projected, protos, tau).label == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / data.size();
}

ConfusionMatrix ConfusionMatrix::diagonal(int size, double diag) {
  ConfusionMatrix m;
  m.size = size;
  const double off = size > 1 ? (1.0 - diag) / (size - 1) : 0.0;
  m.values.assign(static_cast<std::size_t>(size) * size, off);
  for (int i = 0; i < size; ++i) {
    m.values[static_cast<std::size_t>(i) * size + i] = size > 1 ? diag : 1.0;
  }
  return m;
}

void ConfusionMatrix::check() const {
  for (int i = 0; i < size; ++i) {
    double sum = 0.0;
    for (double v : row(i)) {
      if (v < 0.0) throw std::invalid_argument("negative confusion entry");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw std::invalid_argument("confusion row " + std::to_string(i) +
                                  " sums to " + std::to_string(sum));
    }
  }
}

ObservationDistribution synth_classify(const std::vector<int>& ray_labels,
                                       const ConfusionMatrix& confusion,
                                       ObservationMode mode,
                                       std::uint64_t /*seed*/) {
  if (ray_labels.empty()) throw std::invalid_argument("no visible rays");
  confusion.check();
  for (int y : ray_labels) {
    if (y < 0 || y >= confusion.size) {
      throw std::invalid_argument("ray label out of range");
    }
  }
  ObservationDistribution dist;
  dist.mode = mode;
  if (mode == ObservationMode::Spatial) {
    dist.per_ray.reserve(ray_labels.size());
    for (int y : ray_labels) {
      const auto row = confusion.row(y);
      dist.per_ray.emplace_back(row.begin(), row.end());
    }
  } else {
    std::vector<int> counts(confusion.size, 0);
    for (int y : ray_labels) ++counts[y];
    int majority = 0;
    for (int y = 1; y < confusion.size; ++y) {
      if (counts[y] > counts[majority]) majority = y;
    }
    const auto row = confusion.row(majority);
    dist.repeated.assign(row.begin(), row.end());
  }
  return dist;
}

}  // namespace isrm
