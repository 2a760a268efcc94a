#include "gratis/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "gratis/error.hpp"
#include "gratis/log.hpp"

namespace gratis::train {

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> labels,
                     std::span<const double> class_weights) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw DimensionError(fmt::format("cross_entropy: logits {} for {} labels", shape_str(logits.shape()),
                                     labels.size()));
  }
  if (labels.empty()) throw ContractError("cross_entropy: no labels");
  const std::size_t rows = logits.dim(0), classes = logits.dim(1);
  std::vector<std::size_t> pick(rows);
  std::vector<double> w(rows, 1.0);
  for (std::size_t r = 0; r < rows; ++r) {
    if (labels[r] >= classes) {
      throw ContractError(fmt::format("cross_entropy: label {} out of range for {} classes", labels[r], classes));
    }
    pick[r] = r * classes + labels[r];
    if (!class_weights.empty()) w[r] = class_weights[labels[r]];
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(total > 0.0)) throw ContractError("cross_entropy: class weights sum to zero");
  for (auto& x : w) x /= total;
  const Tensor logp = gather_rows(reshape(log_softmax(logits, 1), {rows * classes, 1}), pick);
  return neg(sum(scale_rows(logp, Tensor::from({rows}, std::move(w)))));
}

std::vector<double> inverse_frequency_weights(std::span<const std::size_t> labels, std::size_t classes) {
  std::vector<double> counts(classes, 0.0);
  for (auto y : labels) {
    if (y >= classes) throw ContractError(fmt::format("label {} out of range for {} classes", y, classes));
    counts[y] += 1.0;
  }
  std::vector<double> w(classes, 1.0);
  for (std::size_t c = 0; c < classes; ++c) {
    if (counts[c] > 0) w[c] = static_cast<double>(labels.size()) / (static_cast<double>(classes) * counts[c]);
  }
  return w;
}

AdamW::AdamW(std::vector<Parameter> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.emplace_back(p.value.numel(), 0.0);
    v_.emplace_back(p.value.numel(), 0.0);
  }
}

void AdamW::step(double lr) {
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor value = params_[k].value;
    auto x = value.mutable_data();
    const bool has = value.has_grad();
    auto g = has ? value.grad() : std::span<const double>{};
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double gi = has ? g[i] : 0.0;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
      const double mhat = m[i] / bc1, vhat = v[i] / bc2;
      x[i] -= lr * cfg_.weight_decay * x[i];
      x[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) {
    Tensor t = p.value;
    t.zero_grad();
  }
}

void AdamW::restore(std::vector<std::vector<double>> m, std::vector<std::vector<double>> v, std::uint64_t step) {
  if (m.size() != params_.size() || v.size() != params_.size()) {
    throw ContractError("AdamW::restore: buffer count mismatch");
  }
  for (std::size_t k = 0; k < params_.size(); ++k) {
    if (m[k].size() != params_[k].value.numel() || v[k].size() != params_[k].value.numel()) {
      throw DimensionError("AdamW::restore: moment size mismatch for " + params_[k].name);
    }
  }
  m_ = std::move(m);
  v_ = std::move(v);
  step_ = step;
}

double cosine_lr(std::uint64_t step, std::uint64_t total, double lr0, double lr_min) {
  if (total == 0) return lr0;
  const double t = static_cast<double>(std::min(step, total)) / static_cast<double>(total);
  return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

// ---- checkpoints ----

namespace {

constexpr char kMagic[4] = {'G', 'R', 'T', 'S'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF64 = 0;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(std::istream& in, const std::filesystem::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw IoError(fmt::format("{}: truncated checkpoint", path.string()));
  }
  return value;
}

struct Entry {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

void put_entry(std::ostream& out, const std::string& name, const Shape& shape, std::span<const double> data) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint8_t>(out, kDtypeF64);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) put<std::uint64_t>(out, d);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store, const AdamW* optim) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("{}: cannot open for writing", path.string()));
  std::uint64_t count = store.size();
  if (optim) count += 2 * optim->params().size() + 1;
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, count);
  for (const auto& p : store.all()) put_entry(out, "param/" + p.name, p.value.shape(), p.value.data());
  if (optim) {
    const auto ps = optim->params();
    for (std::size_t k = 0; k < ps.size(); ++k) {
      put_entry(out, "adamw.m/" + ps[k].name, ps[k].value.shape(), optim->first_moments()[k]);
    }
    for (std::size_t k = 0; k < ps.size(); ++k) {
      put_entry(out, "adamw.v/" + ps[k].name, ps[k].value.shape(), optim->second_moments()[k]);
    }
    const double step = static_cast<double>(optim->step_count());
    put_entry(out, "adamw.step", {}, std::span<const double>(&step, 1));
  }
  if (!out) throw IoError(fmt::format("{}: write failed", path.string()));
}

void load_checkpoint(const std::filesystem::path& path, ParameterStore& store, AdamW* optim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("{}: cannot open", path.string()));
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) {
    throw IoError(fmt::format("{}: not a checkpoint (bad magic)", path.string()));
  }
  const auto version = take<std::uint32_t>(in, path);
  if (version != kVersion) throw IoError(fmt::format("{}: unsupported version {}", path.string(), version));
  const auto count = take<std::uint64_t>(in, path);
  std::map<std::string, Entry> entries;
  for (std::uint64_t e = 0; e < count; ++e) {
    Entry entry;
    const auto len = take<std::uint32_t>(in, path);
    entry.name.resize(len);
    if (!in.read(entry.name.data(), len)) throw IoError(fmt::format("{}: truncated name", path.string()));
    if (take<std::uint8_t>(in, path) != kDtypeF64) {
      throw IoError(fmt::format("{}: entry '{}' has an unknown dtype", path.string(), entry.name));
    }
    const auto rank = take<std::uint32_t>(in, path);
    for (std::uint32_t r = 0; r < rank; ++r) entry.shape.push_back(take<std::uint64_t>(in, path));
    entry.data.resize(shape_numel(entry.shape));
    if (!in.read(reinterpret_cast<char*>(entry.data.data()),
                 static_cast<std::streamsize>(entry.data.size() * sizeof(double)))) {
      throw IoError(fmt::format("{}: truncated payload for '{}'", path.string(), entry.name));
    }
    entries.emplace(entry.name, std::move(entry));
  }

  auto fetch = [&](const std::string& name, const Shape& shape) -> std::vector<double>& {
    auto it = entries.find(name);
    if (it == entries.end()) throw ContractError(fmt::format("{}: missing entry '{}'", path.string(), name));
    if (it->second.shape != shape) {
      throw DimensionError(fmt::format("{}: entry '{}' has shape {}, expected {}", path.string(), name,
                                       shape_str(it->second.shape), shape_str(shape)));
    }
    return it->second.data;
  };
  for (const auto& p : store.all()) {
    const auto& src = fetch("param/" + p.name, p.value.shape());
    Tensor t = p.value;
    std::copy(src.begin(), src.end(), t.mutable_data().begin());
  }
  if (optim) {
    std::vector<std::vector<double>> m, v;
    for (const auto& p : optim->params()) {
      m.push_back(fetch("adamw.m/" + p.name, p.value.shape()));
      v.push_back(fetch("adamw.v/" + p.name, p.value.shape()));
    }
    const double step = fetch("adamw.step", {}).at(0);
    optim->restore(std::move(m), std::move(v), static_cast<std::uint64_t>(step));
  }
}

// ---- metrics ----

namespace {

void check_lengths(std::span<const std::size_t> preds, std::span<const std::size_t> labels) {
  if (preds.size() != labels.size()) {
    throw DimensionError(fmt::format("{} predictions for {} labels", preds.size(), labels.size()));
  }
}

double f1_from_counts(double tp, double fp, double fn) {
  const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
}

}  // namespace

double accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> labels) {
  check_lengths(preds, labels);
  if (labels.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += preds[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

double metric_f1(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                 std::size_t positive_class) {
  check_lengths(preds, labels);
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool p = preds[i] == positive_class, y = labels[i] == positive_class;
    tp += p && y;
    fp += p && !y;
    fn += !p && y;
  }
  return f1_from_counts(tp, fp, fn);
}

double macro_f1(std::span<const std::size_t> preds, std::span<const std::size_t> labels, std::size_t n_classes) {
  check_lengths(preds, labels);
  double total = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (std::find(labels.begin(), labels.end(), c) == labels.end()) continue;
    total += metric_f1(preds, labels, c);
    ++present;
  }
  return present ? total / static_cast<double>(present) : 0.0;
}

std::vector<double> class_recalls(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                                  std::size_t n_classes) {
  check_lengths(preds, labels);
  std::vector<double> hit(n_classes, 0.0), count(n_classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= n_classes) throw ContractError(fmt::format("label {} out of range", labels[i]));
    count[labels[i]] += 1.0;
    hit[labels[i]] += preds[i] == labels[i];
  }
  std::vector<double> r(n_classes, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (count[c] > 0) r[c] = hit[c] / count[c];
  }
  return r;
}

double metric_uar(std::span<const std::size_t> preds, std::span<const std::size_t> labels, std::size_t n_classes) {
  const auto r = class_recalls(preds, labels, n_classes);
  double total = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (std::isnan(r[c])) continue;
    total += r[c];
    ++present;
  }
  if (present < n_classes) {
    log_warning(fmt::format("metric_uar: {} of {} classes absent from the labels; excluded",
                            n_classes - present, n_classes));
  }
  return present ? total / static_cast<double>(present) : 0.0;
}

double metric_hits_at_k(std::span<const double> pos_scores, std::span<const double> neg_scores, std::size_t k) {
  if (pos_scores.empty() || neg_scores.empty()) throw ContractError("metric_hits_at_k: empty score list");
  if (k == 0) throw ContractError("metric_hits_at_k: k must be positive");
  std::vector<double> neg(neg_scores.begin(), neg_scores.end());
  // Fewer than k negatives: every negative is in the top k, so the bar is the lowest one.
  const std::size_t kk = std::min(k, neg.size());
  std::nth_element(neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(kk - 1), neg.end(), std::greater<>());
  const double bar = neg[kk - 1];
  std::size_t hits = 0;
  for (double s : pos_scores) hits += s > bar;
  return static_cast<double>(hits) / static_cast<double>(pos_scores.size());
}

// ---- training loop ----

std::vector<std::size_t> sample_targets(const GraphSample& g) {
  switch (g.labels.kind) {
    case TaskKind::GraphClass: return {g.labels.graph_label.value()};
    case TaskKind::VertexClass: return g.labels.vertex_labels.value();
    case TaskKind::LinkClass: {
      std::vector<std::size_t> y;
      for (const auto& [key, c] : g.labels.link_labels.value()) y.push_back(c);
      return y;
    }
  }
  return {};
}

std::vector<EdgeKey> link_queries(const GraphSample& g) {
  std::vector<EdgeKey> q;
  if (g.labels.kind == TaskKind::LinkClass) {
    for (const auto& [key, c] : g.labels.link_labels.value()) q.push_back(key);
  }
  return q;
}

void MetricLog::record(std::size_t epoch, const std::string& split, const std::string& metric, double value) {
  lines_.push_back(fmt::format("{}, {}, {}, {:.17g}", epoch, split, metric, value));
  if (out_) *out_ << lines_.back() << '\n';
}

std::vector<double> fit(const ForwardFn& forward, AdamW& optim, std::span<const GraphSample> data,
                        const TrainConfig& cfg, std::size_t classes, MetricLog* log, const std::string& split) {
  if (data.empty()) throw ContractError("fit: empty dataset");
  if (cfg.batch_size == 0) throw ConfigError("train.batch_size must be positive");
  std::vector<double> weights;
  if (cfg.class_weighting) {
    std::vector<std::size_t> all;
    for (const auto& g : data) {
      const auto y = sample_targets(g);
      all.insert(all.end(), y.begin(), y.end());
    }
    weights = inverse_frequency_weights(all, classes);
  }
  const std::size_t batches = (data.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::uint64_t total_steps = static_cast<std::uint64_t>(batches) * cfg.epochs;
  std::vector<std::size_t> order(data.size());
  std::vector<double> epoch_loss;
  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(cfg.seed * 1000003ULL + epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * cfg.batch_size, hi = std::min(data.size(), lo + cfg.batch_size);
      optim.zero_grad();
      for (std::size_t s = lo; s < hi; ++s) {
        const auto& g = data[order[s]];
        const Tensor loss = cross_entropy(forward(g), sample_targets(g), weights);
        loss_sum += loss.item();
        scale(loss, 1.0 / static_cast<double>(hi - lo)).backward();
      }
      optim.step(cosine_lr(step, total_steps, cfg.lr, cfg.lr_min));
      ++step;
    }
    epoch_loss.push_back(loss_sum / static_cast<double>(data.size()));
    if (log) log->record(epoch, split, "loss", epoch_loss.back());
  }
  optim.zero_grad();
  return epoch_loss;
}

Prediction predict(const ForwardFn& forward, std::span<const GraphSample> data) {
  NoGradGuard no_grad;
  Prediction p;
  for (const auto& g : data) {
    const Tensor logits = forward(g);
    const auto y = sample_targets(g);
    const std::size_t classes = logits.dim(1);
    auto x = logits.data();
    for (std::size_t r = 0; r < y.size(); ++r) {
      const auto row = x.subspan(r * classes, classes);
      p.preds.push_back(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
      p.labels.push_back(y[r]);
      if (classes == 2) p.positive_scores.push_back(row[1] - row[0]);
    }
  }
  return p;
}

MetricReport evaluate(const Prediction& p, std::size_t classes, std::optional<std::size_t> hits_k) {
  MetricReport r;
  r.accuracy = accuracy(p.preds, p.labels);
  r.macro_f1 = macro_f1(p.preds, p.labels, classes);
  r.uar = metric_uar(p.preds, p.labels, classes);
  r.recalls = class_recalls(p.preds, p.labels, classes);
  if (hits_k && classes == 2 && p.positive_scores.size() == p.labels.size()) {
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < p.labels.size(); ++i) (p.labels[i] == 1 ? pos : neg).push_back(p.positive_scores[i]);
    if (!pos.empty() && !neg.empty()) r.hits_at_k = metric_hits_at_k(pos, neg, *hits_k);
  }
  return r;
}

}  // namespace gratis::train
