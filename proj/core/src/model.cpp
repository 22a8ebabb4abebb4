#include "pcm/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "pcm/errors.hpp"
#include "serial_util.hpp"

namespace pcm {

namespace {

using OrderedJson = nlohmann::ordered_json;

constexpr double kProbClip = 1e-12;

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// per-trunk-layer multiplicative scales: 0 for dropped units, 1/(1-rate)
// for kept ones; empty disables dropout
using DropoutScales = std::vector<std::vector<double>>;

struct ForwardState {
  std::vector<std::vector<double>> tanh_acts;  // per trunk layer, before dropout
  std::vector<std::vector<double>> acts;       // per trunk layer, after dropout
  double logit = 0.0;
  double prob = 0.5;
  double raw = 0.0;
};

double head_output(const DenseLayer& head, std::span<const double> x) {
  double z = head.b[0];
  for (std::size_t j = 0; j < head.in; ++j) z += head.w[j] * x[j];
  return z;
}

ForwardState run_forward(const MtlModel& model, std::span<const double> x,
                         const DropoutScales* dropout) {
  if (x.size() != model.input_width) {
    throw ContractViolation("forward: feature width " + std::to_string(x.size()) +
                            " does not match model input width " +
                            std::to_string(model.input_width));
  }
  ForwardState fs;
  fs.tanh_acts.reserve(model.params.trunk.size());
  fs.acts.reserve(model.params.trunk.size());

  std::vector<double> cur(x.begin(), x.end());
  for (std::size_t l = 0; l < model.params.trunk.size(); ++l) {
    const DenseLayer& layer = model.params.trunk[l];
    std::vector<double> t(layer.out, 0.0);
    for (std::size_t u = 0; u < layer.out; ++u) {
      double z = layer.b[u];
      const double* wrow = layer.w.data() + u * layer.in;
      for (std::size_t j = 0; j < layer.in; ++j) z += wrow[j] * cur[j];
      t[u] = std::tanh(z);
    }
    std::vector<double> a = t;
    if (dropout) {
      for (std::size_t u = 0; u < a.size(); ++u) a[u] *= (*dropout)[l][u];
    }
    fs.tanh_acts.push_back(std::move(t));
    fs.acts.push_back(a);
    cur = std::move(a);
  }

  const std::vector<double>& h = cur;  // trunk output (or the raw input when no trunk)
  switch (model.mode) {
    case Mode::Baseline:
      fs.logit = head_output(model.params.cls_head, h);
      fs.prob = sigmoid(fs.logit);
      fs.raw = 0.0;
      break;
    case Mode::Hybrid:
      fs.raw = head_output(model.params.reg_head, h);
      fs.prob = fs.raw > 0.0 ? 1.0 - kProbClip : kProbClip;  // hard decision proxy
      break;
    case Mode::Mtl: {
      fs.logit = head_output(model.params.cls_head, h);
      fs.prob = sigmoid(fs.logit);
      std::vector<double> r(h);
      r.push_back(fs.prob);
      fs.raw = head_output(model.params.reg_head, r);
      break;
    }
  }
  return fs;
}

// Extended-precision loss evaluation for the finite-difference oracle. At
// h = 1e-5 the double-precision representation error of the loss (~1e-16 * L)
// already swamps gradients of order 1e-7 after the central difference, so
// the reference path accumulates in long double.
long double batch_loss_precise(const MtlModel& model, const FeatureMatrix& data,
                               std::span<const std::size_t> rows) {
  const std::size_t trunk_out = model.trunk_output_width();
  long double bce = 0.0L;
  long double mse = 0.0L;

  std::vector<long double> cur;
  std::vector<long double> next;
  for (std::size_t row : rows) {
    const std::span<const double> x = data.row(row);
    cur.assign(x.begin(), x.end());
    for (const DenseLayer& layer : model.params.trunk) {
      next.assign(layer.out, 0.0L);
      for (std::size_t u = 0; u < layer.out; ++u) {
        long double z = layer.b[u];
        const double* wrow = layer.w.data() + u * layer.in;
        for (std::size_t j = 0; j < layer.in; ++j) z += static_cast<long double>(wrow[j]) * cur[j];
        next[u] = std::tanh(z);
      }
      cur.swap(next);
    }

    long double logit = 0.0L;
    long double prob = 0.5L;
    long double raw = 0.0L;
    const auto head = [&cur, trunk_out](const DenseLayer& h, long double extra, bool with_extra) {
      long double z = h.b[0];
      for (std::size_t j = 0; j < trunk_out; ++j) z += static_cast<long double>(h.w[j]) * cur[j];
      if (with_extra) z += static_cast<long double>(h.w[trunk_out]) * extra;
      return z;
    };
    const int y = data.labels[row];
    const long double m = data.magnitudes_days[row];
    switch (model.mode) {
      case Mode::Baseline:
        logit = head(model.params.cls_head, 0.0L, false);
        prob = 1.0L / (1.0L + std::exp(-logit));
        break;
      case Mode::Hybrid:
        raw = head(model.params.reg_head, 0.0L, false);
        break;
      case Mode::Mtl:
        logit = head(model.params.cls_head, 0.0L, false);
        prob = 1.0L / (1.0L + std::exp(-logit));
        raw = head(model.params.reg_head, prob, true);
        break;
    }
    if (model.mode != Mode::Hybrid) {
      const long double p =
          std::min(std::max(prob, static_cast<long double>(kProbClip)),
                   1.0L - static_cast<long double>(kProbClip));
      bce -= y * std::log(p) + (1 - y) * std::log(1.0L - p);
    }
    if (model.mode != Mode::Baseline) {
      mse += (m - raw) * (m - raw);
    }
  }
  const auto n = static_cast<long double>(rows.size());
  switch (model.mode) {
    case Mode::Baseline: return bce / n;
    case Mode::Hybrid: return mse / n;
    case Mode::Mtl: return bce / n + mse / n;
  }
  return 0.0L;
}

DenseLayer zeros_like(const DenseLayer& layer) {
  DenseLayer z;
  z.out = layer.out;
  z.in = layer.in;
  z.w.assign(layer.w.size(), 0.0);
  z.b.assign(layer.b.size(), 0.0);
  return z;
}

ParamSet zeros_like(const ParamSet& p) {
  ParamSet z;
  z.trunk.reserve(p.trunk.size());
  for (const auto& layer : p.trunk) z.trunk.push_back(zeros_like(layer));
  z.cls_head = zeros_like(p.cls_head);
  z.reg_head = zeros_like(p.reg_head);
  return z;
}

template <typename Fn>
void for_each_param(ParamSet& p, Fn&& fn) {
  for (std::size_t l = 0; l < p.trunk.size(); ++l) {
    fn(p.trunk[l].w);
    fn(p.trunk[l].b);
  }
  fn(p.cls_head.w);
  fn(p.cls_head.b);
  fn(p.reg_head.w);
  fn(p.reg_head.b);
}

StepLosses mode_losses(Mode mode, std::span<const int> labels, std::span<const double> probs,
                       std::span<const double> targets, std::span<const double> raws) {
  StepLosses s;
  switch (mode) {
    case Mode::Baseline:
      s.bce = loss_bce(labels, probs);
      s.total = s.bce;
      break;
    case Mode::Hybrid:
      s.mse = loss_mse(targets, raws);
      s.total = s.mse;
      break;
    case Mode::Mtl:
      s.bce = loss_bce(labels, probs);
      s.mse = loss_mse(targets, raws);
      s.total = loss_total(s.bce, s.mse);
      break;
  }
  return s;
}

ParamSet gradients_impl(const MtlModel& model, const FeatureMatrix& data,
                        std::span<const std::size_t> rows, const DropoutScales* dropout,
                        StepLosses* losses) {
  if (rows.empty()) throw ContractViolation("gradients: empty batch");
  ParamSet grads = zeros_like(model.params);
  const double n = static_cast<double>(rows.size());
  const std::size_t trunk_out = model.trunk_output_width();

  std::vector<int> labels;
  std::vector<double> probs, targets, raws;
  labels.reserve(rows.size());
  probs.reserve(rows.size());
  targets.reserve(rows.size());
  raws.reserve(rows.size());

  for (std::size_t row : rows) {
    const std::span<const double> x = data.row(row);
    const ForwardState fs = run_forward(model, x, dropout);
    const int y = data.labels[row];
    const double m = data.magnitudes_days[row];
    labels.push_back(y);
    probs.push_back(fs.prob);
    targets.push_back(m);
    raws.push_back(fs.raw);

    std::vector<double> h_storage;
    if (model.params.trunk.empty()) h_storage.assign(x.begin(), x.end());
    const std::vector<double>& h = model.params.trunk.empty() ? h_storage : fs.acts.back();

    double draw = 0.0;
    double dlogit = 0.0;
    if (model.mode == Mode::Hybrid || model.mode == Mode::Mtl) {
      draw = 2.0 * (fs.raw - m) / n;
    }
    if (model.mode == Mode::Baseline) {
      dlogit = (fs.prob - y) / n;
    } else if (model.mode == Mode::Mtl) {
      const double dprob_reg = draw * model.params.reg_head.w[trunk_out];
      dlogit = (fs.prob - y) / n + dprob_reg * fs.prob * (1.0 - fs.prob);
    }

    std::vector<double> dh(trunk_out, 0.0);

    if (model.mode == Mode::Hybrid || model.mode == Mode::Mtl) {
      for (std::size_t j = 0; j < trunk_out; ++j) {
        grads.reg_head.w[j] += draw * h[j];
        dh[j] += draw * model.params.reg_head.w[j];
      }
      if (model.mode == Mode::Mtl) {
        grads.reg_head.w[trunk_out] += draw * fs.prob;
      }
      grads.reg_head.b[0] += draw;
    }
    if (model.mode == Mode::Baseline || model.mode == Mode::Mtl) {
      for (std::size_t j = 0; j < trunk_out; ++j) {
        grads.cls_head.w[j] += dlogit * h[j];
        dh[j] += dlogit * model.params.cls_head.w[j];
      }
      grads.cls_head.b[0] += dlogit;
    }

    // trunk backward
    std::vector<double> da = std::move(dh);
    for (std::size_t li = model.params.trunk.size(); li-- > 0;) {
      const DenseLayer& layer = model.params.trunk[li];
      DenseLayer& g = grads.trunk[li];
      const std::vector<double>& t = fs.tanh_acts[li];
      std::span<const double> input =
          li == 0 ? x : std::span<const double>(fs.acts[li - 1]);

      std::vector<double> dz(layer.out);
      for (std::size_t u = 0; u < layer.out; ++u) {
        const double scale = dropout ? (*dropout)[li][u] : 1.0;
        dz[u] = da[u] * scale * (1.0 - t[u] * t[u]);
      }
      std::vector<double> dprev(layer.in, 0.0);
      for (std::size_t u = 0; u < layer.out; ++u) {
        const double* wrow = layer.w.data() + u * layer.in;
        double* grow = g.w.data() + u * layer.in;
        for (std::size_t j = 0; j < layer.in; ++j) {
          grow[j] += dz[u] * input[j];
          dprev[j] += wrow[j] * dz[u];
        }
        g.b[u] += dz[u];
      }
      da = std::move(dprev);
    }
  }

  if (losses) *losses = mode_losses(model.mode, labels, probs, targets, raws);
  return grads;
}

}  // namespace

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::Baseline: return "baseline";
    case Mode::Hybrid: return "hybrid";
    case Mode::Mtl: return "multi-task";
  }
  return "baseline";
}

Mode mode_from_name(const std::string& name) {
  if (name == "baseline") return Mode::Baseline;
  if (name == "hybrid") return Mode::Hybrid;
  if (name == "multi-task" || name == "mtl") return Mode::Mtl;
  throw ConfigError("unknown approach '" + name + "' (expected baseline, hybrid or multi-task)");
}

std::string train_config_digest(const TrainConfig& c) {
  std::string s = "hidden=";
  for (std::size_t i = 0; i < c.hidden_sizes.size(); ++i) {
    if (i) s += "/";
    s += std::to_string(c.hidden_sizes[i]);
  }
  s += ";lr=" + detail::hex_from_double(c.learning_rate);
  s += ";beta1=" + detail::hex_from_double(c.beta1);
  s += ";beta2=" + detail::hex_from_double(c.beta2);
  s += ";batch=" + std::to_string(c.batch_size);
  s += ";epochs=" + std::to_string(c.epochs);
  s += ";seed=" + std::to_string(c.seed);
  s += ";dropout=" + detail::hex_from_double(c.dropout);
  s += ";patience=" + std::to_string(c.patience);
  return detail::hex64(detail::fnv1a64(s));
}

MtlModel make_model(Mode mode, std::size_t input_width, const TrainConfig& config) {
  if (input_width == 0) throw ContractViolation("make_model: zero input width");
  if (config.learning_rate < 0.0) throw ConfigError("make_model: negative learning rate");

  MtlModel model;
  model.mode = mode;
  model.input_width = input_width;
  model.hidden = config.hidden_sizes;
  model.init_seed = config.seed;

  Rng rng(config.seed);
  auto init_layer = [&rng](std::size_t out, std::size_t in) {
    DenseLayer layer;
    layer.out = out;
    layer.in = in;
    layer.w.resize(out * in);
    layer.b.assign(out, 0.0);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& w : layer.w) w = rng.uniform(-bound, bound);
    return layer;
  };

  std::size_t width = input_width;
  for (std::size_t size : config.hidden_sizes) {
    if (size == 0) throw ConfigError("make_model: zero-width hidden layer");
    model.params.trunk.push_back(init_layer(size, width));
    width = size;
  }
  model.params.cls_head = init_layer(1, width);
  model.params.reg_head = init_layer(1, width + (mode == Mode::Mtl ? 1 : 0));
  return model;
}

Prediction forward(const MtlModel& model, std::span<const double> features) {
  const ForwardState fs = run_forward(model, features, nullptr);
  Prediction p;
  p.prob = std::clamp(fs.prob, kProbClip, 1.0 - kProbClip);
  p.raw_magnitude = fs.raw;
  return p;
}

double loss_bce(std::span<const int> labels, std::span<const double> probs) {
  if (labels.size() != probs.size()) {
    throw ContractViolation("loss_bce: label/probability length mismatch");
  }
  if (labels.empty()) throw ContractViolation("loss_bce: empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = std::clamp(probs[i], kProbClip, 1.0 - kProbClip);
    sum -= labels[i] * std::log(p) + (1 - labels[i]) * std::log(1.0 - p);
  }
  return sum / static_cast<double>(labels.size());
}

double loss_mse(std::span<const double> targets, std::span<const double> predictions) {
  if (targets.size() != predictions.size()) {
    throw ContractViolation("loss_mse: target/prediction length mismatch");
  }
  if (targets.empty()) throw ContractViolation("loss_mse: empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double d = targets[i] - predictions[i];
    sum += d * d;
  }
  return sum / static_cast<double>(targets.size());
}

double loss_total(double bce, double mse) { return bce + mse; }

StepLosses batch_loss(const MtlModel& model, const FeatureMatrix& data,
                      std::span<const std::size_t> rows) {
  if (rows.empty()) throw ContractViolation("batch_loss: empty batch");
  std::vector<int> labels;
  std::vector<double> probs, targets, raws;
  for (std::size_t row : rows) {
    const ForwardState fs = run_forward(model, data.row(row), nullptr);
    labels.push_back(data.labels[row]);
    probs.push_back(fs.prob);
    targets.push_back(data.magnitudes_days[row]);
    raws.push_back(fs.raw);
  }
  return mode_losses(model.mode, labels, probs, targets, raws);
}

ParamSet compute_gradients(const MtlModel& model, const FeatureMatrix& data,
                           std::span<const std::size_t> rows, StepLosses* losses) {
  return gradients_impl(model, data, rows, nullptr, losses);
}

Trainer::Trainer(MtlModel model, TrainConfig config)
    : model_(std::move(model)),
      config_(std::move(config)),
      moment1_(zeros_like(model_.params)),
      moment2_(zeros_like(model_.params)),
      rng_(mix_seed(config_.seed, 0x7261696e)) {
  if (config_.learning_rate < 0.0) {
    throw ConfigError("Trainer: learning rate must be non-negative");
  }
  if (config_.epochs < 1) throw ConfigError("Trainer: epochs must be >= 1");
  if (config_.dropout < 0.0 || config_.dropout >= 1.0) {
    throw ConfigError("Trainer: dropout must be in [0, 1)");
  }
}

StepLosses Trainer::step(const FeatureMatrix& data, std::span<const std::size_t> rows) {
  DropoutScales scales;
  const DropoutScales* dropout = nullptr;
  if (config_.dropout > 0.0) {
    scales.resize(model_.params.trunk.size());
    const double keep_scale = 1.0 / (1.0 - config_.dropout);
    for (std::size_t l = 0; l < model_.params.trunk.size(); ++l) {
      scales[l].resize(model_.params.trunk[l].out);
      for (auto& s : scales[l]) s = rng_.bernoulli(config_.dropout) ? 0.0 : keep_scale;
    }
    dropout = &scales;
  }

  StepLosses losses;
  ParamSet grads = gradients_impl(model_, data, rows, dropout, &losses);
  if (!std::isfinite(losses.total)) {
    throw TrainingError("training diverged: non-finite loss at step " +
                        std::to_string(step_count_ + 1) + " (bce=" + std::to_string(losses.bce) +
                        ", mse=" + std::to_string(losses.mse) + ")");
  }

  ++step_count_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));

  std::vector<std::vector<double>*> params, g1, g2, gs;
  for_each_param(model_.params, [&](std::vector<double>& v) { params.push_back(&v); });
  for_each_param(moment1_, [&](std::vector<double>& v) { g1.push_back(&v); });
  for_each_param(moment2_, [&](std::vector<double>& v) { g2.push_back(&v); });
  for_each_param(grads, [&](std::vector<double>& v) { gs.push_back(&v); });

  for (std::size_t p = 0; p < params.size(); ++p) {
    std::vector<double>& w = *params[p];
    std::vector<double>& m = *g1[p];
    std::vector<double>& v = *g2[p];
    const std::vector<double>& g = *gs[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / bias1;
      const double vhat = v[i] / bias2;
      w[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + 1e-8);
      if (!std::isfinite(w[i])) {
        throw TrainingError("training diverged: non-finite parameter after step " +
                            std::to_string(step_count_));
      }
    }
  }
  return losses;
}

TrainSummary Trainer::fit(const FeatureMatrix& data) {
  if (data.rows == 0) throw ContractViolation("Trainer::fit: empty training matrix");
  std::vector<std::size_t> order(data.rows);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainSummary summary;
  double best = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs = 0;

  for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
    rng_.shuffle(order);
    double weighted = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config_.batch_size) {
      const std::size_t end = std::min(begin + config_.batch_size, order.size());
      const StepLosses losses =
          step(data, std::span<const std::size_t>(order.data() + begin, end - begin));
      weighted += losses.total * static_cast<double>(end - begin);
    }
    const double epoch_loss = weighted / static_cast<double>(order.size());
    if (epoch == 0) summary.initial_loss = epoch_loss;
    summary.final_loss = epoch_loss;
    summary.epochs_run = epoch + 1;

    if (config_.patience > 0) {
      if (epoch_loss < best - 1e-12) {
        best = epoch_loss;
        bad_epochs = 0;
      } else if (++bad_epochs > config_.patience) {
        break;
      }
    }
  }
  return summary;
}

GradCheckReport compare_gradients(const MtlModel& model, const FeatureMatrix& data,
                                  std::span<const std::size_t> rows, const ParamSet& analytic,
                                  double fd_step, double tolerance) {
  MtlModel probe = model;

  std::vector<std::vector<double>*> params;
  for_each_param(probe.params, [&](std::vector<double>& v) { params.push_back(&v); });
  std::vector<const std::vector<double>*> grads;
  ParamSet analytic_copy = analytic;
  for_each_param(analytic_copy, [&](std::vector<double>& v) { grads.push_back(&v); });

  std::vector<std::string> names;
  for (std::size_t l = 0; l < model.params.trunk.size(); ++l) {
    names.push_back("trunk" + std::to_string(l + 1));
    names.push_back("trunk" + std::to_string(l + 1));
  }
  names.push_back("cls_head");
  names.push_back("cls_head");
  names.push_back("reg_head");
  names.push_back("reg_head");

  GradCheckReport report;
  report.tolerance = tolerance;
  std::map<std::string, double> per_layer;

  for (std::size_t p = 0; p < params.size(); ++p) {
    std::vector<double>& w = *params[p];
    const std::vector<double>& g = *grads[p];
    double& layer_max = per_layer[names[p]];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double orig = w[i];
      w[i] = orig + fd_step;
      const long double plus = batch_loss_precise(probe, data, rows);
      w[i] = orig - fd_step;
      const long double minus = batch_loss_precise(probe, data, rows);
      w[i] = orig;
      const double numeric =
          static_cast<double>((plus - minus) / (2.0L * static_cast<long double>(fd_step)));
      const double a = g[i];
      if (std::abs(a) < 1e-8 && std::abs(numeric) < 1e-8) continue;
      const double rel = std::abs(a - numeric) / std::max(std::abs(a), std::abs(numeric));
      layer_max = std::max(layer_max, rel);
    }
  }

  // keep the trunk order, then heads
  for (std::size_t l = 0; l < model.params.trunk.size(); ++l) {
    const std::string name = "trunk" + std::to_string(l + 1);
    report.layers.push_back({name, per_layer[name]});
  }
  report.layers.push_back({"cls_head", per_layer["cls_head"]});
  report.layers.push_back({"reg_head", per_layer["reg_head"]});
  for (const auto& layer : report.layers) {
    report.max_rel_error = std::max(report.max_rel_error, layer.max_rel_error);
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

GradCheckReport gradient_check(const MtlModel& model, const FeatureMatrix& data,
                               std::span<const std::size_t> rows, double fd_step,
                               double tolerance) {
  const ParamSet analytic = compute_gradients(model, data, rows);
  return compare_gradients(model, data, rows, analytic, fd_step, tolerance);
}

namespace {

OrderedJson layer_to_json(const DenseLayer& layer) {
  OrderedJson j;
  j["out"] = layer.out;
  j["in"] = layer.in;
  OrderedJson w = OrderedJson::array();
  for (double v : layer.w) w.push_back(detail::hex_from_double(v));
  OrderedJson b = OrderedJson::array();
  for (double v : layer.b) b.push_back(detail::hex_from_double(v));
  j["w"] = w;
  j["b"] = b;
  return j;
}

DenseLayer layer_from_json(const OrderedJson& j) {
  DenseLayer layer;
  layer.out = j.at("out").get<std::size_t>();
  layer.in = j.at("in").get<std::size_t>();
  for (const auto& v : j.at("w")) layer.w.push_back(detail::double_from_hex(v.get<std::string>()));
  for (const auto& v : j.at("b")) layer.b.push_back(detail::double_from_hex(v.get<std::string>()));
  if (layer.w.size() != layer.out * layer.in || layer.b.size() != layer.out) {
    throw ParseError("model document: layer shape mismatch");
  }
  return layer;
}

}  // namespace

void save_model(const MtlModel& model, const EncoderSpec& encoder, const LogSchema& log_schema,
                const TrainConfig& config, std::size_t prefix_cap,
                const std::filesystem::path& path) {
  OrderedJson j;
  j["format"] = "pcm-model";
  j["version"] = 1;
  j["mode"] = mode_name(model.mode);
  j["input_width"] = model.input_width;
  j["hidden"] = model.hidden;
  j["init_seed"] = model.init_seed;
  j["prefix_cap"] = prefix_cap;
  j["train_config_digest"] = train_config_digest(config);

  OrderedJson trunk = OrderedJson::array();
  for (const auto& layer : model.params.trunk) trunk.push_back(layer_to_json(layer));
  j["params"]["trunk"] = trunk;
  j["params"]["cls_head"] = layer_to_json(model.params.cls_head);
  j["params"]["reg_head"] = layer_to_json(model.params.reg_head);

  OrderedJson schema;
  schema["delimiter"] = std::string(1, log_schema.delimiter);
  schema["case"] = log_schema.case_column;
  schema["activity"] = log_schema.activity_column;
  schema["timestamp"] = log_schema.timestamp_column;
  schema["timestamp_format"] = log_schema.timestamp_format;
  OrderedJson attrs = OrderedJson::array();
  for (const auto& [name, type] : log_schema.attributes) {
    attrs.push_back(OrderedJson::array(
        {name, type == AttrType::Categorical ? "categorical" : "numerical"}));
  }
  schema["attributes"] = attrs;
  j["log_schema"] = schema;

  j["encoder"] = OrderedJson::parse(encoder_to_json(encoder));

  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write model file: " + path.string());
  out << j.dump(2) << "\n";
}

LoadedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();

  OrderedJson j;
  try {
    j = OrderedJson::parse(buf.str());
  } catch (const std::exception& e) {
    throw ParseError("bad model file " + path.string() + ": " + e.what());
  }
  if (!j.contains("format") || j["format"] != "pcm-model") {
    throw ConfigError(path.string() + ": not a model file (missing format tag)");
  }
  if (!j.contains("version") || j["version"].get<int>() != 1) {
    throw ConfigError(path.string() + ": unsupported model file version");
  }

  try {
    LoadedModel loaded;
    loaded.model.mode = mode_from_name(j.at("mode").get<std::string>());
    loaded.model.input_width = j.at("input_width").get<std::size_t>();
    loaded.model.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    loaded.model.init_seed = j.at("init_seed").get<std::uint64_t>();
    loaded.prefix_cap = j.at("prefix_cap").get<std::size_t>();
    loaded.train_config_digest = j.at("train_config_digest").get<std::string>();
    for (const auto& layer : j.at("params").at("trunk")) {
      loaded.model.params.trunk.push_back(layer_from_json(layer));
    }
    loaded.model.params.cls_head = layer_from_json(j.at("params").at("cls_head"));
    loaded.model.params.reg_head = layer_from_json(j.at("params").at("reg_head"));

    const auto& schema = j.at("log_schema");
    loaded.log_schema.delimiter = schema.at("delimiter").get<std::string>().at(0);
    loaded.log_schema.case_column = schema.at("case").get<std::string>();
    loaded.log_schema.activity_column = schema.at("activity").get<std::string>();
    loaded.log_schema.timestamp_column = schema.at("timestamp").get<std::string>();
    loaded.log_schema.timestamp_format = schema.at("timestamp_format").get<std::string>();
    for (const auto& attr : schema.at("attributes")) {
      loaded.log_schema.attributes.emplace_back(
          attr.at(0).get<std::string>(),
          attr.at(1).get<std::string>() == "categorical" ? AttrType::Categorical
                                                         : AttrType::Numerical);
    }

    loaded.encoder = encoder_from_json(j.at("encoder").dump());
    return loaded;
  } catch (const OrderedJson::exception& e) {
    throw ParseError("bad model file " + path.string() + ": " + e.what());
  }
}

}  // namespace pcm
