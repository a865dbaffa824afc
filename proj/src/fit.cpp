#include "symtrack/fit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "symtrack/autodiff.hpp"
#include "symtrack/errors.hpp"

namespace symtrack {

using nlohmann::json;

ToyRegressor ToyRegressor::initial() {
  ToyRegressor m;
  m.bias << 0, 0, 0, 1, 0, 0, 0, 1, 0;
  return m;
}

FeatureVec standardize_features(const ToyRegressor& model, const FeatureVec& f) {
  return (f - model.feature_mean).cwiseQuotient(model.feature_scale);
}

PoseDelta9 forward(const ToyRegressor& model, const FeatureVec& features) {
  const Eigen::Matrix<double, 9, 1> z = model.weights * standardize_features(model, features) + model.bias;
  std::array<double, 9> y{};
  for (int i = 0; i < 9; ++i) y[static_cast<std::size_t>(i)] = i < 3 ? std::tanh(z[i]) : z[i];
  return PoseDelta9::from_array(y);
}

void fit_feature_scaling(ToyRegressor& model, const std::vector<FeatureVec>& features) {
  if (features.size() < 2) throw InsufficientSamples("feature scaling needs at least 2 samples");
  for (int k = 0; k < kFeatureDim; ++k) {
    WelfordState st;
    for (const auto& f : features) st = welford_update(st, f[k]);
    model.feature_mean[k] = st.mean;
    const double sd = std::sqrt(st.variance());
    model.feature_scale[k] = sd > 1e-12 ? sd : 1.0;
  }
}

std::vector<double> attention_logits(const std::array<double, 2>& head, const AttentionInput& in) {
  std::vector<double> out(in.cue_depth_band.size());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = head[0] * in.cue_depth_band[c] + head[1] * in.cue_surface[c];
  return out;
}

std::array<double, 9> TrainSample::target() const {
  return {gt_trans[0], gt_trans[1], gt_trans[2], gt_rot(0, 0), gt_rot(0, 1),
          gt_rot(0, 2), gt_rot(1, 0),  gt_rot(1, 1), gt_rot(1, 2)};
}

TrainSample make_train_sample(const Sample& s) {
  TrainSample t;
  t.features = frame_features(s.observed, s.predicted);
  t.gt_trans = s.gt_delta.trans;
  t.gt_rot = matrix_from_rot6d(s.gt_delta.rot);
  t.attention = attention_input(s.observed, s.predicted);
  return t;
}

void OptimConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(lr, "lr");
  positive(lr_min, "lr_min");
  positive(adam_eps, "adam_eps");
  positive(max_delta_m, "max_delta_m");
  if (lr_min > lr) throw ConfigError("lr_min must not exceed lr");
  if (weight_decay < 0.0 || weight_decay >= 1.0) throw ConfigError("weight_decay must be in [0, 1)");
  if (restart_period < 1) throw ConfigError("restart_period must be positive");
  if (warmup_epochs < 0) throw ConfigError("warmup_epochs must be non-negative");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (b2 < 1) throw ConfigError("b2 must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in [0, 1)");
}

double learning_rate(const OptimConfig& cfg, double epoch) {
  const double period = cfg.restart_period;
  const double t = std::fmod(std::max(epoch, 0.0), period);
  return cfg.lr_min + 0.5 * (cfg.lr - cfg.lr_min) * (1.0 + std::cos(kPi * t / period));
}

LinearScorer LinearScorer::zeros(std::size_t b2) {
  LinearScorer s;
  s.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(b2), kFeatureDim);
  s.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b2));
  return s;
}

Eigen::VectorXd LinearScorer::logits(const FeatureVec& f) const { return weights * f + bias; }

// ---------------------------------------------------------------------------
// Parameter packing

ParamLayout param_layout(const TrainState& state) {
  ParamLayout l;
  l.weights = 0;
  l.bias = l.weights + 9 * kFeatureDim;
  l.attn = l.bias + 9;
  l.task = l.attn + 4;
  l.bank = l.task + 6;
  l.total = l.bank + (state.bank ? 3 * state.bank->size() : 0);
  return l;
}

std::vector<double> pack_params(const TrainState& state) {
  const ParamLayout l = param_layout(state);
  std::vector<double> th(l.total);
  for (int r = 0; r < 9; ++r) {
    for (int c = 0; c < kFeatureDim; ++c) th[l.weights + static_cast<std::size_t>(r * kFeatureDim + c)] = state.model.weights(r, c);
    th[l.bias + static_cast<std::size_t>(r)] = state.model.bias[r];
  }
  th[l.attn + 0] = state.model.attn_fg[0];
  th[l.attn + 1] = state.model.attn_fg[1];
  th[l.attn + 2] = state.model.attn_unoccl[0];
  th[l.attn + 3] = state.model.attn_unoccl[1];
  const TaskWeights& w = state.weights;
  const double task[6] = {w.v1, w.v2, w.s1, w.s2, w.s3, w.s4};
  std::copy(task, task + 6, th.begin() + static_cast<std::ptrdiff_t>(l.task));
  if (state.bank) {
    for (std::size_t i = 0; i < state.bank->size(); ++i) {
      for (std::size_t a = 0; a < 3; ++a) th[l.bank + 3 * i + a] = state.bank->params[i][a];
    }
  }
  return th;
}

void unpack_params(TrainState& state, const std::vector<double>& th) {
  const ParamLayout l = param_layout(state);
  if (th.size() != l.total) throw DimensionMismatch("unpack_params: parameter count mismatch");
  for (int r = 0; r < 9; ++r) {
    for (int c = 0; c < kFeatureDim; ++c) state.model.weights(r, c) = th[l.weights + static_cast<std::size_t>(r * kFeatureDim + c)];
    state.model.bias[r] = th[l.bias + static_cast<std::size_t>(r)];
  }
  state.model.attn_fg = {th[l.attn + 0], th[l.attn + 1]};
  state.model.attn_unoccl = {th[l.attn + 2], th[l.attn + 3]};
  TaskWeights& w = state.weights;
  w.v1 = th[l.task + 0];
  w.v2 = th[l.task + 1];
  w.s1 = th[l.task + 2];
  w.s2 = th[l.task + 3];
  w.s3 = th[l.task + 4];
  w.s4 = th[l.task + 5];
  if (state.bank) {
    for (std::size_t i = 0; i < state.bank->size(); ++i) {
      for (std::size_t a = 0; a < 3; ++a) state.bank->params[i][a] = th[l.bank + 3 * i + a];
    }
  }
}

std::vector<bool> decay_mask(const TrainState& state) {
  const ParamLayout l = param_layout(state);
  std::vector<bool> m(l.total, false);
  std::fill(m.begin() + static_cast<std::ptrdiff_t>(l.weights), m.begin() + static_cast<std::ptrdiff_t>(l.bias), true);
  std::fill(m.begin() + static_cast<std::ptrdiff_t>(l.attn), m.begin() + static_cast<std::ptrdiff_t>(l.task), true);
  return m;
}

void adamw_step(std::vector<double>& theta, const std::vector<double>& g, const std::vector<bool>& active,
                const std::vector<bool>& decay, double lr, const OptimConfig& cfg, AdamState& adam) {
  const std::size_t n = theta.size();
  if (g.size() != n || active.size() != n || decay.size() != n) throw DimensionMismatch("adamw_step: size mismatch");
  if (adam.m.size() != n) {
    adam.m.assign(n, 0.0);
    adam.v.assign(n, 0.0);
  }
  ++adam.step;
  const double t = static_cast<double>(adam.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    if (!active[i]) continue;
    adam.m[i] = cfg.beta1 * adam.m[i] + (1.0 - cfg.beta1) * g[i];
    adam.v[i] = cfg.beta2 * adam.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double mh = adam.m[i] / c1;
    const double vh = adam.v[i] / c2;
    theta[i] -= lr * mh / (std::sqrt(vh) + cfg.adam_eps);
    if (decay[i]) theta[i] *= 1.0 - cfg.weight_decay;
  }
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct SampleResult {
  double loss = 0.0;
  double trans_err_mm = 0.0;
  double rot_err_deg = 0.0;
};

// Gradient of the warm-up loss with respect to the 9 outputs.
Eigen::VectorXd warmup_output_grad(const std::array<double, 9>& y, const std::array<double, 9>& target, double& loss) {
  const std::span<const double> tg(target);
  auto f = [&](auto xs) {
    using S = scalar_of<decltype(xs)>;
    return logcosh<S>(xs, tg);
  };
  loss = f(std::span<const double>(y));
  return grad(f, std::span<const double>(y));
}

// Backpropagates an output gradient through the affine map and the
// translation tanh into the flat gradient.
void backprop_outputs(const Eigen::VectorXd& dy, const std::array<double, 9>& y, const FeatureVec& fs,
                      const ParamLayout& l, std::vector<double>& g) {
  for (int r = 0; r < 9; ++r) {
    const double yr = y[static_cast<std::size_t>(r)];
    const double dz = r < 3 ? dy[r] * (1.0 - yr * yr) : dy[r];
    for (int c = 0; c < kFeatureDim; ++c) g[l.weights + static_cast<std::size_t>(r * kFeatureDim + c)] += dz * fs[c];
    g[l.bias + static_cast<std::size_t>(r)] += dz;
  }
}

std::array<double, 9> outputs(const ToyRegressor& model, const FeatureVec& fs) {
  const Eigen::Matrix<double, 9, 1> z = model.weights * fs + model.bias;
  std::array<double, 9> y{};
  for (int i = 0; i < 9; ++i) y[static_cast<std::size_t>(i)] = i < 3 ? std::tanh(z[i]) : z[i];
  return y;
}

SampleResult errors_of(const std::array<double, 9>& y, const TrainSample& s, const Mat3& g_star, double max_delta_m) {
  SampleResult r;
  const Vec3 dt(y[0] - s.gt_trans[0], y[1] - s.gt_trans[1], y[2] - s.gt_trans[2]);
  r.trans_err_mm = dt.norm() * max_delta_m * 1000.0;
  const Mat3 dr = matrix_from_rot6d<double>(Vec3(y[3], y[4], y[5]), Vec3(y[6], y[7], y[8]));
  r.rot_err_deg = geodesic_distance(Mat3(dr * g_star), s.gt_rot) * kDegPerRad;
  return r;
}

// Main-phase loss of one sample. Variables: 9 outputs, v1, v2, s1, s2, s3,
// then the selected bank triplet (if any), then the 4 attention scales (if
// the sample has attention input).
SampleResult main_sample(const TrainState& st, const TrainSample& s, const FeatureVec& fs, const ParamLayout& l,
                         const OptimConfig& cfg, std::vector<double>& g) {
  const std::array<double, 9> y = outputs(st.model, fs);
  const Mat3 dr_hat = matrix_from_rot6d<double>(Vec3(y[3], y[4], y[5]), Vec3(y[6], y[7], y[8]));

  const bool has_bank = st.bank.has_value();
  std::size_t chosen = 0;
  if (has_bank) chosen = select_oracle(*st.bank, dr_hat, s.gt_rot, st.lambda_gs);
  const bool has_attn = s.attention.has_value();

  std::vector<double> x(y.begin(), y.end());
  const TaskWeights& w = st.weights;
  x.insert(x.end(), {w.v1, w.v2, w.s1, w.s2, w.s3});
  const std::size_t bank_at = x.size();
  if (has_bank) x.insert(x.end(), st.bank->params[chosen].begin(), st.bank->params[chosen].end());
  const std::size_t attn_at = x.size();
  if (has_attn) {
    x.insert(x.end(), {st.model.attn_fg[0], st.model.attn_fg[1], st.model.attn_unoccl[0], st.model.attn_unoccl[1]});
  }

  const std::array<bool, 3> mask = has_bank ? st.bank->axis_mask : std::array<bool, 3>{false, false, false};
  std::vector<double> t_fg, t_un;
  if (has_attn) {
    t_fg = normalized_mask_target(s.attention->fg);
    t_un = normalized_mask_target(s.attention->unoccl);
  }

  auto f = [&](auto xs) {
    using S = scalar_of<decltype(xs)>;
    using std::exp;
    Mat3T<S> gm = Mat3T<S>::Identity();
    if (has_bank) gm = symmetry_matrix<S>(std::span<const S, 3>(xs.data() + bank_at, 3), mask);
    const S lt = loss_track<S>(xs.subspan(0, 9), s.gt_trans, s.gt_rot, xs[9], xs[10], st.lambda_gs, gm,
                               SingularPolicy::kClamp);
    if (!has_attn) return S(exp(-xs[11]) * lt + xs[11]);
    const AttentionInput& a = *s.attention;
    std::vector<S> lf(a.cue_depth_band.size()), lu(a.cue_depth_band.size());
    for (std::size_t c = 0; c < lf.size(); ++c) {
      lf[c] = xs[attn_at + 0] * a.cue_depth_band[c] + xs[attn_at + 1] * a.cue_surface[c];
      lu[c] = xs[attn_at + 2] * a.cue_depth_band[c] + xs[attn_at + 3] * a.cue_surface[c];
    }
    const std::vector<S> mf = spatial_softmax<S>(std::span<const S>(lf));
    const std::vector<S> mu = spatial_softmax<S>(std::span<const S>(lu));
    const S bf = bce_attention<S>(std::span<const S>(mf), std::span<const double>(t_fg));
    const S bu = bce_attention<S>(std::span<const S>(mu), std::span<const double>(t_un));
    return loss_multitask<S>(lt, bu, bf, xs[11], xs[12], xs[13]);
  };

  const std::span<const double> xv(x);
  const Eigen::VectorXd gx = grad(f, xv);
  SampleResult r = errors_of(y, s, has_bank ? symmetry_matrix(*st.bank, chosen) : Mat3::Identity(), cfg.max_delta_m);
  r.loss = f(xv);

  backprop_outputs(gx.head(9), y, fs, l, g);
  for (std::size_t k = 0; k < 5; ++k) g[l.task + k] += gx[static_cast<Eigen::Index>(9 + k)];
  if (has_bank) {
    for (std::size_t a = 0; a < 3; ++a) g[l.bank + 3 * chosen + a] += gx[static_cast<Eigen::Index>(bank_at + a)];
  }
  if (has_attn) {
    for (std::size_t k = 0; k < 4; ++k) g[l.attn + k] += gx[static_cast<Eigen::Index>(attn_at + k)];
  }
  return r;
}

// Batch-level uniformity term e^-s4 / xi + s4 and its gradient over s4 and
// the masked bank parameters.
double bank_penalty(const TrainState& st, const ParamLayout& l, std::vector<double>& g, double weight) {
  const SymmetryBank& bank = *st.bank;
  std::vector<std::size_t> slots;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    for (std::size_t a = 0; a < 3; ++a) {
      if (bank.axis_mask[a]) slots.push_back(3 * i + a);
    }
  }
  std::vector<double> x;
  for (std::size_t sidx : slots) x.push_back(bank.params[sidx / 3][sidx % 3]);
  x.push_back(st.weights.s4);

  auto f = [&](auto xs) {
    using S = scalar_of<decltype(xs)>;
    using std::exp;
    std::vector<std::array<S, 3>> p(bank.size(), {S(0.0), S(0.0), S(0.0)});
    for (std::size_t k = 0; k < slots.size(); ++k) p[slots[k] / 3][slots[k] % 3] = xs[k];
    std::vector<Mat3T<S>> mats;
    mats.reserve(bank.size());
    for (const auto& t : p) mats.push_back(symmetry_matrix<S>(std::span<const S, 3>(t), bank.axis_mask));
    const S pen = uniformity_penalty<S>(std::span<const Mat3T<S>>(mats));
    const S s4 = xs[slots.size()];
    return S(exp(-s4) * pen + s4);
  };
  const std::span<const double> xv(x);
  const Eigen::VectorXd gx = grad(f, xv);
  for (std::size_t k = 0; k < slots.size(); ++k) g[l.bank + slots[k]] += weight * gx[static_cast<Eigen::Index>(k)];
  g[l.task + 5] += weight * gx[static_cast<Eigen::Index>(slots.size())];
  return f(xv);
}

}  // namespace

TrainHistory train(TrainState& state, const std::vector<TrainSample>& data, const OptimConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw InsufficientSamples("train: dataset is empty");
  if (state.bank && state.bank->size() < 2) throw ConfigError("train: symmetry bank needs at least 2 entries");

  const ParamLayout l = param_layout(state);
  const std::vector<bool> decay = decay_mask(state);
  std::vector<bool> model_only(l.total, false);
  std::fill(model_only.begin(), model_only.begin() + static_cast<std::ptrdiff_t>(l.task), true);
  // s1 is not trained: the tracking term carries its own weights v1, v2.
  std::vector<bool> main_phase(l.total, true);
  main_phase[l.task + 2] = false;

  const std::size_t n = data.size();
  const std::size_t n_batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  std::vector<std::size_t> order(n);

  TrainHistory hist;
  const int end = state.epoch + cfg.epochs;
  for (int e = state.epoch; e < end; ++e) {
    const bool warm = e < cfg.warmup_epochs;
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(sample_seed(cfg.seed, static_cast<std::size_t>(e)));
    std::shuffle(order.begin(), order.end(), rng);

    EpochRecord rec;
    rec.epoch = e + 1;
    rec.warmup = warm;
    double loss_sum = 0.0, terr_sum = 0.0, rerr_sum = 0.0;
    std::size_t used = 0;

    for (std::size_t b = 0; b < n_batches; ++b) {
      const double lr = learning_rate(cfg, e + static_cast<double>(b) / static_cast<double>(n_batches));
      std::vector<double> g(l.total, 0.0);
      std::size_t count = 0;
      const std::size_t lo = b * cfg.batch_size, hi = std::min(n, lo + cfg.batch_size);
      for (std::size_t k = lo; k < hi; ++k) {
        const TrainSample& s = data[order[k]];
        const FeatureVec fs = standardize_features(state.model, s.features);
        std::vector<double> gs(l.total, 0.0);
        SampleResult r;
        try {
          if (warm) {
            const std::array<double, 9> y = outputs(state.model, fs);
            const Eigen::VectorXd dy = warmup_output_grad(y, s.target(), r.loss);
            backprop_outputs(dy, y, fs, l, gs);
            const SampleResult er = errors_of(y, s, Mat3::Identity(), cfg.max_delta_m);
            r.trans_err_mm = er.trans_err_mm;
            r.rot_err_deg = er.rot_err_deg;
          } else {
            r = main_sample(state, s, fs, l, cfg, gs);
          }
        } catch (const DegenerateInput&) {
          ++rec.skipped;
          continue;
        } catch (const NonDifferentiablePoint&) {
          ++rec.skipped;
          continue;
        }
        for (std::size_t i = 0; i < l.total; ++i) g[i] += gs[i];
        loss_sum += r.loss;
        terr_sum += r.trans_err_mm;
        rerr_sum += r.rot_err_deg;
        ++count;
      }
      if (count == 0) continue;
      for (double& gi : g) gi /= static_cast<double>(count);
      if (!warm && state.bank) {
        try {
          const double pen = bank_penalty(state, l, g, 1.0);
          loss_sum += pen * static_cast<double>(count);
        } catch (const NonDifferentiablePoint&) {
          ++rec.skipped;
        }
      }
      used += count;
      std::vector<double> theta = pack_params(state);
      adamw_step(theta, g, warm ? model_only : main_phase, decay, lr, cfg, state.adam);
      unpack_params(state, theta);
    }

    if (used > 0) {
      rec.loss = loss_sum / static_cast<double>(used);
      rec.trans_err_mm = terr_sum / static_cast<double>(used);
      rec.rot_err_deg = rerr_sum / static_cast<double>(used);
    }
    rec.weights = state.weights;
    hist.epochs.push_back(rec);
    state.epoch = e + 1;
  }
  return hist;
}

// ---------------------------------------------------------------------------
// Scorer

LinearScorer train_scorer(const std::vector<FeatureVec>& features, const std::vector<std::size_t>& labels,
                          std::size_t b2, int iterations, double lr) {
  if (features.size() != labels.size()) throw DimensionMismatch("train_scorer: features and labels differ in size");
  if (features.empty()) throw InsufficientSamples("train_scorer: no samples");
  LinearScorer sc = LinearScorer::zeros(b2);
  const auto k = static_cast<Eigen::Index>(b2);
  const double inv_n = 1.0 / static_cast<double>(features.size());
  for (int it = 0; it < iterations; ++it) {
    Eigen::MatrixXd gw = Eigen::MatrixXd::Zero(k, kFeatureDim);
    Eigen::VectorXd gb = Eigen::VectorXd::Zero(k);
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (labels[i] >= b2) throw IndexOutOfRange("train_scorer: label outside the bank");
      Eigen::VectorXd z = sc.logits(features[i]);
      z.array() -= z.maxCoeff();
      Eigen::VectorXd p = z.array().exp();
      p /= p.sum();
      p[static_cast<Eigen::Index>(labels[i])] -= 1.0;
      gw += p * features[i].transpose();
      gb += p;
    }
    sc.weights -= lr * inv_n * gw;
    sc.bias -= lr * inv_n * gb;
  }
  return sc;
}

std::size_t select_trainable(const SymmetryBank& bank, const LinearScorer& scorer, const FeatureVec& features) {
  if (bank.size() == 0) throw IndexOutOfRange("select_trainable: empty bank");
  if (static_cast<std::size_t>(scorer.bias.size()) != bank.size()) {
    throw DimensionMismatch("select_trainable: scorer size differs from bank size");
  }
  const Eigen::VectorXd z = scorer.logits(features);
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < z.size(); ++i) {
    if (z[i] > z[static_cast<Eigen::Index>(best)]) best = static_cast<std::size_t>(i);
  }
  return best;
}

std::vector<std::size_t> oracle_labels(const TrainState& state, const std::vector<TrainSample>& data) {
  if (!state.bank) throw ConfigError("oracle_labels: no symmetry bank");
  std::vector<std::size_t> out;
  out.reserve(data.size());
  for (const auto& s : data) {
    const PoseDelta9 p = forward(state.model, s.features);
    std::size_t label = 0;
    try {
      label = select_oracle(*state.bank, matrix_from_rot6d(p.rot), s.gt_rot, state.lambda_gs);
    } catch (const DegenerateInput&) {
    }
    out.push_back(label);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

template <class M>
json matrix_json(const M& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
  }
  return a;
}

template <class M>
void matrix_from(const json& a, M& m, const char* what) {
  if (!a.is_array() || a.size() != static_cast<std::size_t>(m.rows() * m.cols())) {
    throw ParseError(std::string("checkpoint: bad size for ") + what);
  }
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = a.at(k++).get<double>();
  }
}

}  // namespace

json checkpoint_to_json(const TrainState& st) {
  json j;
  j["format"] = "symtrack-checkpoint";
  j["epoch"] = st.epoch;
  j["model"] = {{"weights", matrix_json(st.model.weights)},
                {"bias", matrix_json(st.model.bias)},
                {"attn_fg", st.model.attn_fg},
                {"attn_unoccl", st.model.attn_unoccl},
                {"feature_mean", matrix_json(st.model.feature_mean)},
                {"feature_scale", matrix_json(st.model.feature_scale)}};
  const TaskWeights& w = st.weights;
  j["task_weights"] = {{"v1", w.v1}, {"v2", w.v2}, {"s1", w.s1}, {"s2", w.s2}, {"s3", w.s3}, {"s4", w.s4}};
  j["bank"] = st.bank ? bank_to_json(*st.bank) : json(nullptr);
  if (st.scorer) {
    j["scorer"] = {{"b2", st.scorer->bias.size()},
                   {"weights", matrix_json(st.scorer->weights)},
                   {"bias", matrix_json(st.scorer->bias)}};
  } else {
    j["scorer"] = nullptr;
  }
  j["lambda_gs"] = matrix_json(st.lambda_gs);
  j["optimizer"] = {{"step", st.adam.step}, {"m", st.adam.m}, {"v", st.adam.v}};
  return j;
}

TrainState checkpoint_from_json(const json& j) {
  try {
    if (j.value("format", "") != "symtrack-checkpoint") throw ParseError("checkpoint: unexpected format tag");
    TrainState st;
    st.epoch = j.at("epoch").get<int>();
    const json& m = j.at("model");
    matrix_from(m.at("weights"), st.model.weights, "model.weights");
    matrix_from(m.at("bias"), st.model.bias, "model.bias");
    st.model.attn_fg = m.at("attn_fg").get<std::array<double, 2>>();
    st.model.attn_unoccl = m.at("attn_unoccl").get<std::array<double, 2>>();
    matrix_from(m.at("feature_mean"), st.model.feature_mean, "model.feature_mean");
    matrix_from(m.at("feature_scale"), st.model.feature_scale, "model.feature_scale");
    const json& w = j.at("task_weights");
    st.weights = {w.at("v1").get<double>(), w.at("v2").get<double>(), w.at("s1").get<double>(),
                  w.at("s2").get<double>(), w.at("s3").get<double>(), w.at("s4").get<double>()};
    if (!j.at("bank").is_null()) st.bank = bank_from_json(j.at("bank"));
    if (!j.at("scorer").is_null()) {
      const json& s = j.at("scorer");
      st.scorer = LinearScorer::zeros(s.at("b2").get<std::size_t>());
      matrix_from(s.at("weights"), st.scorer->weights, "scorer.weights");
      matrix_from(s.at("bias"), st.scorer->bias, "scorer.bias");
    }
    matrix_from(j.at("lambda_gs"), st.lambda_gs, "lambda_gs");
    const json& o = j.at("optimizer");
    st.adam.step = o.at("step").get<std::uint64_t>();
    st.adam.m = o.at("m").get<std::vector<double>>();
    st.adam.v = o.at("v").get<std::vector<double>>();
    const std::size_t total = param_layout(st).total;
    if (!st.adam.m.empty() && (st.adam.m.size() != total || st.adam.v.size() != total)) {
      throw ParseError("checkpoint: optimizer moments do not match the parameter count");
    }
    return st;
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const TrainState& state) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << checkpoint_to_json(state).dump(1) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

TrainState load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

void write_history_csv(const std::string& path, const TrainHistory& history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "epoch,loss,trans_err_mm,rot_err_deg,v1,v2,s1,s2,s3,s4\n";
  out.precision(17);
  for (const auto& r : history.epochs) {
    const TaskWeights& w = r.weights;
    out << r.epoch << ',' << r.loss << ',' << r.trans_err_mm << ',' << r.rot_err_deg << ',' << w.v1 << ',' << w.v2
        << ',' << w.s1 << ',' << w.s2 << ',' << w.s3 << ',' << w.s4 << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace symtrack
