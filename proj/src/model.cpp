#include "netsp/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "netsp/error.hpp"
#include "netsp/rng.hpp"
#include "netsp/tsplib.hpp"

namespace netsp::model {

using ad::Tape;
using ad::Var;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

void ModelConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorKind::config, what);
  };
  need(hidden_dim > 0, "hidden_dim must be positive");
  need(embed_kernel_width > 0 && embed_kernel_width % 2 == 1,
       "embed_kernel_width must be a positive odd integer");
  need(glimpses >= 0, "glimpses must be non-negative");
  need(batch_size > 0, "batch_size must be positive");
  need(std::isfinite(lr0) && lr0 >= 0.0, "lr0 must be finite and non-negative");
  need(decay_every > 0, "decay_every must be positive");
  need(decay_factor > 0.0 && decay_factor <= 1.0, "decay_factor must lie in (0, 1]");
  need(grad_clip_l2 > 0.0, "grad_clip_l2 must be positive");
  need(epochs > 0, "epochs must be positive");
  need(max_steps >= 0, "max_steps must be non-negative");
}

json to_json(const ModelConfig& c) {
  return json{{"hidden_dim", c.hidden_dim},
              {"embed_kernel_width", c.embed_kernel_width},
              {"glimpses", c.glimpses},
              {"batch_size", c.batch_size},
              {"lr0", c.lr0},
              {"decay_every", c.decay_every},
              {"decay_factor", c.decay_factor},
              {"grad_clip_l2", c.grad_clip_l2},
              {"seed", c.seed},
              {"precision", c.precision == Precision::f32 ? "f32" : "f64"},
              {"epochs", c.epochs},
              {"max_steps", c.max_steps}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "hidden_dim") c.hidden_dim = value.get<int>();
      else if (key == "embed_kernel_width") c.embed_kernel_width = value.get<int>();
      else if (key == "glimpses") c.glimpses = value.get<int>();
      else if (key == "batch_size") c.batch_size = value.get<int>();
      else if (key == "lr0") c.lr0 = value.get<double>();
      else if (key == "decay_every") c.decay_every = value.get<int>();
      else if (key == "decay_factor") c.decay_factor = value.get<double>();
      else if (key == "grad_clip_l2") c.grad_clip_l2 = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "epochs") c.epochs = value.get<int>();
      else if (key == "max_steps") c.max_steps = value.get<long>();
      else if (key == "precision") {
        const auto p = value.get<std::string>();
        if (p == "f32") c.precision = Precision::f32;
        else if (p == "f64") c.precision = Precision::f64;
        else fail(ErrorKind::config, "precision must be f32 or f64");
      } else {
        fail(ErrorKind::config, "unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::config, std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

ModelConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open config '" + path + "'");
  try {
    return config_from_json(json::parse(in));
  } catch (const json::exception& e) {
    fail(ErrorKind::config, path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Parameters

template <typename T>
std::vector<typename Params<T>::Entry> Params<T>::tensors() {
  const int d = config.hidden_dim;
  const int k = config.embed_kernel_width;
  return {
      {"embed.kernel", {d, 2, k}, &embed_kernel},
      {"embed.bias", {d}, &embed_bias},
      {"encoder.w_ih", {4 * d, d}, &enc_w_ih},
      {"encoder.w_hh", {4 * d, d}, &enc_w_hh},
      {"encoder.bias", {4 * d}, &enc_bias},
      {"decoder.w_ih", {4 * d, d}, &dec_w_ih},
      {"decoder.w_hh", {4 * d, d}, &dec_w_hh},
      {"decoder.bias", {4 * d}, &dec_bias},
      {"pointer.w_ref", {d, d}, &ptr_w_ref},
      {"pointer.w_query", {d, d}, &ptr_w_query},
      {"pointer.v", {d}, &ptr_v},
      {"glimpse.w_ref", {d, d}, &glimpse_w_ref},
      {"glimpse.w_query", {d, d}, &glimpse_w_query},
      {"glimpse.v", {d}, &glimpse_v},
      {"start_token", {d}, &start_token},
  };
}

template <typename T>
std::vector<typename Params<T>::ConstEntry> Params<T>::tensors() const {
  auto mutable_entries = const_cast<Params<T>*>(this)->tensors();
  std::vector<ConstEntry> out;
  out.reserve(mutable_entries.size());
  for (auto& e : mutable_entries) out.push_back({e.name, e.shape, e.tensor});
  return out;
}

template <typename T>
std::size_t Params<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& e : tensors()) total += static_cast<std::size_t>(e.tensor->size());
  return total;
}

template <typename T>
template <typename U>
Params<U> Params<T>::cast() const {
  Params<U> out;
  out.config = config;
  auto src = tensors();
  auto dst = out.tensors();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].tensor = src[i].tensor->template cast<U>();
  return out;
}

namespace {

// Storage shape (rows, cols) of a logical tensor shape.
std::pair<Eigen::Index, Eigen::Index> storage_shape(const std::vector<int>& shape) {
  if (shape.size() == 1) return {1, shape[0]};
  if (shape.size() == 2) return {shape[0], shape[1]};
  return {shape[0], static_cast<Eigen::Index>(shape[1]) * shape[2]};
}

template <typename T>
void allocate(Params<T>& p) {
  for (auto& e : p.tensors()) {
    auto [r, c] = storage_shape(e.shape);
    e.tensor->setZero(r, c);
  }
}

}  // namespace

template <typename T>
Params<T> zero_params(const ModelConfig& config) {
  config.validate();
  Params<T> p;
  p.config = config;
  allocate(p);
  return p;
}

template <typename T>
Params<T> init_params(const ModelConfig& config, std::uint64_t seed) {
  Params<T> p = zero_params<T>(config);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.hidden_dim));
  Rng rng(seed);
  for (auto& e : p.tensors()) {
    Mat<T>& m = *e.tensor;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
    }
  }
  const int d = config.hidden_dim;
  p.enc_bias.middleCols(d, d).setOnes();
  p.dec_bias.middleCols(d, d).setOnes();
  return p;
}

template <typename T>
Mat<T> model_inputs(const Instance& instance) {
  if (instance.points.empty()) {
    fail(ErrorKind::input, "model needs city coordinates; '" + instance.id + "' has none");
  }
  const bool tsplib = instance.metric.kind == MetricKind::euc2d_tsplib ||
                      instance.metric.kind == MetricKind::att_tsplib ||
                      instance.metric.kind == MetricKind::geo_tsplib;
  const std::vector<Point> pts =
      tsplib ? tsplib::normalized_coords(instance.points) : instance.points;
  Mat<T> x(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].dim() != 2) fail(ErrorKind::shape, "model expects 2-D coordinates");
    x(static_cast<Eigen::Index>(i), 0) = static_cast<T>(pts[i][0]);
    x(static_cast<Eigen::Index>(i), 1) = static_cast<T>(pts[i][1]);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Network graph

namespace {

template <typename T>
class Net {
 public:
  struct State {
    Var h, c;
  };

  Net(Tape<T>& tape, const Params<T>& p) : tape_(tape), p_(p), d_(p.config.hidden_dim) {
    for (const auto& e : p.tensors()) leaves_.push_back(tape.leaf(*e.tensor));
    embed_kernel_ = leaves_[0];
    embed_bias_ = leaves_[1];
    enc_ = {leaves_[2], leaves_[3], leaves_[4]};
    dec_ = {leaves_[5], leaves_[6], leaves_[7]};
    ptr_ = {leaves_[8], leaves_[9], leaves_[10]};
    glimpse_ = {leaves_[11], leaves_[12], leaves_[13]};
    start_ = leaves_[14];
  }

  const std::vector<Var>& leaves() const { return leaves_; }

  Var embed(Var coords, Eigen::Index n) {
    return tape_.conv1d(coords, embed_kernel_, embed_bias_, n, p_.config.embed_kernel_width);
  }

  State zero_state(Eigen::Index batch) {
    Var z = tape_.constant(Mat<T>::Zero(batch, d_));
    return {z, z};
  }

  State encoder_step(Var x, State s) { return lstm(x, s, enc_); }
  State decoder_step(Var x, State s) { return lstm(x, s, dec_); }

  // Runs the encoder over n cities per batch row; returns refs (b*n x d).
  Var encode(Var embedded, Eigen::Index batch, Eigen::Index n, State& final_state) {
    State s = zero_state(batch);
    std::vector<Var> hs;
    hs.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index t = 0; t < n; ++t) {
      std::vector<int> rows(static_cast<std::size_t>(batch));
      for (Eigen::Index b = 0; b < batch; ++b) rows[b] = static_cast<int>(b * n + t);
      s = encoder_step(tape_.gather_rows(embedded, std::move(rows)), s);
      hs.push_back(s.h);
    }
    final_state = s;
    return tape_.interleave(hs);
  }

  Var pointer_projection(Var refs) { return tape_.matmul_nt(refs, ptr_.w_ref); }
  Var glimpse_projection(Var refs) { return tape_.matmul_nt(refs, glimpse_.w_ref); }

  Var pointer_log_probs(Var q, Var proj, const std::vector<char>& visited, Eigen::Index n) {
    return attention(q, proj, ptr_, visited, n);
  }

  Var glimpse(Var q, Var refs, Var proj, const std::vector<char>& visited, Eigen::Index n) {
    for (int l = 0; l < p_.config.glimpses; ++l) {
      Var p = tape_.exp(attention(q, proj, glimpse_, visited, n));
      q = tape_.weighted_sum(p, refs);
    }
    return q;
  }

  Var start_input(Eigen::Index batch) { return tape_.repeat_rows(start_, batch); }

 private:
  struct LstmVars {
    Var w_ih, w_hh, bias;
  };
  struct AttnVars {
    Var w_ref, w_query, v;
  };

  State lstm(Var x, State s, const LstmVars& w) {
    Var gates = tape_.add_row(
        tape_.add(tape_.matmul_nt(x, w.w_ih), tape_.matmul_nt(s.h, w.w_hh)), w.bias);
    Var i = tape_.sigmoid(tape_.slice_cols(gates, 0, d_));
    Var f = tape_.sigmoid(tape_.slice_cols(gates, d_, d_));
    Var g = tape_.tanh(tape_.slice_cols(gates, 2 * d_, d_));
    Var o = tape_.sigmoid(tape_.slice_cols(gates, 3 * d_, d_));
    Var c = tape_.add(tape_.mul(f, s.c), tape_.mul(i, g));
    Var h = tape_.mul(o, tape_.tanh(c));
    return {h, c};
  }

  // log softmax_i v . tanh(W_ref e_i + W_q q), visited entries masked.
  Var attention(Var q, Var proj, const AttnVars& w, const std::vector<char>& visited,
                Eigen::Index n) {
    const Eigen::Index batch = tape_.value(q).rows();
    Var qp = tape_.repeat_rows(tape_.matmul_nt(q, w.w_query), n);
    Var u = tape_.tanh(tape_.add(proj, qp));
    Var logits = tape_.reshape(tape_.row_dot(u, w.v), batch, n);
    return tape_.masked_log_softmax(logits, visited);
  }

  Tape<T>& tape_;
  const Params<T>& p_;
  Eigen::Index d_;
  std::vector<Var> leaves_;
  Var embed_kernel_, embed_bias_, start_;
  LstmVars enc_, dec_;
  AttnVars ptr_, glimpse_;
};

template <typename T>
Mat<T> row_matrix(const Mat<T>& m, const char* what, Eigen::Index d) {
  if (m.size() != d) fail(ErrorKind::shape, std::string(what) + " must have d_h entries");
  return Eigen::Map<const Mat<T>>(m.data(), 1, d);
}

// Stacks the coordinates of equally sized instances into (b*n x 2).
template <typename T>
Mat<T> stack_inputs(const std::vector<const Instance*>& batch, Eigen::Index n) {
  Mat<T> x(static_cast<Eigen::Index>(batch.size()) * n, 2);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (static_cast<Eigen::Index>(batch[b]->size()) != n) {
      fail(ErrorKind::shape, "batch mixes instance sizes");
    }
    x.middleRows(static_cast<Eigen::Index>(b) * n, n) = model_inputs<T>(*batch[b]);
  }
  return x;
}

// Shared forward pass. With `targets` the decoder is teacher-forced and the
// summed log-likelihood is returned; otherwise greedy choices are written to
// `chosen` and the return value is the summed log-probability of the picks.
template <typename T>
Var run_sequence(Tape<T>& tape, Net<T>& net, const Mat<T>& inputs, Eigen::Index batch,
                 Eigen::Index n, const std::vector<std::vector<int>>* targets,
                 std::vector<std::vector<int>>* chosen) {
  Var coords = tape.constant(inputs);
  Var embedded = net.embed(coords, n);
  typename Net<T>::State state;
  Var refs = net.encode(embedded, batch, n, state);
  Var ptr_proj = net.pointer_projection(refs);
  Var glimpse_proj = net.glimpse_projection(refs);

  std::vector<char> visited(static_cast<std::size_t>(batch * n), 0);
  std::vector<int> prev(static_cast<std::size_t>(batch), -1);
  if (chosen) chosen->assign(static_cast<std::size_t>(batch), {});
  Var total{};
  for (Eigen::Index step = 0; step < n; ++step) {
    Var input;
    if (step == 0) {
      input = net.start_input(batch);
    } else {
      std::vector<int> rows(static_cast<std::size_t>(batch));
      for (Eigen::Index b = 0; b < batch; ++b) rows[b] = static_cast<int>(b * n + prev[b]);
      input = tape.gather_rows(embedded, std::move(rows));
    }
    state = net.decoder_step(input, state);
    Var q = net.glimpse(state.h, refs, glimpse_proj, visited, n);
    Var lp = net.pointer_log_probs(q, ptr_proj, visited, n);

    std::vector<int> pick(static_cast<std::size_t>(batch));
    const Mat<T>& lpv = tape.value(lp);
    for (Eigen::Index b = 0; b < batch; ++b) {
      int city;
      if (targets) {
        city = (*targets)[b][step];
      } else {
        city = -1;
        for (Eigen::Index c = 0; c < n; ++c) {
          if (visited[b * n + c]) continue;
          if (city < 0 || lpv(b, c) > lpv(b, city)) city = static_cast<int>(c);
        }
        (*chosen)[b].push_back(city);
      }
      if (visited[b * n + city]) fail(ErrorKind::validity, "target revisits a city");
      pick[b] = city;
    }
    Var picked = tape.pick_sum(lp, pick);
    total = step == 0 ? picked : tape.add(total, picked);
    for (Eigen::Index b = 0; b < batch; ++b) {
      visited[b * n + pick[b]] = 1;
      prev[b] = pick[b];
    }
  }
  return total;
}

}  // namespace

// ---------------------------------------------------------------------------
// Single-instance operations

template <typename T>
Mat<T> embed(const Mat<T>& coords, const Params<T>& params) {
  if (coords.cols() != 2) fail(ErrorKind::shape, "embed expects n x 2 coordinates");
  Tape<T> tape(false);
  Net<T> net(tape, params);
  return tape.value(net.embed(tape.constant(coords), coords.rows()));
}

template <typename T>
Encoded<T> encode(const Mat<T>& embedded, const Params<T>& params) {
  if (embedded.cols() != params.config.hidden_dim || embedded.rows() < 1) {
    fail(ErrorKind::shape, "encode expects n x d_h input with n >= 1");
  }
  Tape<T> tape(false);
  Net<T> net(tape, params);
  typename Net<T>::State s;
  Var refs = net.encode(tape.constant(embedded), 1, embedded.rows(), s);
  return {tape.value(refs), tape.value(s.h), tape.value(s.c)};
}

template <typename T>
std::vector<T> pointer(const Mat<T>& query, const Mat<T>& refs,
                       const std::vector<char>& visited, const Params<T>& params) {
  const Eigen::Index d = params.config.hidden_dim;
  if (refs.cols() != d || static_cast<Eigen::Index>(visited.size()) != refs.rows()) {
    fail(ErrorKind::shape, "pointer expects n x d_h refs and n mask entries");
  }
  Tape<T> tape(false);
  Net<T> net(tape, params);
  Var r = tape.constant(refs);
  Var q = tape.constant(row_matrix(query, "query", d));
  Var lp = net.pointer_log_probs(q, net.pointer_projection(r), visited, refs.rows());
  const Mat<T> p = tape.value(tape.exp(lp));
  return {p.data(), p.data() + p.size()};
}

template <typename T>
Mat<T> glimpse(const Mat<T>& query, const Mat<T>& refs, const std::vector<char>& visited,
               const Params<T>& params) {
  const Eigen::Index d = params.config.hidden_dim;
  if (refs.cols() != d || static_cast<Eigen::Index>(visited.size()) != refs.rows()) {
    fail(ErrorKind::shape, "glimpse expects n x d_h refs and n mask entries");
  }
  if (std::all_of(visited.begin(), visited.end(), [](char v) { return v != 0; })) {
    fail(ErrorKind::state, "every city is masked");
  }
  Tape<T> tape(false);
  Net<T> net(tape, params);
  Var r = tape.constant(refs);
  Var q = tape.constant(row_matrix(query, "query", d));
  return tape.value(net.glimpse(q, r, net.glimpse_projection(r), visited, refs.rows()));
}

template <typename T>
DecodeState<T> initial_state(const Encoded<T>& encoded) {
  DecodeState<T> s;
  s.visited.assign(static_cast<std::size_t>(encoded.refs.rows()), 0);
  s.hidden = encoded.hidden;
  s.cell = encoded.cell;
  return s;
}

template <typename T>
DecodeStep<T> decode_step(const DecodeState<T>& state, const Mat<T>& prev_embedding,
                          const Mat<T>& refs, const Params<T>& params) {
  const Eigen::Index n = refs.rows();
  if (state.step >= static_cast<std::size_t>(n)) {
    fail(ErrorKind::state, "decode_step past the last city");
  }
  const Eigen::Index d = params.config.hidden_dim;
  Tape<T> tape(false);
  Net<T> net(tape, params);
  Var input = state.step == 0 ? net.start_input(1)
                              : tape.constant(row_matrix(prev_embedding, "prev_embedding", d));
  typename Net<T>::State s{tape.constant(state.hidden), tape.constant(state.cell)};
  s = net.decoder_step(input, s);
  Var r = tape.constant(refs);
  Var q = net.glimpse(s.h, r, net.glimpse_projection(r), state.visited, n);
  Var lp = net.pointer_log_probs(q, net.pointer_projection(r), state.visited, n);
  const Mat<T> p = tape.value(tape.exp(lp));
  return {std::vector<T>(p.data(), p.data() + p.size()), tape.value(s.h), tape.value(s.c)};
}

template <typename T>
DecodeState<T> advance(const DecodeState<T>& state, const DecodeStep<T>& step, int city) {
  if (city < 0 || static_cast<std::size_t>(city) >= state.visited.size() ||
      state.visited[city]) {
    fail(ErrorKind::state, "city " + std::to_string(city) + " is not selectable");
  }
  DecodeState<T> next = state;
  next.visited[city] = 1;
  next.hidden = step.hidden;
  next.cell = step.cell;
  next.log_prob_sum += std::log(static_cast<double>(step.probabilities[city]));
  ++next.step;
  return next;
}

template <typename T>
std::vector<Tour> decode_greedy_batch(const std::vector<Instance>& instances,
                                      const Params<T>& params, std::size_t batch_size) {
  std::vector<Tour> out(instances.size());
  std::map<std::size_t, std::vector<std::size_t>> by_size;
  for (std::size_t i = 0; i < instances.size(); ++i) by_size[instances[i].size()].push_back(i);
  batch_size = std::max<std::size_t>(1, batch_size);
  for (const auto& [n, idx] : by_size) {
    for (std::size_t start = 0; start < idx.size(); start += batch_size) {
      const std::size_t end = std::min(idx.size(), start + batch_size);
      std::vector<const Instance*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&instances[idx[i]]);
      const auto b = static_cast<Eigen::Index>(batch.size());
      const auto nn = static_cast<Eigen::Index>(n);
      Tape<T> tape(false);
      Net<T> net(tape, params);
      std::vector<std::vector<int>> chosen;
      run_sequence(tape, net, stack_inputs<T>(batch, nn), b, nn, nullptr, &chosen);
      for (std::size_t i = start; i < end; ++i) {
        out[idx[i]] = Tour{std::move(chosen[i - start])};
      }
    }
  }
  return out;
}

template <typename T>
Tour decode_greedy(const Instance& instance, const Params<T>& params) {
  return decode_greedy_batch<T>({instance}, params, 1).front();
}

namespace {

template <typename T>
T batch_nll_impl(const std::vector<const LabeledPair*>& batch, const Params<T>& params,
                 std::vector<Mat<T>>* grads) {
  if (batch.empty()) fail(ErrorKind::config, "empty batch");
  const auto n = static_cast<Eigen::Index>(batch.front()->instance.size());
  std::vector<const Instance*> instances;
  std::vector<std::vector<int>> targets;
  for (const auto* p : batch) {
    require_permutation(p->tour.order, p->instance.size());
    instances.push_back(&p->instance);
    targets.push_back(p->tour.order);
  }
  const auto b = static_cast<Eigen::Index>(batch.size());
  Tape<T> tape(grads != nullptr);
  Net<T> net(tape, params);
  Var total = run_sequence(tape, net, stack_inputs<T>(instances, n), b, n, &targets, nullptr);
  Var loss = tape.scale(total, T(-1) / static_cast<T>(b));
  if (grads) {
    tape.backward(loss);
    grads->clear();
    for (Var leaf : net.leaves()) grads->push_back(tape.grad(leaf));
  }
  return tape.value(loss)(0, 0);
}

}  // namespace

template <typename T>
double batch_nll(const std::vector<const LabeledPair*>& batch, const Params<T>& params,
                 std::vector<Mat<T>>* grads) {
  return static_cast<double>(batch_nll_impl(batch, params, grads));
}

template <typename T>
double sequence_nll(const Instance& instance, const Tour& target, const Params<T>& params) {
  require_permutation(target.order, instance.size());
  LabeledPair pair{instance, target, Oracle::external};
  return batch_nll<T>({&pair}, params, nullptr);
}

// ---------------------------------------------------------------------------
// Training

namespace {

template <typename T>
TrainResult train_impl(const std::vector<LabeledPair>& dataset, const ModelConfig& config,
                       const std::function<void(const TrainLogEntry&)>& on_step) {
  Params<T> params = init_params<T>(config, config.seed);
  std::vector<Mat<T>> m1, m2;
  for (const auto& e : params.tensors()) {
    m1.push_back(Mat<T>::Zero(e.tensor->rows(), e.tensor->cols()));
    m2.push_back(Mat<T>::Zero(e.tensor->rows(), e.tensor->cols()));
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  std::map<std::size_t, std::vector<std::size_t>> by_size;
  for (std::size_t i = 0; i < dataset.size(); ++i) by_size[dataset[i].instance.size()].push_back(i);

  // Shuffle stream is separate from the initialisation stream.
  Rng rng(Rng::at(config.seed, 0x5348554646ULL));
  auto shuffle = [&rng](auto& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
  };

  TrainResult result;
  long step = 0;
  std::vector<Mat<T>> grads;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::vector<std::size_t>> batches;
    for (auto& [n, idx] : by_size) {
      shuffle(idx);
      for (std::size_t s = 0; s < idx.size(); s += static_cast<std::size_t>(config.batch_size)) {
        const std::size_t e = std::min(idx.size(), s + static_cast<std::size_t>(config.batch_size));
        batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(s),
                             idx.begin() + static_cast<std::ptrdiff_t>(e));
      }
    }
    shuffle(batches);

    double epoch_sum = 0.0;
    std::size_t epoch_steps = 0;
    bool stop = false;
    for (const auto& members : batches) {
      std::vector<const LabeledPair*> batch;
      for (std::size_t i : members) batch.push_back(&dataset[i]);
      const double lr = config.lr0 * std::pow(config.decay_factor,
                                              static_cast<double>(step / config.decay_every));
      const double loss = batch_nll<T>(batch, params, &grads);

      double sq = 0.0;
      for (const auto& g : grads) sq += g.template cast<double>().squaredNorm();
      const double norm = std::sqrt(sq);
      const T clip = norm > config.grad_clip_l2 ? static_cast<T>(config.grad_clip_l2 / norm) : T(1);

      const double t = static_cast<double>(step + 1);
      const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(beta1, t)));
      const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(beta2, t)));
      auto entries = params.tensors();
      for (std::size_t k = 0; k < entries.size(); ++k) {
        Mat<T>& p = *entries[k].tensor;
        const Mat<T> g = grads[k] * clip;
        m1[k] = T(beta1) * m1[k] + T(1 - beta1) * g;
        m2[k] = T(beta2) * m2[k] + T(1 - beta2) * g.cwiseProduct(g);
        const auto mhat = (m1[k] * c1).array();
        const auto vhat = (m2[k] * c2).array();
        p.array() -= static_cast<T>(lr) * mhat / (vhat.sqrt() + T(eps));
      }

      TrainLogEntry entry{step, lr, loss, epoch};
      result.log.push_back(entry);
      if (on_step) on_step(entry);
      epoch_sum += loss;
      ++epoch_steps;
      ++step;
      if (config.max_steps > 0 && step >= config.max_steps) {
        stop = true;
        break;
      }
    }
    if (epoch_steps) result.epoch_mean_loss.push_back(epoch_sum / static_cast<double>(epoch_steps));
    if (stop) break;
  }
  result.params = params.template cast<float>();
  return result;
}

}  // namespace

TrainResult train(const std::vector<LabeledPair>& dataset, const ModelConfig& config,
                  const std::function<void(const TrainLogEntry&)>& on_step) {
  config.validate();
  if (dataset.empty()) fail(ErrorKind::config, "training dataset is empty");
  for (const auto& p : dataset) {
    require_permutation(p.tour.order, p.instance.size());
    if (p.instance.size() < 2) fail(ErrorKind::config, "training instances need n >= 2");
  }
  return config.precision == Precision::f64 ? train_impl<double>(dataset, config, on_step)
                                            : train_impl<float>(dataset, config, on_step);
}

void write_training_log(const std::string& path, const std::vector<TrainLogEntry>& log) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write '" + path + "'");
  out << "step,lr,loss\n";
  char buf[128];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%ld,%.9g,%.9g\n", e.step, e.lr, e.loss);
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Layout (little-endian): "NETSPCKP" | u32 version | u32 header length |
// header JSON {format_version, config} | u32 tensor count | per tensor:
// u32 name length, name, u32 rank, rank x u32 dims, f32 values row-major.

namespace {

constexpr char kMagic[8] = {'N', 'E', 'T', 'S', 'P', 'C', 'K', 'P'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  void bytes(void* dst, std::size_t n) {
    if (pos_ + n > data_.size()) fail(ErrorKind::load, "checkpoint is truncated");
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::string str(std::size_t n) {
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_params(const std::string& path, const Params<float>& params) {
  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, kCheckpointVersion);
  const std::string header =
      json{{"format_version", kCheckpointVersion}, {"config", to_json(params.config)}}.dump();
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  const auto entries = params.tensors();
  put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.append(e.name);
    put_u32(out, static_cast<std::uint32_t>(e.shape.size()));
    for (int dim : e.shape) put_u32(out, static_cast<std::uint32_t>(dim));
    const Mat<float>& m = *e.tensor;
    for (Eigen::Index i = 0; i < m.size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(m.data()[i]));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::io, "cannot write '" + path + "'");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) fail(ErrorKind::io, "write to '" + path + "' failed");
}

Params<float> load_params(const std::string& path, const ModelConfig* expected) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::io, "cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  Reader in(ss.str());

  char magic[8];
  in.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    fail(ErrorKind::load, "'" + path + "' is not a checkpoint");
  }
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    fail(ErrorKind::load, "checkpoint format version " + std::to_string(version) +
                              " is not supported (expected " +
                              std::to_string(kCheckpointVersion) + ")");
  }
  ModelConfig stored;
  try {
    const json header = json::parse(in.str(in.u32()));
    stored = config_from_json(header.at("config"));
  } catch (const json::exception& e) {
    fail(ErrorKind::load, std::string("bad checkpoint header: ") + e.what());
  }

  Params<float> params = zero_params<float>(expected ? *expected : stored);
  if (!expected) params.config = stored;
  auto entries = params.tensors();
  const std::uint32_t count = in.u32();
  if (count != entries.size()) {
    fail(ErrorKind::load, "checkpoint has " + std::to_string(count) + " tensors, expected " +
                              std::to_string(entries.size()));
  }
  for (auto& e : entries) {
    const std::string name = in.str(in.u32());
    if (name != e.name) {
      fail(ErrorKind::load, "expected tensor '" + std::string(e.name) + "', found '" + name + "'");
    }
    std::vector<int> shape(in.u32());
    for (int& dim : shape) dim = static_cast<int>(in.u32());
    if (shape != e.shape) {
      auto fmt = [](const std::vector<int>& s) {
        std::string r = "[";
        for (std::size_t i = 0; i < s.size(); ++i) r += (i ? "," : "") + std::to_string(s[i]);
        return r + "]";
      };
      fail(ErrorKind::shape, "tensor '" + name + "' has shape " + fmt(shape) +
                                 " but the configuration expects " + fmt(e.shape));
    }
    Mat<float>& m = *e.tensor;
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::bit_cast<float>(in.u32());
  }
  if (!in.at_end()) fail(ErrorKind::load, "trailing bytes after the last tensor");
  return params;
}

// ---------------------------------------------------------------------------
// Gradient check

namespace {

long double nll_extended(const std::vector<const LabeledPair*>& batch,
                         const Params<long double>& params) {
  return batch_nll_impl<long double>(batch, params, nullptr);
}

}  // namespace

GradCheckReport grad_check(const ModelConfig& config, int trials, std::size_t n,
                           std::uint64_t seed) {
  config.validate();
  if (n < 2 || n > 6) fail(ErrorKind::config, "grad_check needs 2 <= n <= 6");
  if (config.hidden_dim > 8) fail(ErrorKind::config, "grad_check needs d_h <= 8");
  if (trials < 1) fail(ErrorKind::config, "grad_check needs at least one trial");
  constexpr double h = 1e-5;

  GradCheckReport report;
  report.trials = trials;
  std::map<std::string, double> per_tensor;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(Rng::at(seed, static_cast<std::uint64_t>(trial)));
    Params<double> params = init_params<double>(config, rng.next_u64());
    LabeledPair pair;
    pair.instance = generate_uniform(n, 1, rng.next_u64()).front();
    pair.tour.order.resize(n);
    for (std::size_t i = 0; i < n; ++i) pair.tour.order[i] = static_cast<int>(i);
    for (std::size_t i = n; i > 1; --i) std::swap(pair.tour.order[i - 1], pair.tour.order[rng.below(i)]);
    pair.tour = canonicalize(pair.tour);

    std::vector<Mat<double>> analytic;
    batch_nll<double>({&pair}, params, &analytic);
    // The finite-difference side runs in extended precision so its rounding
    // noise stays far below the 1e-8 floor of the error measure.
    Params<long double> probe = params.cast<long double>();
    auto entries = probe.tensors();
    for (std::size_t k = 0; k < entries.size(); ++k) {
      Mat<long double>& tensor = *entries[k].tensor;
      double& worst = per_tensor[std::string(entries[k].name)];
      for (Eigen::Index i = 0; i < tensor.size(); ++i) {
        const long double saved = tensor.data()[i];
        tensor.data()[i] = saved + h;
        const long double up = nll_extended({&pair}, probe);
        tensor.data()[i] = saved - h;
        const long double down = nll_extended({&pair}, probe);
        tensor.data()[i] = saved;
        const double numeric = static_cast<double>((up - down) / (2.0L * h));
        const double ga = analytic[k].data()[i];
        const double rel = std::abs(ga - numeric) / std::max(1e-8, std::abs(ga) + std::abs(numeric));
        worst = std::max(worst, rel);
        if (rel > report.max_rel_error) {
          report.max_rel_error = rel;
          report.worst_tensor = std::string(entries[k].name);
        }
        ++report.entries;
      }
    }
  }
  report.per_tensor.assign(per_tensor.begin(), per_tensor.end());
  return report;
}

// ---------------------------------------------------------------------------
// Explicit instantiations

#define NETSP_INSTANTIATE(T)                                                                  \
  template struct Params<T>;                                                                  \
  template Params<T> init_params<T>(const ModelConfig&, std::uint64_t);                       \
  template Params<T> zero_params<T>(const ModelConfig&);                                      \
  template Mat<T> model_inputs<T>(const Instance&);                                           \
  template Mat<T> embed<T>(const Mat<T>&, const Params<T>&);                                  \
  template Encoded<T> encode<T>(const Mat<T>&, const Params<T>&);                             \
  template std::vector<T> pointer<T>(const Mat<T>&, const Mat<T>&, const std::vector<char>&,  \
                                     const Params<T>&);                                       \
  template Mat<T> glimpse<T>(const Mat<T>&, const Mat<T>&, const std::vector<char>&,          \
                             const Params<T>&);                                               \
  template DecodeState<T> initial_state<T>(const Encoded<T>&);                                \
  template DecodeStep<T> decode_step<T>(const DecodeState<T>&, const Mat<T>&, const Mat<T>&,  \
                                        const Params<T>&);                                    \
  template DecodeState<T> advance<T>(const DecodeState<T>&, const DecodeStep<T>&, int);       \
  template Tour decode_greedy<T>(const Instance&, const Params<T>&);                          \
  template std::vector<Tour> decode_greedy_batch<T>(const std::vector<Instance>&,             \
                                                    const Params<T>&, std::size_t);           \
  template double sequence_nll<T>(const Instance&, const Tour&, const Params<T>&);            \
  template double batch_nll<T>(const std::vector<const LabeledPair*>&, const Params<T>&,      \
                               std::vector<Mat<T>>*);

NETSP_INSTANTIATE(float)
NETSP_INSTANTIATE(double)
NETSP_INSTANTIATE(long double)

template Params<double> Params<float>::cast<double>() const;
template Params<float> Params<double>::cast<float>() const;
template Params<float> Params<float>::cast<float>() const;
template Params<double> Params<double>::cast<double>() const;
template Params<long double> Params<double>::cast<long double>() const;

}  // namespace netsp::model
