#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "netsp/autodiff.hpp"
#include "netsp/geometry.hpp"
#include "netsp/instances.hpp"

namespace netsp::model {

using ad::Mat;

enum class Precision { f32, f64 };

struct ModelConfig {
  int hidden_dim = 128;
  int embed_kernel_width = 1;  // odd
  int glimpses = 1;
  int batch_size = 128;
  double lr0 = 1e-3;
  int decay_every = 5000;
  double decay_factor = 0.96;
  double grad_clip_l2 = 1.0;
  std::uint64_t seed = 0;
  Precision precision = Precision::f32;
  // Training schedule: stop after `epochs` passes or `max_steps` steps,
  // whichever comes first (0 disables the step cap).
  int epochs = 1;
  long max_steps = 0;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig config_from_json(const nlohmann::json& j);
ModelConfig load_config(const std::string& path);

/// Named parameter tensors. Matrices are stored row-major; vectors are 1 x d
/// rows; the embedding kernel (d x 2 x k) is stored as d x (2k) with column
/// c*k + o for input channel c and tap o.
template <typename T>
struct Params {
  ModelConfig config;

  Mat<T> embed_kernel, embed_bias;
  Mat<T> enc_w_ih, enc_w_hh, enc_bias;  // gate order: input, forget, cell, output
  Mat<T> dec_w_ih, dec_w_hh, dec_bias;
  Mat<T> ptr_w_ref, ptr_w_query, ptr_v;
  Mat<T> glimpse_w_ref, glimpse_w_query, glimpse_v;
  Mat<T> start_token;

  struct Entry {
    std::string_view name;
    std::vector<int> shape;  // logical shape as stored in checkpoints
    Mat<T>* tensor;
  };
  struct ConstEntry {
    std::string_view name;
    std::vector<int> shape;
    const Mat<T>* tensor;
  };

  std::vector<Entry> tensors();
  std::vector<ConstEntry> tensors() const;

  std::size_t parameter_count() const;

  template <typename U>
  Params<U> cast() const;
};

/// uniform(-1/sqrt(d), 1/sqrt(d)) everywhere except forget-gate biases,
/// which start at 1.
template <typename T>
Params<T> init_params(const ModelConfig& config, std::uint64_t seed);

/// Every tensor filled with zeros except what `fill` sets (test helper).
template <typename T>
Params<T> zero_params(const ModelConfig& config);

/// Model-space coordinates: TSPLIB-convention instances are min-max
/// normalised, everything else is passed through. n x 2.
template <typename T>
Mat<T> model_inputs(const Instance& instance);

template <typename T>
Mat<T> embed(const Mat<T>& coords, const Params<T>& params);

template <typename T>
struct Encoded {
  Mat<T> refs;  // n x d
  Mat<T> hidden, cell;  // final state, 1 x d each
};

template <typename T>
Encoded<T> encode(const Mat<T>& embedded, const Params<T>& params);

/// Masked pointer distribution over the n references. `visited` has n
/// entries; visited cities get probability exactly 0.
template <typename T>
std::vector<T> pointer(const Mat<T>& query, const Mat<T>& refs,
                       const std::vector<char>& visited, const Params<T>& params);

/// `config.glimpses` rounds of attention-weighted averaging of the refs.
template <typename T>
Mat<T> glimpse(const Mat<T>& query, const Mat<T>& refs,
               const std::vector<char>& visited, const Params<T>& params);

template <typename T>
struct DecodeState {
  std::vector<char> visited;
  Mat<T> hidden, cell;
  std::size_t step = 0;
  double log_prob_sum = 0.0;
};

template <typename T>
DecodeState<T> initial_state(const Encoded<T>& encoded);

template <typename T>
struct DecodeStep {
  std::vector<T> probabilities;
  Mat<T> hidden, cell;
};

/// One decoder step. At step 0 the learned start token is fed and
/// `prev_embedding` is ignored.
template <typename T>
DecodeStep<T> decode_step(const DecodeState<T>& state, const Mat<T>& prev_embedding,
                          const Mat<T>& refs, const Params<T>& params);

/// Marks `city` visited and advances the state with the step's LSTM output.
template <typename T>
DecodeState<T> advance(const DecodeState<T>& state, const DecodeStep<T>& step, int city);

template <typename T>
Tour decode_greedy(const Instance& instance, const Params<T>& params);

/// Greedy decoding of many instances; instances are batched by size.
template <typename T>
std::vector<Tour> decode_greedy_batch(const std::vector<Instance>& instances,
                                      const Params<T>& params,
                                      std::size_t batch_size = 256);

/// Teacher-forced negative log-likelihood of `target`.
template <typename T>
double sequence_nll(const Instance& instance, const Tour& target, const Params<T>& params);

/// Mean NLL over a batch of equal-size pairs; fills `grads` (same order as
/// Params::tensors()) when non-null.
template <typename T>
double batch_nll(const std::vector<const LabeledPair*>& batch, const Params<T>& params,
                 std::vector<Mat<T>>* grads);

struct TrainLogEntry {
  long step = 0;
  double lr = 0.0;
  double loss = 0.0;
  int epoch = 0;
};

struct TrainResult {
  Params<float> params;
  std::vector<TrainLogEntry> log;
  std::vector<double> epoch_mean_loss;
};

TrainResult train(const std::vector<LabeledPair>& dataset, const ModelConfig& config,
                  const std::function<void(const TrainLogEntry&)>& on_step = {});

/// Writes the step,lr,loss CSV.
void write_training_log(const std::string& path, const std::vector<TrainLogEntry>& log);

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_params(const std::string& path, const Params<float>& params);

/// Loads a checkpoint. When `expected` is given, every tensor shape must
/// match that configuration.
Params<float> load_params(const std::string& path, const ModelConfig* expected = nullptr);

struct GradCheckReport {
  int trials = 0;
  std::size_t entries = 0;
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::vector<std::pair<std::string, double>> per_tensor;  // max per tensor
};

/// Compares the analytic gradient of sequence_nll with central finite
/// differences (h = 1e-5) over every parameter entry, in double precision.
/// Relative error is |ga - gn| / max(1e-8, |ga| + |gn|).
GradCheckReport grad_check(const ModelConfig& config, int trials, std::size_t n,
                           std::uint64_t seed);

}  // namespace netsp::model
