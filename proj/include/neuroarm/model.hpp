#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "neuroarm/dataset.hpp"
#include "neuroarm/synth_eeg.hpp"
#include "neuroarm/transport.hpp"
#include "neuroarm/types.hpp"

namespace neuroarm::model {

// ---- threshold baseline ----

struct ThresholdConfig {
    double metric_threshold = 0.8;  // in [0, 1]
};

/// Maps the focus metrics onto a state. When both metrics clear the
/// threshold the result is Idle: overlapping confidence is treated as no
/// decision rather than an arbitrary pick.
BrainState threshold_classify(std::pair<double, double> metrics, const ThresholdConfig& cfg);

struct ThresholdSweepPoint {
    double threshold = 0.0;
    int attempts = 0;
    int successes = 0;  // handshake attempts classified as handshake
};

/// Success-vs-threshold curve: per threshold, `attempts` relaxed-state
/// windows are synthesized and classified; a success is a
/// RelaxedHandshake verdict.
std::vector<ThresholdSweepPoint> threshold_sweep(
    const std::vector<double>& thresholds, int attempts_per_point,
    const std::map<BrainState, synth::BandProfile>& profiles, const synth::NoiseSpec& noise,
    std::uint64_t seed);

// ---- transformer ----

struct TransformerConfig {
    int win_size = 80;            // frames per window (~2 s at 40 frames/s)
    int feat_dim = kFeatureDim;   // 20
    int model_dim = 32;
    int heads = 4;
    int ff_dim = 64;
    int classes = kNumActions;    // 3
    std::uint64_t seed = 1;

    void validate() const;  // ConfigError on violation
};

/// All learned tensors. Attention projections are packed: head h owns
/// columns [h*model_dim/heads, (h+1)*model_dim/heads).
struct ModelParams {
    TransformerConfig cfg;
    Eigen::MatrixXd w_in;      // feat_dim × model_dim
    Eigen::RowVectorXd b_in;   // model_dim
    Eigen::MatrixXd w_q, w_k, w_v, w_o;            // model_dim × model_dim
    Eigen::RowVectorXd b_q, b_k, b_v, b_o;         // model_dim
    Eigen::RowVectorXd ln_gain, ln_bias;           // model_dim
    Eigen::MatrixXd w_ff1;     // model_dim × ff_dim
    Eigen::RowVectorXd b_ff1;  // ff_dim
    Eigen::MatrixXd w_ff2;     // ff_dim × classes
    Eigen::RowVectorXd b_ff2;  // classes
};

/// Seeded uniform (Xavier-style) initialization; identical across runs.
ModelParams init_params(const TransformerConfig& cfg);

/// Activations retained for the backward pass.
struct ForwardCache {
    Eigen::MatrixXd x;                  // input window
    Eigen::MatrixXd h0;                 // projected input
    Eigen::MatrixXd q, k, v;            // packed projections
    std::vector<Eigen::MatrixXd> attn;  // per-head row-softmax weights
    Eigen::MatrixXd heads_out;          // concatenated head outputs
    Eigen::MatrixXd res;                // h0 + attention output
    Eigen::MatrixXd xhat;               // layer-norm normalized rows
    Eigen::VectorXd inv_std;            // per-row 1/sqrt(var + eps)
    Eigen::RowVectorXd pooled;          // time-mean of normed rows
    Eigen::RowVectorXd ff1;             // pre-activation
    Eigen::RowVectorXd act;             // after the nonlinearity
    Eigen::Vector3d logits;
};

/// Input projection → multi-head self-attention (residual) → layer norm →
/// mean pooling over time → feed-forward → logits. Accepts any row count
/// (mean pooling makes length free); columns must equal cfg.feat_dim.
Eigen::Vector3d forward(const ModelParams& params, const Eigen::MatrixXd& window,
                        ForwardCache* cache = nullptr);

Eigen::Vector3d softmax3(const Eigen::Vector3d& logits);

/// Cross-entropy with a stable log-softmax; always >= 0.
double loss(const Eigen::Vector3d& logits, const Eigen::Vector3d& one_hot);

/// Gradient accumulator with the same shapes as ModelParams.
struct Gradients {
    Eigen::MatrixXd w_in;
    Eigen::RowVectorXd b_in;
    Eigen::MatrixXd w_q, w_k, w_v, w_o;
    Eigen::RowVectorXd b_q, b_k, b_v, b_o;
    Eigen::RowVectorXd ln_gain, ln_bias;
    Eigen::MatrixXd w_ff1;
    Eigen::RowVectorXd b_ff1;
    Eigen::MatrixXd w_ff2;
    Eigen::RowVectorXd b_ff2;

    static Gradients zero(const TransformerConfig& cfg);
};

/// Accumulates d loss / d params for one (window, one-hot) pair into
/// `acc`, using the activations cached by forward().
void backward(const ModelParams& params, const ForwardCache& cache,
              const Eigen::Vector3d& one_hot, Gradients& acc);

/// params -= scale * grads.
void apply_sgd(ModelParams& params, const Gradients& grads, double scale);

struct TrainHistory {
    std::vector<double> train_loss;  // mean per epoch
    std::vector<double> train_acc;
    std::vector<double> val_acc;     // on the held-out test split
};

struct TrainOptions {
    int epochs = 50;
    double lr = 1e-3;
    int batch_size = 16;
};

/// Plain mini-batch gradient descent; bit-reproducible for a fixed seed.
/// Raises TrainingError naming the epoch if the loss goes non-finite.
std::pair<ModelParams, TrainHistory> train(const data::SplitDataset& ds, TransformerConfig cfg,
                                           const TrainOptions& opt, std::uint64_t seed);

// ---- evaluation ----

struct EvalReport {
    Eigen::Matrix3i confusion;  // row = truth, column = prediction
    std::array<int, kNumActions> support{};
    std::array<double, kNumActions> precision{}, recall{}, f1{};
    double accuracy = 0.0;
    double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
    double weighted_precision = 0.0, weighted_recall = 0.0, weighted_f1 = 0.0;
    int total = 0;

    /// Aligned classification-report text (precision/recall/f1/support
    /// rows per class, then accuracy, macro avg, weighted avg).
    std::string to_text() const;
    /// Machine-readable JSON with the same content plus the confusion matrix.
    std::string to_json() const;
};

/// Metrics from (truth, prediction) pairs; the common core for every model.
EvalReport evaluate_predictions(const std::vector<ActionLabel>& truth,
                                const std::vector<ActionLabel>& predicted);

ActionLabel predict(const ModelParams& params, const Eigen::MatrixXd& window);
EvalReport evaluate(const ModelParams& params, const std::vector<data::WindowTensor>& windows);

// ---- feed-forward baseline ----

struct FfnnConfig {
    int win_size = 80;
    int feat_dim = kFeatureDim;
    int hidden = 64;
    int classes = kNumActions;
    std::uint64_t seed = 1;
};

/// Flattened window (win_size·20) → hidden → nonlinearity → classes.
struct FfnnParams {
    FfnnConfig cfg;
    Eigen::MatrixXd w1;      // (win_size·feat_dim) × hidden
    Eigen::RowVectorXd b1;   // hidden
    Eigen::MatrixXd w2;      // hidden × classes
    Eigen::RowVectorXd b2;   // classes
};

FfnnParams init_ffnn(const FfnnConfig& cfg);
Eigen::Vector3d ffnn_forward(const FfnnParams& params, const Eigen::MatrixXd& window);
std::pair<FfnnParams, TrainHistory> train_ffnn(const data::SplitDataset& ds, FfnnConfig cfg,
                                               const TrainOptions& opt, std::uint64_t seed);
ActionLabel ffnn_predict(const FfnnParams& params, const Eigen::MatrixXd& window);
EvalReport evaluate_ffnn(const FfnnParams& params, const std::vector<data::WindowTensor>& windows);

// ---- window size study ----

struct WindowSizeResult {
    int win_size = 0;
    double test_accuracy = 0.0;
};

/// Trains one transformer per window size on the same source files and
/// reports held-out accuracy per size.
std::vector<WindowSizeResult> window_size_study(const std::map<std::string, ActionLabel>& files,
                                                const std::vector<int>& sizes,
                                                TransformerConfig base, const TrainOptions& opt,
                                                double test_fraction, std::uint64_t seed);

// ---- streaming prediction ----

/// Rolling-buffer classifier over a live feature stream. Emits one label
/// per period of stream time (frame index / frames_per_s), starting once
/// the buffer holds win_size frames. Single-owner.
class StreamPredictor {
  public:
    StreamPredictor(ModelParams params, data::Standardizer standardizer, double frames_per_s,
                    double period_s = 2.0);

    /// Feeds one frame; returns a label when an emission falls due.
    /// session_now_s is the caller's session clock, used for starvation
    /// tracking only.
    std::optional<ActionLabel> push(const net::FeatureFrame& frame, double session_now_s);

    /// True (once per episode) when no frame has arrived for more than
    /// two emission periods; the caller should warn and emit no label.
    bool starved(double session_now_s);

    std::uint64_t emissions() const { return emissions_; }
    int win_size() const { return params_.cfg.win_size; }

  private:
    ModelParams params_;
    data::Standardizer standardizer_;
    double frames_per_s_;
    double period_s_;
    Eigen::MatrixXd buffer_;      // win_size × feat_dim ring, row fill_ next
    int filled_ = 0;
    int next_row_ = 0;
    double next_emit_s_;
    double last_frame_s_ = 0.0;
    bool warned_ = false;
    std::uint64_t emissions_ = 0;
};

// ---- model container ----

/// Flat binary container: shape header, embedded standardizer, tensors.
void save_model(const std::string& path, const ModelParams& params,
                const data::Standardizer& standardizer);
std::pair<ModelParams, data::Standardizer> load_model(const std::string& path);

/// History CSV: "epoch,train_loss,train_acc,val_acc" rows, 9 significant
/// digits, bitwise-stable for a fixed seed.
void save_history(const std::string& path, const TrainHistory& history);

}  // namespace neuroarm::model
