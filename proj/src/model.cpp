#include "neuroarm/model.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include "binio.hpp"
#include "neuroarm/dsp.hpp"

namespace neuroarm::model {

namespace {

/// [0, 1) double from the top 53 bits; platform-stable, unlike
/// std::uniform_real_distribution.
double uniform_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform_pm(std::mt19937_64& rng, double limit) {
    return (2.0 * uniform_unit(rng) - 1.0) * limit;
}

Eigen::MatrixXd xavier(std::mt19937_64& rng, int rows, int cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = uniform_pm(rng, limit);
    return m;
}

constexpr double kLnEps = 1e-5;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

void softmax_rows_inplace(Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double mx = m.row(r).maxCoeff();
        m.row(r) = (m.row(r).array() - mx).exp().matrix();
        m.row(r) /= m.row(r).sum();
    }
}

ActionLabel argmax_label(const Eigen::Vector3d& logits) {
    // Lowest index wins ties.
    int best = 0;
    for (int i = 1; i < 3; ++i)
        if (logits[i] > logits[best]) best = i;
    return static_cast<ActionLabel>(best);
}

/// Shared mini-batch loop for both model families. `step` consumes one
/// (window, one_hot) pair and returns its loss; `commit` applies the
/// accumulated batch gradient scaled to a mean.
template <typename StepFn, typename CommitFn, typename AccFn>
TrainHistory run_training(const data::SplitDataset& ds, const TrainOptions& opt,
                          std::uint64_t seed, StepFn&& step, CommitFn&& commit, AccFn&& accuracy) {
    if (ds.train.empty()) throw TrainingError("empty training split");
    if (opt.epochs < 0 || opt.batch_size < 1 || !(opt.lr >= 0.0))
        throw ConfigError("bad training options");

    TrainHistory history;
    std::vector<std::size_t> order(ds.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        std::mt19937_64 rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = data::bounded_rand(rng, i);
            std::swap(order[i - 1], order[j]);
        }

        double epoch_loss = 0.0;
        std::size_t cursor = 0;
        while (cursor < order.size()) {
            const std::size_t n =
                std::min<std::size_t>(static_cast<std::size_t>(opt.batch_size),
                                      order.size() - cursor);
            double batch_loss = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const std::size_t idx = order[cursor + k];
                batch_loss += step(ds.train[idx].data, ds.train_one_hot[idx]);
            }
            if (!std::isfinite(batch_loss))
                throw TrainingError("loss diverged at epoch " + std::to_string(epoch));
            commit(opt.lr / static_cast<double>(n));
            epoch_loss += batch_loss;
            cursor += n;
        }

        history.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
        history.train_acc.push_back(accuracy(ds.train));
        history.val_acc.push_back(ds.test.empty() ? 0.0 : accuracy(ds.test));
    }
    return history;
}

double split_accuracy(const std::vector<data::WindowTensor>& windows,
                      const std::vector<ActionLabel>& predictions) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < windows.size(); ++i)
        if (predictions[i] == windows[i].label) ++hits;
    return static_cast<double>(hits) / static_cast<double>(windows.size());
}

}  // namespace

// ---- threshold baseline ----

BrainState threshold_classify(std::pair<double, double> metrics, const ThresholdConfig& cfg) {
    const auto [relaxation, concentration] = metrics;
    const bool relaxed = relaxation >= cfg.metric_threshold;
    const bool focused = concentration >= cfg.metric_threshold;
    if (relaxed && focused) return BrainState::Idle;
    if (relaxed) return BrainState::RelaxedHandshake;
    if (focused) return BrainState::ConcentratedCup;
    return BrainState::Idle;
}

std::vector<ThresholdSweepPoint> threshold_sweep(
    const std::vector<double>& thresholds, int attempts_per_point,
    const std::map<BrainState, synth::BandProfile>& profiles, const synth::NoiseSpec& noise,
    std::uint64_t seed) {
    if (attempts_per_point < 1) throw ConfigError("attempts_per_point must be >= 1");
    std::vector<ThresholdSweepPoint> curve;
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
        synth::SignalGenerator gen(profiles, noise, derive_seed(seed, t));
        gen.set_state(BrainState::RelaxedHandshake);
        ThresholdSweepPoint point;
        point.threshold = thresholds[t];
        point.attempts = attempts_per_point;
        const ThresholdConfig cfg{thresholds[t]};
        for (int a = 0; a < attempts_per_point; ++a) {
            const auto window = gen.next_chunk(256);
            const auto fv = dsp::features_of_window(window.samples, window.rate, dsp::Taper::Hann);
            if (threshold_classify(dsp::focus_metrics(fv), cfg) == BrainState::RelaxedHandshake)
                ++point.successes;
        }
        curve.push_back(point);
    }
    return curve;
}

// ---- transformer ----

void TransformerConfig::validate() const {
    if (feat_dim != kFeatureDim) throw ConfigError("feat_dim must be 20");
    if (classes != kNumActions) throw ConfigError("classes must be 3");
    if (win_size < 1 || model_dim < 1 || heads < 1 || ff_dim < 1)
        throw ConfigError("transformer dimensions must be positive");
    if (model_dim % heads != 0) throw ConfigError("model_dim must be divisible by heads");
}

ModelParams init_params(const TransformerConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(derive_seed(cfg.seed, 0xA11C));
    ModelParams p;
    p.cfg = cfg;
    p.w_in = xavier(rng, cfg.feat_dim, cfg.model_dim);
    p.b_in = Eigen::RowVectorXd::Zero(cfg.model_dim);
    p.w_q = xavier(rng, cfg.model_dim, cfg.model_dim);
    p.w_k = xavier(rng, cfg.model_dim, cfg.model_dim);
    p.w_v = xavier(rng, cfg.model_dim, cfg.model_dim);
    p.w_o = xavier(rng, cfg.model_dim, cfg.model_dim);
    p.b_q = Eigen::RowVectorXd::Zero(cfg.model_dim);
    p.b_k = Eigen::RowVectorXd::Zero(cfg.model_dim);
    p.b_v = Eigen::RowVectorXd::Zero(cfg.model_dim);
    p.b_o = Eigen::RowVectorXd::Zero(cfg.model_dim);
    p.ln_gain = Eigen::RowVectorXd::Ones(cfg.model_dim);
    p.ln_bias = Eigen::RowVectorXd::Zero(cfg.model_dim);
    p.w_ff1 = xavier(rng, cfg.model_dim, cfg.ff_dim);
    p.b_ff1 = Eigen::RowVectorXd::Zero(cfg.ff_dim);
    p.w_ff2 = xavier(rng, cfg.ff_dim, cfg.classes);
    p.b_ff2 = Eigen::RowVectorXd::Zero(cfg.classes);
    return p;
}

Eigen::Vector3d forward(const ModelParams& params, const Eigen::MatrixXd& window,
                        ForwardCache* cache) {
    const auto& cfg = params.cfg;
    if (window.cols() != cfg.feat_dim)
        throw ConfigError("window has " + std::to_string(window.cols()) + " columns, expected " +
                          std::to_string(cfg.feat_dim));
    if (window.rows() < 1) throw ConfigError("window is empty");

    const Eigen::Index t = window.rows();
    const int dh = cfg.model_dim / cfg.heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Eigen::MatrixXd h0 = (window * params.w_in).rowwise() + params.b_in;
    Eigen::MatrixXd q = (h0 * params.w_q).rowwise() + params.b_q;
    Eigen::MatrixXd k = (h0 * params.w_k).rowwise() + params.b_k;
    Eigen::MatrixXd v = (h0 * params.w_v).rowwise() + params.b_v;

    Eigen::MatrixXd heads_out(t, cfg.model_dim);
    std::vector<Eigen::MatrixXd> attn(static_cast<std::size_t>(cfg.heads));
    for (int h = 0; h < cfg.heads; ++h) {
        const auto qh = q.middleCols(h * dh, dh);
        const auto kh = k.middleCols(h * dh, dh);
        const auto vh = v.middleCols(h * dh, dh);
        Eigen::MatrixXd scores = qh * kh.transpose() * scale;
        softmax_rows_inplace(scores);
        heads_out.middleCols(h * dh, dh) = scores * vh;
        attn[static_cast<std::size_t>(h)] = std::move(scores);
    }
    Eigen::MatrixXd attn_out = (heads_out * params.w_o).rowwise() + params.b_o;
    Eigen::MatrixXd res = h0 + attn_out;

    Eigen::MatrixXd xhat(t, cfg.model_dim);
    Eigen::VectorXd inv_std(t);
    for (Eigen::Index r = 0; r < t; ++r) {
        const double mu = res.row(r).mean();
        const double var = (res.row(r).array() - mu).square().mean();
        inv_std[r] = 1.0 / std::sqrt(var + kLnEps);
        xhat.row(r) = ((res.row(r).array() - mu) * inv_std[r]).matrix();
    }
    Eigen::MatrixXd normed = xhat;
    normed.array().rowwise() *= params.ln_gain.array();
    normed.array().rowwise() += params.ln_bias.array();

    Eigen::RowVectorXd pooled = normed.colwise().mean();
    Eigen::RowVectorXd ff1 = pooled * params.w_ff1 + params.b_ff1;
    Eigen::RowVectorXd act = ff1.unaryExpr([](double x) { return gelu(x); });
    Eigen::RowVectorXd out = act * params.w_ff2 + params.b_ff2;
    Eigen::Vector3d logits = out.transpose();

    if (cache) {
        cache->x = window;
        cache->h0 = std::move(h0);
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->attn = std::move(attn);
        cache->heads_out = std::move(heads_out);
        cache->res = std::move(res);
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
        cache->pooled = std::move(pooled);
        cache->ff1 = std::move(ff1);
        cache->act = std::move(act);
        cache->logits = logits;
    }
    return logits;
}

Eigen::Vector3d softmax3(const Eigen::Vector3d& logits) {
    const double mx = logits.maxCoeff();
    const Eigen::Vector3d e = (logits.array() - mx).exp().matrix();
    return e / e.sum();
}

double loss(const Eigen::Vector3d& logits, const Eigen::Vector3d& one_hot) {
    const double mx = logits.maxCoeff();
    const double lse = mx + std::log((logits.array() - mx).exp().sum());
    return lse - logits.dot(one_hot);
}

Gradients Gradients::zero(const TransformerConfig& cfg) {
    Gradients g;
    g.w_in = Eigen::MatrixXd::Zero(cfg.feat_dim, cfg.model_dim);
    g.b_in = Eigen::RowVectorXd::Zero(cfg.model_dim);
    g.w_q = Eigen::MatrixXd::Zero(cfg.model_dim, cfg.model_dim);
    g.w_k = g.w_q;
    g.w_v = g.w_q;
    g.w_o = g.w_q;
    g.b_q = Eigen::RowVectorXd::Zero(cfg.model_dim);
    g.b_k = g.b_q;
    g.b_v = g.b_q;
    g.b_o = g.b_q;
    g.ln_gain = Eigen::RowVectorXd::Zero(cfg.model_dim);
    g.ln_bias = g.ln_gain;
    g.w_ff1 = Eigen::MatrixXd::Zero(cfg.model_dim, cfg.ff_dim);
    g.b_ff1 = Eigen::RowVectorXd::Zero(cfg.ff_dim);
    g.w_ff2 = Eigen::MatrixXd::Zero(cfg.ff_dim, cfg.classes);
    g.b_ff2 = Eigen::RowVectorXd::Zero(cfg.classes);
    return g;
}

void backward(const ModelParams& params, const ForwardCache& cache,
              const Eigen::Vector3d& one_hot, Gradients& acc) {
    const auto& cfg = params.cfg;
    const Eigen::Index t = cache.x.rows();
    const int dh = cfg.model_dim / cfg.heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    // d loss / d logits of cross-entropy over softmax.
    const Eigen::RowVectorXd dlogits = (softmax3(cache.logits) - one_hot).transpose();

    acc.w_ff2 += cache.act.transpose() * dlogits;
    acc.b_ff2 += dlogits;
    const Eigen::RowVectorXd dact = dlogits * params.w_ff2.transpose();
    const Eigen::RowVectorXd dff1 =
        (dact.array() * cache.ff1.unaryExpr([](double x) { return gelu_grad(x); }).array())
            .matrix();

    acc.w_ff1 += cache.pooled.transpose() * dff1;
    acc.b_ff1 += dff1;
    const Eigen::RowVectorXd dpooled = dff1 * params.w_ff1.transpose();

    // Mean pooling spreads the gradient uniformly over time steps.
    Eigen::MatrixXd dnormed = (1.0 / static_cast<double>(t)) *
                              Eigen::MatrixXd::Ones(t, 1) * dpooled;

    acc.ln_gain += (dnormed.array() * cache.xhat.array()).colwise().sum().matrix();
    acc.ln_bias += dnormed.colwise().sum();
    Eigen::MatrixXd dxhat = dnormed;
    dxhat.array().rowwise() *= params.ln_gain.array();

    Eigen::MatrixXd dres(t, cfg.model_dim);
    for (Eigen::Index r = 0; r < t; ++r) {
        const double m1 = dxhat.row(r).mean();
        const double m2 = (dxhat.row(r).array() * cache.xhat.row(r).array()).mean();
        dres.row(r) =
            (cache.inv_std[r] * (dxhat.row(r).array() - m1 - cache.xhat.row(r).array() * m2))
                .matrix();
    }

    // Residual: res = h0 + attn_out.
    Eigen::MatrixXd dh0 = dres;
    const Eigen::MatrixXd& dattn_out = dres;

    acc.w_o += cache.heads_out.transpose() * dattn_out;
    acc.b_o += dattn_out.colwise().sum();
    const Eigen::MatrixXd dheads = dattn_out * params.w_o.transpose();

    Eigen::MatrixXd dq(t, cfg.model_dim), dk(t, cfg.model_dim), dv(t, cfg.model_dim);
    for (int h = 0; h < cfg.heads; ++h) {
        const auto qh = cache.q.middleCols(h * dh, dh);
        const auto kh = cache.k.middleCols(h * dh, dh);
        const auto vh = cache.v.middleCols(h * dh, dh);
        const auto& a = cache.attn[static_cast<std::size_t>(h)];
        const auto doh = dheads.middleCols(h * dh, dh);

        const Eigen::MatrixXd da = doh * vh.transpose();
        dv.middleCols(h * dh, dh) = a.transpose() * doh;

        // Row-softmax backward: ds = a ∘ (da − rowsum(da ∘ a)).
        Eigen::MatrixXd ds(t, t);
        for (Eigen::Index r = 0; r < t; ++r) {
            const double dot = da.row(r).dot(a.row(r));
            ds.row(r) = (a.row(r).array() * (da.row(r).array() - dot)).matrix();
        }
        dq.middleCols(h * dh, dh) = ds * kh * scale;
        dk.middleCols(h * dh, dh) = ds.transpose() * qh * scale;
    }

    acc.w_q += cache.h0.transpose() * dq;
    acc.b_q += dq.colwise().sum();
    dh0 += dq * params.w_q.transpose();
    acc.w_k += cache.h0.transpose() * dk;
    acc.b_k += dk.colwise().sum();
    dh0 += dk * params.w_k.transpose();
    acc.w_v += cache.h0.transpose() * dv;
    acc.b_v += dv.colwise().sum();
    dh0 += dv * params.w_v.transpose();

    acc.w_in += cache.x.transpose() * dh0;
    acc.b_in += dh0.colwise().sum();
}

void apply_sgd(ModelParams& p, const Gradients& g, double scale) {
    p.w_in -= scale * g.w_in;
    p.b_in -= scale * g.b_in;
    p.w_q -= scale * g.w_q;
    p.b_q -= scale * g.b_q;
    p.w_k -= scale * g.w_k;
    p.b_k -= scale * g.b_k;
    p.w_v -= scale * g.w_v;
    p.b_v -= scale * g.b_v;
    p.w_o -= scale * g.w_o;
    p.b_o -= scale * g.b_o;
    p.ln_gain -= scale * g.ln_gain;
    p.ln_bias -= scale * g.ln_bias;
    p.w_ff1 -= scale * g.w_ff1;
    p.b_ff1 -= scale * g.b_ff1;
    p.w_ff2 -= scale * g.w_ff2;
    p.b_ff2 -= scale * g.b_ff2;
}

std::pair<ModelParams, TrainHistory> train(const data::SplitDataset& ds, TransformerConfig cfg,
                                           const TrainOptions& opt, std::uint64_t seed) {
    cfg.win_size = ds.win_size;
    cfg.seed = derive_seed(seed, 0x1817);
    ModelParams params = init_params(cfg);

    Gradients grads = Gradients::zero(cfg);
    ForwardCache cache;
    auto step = [&](const Eigen::MatrixXd& window, const Eigen::Vector3d& y) {
        forward(params, window, &cache);
        backward(params, cache, y, grads);
        return loss(cache.logits, y);
    };
    auto commit = [&](double scale) {
        apply_sgd(params, grads, scale);
        grads = Gradients::zero(cfg);
    };
    auto accuracy = [&](const std::vector<data::WindowTensor>& windows) {
        std::vector<ActionLabel> preds(windows.size());
        for (std::size_t i = 0; i < windows.size(); ++i) preds[i] = predict(params, windows[i].data);
        return split_accuracy(windows, preds);
    };

    TrainHistory history = run_training(ds, opt, seed, step, commit, accuracy);
    return {std::move(params), std::move(history)};
}

// ---- evaluation ----

EvalReport evaluate_predictions(const std::vector<ActionLabel>& truth,
                                const std::vector<ActionLabel>& predicted) {
    if (truth.size() != predicted.size()) throw ConfigError("prediction/truth size mismatch");
    if (truth.empty()) throw ConfigError("nothing to evaluate");

    EvalReport r;
    r.confusion.setZero();
    r.total = static_cast<int>(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i)
        r.confusion(static_cast<int>(truth[i]), static_cast<int>(predicted[i]))++;

    int correct = 0;
    for (int c = 0; c < kNumActions; ++c) {
        const int row_sum = r.confusion.row(c).sum();
        const int col_sum = r.confusion.col(c).sum();
        const int diag = r.confusion(c, c);
        correct += diag;
        r.support[static_cast<std::size_t>(c)] = row_sum;
        const double p = col_sum > 0 ? static_cast<double>(diag) / col_sum : 0.0;
        const double rec = row_sum > 0 ? static_cast<double>(diag) / row_sum : 0.0;
        r.precision[static_cast<std::size_t>(c)] = p;
        r.recall[static_cast<std::size_t>(c)] = rec;
        r.f1[static_cast<std::size_t>(c)] = (p + rec) > 0 ? 2.0 * p * rec / (p + rec) : 0.0;
    }
    r.accuracy = static_cast<double>(correct) / r.total;
    for (int c = 0; c < kNumActions; ++c) {
        const double w = static_cast<double>(r.support[static_cast<std::size_t>(c)]) / r.total;
        r.macro_precision += r.precision[static_cast<std::size_t>(c)] / kNumActions;
        r.macro_recall += r.recall[static_cast<std::size_t>(c)] / kNumActions;
        r.macro_f1 += r.f1[static_cast<std::size_t>(c)] / kNumActions;
        r.weighted_precision += w * r.precision[static_cast<std::size_t>(c)];
        r.weighted_recall += w * r.recall[static_cast<std::size_t>(c)];
        r.weighted_f1 += w * r.f1[static_cast<std::size_t>(c)];
    }
    return r;
}

std::string EvalReport::to_text() const {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof line, "%14s %10s %10s %10s %10s\n", "", "precision", "recall",
                  "f1-score", "support");
    out += line;
    out += '\n';
    for (int c = 0; c < kNumActions; ++c) {
        std::snprintf(line, sizeof line, "%14s %10.2f %10.2f %10.2f %10d\n",
                      action_name(static_cast<ActionLabel>(c)),
                      precision[static_cast<std::size_t>(c)], recall[static_cast<std::size_t>(c)],
                      f1[static_cast<std::size_t>(c)], support[static_cast<std::size_t>(c)]);
        out += line;
    }
    out += '\n';
    std::snprintf(line, sizeof line, "%14s %10s %10s %10.2f %10d\n", "accuracy", "", "", accuracy,
                  total);
    out += line;
    std::snprintf(line, sizeof line, "%14s %10.2f %10.2f %10.2f %10d\n", "macro avg",
                  macro_precision, macro_recall, macro_f1, total);
    out += line;
    std::snprintf(line, sizeof line, "%14s %10.2f %10.2f %10.2f %10d\n", "weighted avg",
                  weighted_precision, weighted_recall, weighted_f1, total);
    out += line;
    return out;
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    for (int c = 0; c < kNumActions; ++c) {
        nlohmann::json cls;
        cls["precision"] = precision[static_cast<std::size_t>(c)];
        cls["recall"] = recall[static_cast<std::size_t>(c)];
        cls["f1"] = f1[static_cast<std::size_t>(c)];
        cls["support"] = support[static_cast<std::size_t>(c)];
        j["classes"][action_name(static_cast<ActionLabel>(c))] = cls;
    }
    j["accuracy"] = accuracy;
    j["total"] = total;
    j["macro_avg"] = {{"precision", macro_precision}, {"recall", macro_recall}, {"f1", macro_f1}};
    j["weighted_avg"] = {{"precision", weighted_precision},
                         {"recall", weighted_recall},
                         {"f1", weighted_f1}};
    std::vector<std::vector<int>> conf(kNumActions, std::vector<int>(kNumActions));
    for (int r = 0; r < kNumActions; ++r)
        for (int c = 0; c < kNumActions; ++c) conf[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = confusion(r, c);
    j["confusion"] = conf;
    return j.dump(2);
}

ActionLabel predict(const ModelParams& params, const Eigen::MatrixXd& window) {
    return argmax_label(forward(params, window));
}

EvalReport evaluate(const ModelParams& params, const std::vector<data::WindowTensor>& windows) {
    std::vector<ActionLabel> truth(windows.size()), preds(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        truth[i] = windows[i].label;
        preds[i] = predict(params, windows[i].data);
    }
    return evaluate_predictions(truth, preds);
}

// ---- feed-forward baseline ----

namespace {

Eigen::RowVectorXd flatten_window(const Eigen::MatrixXd& window) {
    Eigen::RowVectorXd flat(window.size());
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < window.rows(); ++r)
        for (Eigen::Index c = 0; c < window.cols(); ++c) flat[k++] = window(r, c);
    return flat;
}

}  // namespace

FfnnParams init_ffnn(const FfnnConfig& cfg) {
    if (cfg.win_size < 1 || cfg.hidden < 1) throw ConfigError("bad ffnn dimensions");
    if (cfg.feat_dim != kFeatureDim || cfg.classes != kNumActions)
        throw ConfigError("ffnn feat_dim/classes are fixed at 20/3");
    std::mt19937_64 rng(derive_seed(cfg.seed, 0xFF22));
    FfnnParams p;
    p.cfg = cfg;
    p.w1 = xavier(rng, cfg.win_size * cfg.feat_dim, cfg.hidden);
    p.b1 = Eigen::RowVectorXd::Zero(cfg.hidden);
    p.w2 = xavier(rng, cfg.hidden, cfg.classes);
    p.b2 = Eigen::RowVectorXd::Zero(cfg.classes);
    return p;
}

Eigen::Vector3d ffnn_forward(const FfnnParams& params, const Eigen::MatrixXd& window) {
    if (window.rows() != params.cfg.win_size || window.cols() != params.cfg.feat_dim)
        throw ConfigError("window shape does not match the ffnn input layer");
    const Eigen::RowVectorXd flat = flatten_window(window);
    const Eigen::RowVectorXd h = (flat * params.w1 + params.b1).unaryExpr([](double x) {
        return gelu(x);
    });
    return (h * params.w2 + params.b2).transpose();
}

std::pair<FfnnParams, TrainHistory> train_ffnn(const data::SplitDataset& ds, FfnnConfig cfg,
                                               const TrainOptions& opt, std::uint64_t seed) {
    cfg.win_size = ds.win_size;
    cfg.seed = derive_seed(seed, 0x1818);
    FfnnParams params = init_ffnn(cfg);

    Eigen::MatrixXd gw1 = Eigen::MatrixXd::Zero(params.w1.rows(), params.w1.cols());
    Eigen::RowVectorXd gb1 = Eigen::RowVectorXd::Zero(cfg.hidden);
    Eigen::MatrixXd gw2 = Eigen::MatrixXd::Zero(cfg.hidden, cfg.classes);
    Eigen::RowVectorXd gb2 = Eigen::RowVectorXd::Zero(cfg.classes);

    auto step = [&](const Eigen::MatrixXd& window, const Eigen::Vector3d& y) {
        const Eigen::RowVectorXd flat = flatten_window(window);
        const Eigen::RowVectorXd pre = flat * params.w1 + params.b1;
        const Eigen::RowVectorXd h = pre.unaryExpr([](double x) { return gelu(x); });
        const Eigen::Vector3d logits = (h * params.w2 + params.b2).transpose();

        const Eigen::RowVectorXd dlogits = (softmax3(logits) - y).transpose();
        gw2 += h.transpose() * dlogits;
        gb2 += dlogits;
        const Eigen::RowVectorXd dh = dlogits * params.w2.transpose();
        const Eigen::RowVectorXd dpre =
            (dh.array() * pre.unaryExpr([](double x) { return gelu_grad(x); }).array()).matrix();
        gw1 += flat.transpose() * dpre;
        gb1 += dpre;
        return loss(logits, y);
    };
    auto commit = [&](double scale) {
        params.w1 -= scale * gw1;
        params.b1 -= scale * gb1;
        params.w2 -= scale * gw2;
        params.b2 -= scale * gb2;
        gw1.setZero();
        gb1.setZero();
        gw2.setZero();
        gb2.setZero();
    };
    auto accuracy = [&](const std::vector<data::WindowTensor>& windows) {
        std::vector<ActionLabel> preds(windows.size());
        for (std::size_t i = 0; i < windows.size(); ++i)
            preds[i] = ffnn_predict(params, windows[i].data);
        return split_accuracy(windows, preds);
    };

    TrainHistory history = run_training(ds, opt, seed, step, commit, accuracy);
    return {std::move(params), std::move(history)};
}

ActionLabel ffnn_predict(const FfnnParams& params, const Eigen::MatrixXd& window) {
    return argmax_label(ffnn_forward(params, window));
}

EvalReport evaluate_ffnn(const FfnnParams& params,
                         const std::vector<data::WindowTensor>& windows) {
    std::vector<ActionLabel> truth(windows.size()), preds(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        truth[i] = windows[i].label;
        preds[i] = ffnn_predict(params, windows[i].data);
    }
    return evaluate_predictions(truth, preds);
}

// ---- window size study ----

std::vector<WindowSizeResult> window_size_study(const std::map<std::string, ActionLabel>& files,
                                                const std::vector<int>& sizes,
                                                TransformerConfig base, const TrainOptions& opt,
                                                double test_fraction, std::uint64_t seed) {
    std::vector<WindowSizeResult> results;
    for (int size : sizes) {
        const auto ds = data::build_split(files, size, test_fraction,
                                          derive_seed(seed, static_cast<std::uint64_t>(size)));
        TransformerConfig cfg = base;
        cfg.win_size = size;
        const auto [params, history] =
            train(ds, cfg, opt, derive_seed(seed, 5000 + static_cast<std::uint64_t>(size)));
        results.push_back({size, evaluate(params, ds.test).accuracy});
    }
    return results;
}

// ---- streaming prediction ----

StreamPredictor::StreamPredictor(ModelParams params, data::Standardizer standardizer,
                                 double frames_per_s, double period_s)
    : params_(std::move(params)),
      standardizer_(std::move(standardizer)),
      frames_per_s_(frames_per_s),
      period_s_(period_s),
      next_emit_s_(period_s) {
    if (!(frames_per_s > 0.0)) throw ConfigError("frames_per_s must be positive");
    if (!(period_s > 0.0)) throw ConfigError("emission period must be positive");
    buffer_.resize(params_.cfg.win_size, params_.cfg.feat_dim);
}

std::optional<ActionLabel> StreamPredictor::push(const net::FeatureFrame& frame,
                                                 double session_now_s) {
    last_frame_s_ = session_now_s;
    warned_ = false;

    for (int c = 0; c < params_.cfg.feat_dim; ++c)
        buffer_(next_row_, c) = frame.values[static_cast<std::size_t>(c)];
    next_row_ = (next_row_ + 1) % params_.cfg.win_size;
    if (filled_ < params_.cfg.win_size) ++filled_;

    const double stream_t = static_cast<double>(frame.index) / frames_per_s_;
    if (filled_ < params_.cfg.win_size || stream_t < next_emit_s_) return std::nullopt;

    // Reassemble chronological order from the ring.
    Eigen::MatrixXd window(params_.cfg.win_size, params_.cfg.feat_dim);
    const int n = params_.cfg.win_size;
    for (int r = 0; r < n; ++r) window.row(r) = buffer_.row((next_row_ + r) % n);

    next_emit_s_ = stream_t + period_s_;
    ++emissions_;
    return predict(params_, standardizer_.apply(window));
}

bool StreamPredictor::starved(double session_now_s) {
    if (warned_) return false;
    if (session_now_s - last_frame_s_ > 2.0 * period_s_) {
        warned_ = true;
        return true;
    }
    return false;
}

// ---- model container ----

namespace {

constexpr char kModelMagic[8] = {'N', 'A', 'R', 'M', 'T', 'F', '1', '\n'};

void write_row(std::ostream& out, const Eigen::RowVectorXd& v) {
    binio::write_matrix(out, v);
}

Eigen::RowVectorXd read_row(std::istream& in) {
    const Eigen::MatrixXd m = binio::read_matrix(in);
    if (m.rows() != 1) throw IoError("expected a row vector in model container");
    return m.row(0);
}

}  // namespace

void save_model(const std::string& path, const ModelParams& params,
                const data::Standardizer& standardizer) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for write: " + path);
    out.write(kModelMagic, sizeof kModelMagic);
    binio::write_u32(out, 1);  // container version
    binio::write_u32(out, static_cast<std::uint32_t>(params.cfg.win_size));
    binio::write_u32(out, static_cast<std::uint32_t>(params.cfg.feat_dim));
    binio::write_u32(out, static_cast<std::uint32_t>(params.cfg.model_dim));
    binio::write_u32(out, static_cast<std::uint32_t>(params.cfg.heads));
    binio::write_u32(out, static_cast<std::uint32_t>(params.cfg.ff_dim));
    binio::write_u32(out, static_cast<std::uint32_t>(params.cfg.classes));
    binio::write_u64(out, params.cfg.seed);

    binio::write_matrix(out, standardizer.mean);
    binio::write_matrix(out, standardizer.std);
    binio::write_u32(out, static_cast<std::uint32_t>(standardizer.degenerate_cols.size()));
    for (int c : standardizer.degenerate_cols) binio::write_u32(out, static_cast<std::uint32_t>(c));

    binio::write_matrix(out, params.w_in);
    write_row(out, params.b_in);
    binio::write_matrix(out, params.w_q);
    write_row(out, params.b_q);
    binio::write_matrix(out, params.w_k);
    write_row(out, params.b_k);
    binio::write_matrix(out, params.w_v);
    write_row(out, params.b_v);
    binio::write_matrix(out, params.w_o);
    write_row(out, params.b_o);
    write_row(out, params.ln_gain);
    write_row(out, params.ln_bias);
    binio::write_matrix(out, params.w_ff1);
    write_row(out, params.b_ff1);
    binio::write_matrix(out, params.w_ff2);
    write_row(out, params.b_ff2);
    if (!out) throw IoError("write failed: " + path);
}

std::pair<ModelParams, data::Standardizer> load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || !std::equal(magic, magic + 8, kModelMagic))
        throw IoError("not a model container: " + path);
    if (binio::read_u32(in) != 1) throw IoError("unsupported model container version");

    TransformerConfig cfg;
    cfg.win_size = static_cast<int>(binio::read_u32(in));
    cfg.feat_dim = static_cast<int>(binio::read_u32(in));
    cfg.model_dim = static_cast<int>(binio::read_u32(in));
    cfg.heads = static_cast<int>(binio::read_u32(in));
    cfg.ff_dim = static_cast<int>(binio::read_u32(in));
    cfg.classes = static_cast<int>(binio::read_u32(in));
    cfg.seed = binio::read_u64(in);
    cfg.validate();

    data::Standardizer st;
    st.mean = binio::read_matrix(in);
    st.std = binio::read_matrix(in);
    const std::uint32_t ndeg = binio::read_u32(in);
    for (std::uint32_t i = 0; i < ndeg; ++i)
        st.degenerate_cols.push_back(static_cast<int>(binio::read_u32(in)));

    ModelParams p;
    p.cfg = cfg;
    p.w_in = binio::read_matrix(in);
    p.b_in = read_row(in);
    p.w_q = binio::read_matrix(in);
    p.b_q = read_row(in);
    p.w_k = binio::read_matrix(in);
    p.b_k = read_row(in);
    p.w_v = binio::read_matrix(in);
    p.b_v = read_row(in);
    p.w_o = binio::read_matrix(in);
    p.b_o = read_row(in);
    p.ln_gain = read_row(in);
    p.ln_bias = read_row(in);
    p.w_ff1 = binio::read_matrix(in);
    p.b_ff1 = read_row(in);
    p.w_ff2 = binio::read_matrix(in);
    p.b_ff2 = read_row(in);
    if (!in) throw IoError("truncated model container: " + path);
    if (p.w_in.rows() != cfg.feat_dim || p.w_in.cols() != cfg.model_dim ||
        p.w_ff2.cols() != cfg.classes)
        throw IoError("model container shapes disagree with the header");
    return {std::move(p), std::move(st)};
}

void save_history(const std::string& path, const TrainHistory& history) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for write: " + path);
    out << "epoch,train_loss,train_acc,val_acc\n";
    for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
        out << e << ',' << format_sig9(history.train_loss[e]) << ','
            << format_sig9(history.train_acc[e]) << ',' << format_sig9(history.val_acc[e]) << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace neuroarm::model
