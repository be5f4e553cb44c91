#pragma once

#include "semprop/dataset.hpp"
#include "semprop/random.hpp"
#include "semprop/types.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <random>

namespace semprop {

/// Where the domain classifier reads its input: the species head's
/// penultimate features (the G_d(G_s(...)) composition) or the raw trunk
/// activation at the species tap.
enum class DomainTap { species_penultimate, species_trunk_tap };

struct Layer {
    Matrix W;
    Vector b;
};

/// Trunk + three classification heads at increasing depth + domain head.
/// Heads are one hidden (rectified) layer followed by a linear output;
/// the domain head stacks its hidden layers the same way.
struct HierNetParams {
    std::vector<Layer> trunk;
    std::vector<Layer> family_head, genus_head, species_head;  // {hidden, output}
    std::vector<Layer> domain_head;                            // hiddens..., output (2-way)
    std::array<int, 3> taps{1, 2, 3};  // 1-based trunk layer index per family/genus/species
    DomainTap domain_tap = DomainTap::species_penultimate;

    Eigen::Index input_dim() const { return trunk.empty() ? 0 : trunk.front().W.cols(); }
};

using HierNetGrads = HierNetParams;  // same shapes, used as gradient/velocity buffers

struct TrainConfig {
    double mu_f = 1.0;
    double mu_g = 1.0;
    double mu_d = 0.1;
    double learning_rate = 0.01;
    double momentum = 0.9;
    int batch_size = 20;
    std::uint64_t seed = 1;

    void validate() const {
        if (!(learning_rate > 0.0)) throw Error("train config: learning_rate must be positive");
        if (!(momentum >= 0.0 && momentum < 1.0))
            throw Error("train config: momentum must lie in [0,1)");
        if (batch_size < 1) throw Error("train config: batch_size must be positive");
        if (mu_f < 0.0 || mu_g < 0.0 || mu_d < 0.0)
            throw Error("train config: loss weights must be nonnegative");
    }
};

/// One training/test point. Label indices are -1 for unlabeled
/// (target-domain) samples; domain is 0 for source, 1 for target.
struct HierSample {
    Vector x;
    int family = -1;
    int genus = -1;
    int species = -1;
    int domain = 0;

    bool labeled() const { return family >= 0 && genus >= 0 && species >= 0; }
};

struct HierNetShape {
    int input_dim = 0;
    std::vector<int> trunk_widths{32, 32, 32};
    std::array<int, 3> taps{1, 2, 3};
    int family_hidden = 16, genus_hidden = 16, species_hidden = 16;
    int family_classes = 0, genus_classes = 0, species_classes = 0;
    std::vector<int> domain_hidden{16, 8};
    DomainTap domain_tap = DomainTap::species_penultimate;
};

namespace detail {

inline Layer random_layer(Eigen::Index out, Eigen::Index in, std::mt19937_64& rng) {
    Layer layer;
    layer.W.resize(out, in);
    const double a = 1.0 / std::sqrt(static_cast<double>(in));
    for (Eigen::Index i = 0; i < out; ++i)
        for (Eigen::Index j = 0; j < in; ++j)
            layer.W(i, j) = (2.0 * uniform_unit(rng) - 1.0) * a;
    layer.b = Vector::Zero(out);
    return layer;
}

inline Vector relu(const Vector& z) { return z.cwiseMax(0.0); }

inline Vector relu_mask(const Vector& z, const Vector& g) {
    Vector out = g;
    for (Eigen::Index i = 0; i < z.size(); ++i)
        if (z[i] <= 0.0) out[i] = 0.0;
    return out;
}

}  // namespace detail

inline HierNetParams init_params(const HierNetShape& shape, std::uint64_t seed) {
    if (shape.input_dim < 1) throw Error("init_params: input_dim must be positive");
    if (shape.trunk_widths.empty()) throw Error("init_params: trunk must have at least one layer");
    const int depth = static_cast<int>(shape.trunk_widths.size());
    if (!(shape.taps[0] >= 1 && shape.taps[0] < shape.taps[1] && shape.taps[1] < shape.taps[2] &&
          shape.taps[2] <= depth))
        throw Error("init_params: taps must be strictly increasing within the trunk depth");
    if (shape.family_classes < 1 || shape.genus_classes < 1 || shape.species_classes < 1)
        throw Error("init_params: every level needs at least one class");

    std::mt19937_64 rng(seed);
    HierNetParams params;
    params.taps = shape.taps;
    params.domain_tap = shape.domain_tap;

    int in = shape.input_dim;
    for (int width : shape.trunk_widths) {
        params.trunk.push_back(detail::random_layer(width, in, rng));
        in = width;
    }
    auto make_head = [&](int tap, int hidden, int classes) {
        std::vector<Layer> head;
        const int tap_width = shape.trunk_widths[static_cast<std::size_t>(tap - 1)];
        head.push_back(detail::random_layer(hidden, tap_width, rng));
        head.push_back(detail::random_layer(classes, hidden, rng));
        return head;
    };
    params.family_head = make_head(shape.taps[0], shape.family_hidden, shape.family_classes);
    params.genus_head = make_head(shape.taps[1], shape.genus_hidden, shape.genus_classes);
    params.species_head = make_head(shape.taps[2], shape.species_hidden, shape.species_classes);

    int din = shape.domain_tap == DomainTap::species_penultimate
                  ? shape.species_hidden
                  : shape.trunk_widths[static_cast<std::size_t>(shape.taps[2] - 1)];
    for (int width : shape.domain_hidden) {
        params.domain_head.push_back(detail::random_layer(width, din, rng));
        din = width;
    }
    params.domain_head.push_back(detail::random_layer(2, din, rng));
    return params;
}

struct ForwardResult {
    Vector family_logits, genus_logits, species_logits, domain_logits;
    Vector family_penult, genus_penult, species_penult;
};

namespace detail {

struct HeadCache {
    Vector hidden_pre, penult, logits;
};

struct ForwardCache {
    std::vector<Vector> trunk_pre, trunk_act;
    HeadCache family, genus, species;
    std::vector<Vector> domain_pre, domain_act;  // per hidden layer
    Vector domain_logits;
};

inline HeadCache run_head(const std::vector<Layer>& head, const Vector& input) {
    HeadCache cache;
    cache.hidden_pre = head[0].W * input + head[0].b;
    cache.penult = relu(cache.hidden_pre);
    cache.logits = head[1].W * cache.penult + head[1].b;
    return cache;
}

inline ForwardCache forward_cache(const Vector& x, const HierNetParams& params) {
    if (x.size() != params.input_dim())
        throw Error("forward: input has dimension " + std::to_string(x.size()) +
                    ", trunk expects " + std::to_string(params.input_dim()));
    ForwardCache cache;
    Vector act = x;
    for (const auto& layer : params.trunk) {
        cache.trunk_pre.push_back(layer.W * act + layer.b);
        cache.trunk_act.push_back(relu(cache.trunk_pre.back()));
        act = cache.trunk_act.back();
    }
    auto tap_act = [&](int tap) -> const Vector& {
        return cache.trunk_act[static_cast<std::size_t>(tap - 1)];
    };
    cache.family = run_head(params.family_head, tap_act(params.taps[0]));
    cache.genus = run_head(params.genus_head, tap_act(params.taps[1]));
    cache.species = run_head(params.species_head, tap_act(params.taps[2]));

    Vector d = params.domain_tap == DomainTap::species_penultimate ? cache.species.penult
                                                                   : tap_act(params.taps[2]);
    const std::size_t hidden_layers = params.domain_head.size() - 1;
    for (std::size_t i = 0; i < hidden_layers; ++i) {
        cache.domain_pre.push_back(params.domain_head[i].W * d + params.domain_head[i].b);
        cache.domain_act.push_back(relu(cache.domain_pre.back()));
        d = cache.domain_act.back();
    }
    cache.domain_logits = params.domain_head.back().W * d + params.domain_head.back().b;
    return cache;
}

}  // namespace detail

inline ForwardResult forward(const Vector& x, const HierNetParams& params) {
    const auto cache = detail::forward_cache(x, params);
    ForwardResult out;
    out.family_logits = cache.family.logits;
    out.genus_logits = cache.genus.logits;
    out.species_logits = cache.species.logits;
    out.domain_logits = cache.domain_logits;
    out.family_penult = cache.family.penult;
    out.genus_penult = cache.genus.penult;
    out.species_penult = cache.species.penult;
    return out;
}

inline double softmax_cross_entropy(const Vector& logits, int label) {
    if (label < 0 || label >= logits.size())
        throw Error("softmax_cross_entropy: label " + std::to_string(label) + " out of range");
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    return lse - logits[label];
}

inline double hierarchical_loss(const HierSample& sample, const ForwardResult& outputs,
                                const TrainConfig& config) {
    if (!sample.labeled())
        throw Error("hierarchical_loss: sample lacks a family/genus/species label");
    return config.mu_f * softmax_cross_entropy(outputs.family_logits, sample.family) +
           config.mu_g * softmax_cross_entropy(outputs.genus_logits, sample.genus) +
           softmax_cross_entropy(outputs.species_logits, sample.species);
}

inline double domain_loss(const HierSample& sample, const ForwardResult& outputs) {
    return softmax_cross_entropy(outputs.domain_logits, sample.domain);
}

/// Adversarial total: hierarchical terms (labeled samples only) minus
/// mu_d times the domain loss. May be negative.
inline double total_loss(const HierSample& sample, const ForwardResult& outputs,
                         const TrainConfig& config) {
    const double ld = domain_loss(sample, outputs);
    if (!sample.labeled()) return -config.mu_d * ld;
    return hierarchical_loss(sample, outputs, config) - config.mu_d * ld;
}

namespace detail {

inline Layer zeros_like(const Layer& layer) {
    return {Matrix::Zero(layer.W.rows(), layer.W.cols()), Vector::Zero(layer.b.size())};
}

inline std::vector<Layer> zeros_like(const std::vector<Layer>& layers) {
    std::vector<Layer> out;
    out.reserve(layers.size());
    for (const auto& l : layers) out.push_back(zeros_like(l));
    return out;
}

inline Vector softmax_grad(const Vector& logits, int label) {
    const double m = logits.maxCoeff();
    Vector g = (logits.array() - m).exp();
    g /= g.sum();
    g[label] -= 1.0;
    return g;
}

// Backprop through a two-layer head; returns the gradient w.r.t. the tap
// activation. `dlogits` already carries the loss weight and batch scale.
inline Vector backprop_head(const std::vector<Layer>& head, const HeadCache& cache,
                            const Vector& tap_input, const Vector& dlogits,
                            std::vector<Layer>& grads) {
    grads[1].W += dlogits * cache.penult.transpose();
    grads[1].b += dlogits;
    const Vector dpenult = head[1].W.transpose() * dlogits;
    const Vector dhidden = relu_mask(cache.hidden_pre, dpenult);
    grads[0].W += dhidden * tap_input.transpose();
    grads[0].b += dhidden;
    return head[0].W.transpose() * dhidden;
}

// Backprop accumulated tap gradients through the trunk down to the input.
inline void backprop_trunk(const HierNetParams& params, const ForwardCache& cache,
                           const Vector& x, std::vector<Vector>& act_grads,
                           std::vector<Layer>& grads) {
    for (int i = static_cast<int>(params.trunk.size()) - 1; i >= 0; --i) {
        const auto ui = static_cast<std::size_t>(i);
        const Vector dz = relu_mask(cache.trunk_pre[ui], act_grads[ui]);
        const Vector& input = i == 0 ? x : cache.trunk_act[ui - 1];
        grads[ui].W += dz * input.transpose();
        grads[ui].b += dz;
        if (i > 0) act_grads[ui - 1] += params.trunk[ui].W.transpose() * dz;
    }
}

// Unreversed domain-loss backprop for one sample; accumulates into `grads`
// with weight `scale` on every touched parameter group.
inline void backprop_domain_sample(const HierSample& sample, const HierNetParams& params,
                                   const ForwardCache& cache, double scale,
                                   HierNetGrads& grads) {
    Vector dlogits = scale * softmax_grad(cache.domain_logits, sample.domain);
    const std::size_t last = params.domain_head.size() - 1;
    const Vector& tap_act = cache.trunk_act[static_cast<std::size_t>(params.taps[2] - 1)];
    auto domain_input = [&](std::size_t i) -> const Vector& {
        if (i > 0) return cache.domain_act[i - 1];
        return params.domain_tap == DomainTap::species_penultimate ? cache.species.penult
                                                                   : tap_act;
    };
    grads.domain_head[last].W += dlogits * domain_input(last).transpose();
    grads.domain_head[last].b += dlogits;
    Vector dact = params.domain_head[last].W.transpose() * dlogits;
    for (std::size_t i = last; i-- > 0;) {
        const Vector dz = relu_mask(cache.domain_pre[i], dact);
        grads.domain_head[i].W += dz * domain_input(i).transpose();
        grads.domain_head[i].b += dz;
        dact = params.domain_head[i].W.transpose() * dz;
    }

    std::vector<Vector> act_grads;
    for (const auto& a : cache.trunk_act) act_grads.push_back(Vector::Zero(a.size()));
    if (params.domain_tap == DomainTap::species_penultimate) {
        // Continue through the species hidden layer into the trunk.
        const Vector dhidden = relu_mask(cache.species.hidden_pre, dact);
        grads.species_head[0].W += dhidden * tap_act.transpose();
        grads.species_head[0].b += dhidden;
        act_grads[static_cast<std::size_t>(params.taps[2] - 1)] +=
            params.species_head[0].W.transpose() * dhidden;
    } else {
        act_grads[static_cast<std::size_t>(params.taps[2] - 1)] += dact;
    }
    backprop_trunk(params, cache, sample.x, act_grads, grads.trunk);
}

}  // namespace detail

inline HierNetGrads zero_grads(const HierNetParams& params) {
    HierNetGrads g;
    g.trunk = detail::zeros_like(params.trunk);
    g.family_head = detail::zeros_like(params.family_head);
    g.genus_head = detail::zeros_like(params.genus_head);
    g.species_head = detail::zeros_like(params.species_head);
    g.domain_head = detail::zeros_like(params.domain_head);
    g.taps = params.taps;
    g.domain_tap = params.domain_tap;
    return g;
}

/// Batch-mean gradient of the plain (unreversed) domain loss with respect
/// to every parameter the domain path touches.
inline HierNetGrads domain_loss_gradients(const std::vector<HierSample>& batch,
                                          const HierNetParams& params) {
    if (batch.empty()) throw Error("domain_loss_gradients: empty batch");
    HierNetGrads grads = zero_grads(params);
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const auto& sample : batch) {
        const auto cache = detail::forward_cache(sample.x, params);
        detail::backprop_domain_sample(sample, params, cache, scale, grads);
    }
    return grads;
}

/// Training gradient for one batch: trunk and classification heads carry
/// the gradient of mean(L_h) - mu_d * mean(L_d) (the domain contribution
/// is sign-flipped and scaled at the reversal point); the domain head
/// carries the plain gradient of mean(L_d).
inline HierNetGrads compute_gradients(const std::vector<HierSample>& batch,
                                      const HierNetParams& params, const TrainConfig& config) {
    if (batch.empty()) throw Error("compute_gradients: empty batch");
    HierNetGrads grads = zero_grads(params);
    HierNetGrads domain_grads = zero_grads(params);
    const double scale = 1.0 / static_cast<double>(batch.size());

    for (const auto& sample : batch) {
        const auto cache = detail::forward_cache(sample.x, params);
        if (sample.labeled()) {
            std::vector<Vector> act_grads;
            for (const auto& a : cache.trunk_act) act_grads.push_back(Vector::Zero(a.size()));
            auto tap_act = [&](int tap) -> const Vector& {
                return cache.trunk_act[static_cast<std::size_t>(tap - 1)];
            };
            const Vector df =
                scale * config.mu_f * detail::softmax_grad(cache.family.logits, sample.family);
            act_grads[static_cast<std::size_t>(params.taps[0] - 1)] += detail::backprop_head(
                params.family_head, cache.family, tap_act(params.taps[0]), df, grads.family_head);
            const Vector dg =
                scale * config.mu_g * detail::softmax_grad(cache.genus.logits, sample.genus);
            act_grads[static_cast<std::size_t>(params.taps[1] - 1)] += detail::backprop_head(
                params.genus_head, cache.genus, tap_act(params.taps[1]), dg, grads.genus_head);
            const Vector ds = scale * detail::softmax_grad(cache.species.logits, sample.species);
            act_grads[static_cast<std::size_t>(params.taps[2] - 1)] +=
                detail::backprop_head(params.species_head, cache.species, tap_act(params.taps[2]),
                                      ds, grads.species_head);
            detail::backprop_trunk(params, cache, sample.x, act_grads, grads.trunk);
        }
        detail::backprop_domain_sample(sample, params, cache, scale, domain_grads);
    }

    // Gradient reversal: shared parameters see -mu_d times the domain
    // gradient; the domain head descends it unchanged.
    auto add_scaled = [&](std::vector<Layer>& dst, const std::vector<Layer>& src, double factor) {
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i].W += factor * src[i].W;
            dst[i].b += factor * src[i].b;
        }
    };
    add_scaled(grads.trunk, domain_grads.trunk, -config.mu_d);
    add_scaled(grads.species_head, domain_grads.species_head, -config.mu_d);
    grads.domain_head = std::move(domain_grads.domain_head);
    return grads;
}

/// Objective the shared parameters descend: mean hierarchical loss over
/// labeled samples (normalized by the full batch size) minus mu_d times
/// the mean domain loss. Used by finite-difference checks.
inline double batch_shared_objective(const std::vector<HierSample>& batch,
                                     const HierNetParams& params, const TrainConfig& config) {
    double hier = 0.0, dom = 0.0;
    for (const auto& sample : batch) {
        const auto out = forward(sample.x, params);
        if (sample.labeled()) hier += hierarchical_loss(sample, out, config);
        dom += domain_loss(sample, out);
    }
    const double n = static_cast<double>(batch.size());
    return hier / n - config.mu_d * dom / n;
}

inline double batch_domain_objective(const std::vector<HierSample>& batch,
                                     const HierNetParams& params) {
    double dom = 0.0;
    for (const auto& sample : batch) dom += domain_loss(sample, forward(sample.x, params));
    return dom / static_cast<double>(batch.size());
}

struct MomentumState {
    HierNetGrads velocity;
    bool initialized = false;
};

/// One SGD-with-momentum step: v <- momentum v - lr g; theta <- theta + v.
inline void train_step(const std::vector<HierSample>& batch, HierNetParams& params,
                       const TrainConfig& config, MomentumState& state) {
    if (batch.empty()) throw Error("train_step: empty batch");
    config.validate();
    for (const auto& sample : batch) {
        const auto out = forward(sample.x, params);
        if (sample.labeled()) {
            if (!std::isfinite(softmax_cross_entropy(out.family_logits, sample.family)))
                throw Error("train_step: family loss is non-finite");
            if (!std::isfinite(softmax_cross_entropy(out.genus_logits, sample.genus)))
                throw Error("train_step: genus loss is non-finite");
            if (!std::isfinite(softmax_cross_entropy(out.species_logits, sample.species)))
                throw Error("train_step: species loss is non-finite");
        }
        if (!std::isfinite(domain_loss(sample, out)))
            throw Error("train_step: domain loss is non-finite");
    }
    HierNetGrads grads = compute_gradients(batch, params, config);

    if (!state.initialized) {
        state.velocity = zero_grads(params);
        state.initialized = true;
    }
    auto update_group = [&](std::vector<Layer>& theta, std::vector<Layer>& v,
                            const std::vector<Layer>& g, const char* name) {
        for (std::size_t i = 0; i < theta.size(); ++i) {
            if (!g[i].W.allFinite() || !g[i].b.allFinite())
                throw Error(std::string("train_step: non-finite gradient in ") + name);
            v[i].W = config.momentum * v[i].W - config.learning_rate * g[i].W;
            v[i].b = config.momentum * v[i].b - config.learning_rate * g[i].b;
            theta[i].W += v[i].W;
            theta[i].b += v[i].b;
            if (!theta[i].W.allFinite() || !theta[i].b.allFinite())
                throw Error(std::string("train_step: non-finite parameters in ") + name);
        }
    };
    update_group(params.trunk, state.velocity.trunk, grads.trunk, "trunk");
    update_group(params.family_head, state.velocity.family_head, grads.family_head, "family head");
    update_group(params.genus_head, state.velocity.genus_head, grads.genus_head, "genus head");
    update_group(params.species_head, state.velocity.species_head, grads.species_head,
                 "species head");
    update_group(params.domain_head, state.velocity.domain_head, grads.domain_head, "domain head");
}

/// Concatenated penultimate features in order species, genus, family.
inline Vector extract_features(const Vector& x, const HierNetParams& params) {
    const auto out = forward(x, params);
    Vector features(out.species_penult.size() + out.genus_penult.size() +
                    out.family_penult.size());
    features << out.species_penult, out.genus_penult, out.family_penult;
    return features;
}

inline double mean_hierarchical_loss(const std::vector<HierSample>& samples,
                                     const HierNetParams& params, const TrainConfig& config) {
    double total = 0.0;
    int labeled = 0;
    for (const auto& s : samples) {
        if (!s.labeled()) continue;
        total += hierarchical_loss(s, forward(s.x, params), config);
        ++labeled;
    }
    if (labeled == 0) throw Error("mean_hierarchical_loss: no labeled samples");
    return total / labeled;
}

/// Epoch loop over shuffled minibatches. Samples may mix labeled source
/// rows and unlabeled target rows; every sample feeds the domain term.
inline void train_network(const std::vector<HierSample>& samples, HierNetParams& params,
                          const TrainConfig& config, int epochs) {
    if (samples.empty()) throw Error("train_network: no samples");
    config.validate();
    MomentumState state;
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        detail::seeded_shuffle(order, rng);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            std::vector<HierSample> batch;
            batch.reserve(end - start);
            for (std::size_t k = start; k < end; ++k) batch.push_back(samples[order[k]]);
            train_step(batch, params, config, state);
        }
    }
}

/// Builds training samples from a labeled dataset and the taxonomy.
/// Unlabeled rows become target-domain samples carrying only features.
inline std::vector<HierSample> make_samples(const FeatureDataset& data, const Hierarchy& hier,
                                            int domain_flag) {
    data.validate();
    std::vector<HierSample> samples;
    samples.reserve(static_cast<std::size_t>(data.size()));
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        HierSample s;
        s.x = data.features.row(i).transpose();
        s.domain = domain_flag;
        const auto& label = data.labels[static_cast<std::size_t>(i)];
        if (!label.empty()) {
            const auto genus = hier.genus_of(label);
            s.species = hier.species_index.at(label);
            s.genus = hier.genus_index.at(genus);
            s.family = hier.family_index.at(hier.family_of_genus.at(genus));
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace semprop
