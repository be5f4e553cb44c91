#pragma once

#include "semprop/dataset.hpp"
#include "semprop/random.hpp"
#include "semprop/types.hpp"

#include <cstdio>
#include <random>

namespace semprop {

/// Hierarchical Gaussian-cluster generator: family centers spawn genus
/// centers spawn species prototypes; images scatter around prototypes and
/// semantic vectors are noisy copies of the prototypes.
struct SynthConfig {
    int families = 3;
    int genera_per_family = 2;
    int species_per_genus = 2;
    int dim = 20;
    int images_per_class = 30;
    double family_spread = 10.0;
    double genus_spread = 4.0;
    double species_spread = 2.0;
    double feature_noise = 1.0;
    // Semantic vectors are prototypes mapped into a compact description
    // space: scaled so inter-class distances land where exp(-d) still
    // separates near from far neighbors, plus a little annotation noise.
    double semantic_scale = 0.15;
    double semantic_noise = 0.02;
    std::uint64_t seed = 42;
};

struct SynthData {
    FeatureDataset images;  // fully labeled with species ids
    Hierarchy hierarchy;
    std::vector<ClassId> species_order;
    std::unordered_map<ClassId, Vector> semantic_vectors;
};

inline SynthData make_synthetic(const SynthConfig& cfg) {
    if (cfg.families < 1 || cfg.genera_per_family < 1 || cfg.species_per_genus < 1)
        throw Error("make_synthetic: taxonomy sizes must be positive");
    if (cfg.dim < 1 || cfg.images_per_class < 1)
        throw Error("make_synthetic: dim and images_per_class must be positive");

    std::mt19937_64 rng(cfg.seed);
    auto gaussian = [&](double spread, const Vector& center) {
        Vector v(cfg.dim);
        for (Eigen::Index i = 0; i < v.size(); ++i)
            v[i] = center.size() ? center[i] + spread * detail::normal_unit(rng)
                                 : spread * detail::normal_unit(rng);
        return v;
    };
    auto name = [](const char* prefix, int i, int width = 2) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, i);
        return std::string(buf);
    };

    SynthData data;
    std::vector<Vector> prototypes;
    int genus_counter = 0, species_counter = 0;
    for (int f = 0; f < cfg.families; ++f) {
        const Vector family_center = gaussian(cfg.family_spread, Vector());
        for (int g = 0; g < cfg.genera_per_family; ++g, ++genus_counter) {
            const Vector genus_center = gaussian(cfg.genus_spread, family_center);
            for (int s = 0; s < cfg.species_per_genus; ++s, ++species_counter) {
                const Vector proto = gaussian(cfg.species_spread, genus_center);
                const ClassId species = name("sp", species_counter);
                data.hierarchy.add(species, name("ge", genus_counter), name("fa", f));
                data.species_order.push_back(species);
                data.semantic_vectors.emplace(
                    species, gaussian(cfg.semantic_noise, cfg.semantic_scale * proto));
                prototypes.push_back(proto);
            }
        }
    }

    const auto n_classes = static_cast<Eigen::Index>(data.species_order.size());
    data.images.features.resize(n_classes * cfg.images_per_class, cfg.dim);
    int image_counter = 0;
    for (Eigen::Index c = 0; c < n_classes; ++c)
        for (int k = 0; k < cfg.images_per_class; ++k, ++image_counter) {
            data.images.features.row(image_counter) =
                gaussian(cfg.feature_noise, prototypes[static_cast<std::size_t>(c)]).transpose();
            data.images.image_ids.push_back(name("img", image_counter, 5));
            data.images.labels.push_back(data.species_order[static_cast<std::size_t>(c)]);
        }
    return data;
}

}  // namespace semprop
