#pragma once

#include "semprop/types.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace semprop {

/// Rows of per-image features with optional class labels (empty string =
/// unlabeled test row).
struct FeatureDataset {
    std::vector<std::string> image_ids;
    Matrix features;                 // N x d_feat
    std::vector<ClassId> labels;     // size N; "" for unlabeled rows

    Eigen::Index size() const { return features.rows(); }
    Eigen::Index dim() const { return features.cols(); }

    void validate() const {
        const auto n = static_cast<std::size_t>(features.rows());
        if (image_ids.size() != n || labels.size() != n)
            throw Error("feature dataset: ids/labels/features row counts disagree");
        if (!features.allFinite()) throw Error("feature dataset: non-finite feature values");
    }

    /// Rows whose label passes `keep`; labels are carried over.
    template <typename Pred>
    FeatureDataset filter(Pred keep) const {
        FeatureDataset out;
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < size(); ++i)
            if (keep(labels[static_cast<std::size_t>(i)])) rows.push_back(i);
        out.features.resize(static_cast<Eigen::Index>(rows.size()), dim());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            out.features.row(static_cast<Eigen::Index>(r)) = features.row(rows[r]);
            out.image_ids.push_back(image_ids[static_cast<std::size_t>(rows[r])]);
            out.labels.push_back(labels[static_cast<std::size_t>(rows[r])]);
        }
        return out;
    }
};

/// Species -> genus -> family taxonomy. Ids at each level are indexed in
/// first-appearance order of the species rows.
struct Hierarchy {
    std::vector<ClassId> species_ids, genus_ids, family_ids;
    std::unordered_map<ClassId, ClassId> genus_of_species;
    std::unordered_map<ClassId, ClassId> family_of_genus;
    std::unordered_map<ClassId, int> species_index, genus_index, family_index;

    void add(const ClassId& species, const ClassId& genus, const ClassId& family) {
        if (species_index.count(species))
            throw Error("hierarchy: duplicate species '" + species + "'");
        species_index.emplace(species, static_cast<int>(species_ids.size()));
        species_ids.push_back(species);
        auto gi = genus_of_species.emplace(species, genus);
        (void)gi;
        if (!genus_index.count(genus)) {
            genus_index.emplace(genus, static_cast<int>(genus_ids.size()));
            genus_ids.push_back(genus);
            family_of_genus.emplace(genus, family);
            if (!family_index.count(family)) {
                family_index.emplace(family, static_cast<int>(family_ids.size()));
                family_ids.push_back(family);
            }
        } else if (family_of_genus.at(genus) != family) {
            throw Error("hierarchy: genus '" + genus + "' maps to conflicting families '" +
                        family_of_genus.at(genus) + "' and '" + family + "'");
        }
    }

    ClassId genus_of(const ClassId& species) const {
        auto it = genus_of_species.find(species);
        if (it == genus_of_species.end())
            throw Error("hierarchy: unknown species '" + species + "'");
        return it->second;
    }

    ClassId family_of_species(const ClassId& species) const {
        return family_of_genus.at(genus_of(species));
    }
};

}  // namespace semprop
