#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "oasis/nn.hpp"

namespace oasis {

/// Diagonal loading applied to every class covariance:
/// gamma = max(relative * trace / dim, floor).
struct Shrinkage {
    double relative = 1e-3;
    double floor = 1e-9;
};

struct ClassGaussian {
    Vector mean;
    Matrix covariance; // after shrinkage
    Matrix inverse;
    std::size_t count = 0;
    double shrinkage = 0.0;
};

/// One Mahalanobis distance per seen class, indexed by class label.
using MDSet = std::vector<double>;

/// Class-conditional Gaussians over latent vectors for labels 0..K-1.
/// Immutable once fitted.
class ClassStats {
public:
    ClassStats() = default;
    explicit ClassStats(std::vector<ClassGaussian> classes);

    int num_classes() const noexcept { return static_cast<int>(classes_.size()); }
    int dim() const noexcept { return classes_.empty() ? 0 : static_cast<int>(classes_.front().mean.size()); }
    const ClassGaussian& at(int label) const;
    const std::vector<ClassGaussian>& classes() const noexcept { return classes_; }

    bool operator==(const ClassStats& other) const;

private:
    std::vector<ClassGaussian> classes_;
};

ClassStats fit_stats(std::span<const Vector> latents, std::span<const int> labels, int num_classes,
                     Shrinkage shrinkage = {});

double mahalanobis(const ClassStats& stats, int label, const Vector& z);

MDSet md_set(const ClassStats& stats, const Vector& z);

/// Second-smallest minus smallest entry.
double md_margin(const MDSet& m);

/// Index of the smallest entry, lowest index on ties.
int nearest_class(const MDSet& m);

/// Argmin of the class-`label` distance over `class_latents`; lowest index wins ties.
std::size_t select_anchor(const ClassStats& stats, std::span<const Vector> class_latents, int label);

/// Indices whose class-`label` distance is strictly above `threshold`, ascending.
std::vector<std::size_t> select_borderline(const ClassStats& stats, std::span<const Vector> class_latents, int label,
                                           double threshold);

/// Mean distance of every sample to its own class.
double mean_intra_class_distance(const ClassStats& stats, std::span<const Vector> latents, std::span<const int> labels);

/// Plain-text dump of every class mean and covariance.
void write_stats_text(std::ostream& os, const ClassStats& stats);

} // namespace oasis
