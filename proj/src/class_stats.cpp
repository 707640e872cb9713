#include "oasis/class_stats.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>

#include "oasis/error.hpp"

namespace oasis {

ClassStats::ClassStats(std::vector<ClassGaussian> classes) : classes_(std::move(classes)) {}

const ClassGaussian& ClassStats::at(int label) const
{
    if (label < 0 || label >= num_classes())
        fail(ErrorKind::InvalidLabel, "class " + std::to_string(label) + " has no fitted statistics");
    return classes_[static_cast<std::size_t>(label)];
}

bool ClassStats::operator==(const ClassStats& other) const
{
    if (classes_.size() != other.classes_.size())
        return false;
    for (std::size_t c = 0; c < classes_.size(); ++c) {
        const auto& a = classes_[c];
        const auto& b = other.classes_[c];
        if (a.count != b.count || a.shrinkage != b.shrinkage || a.mean.size() != b.mean.size() ||
            a.mean != b.mean || a.covariance != b.covariance || a.inverse != b.inverse)
            return false;
    }
    return true;
}

ClassStats fit_stats(std::span<const Vector> latents, std::span<const int> labels, int num_classes,
                     Shrinkage shrinkage)
{
    if (latents.size() != labels.size())
        fail(ErrorKind::Validation, "latents and labels differ in length");
    if (latents.empty() || num_classes < 1)
        fail(ErrorKind::InsufficientData, "no latent vectors to fit");
    const Eigen::Index dim = latents.front().size();

    std::vector<ClassGaussian> classes(static_cast<std::size_t>(num_classes));
    for (auto& g : classes) {
        g.mean = Vector::Zero(dim);
        g.covariance = Matrix::Zero(dim, dim);
    }
    for (std::size_t i = 0; i < latents.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || y >= num_classes)
            fail(ErrorKind::InvalidLabel, "label " + std::to_string(y) + " outside the seen classes");
        if (latents[i].size() != dim)
            fail(ErrorKind::Validation, "latent vectors differ in dimension");
        auto& g = classes[static_cast<std::size_t>(y)];
        g.mean += latents[i];
        ++g.count;
    }
    for (int c = 0; c < num_classes; ++c) {
        auto& g = classes[static_cast<std::size_t>(c)];
        if (g.count < 2)
            fail(ErrorKind::InsufficientData,
                 "class " + std::to_string(c) + " has " + std::to_string(g.count) + " samples, need at least 2");
        g.mean /= static_cast<double>(g.count);
    }
    for (std::size_t i = 0; i < latents.size(); ++i) {
        auto& g = classes[static_cast<std::size_t>(labels[i])];
        const Vector d = latents[i] - g.mean;
        g.covariance.noalias() += d * d.transpose();
    }
    for (auto& g : classes) {
        g.covariance /= static_cast<double>(g.count - 1);
        g.covariance = 0.5 * (g.covariance + g.covariance.transpose());
        g.shrinkage = std::max(shrinkage.relative * g.covariance.trace() / static_cast<double>(dim), shrinkage.floor);
        g.covariance.diagonal().array() += g.shrinkage;
        Eigen::LDLT<Matrix> ldlt(g.covariance);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
            (ldlt.vectorD().array() <= 0.0).any())
            fail(ErrorKind::Degenerate, "class covariance is singular; increase shrinkage");
        g.inverse = ldlt.solve(Matrix::Identity(dim, dim));
        g.inverse = 0.5 * (g.inverse + g.inverse.transpose());
    }
    return ClassStats(std::move(classes));
}

double mahalanobis(const ClassStats& stats, int label, const Vector& z)
{
    const auto& g = stats.at(label);
    if (z.size() != g.mean.size())
        fail(ErrorKind::Validation, "latent vector has wrong dimension");
    const Vector d = z - g.mean;
    return std::sqrt(std::max(0.0, d.dot(g.inverse * d)));
}

MDSet md_set(const ClassStats& stats, const Vector& z)
{
    MDSet m(static_cast<std::size_t>(stats.num_classes()));
    for (int c = 0; c < stats.num_classes(); ++c)
        m[static_cast<std::size_t>(c)] = mahalanobis(stats, c, z);
    return m;
}

double md_margin(const MDSet& m)
{
    if (m.size() < 2)
        fail(ErrorKind::InsufficientData, "distance margin needs at least two classes");
    double first = std::numeric_limits<double>::infinity();
    double second = first;
    for (double v : m) {
        if (v < first) {
            second = first;
            first = v;
        } else if (v < second) {
            second = v;
        }
    }
    return second - first;
}

int nearest_class(const MDSet& m)
{
    if (m.empty())
        fail(ErrorKind::InsufficientData, "empty distance set");
    return static_cast<int>(std::min_element(m.begin(), m.end()) - m.begin());
}

std::size_t select_anchor(const ClassStats& stats, std::span<const Vector> class_latents, int label)
{
    if (class_latents.empty())
        fail(ErrorKind::InsufficientData, "class " + std::to_string(label) + " has no samples to anchor");
    std::size_t best = 0;
    double best_d = mahalanobis(stats, label, class_latents[0]);
    for (std::size_t i = 1; i < class_latents.size(); ++i) {
        const double d = mahalanobis(stats, label, class_latents[i]);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

std::vector<std::size_t> select_borderline(const ClassStats& stats, std::span<const Vector> class_latents, int label,
                                           double threshold)
{
    if (threshold < 0.0)
        fail(ErrorKind::Configuration, "borderline threshold must be nonnegative");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < class_latents.size(); ++i)
        if (mahalanobis(stats, label, class_latents[i]) > threshold)
            out.push_back(i);
    return out;
}

double mean_intra_class_distance(const ClassStats& stats, std::span<const Vector> latents, std::span<const int> labels)
{
    if (latents.size() != labels.size() || latents.empty())
        fail(ErrorKind::Validation, "latents and labels must be nonempty and aligned");
    double sum = 0.0;
    for (std::size_t i = 0; i < latents.size(); ++i)
        sum += mahalanobis(stats, labels[i], latents[i]);
    return sum / static_cast<double>(latents.size());
}

void write_stats_text(std::ostream& os, const ClassStats& stats)
{
    const auto flags = os.flags();
    os << std::setprecision(17);
    os << "classes " << stats.num_classes() << " dim " << stats.dim() << '\n';
    for (int c = 0; c < stats.num_classes(); ++c) {
        const auto& g = stats.at(c);
        os << "class " << c << " count " << g.count << " shrinkage " << g.shrinkage << '\n';
        os << "mean";
        for (Eigen::Index i = 0; i < g.mean.size(); ++i)
            os << ' ' << g.mean[i];
        os << '\n';
        for (Eigen::Index r = 0; r < g.covariance.rows(); ++r) {
            os << "cov";
            for (Eigen::Index k = 0; k < g.covariance.cols(); ++k)
                os << ' ' << g.covariance(r, k);
            os << '\n';
        }
    }
    os.flags(flags);
}

} // namespace oasis
