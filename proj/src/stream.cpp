#include "oasis/stream.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include "oasis/error.hpp"

namespace oasis {

std::string_view to_string(ShiftKind kind) noexcept
{
    switch (kind) {
    case ShiftKind::Lin: return "lin";
    case ShiftKind::Squ: return "squ";
    case ShiftKind::Sin: return "sin";
    case ShiftKind::Ber: return "ber";
    }
    return "?";
}

ShiftKind parse_shift_kind(std::string_view name)
{
    if (name == "lin") return ShiftKind::Lin;
    if (name == "squ") return ShiftKind::Squ;
    if (name == "sin") return ShiftKind::Sin;
    if (name == "ber") return ShiftKind::Ber;
    fail(ErrorKind::Configuration, "unknown schedule '" + std::string(name) + "' (expected lin, squ, sin or ber)");
}

ShiftSchedule::ShiftSchedule(ShiftKind kind, int horizon, std::uint64_t seed, bool ber_flip_prob_is_inv_sqrt_T)
    : kind_(kind), horizon_(horizon), ber_flip_reading_(ber_flip_prob_is_inv_sqrt_T)
{
    if (horizon < 1)
        fail(ErrorKind::Configuration, "horizon T must be at least 1");
    if (kind_ != ShiftKind::Ber)
        return;
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double keep = ber_keep_probability();
    ber_values_.resize(static_cast<std::size_t>(horizon_) + 1);
    ber_values_[0] = 0.0;
    for (std::size_t t = 1; t < ber_values_.size(); ++t)
        ber_values_[t] = unit(rng) < keep ? ber_values_[t - 1] : 1.0 - ber_values_[t - 1];
}

int ShiftSchedule::square_interval() const noexcept
{
    return std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(horizon_)) / 2.0)));
}

double ShiftSchedule::ber_keep_probability() const noexcept
{
    const double p = 1.0 / std::sqrt(static_cast<double>(horizon_));
    return ber_flip_reading_ ? 1.0 - p : p;
}

double ShiftSchedule::alpha(int t) const
{
    if (t < 0 || t > horizon_)
        fail(ErrorKind::Range, "timestep " + std::to_string(t) + " outside [0, " + std::to_string(horizon_) + "]");
    switch (kind_) {
    case ShiftKind::Lin:
        return static_cast<double>(t) / static_cast<double>(horizon_);
    case ShiftKind::Squ:
        return (t / square_interval()) % 2 == 0 ? 0.0 : 1.0;
    case ShiftKind::Sin: {
        const double v = std::sin(static_cast<double>(t) * std::numbers::pi / std::sqrt(static_cast<double>(horizon_)));
        return std::clamp(v, 0.0, 1.0);
    }
    case ShiftKind::Ber:
        return ber_values_[static_cast<std::size_t>(t)];
    }
    return 0.0;
}

double target_weight(double alpha, bool eq1_literal) noexcept
{
    return eq1_literal ? 1.0 - alpha : alpha;
}

void validate_simplex(std::span<const double> dist, std::string_view what)
{
    double sum = 0.0;
    for (double p : dist) {
        if (!(p >= 0.0) || !std::isfinite(p))
            fail(ErrorKind::Validation, std::string(what) + " has a negative or non-finite entry");
        sum += p;
    }
    if (dist.empty() || std::abs(sum - 1.0) > 1e-9)
        fail(ErrorKind::Validation, std::string(what) + " does not sum to 1");
}

LabelDistribution mixture_dist(std::span<const double> omega0, std::span<const double> omegaT, double alpha,
                               bool eq1_literal)
{
    validate_simplex(omega0, "omega_0");
    validate_simplex(omegaT, "omega_T");
    if (omega0.size() != omegaT.size())
        fail(ErrorKind::Validation, "omega_0 and omega_T cover different class sets");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        fail(ErrorKind::Validation, "alpha must lie in [0, 1]");
    const double w = target_weight(alpha, eq1_literal);
    LabelDistribution out(omega0.size());
    if (w == 0.0)
        return {omega0.begin(), omega0.end()};
    if (w == 1.0)
        return {omegaT.begin(), omegaT.end()};
    for (std::size_t c = 0; c < out.size(); ++c)
        out[c] = (1.0 - w) * omega0[c] + w * omegaT[c];
    return out;
}

LongTailProfile make_longtailed(double imbalance, int num_seen, int n_max)
{
    if (!(imbalance >= 1.0))
        fail(ErrorKind::Validation, "imbalance factor must be >= 1");
    if (num_seen < 2)
        fail(ErrorKind::Validation, "a long-tailed profile needs at least two seen classes");
    LongTailProfile profile;
    profile.counts.resize(static_cast<std::size_t>(num_seen));
    double total = 0.0;
    for (int c = 0; c < num_seen; ++c) {
        const double exponent = -static_cast<double>(c) / static_cast<double>(num_seen - 1);
        const int n = static_cast<int>(std::lround(static_cast<double>(n_max) * std::pow(imbalance, exponent)));
        if (n < 2)
            fail(ErrorKind::Validation, "n_max = " + std::to_string(n_max) + " leaves class " + std::to_string(c) +
                                            " with fewer than 2 samples");
        profile.counts[static_cast<std::size_t>(c)] = n;
        total += n;
    }
    for (int n : profile.counts)
        profile.distribution.push_back(n / total);
    return profile;
}

WorldSpec make_circle_world(int dim, int num_classes, int num_seen, double radius, double class_std)
{
    if (dim < 2)
        fail(ErrorKind::Configuration, "circle worlds need dim >= 2");
    WorldSpec w;
    w.dim = dim;
    w.num_classes = num_classes;
    w.num_seen = num_seen;
    for (int c = 0; c < num_classes; ++c) {
        const double angle = 2.0 * std::numbers::pi * c / num_classes;
        Vector m = Vector::Zero(dim);
        m[0] = radius * std::cos(angle);
        m[1] = radius * std::sin(angle);
        w.means.push_back(m);
        w.covariances.push_back(class_std * class_std * Matrix::Identity(dim, dim));
    }
    return w;
}

void validate(const WorldSpec& world)
{
    if (world.dim < 1)
        fail(ErrorKind::Configuration, "world dim must be positive");
    if (world.num_seen < 2 || world.num_seen >= world.num_classes)
        fail(ErrorKind::Configuration, "seen classes must be a proper subset of all classes with at least two members");
    if (static_cast<int>(world.means.size()) != world.num_classes ||
        static_cast<int>(world.covariances.size()) != world.num_classes)
        fail(ErrorKind::Configuration, "every class needs a generator mean and covariance");
    for (int c = 0; c < world.num_classes; ++c) {
        const auto& m = world.means[static_cast<std::size_t>(c)];
        const auto& s = world.covariances[static_cast<std::size_t>(c)];
        if (m.size() != world.dim || s.rows() != world.dim || s.cols() != world.dim)
            fail(ErrorKind::Configuration, "class " + std::to_string(c) + " generator has wrong dimension");
        Eigen::LLT<Matrix> llt(s);
        if (llt.info() != Eigen::Success)
            fail(ErrorKind::Configuration, "class " + std::to_string(c) + " covariance is not positive definite");
    }
    if (!(world.imbalance >= 1.0))
        fail(ErrorKind::Configuration, "imbalance factor must be >= 1");
    if (world.horizon < 1 || world.batch_size < 1)
        fail(ErrorKind::Configuration, "horizon and batch size must be positive");
    if (!(world.noise_max >= 0.0))
        fail(ErrorKind::Configuration, "noise_max must be nonnegative");
    if (world.target == TargetProfile::Explicit) {
        if (static_cast<int>(world.explicit_target.size()) != world.num_classes)
            fail(ErrorKind::Configuration, "explicit target distribution must cover every class");
        validate_simplex(world.explicit_target, "explicit omega_T");
    }
    make_longtailed(world.imbalance, world.num_seen, world.n_max);
}

LabelDistribution initial_distribution(const WorldSpec& world)
{
    const auto profile = make_longtailed(world.imbalance, world.num_seen, world.n_max);
    LabelDistribution omega(static_cast<std::size_t>(world.num_classes), 0.0);
    std::copy(profile.distribution.begin(), profile.distribution.end(), omega.begin());
    return omega;
}

LabelDistribution target_distribution(const WorldSpec& world)
{
    if (world.target == TargetProfile::Explicit)
        return world.explicit_target;
    const auto profile = make_longtailed(world.imbalance, world.num_seen, world.n_max);
    std::vector<double> seen = profile.distribution;
    if (world.target == TargetProfile::Reversed)
        std::reverse(seen.begin(), seen.end());
    else
        std::fill(seen.begin(), seen.end(), 1.0 / world.num_seen);
    const double minority = *std::min_element(seen.begin(), seen.end());
    LabelDistribution omega(seen.begin(), seen.end());
    omega.resize(static_cast<std::size_t>(world.num_classes), minority);
    double total = 0.0;
    for (double p : omega)
        total += p;
    for (double& p : omega)
        p /= total;
    return omega;
}

Vector draw_sample(const WorldSpec& world, int label, double noise_std, Rng& rng)
{
    if (label < 0 || label >= world.num_classes)
        fail(ErrorKind::InvalidLabel, "no generator for class " + std::to_string(label));
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto c = static_cast<std::size_t>(label);
    const Matrix chol = world.covariances[c].llt().matrixL();
    Vector e(world.dim);
    for (int k = 0; k < world.dim; ++k)
        e[k] = normal(rng);
    Vector x = world.means[c] + chol * e;
    if (noise_std > 0.0)
        for (int k = 0; k < world.dim; ++k)
            x[k] += noise_std * normal(rng);
    return x;
}

Dataset make_pretrain_set(const WorldSpec& world, Rng& rng)
{
    validate(world);
    const auto profile = make_longtailed(world.imbalance, world.num_seen, world.n_max);
    Dataset data;
    for (int c = 0; c < world.num_seen; ++c)
        for (int i = 0; i < profile.counts[static_cast<std::size_t>(c)]; ++i) {
            data.features.push_back(draw_sample(world, c, 0.0, rng));
            data.labels.push_back(c);
        }
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    Dataset shuffled;
    shuffled.features.reserve(order.size());
    shuffled.labels.reserve(order.size());
    for (auto i : order) {
        shuffled.features.push_back(std::move(data.features[i]));
        shuffled.labels.push_back(data.labels[i]);
    }
    return shuffled;
}

LabeledBatch emit_batch(const WorldSpec& world, const ShiftSchedule& schedule, int t, Rng& rng, ShiftOptions options)
{
    if (t < 1 || t > schedule.horizon())
        fail(ErrorKind::Range, "batch timestep must lie in [1, T]");
    LabeledBatch out;
    out.alpha = schedule.alpha(t);
    out.noise_std = target_weight(out.alpha, options.eq1_literal) * world.noise_max;
    const auto omega = mixture_dist(initial_distribution(world), target_distribution(world), out.alpha,
                                    options.eq1_literal);
    std::discrete_distribution<int> label_dist(omega.begin(), omega.end());
    std::vector<Vector> samples;
    samples.reserve(static_cast<std::size_t>(world.batch_size));
    for (int i = 0; i < world.batch_size; ++i) {
        const int y = label_dist(rng);
        samples.push_back(draw_sample(world, y, out.noise_std, rng));
        out.truth.labels.push_back(y);
        out.truth.unseen.push_back(y >= world.num_seen);
    }
    out.batch = TimestepBatch(t, std::move(samples));
    return out;
}

std::uint64_t schedule_seed(std::uint64_t seed, ShiftKind kind)
{
    return derive_seed(seed, {stream_key::schedule, static_cast<std::uint64_t>(kind), stream_key::ber});
}

Rng batch_rng(std::uint64_t seed, ShiftKind kind, int t)
{
    return Rng(derive_seed(seed, {stream_key::schedule, static_cast<std::uint64_t>(kind), stream_key::batch,
                                  static_cast<std::uint64_t>(t)}));
}

Dataset read_dataset_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        fail(ErrorKind::Io, "cannot open dataset '" + path + "'");
    Dataset data;
    std::string line;
    std::size_t line_no = 0;
    Eigen::Index width = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#')
            continue;
        std::vector<double> fields;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || !std::isfinite(v))
                fail(ErrorKind::Validation, path + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
            fields.push_back(v);
        }
        if (fields.size() < 2)
            fail(ErrorKind::Validation, path + ":" + std::to_string(line_no) + ": need features and a label");
        const double label = fields.back();
        if (label != std::floor(label) || label < 0)
            fail(ErrorKind::InvalidLabel, path + ":" + std::to_string(line_no) + ": label must be a nonnegative integer");
        fields.pop_back();
        if (width < 0)
            width = static_cast<Eigen::Index>(fields.size());
        else if (width != static_cast<Eigen::Index>(fields.size()))
            fail(ErrorKind::Validation, path + ":" + std::to_string(line_no) + ": inconsistent feature count");
        data.features.push_back(Eigen::Map<const Vector>(fields.data(), width));
        data.labels.push_back(static_cast<int>(label));
    }
    if (data.size() == 0)
        fail(ErrorKind::InsufficientData, "dataset '" + path + "' is empty");
    return data;
}

void write_dataset_csv(std::ostream& os, const Dataset& data)
{
    const auto flags = os.flags();
    os << std::setprecision(17);
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (Eigen::Index k = 0; k < data.features[i].size(); ++k)
            os << data.features[i][k] << ',';
        os << data.labels[i] << '\n';
    }
    os.flags(flags);
}

void write_batch_csv(std::ostream& os, const LabeledBatch& batch)
{
    const auto samples = batch.batch.samples();
    const Eigen::Index dim = samples.empty() ? 0 : samples.front().size();
    const auto flags = os.flags();
    os << std::setprecision(17);
    os << 't';
    for (Eigen::Index k = 0; k < dim; ++k)
        os << ",x" << k;
    os << ",truth_label,is_unseen\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        os << batch.batch.t();
        for (Eigen::Index k = 0; k < dim; ++k)
            os << ',' << samples[i][k];
        os << ',' << batch.truth.labels[i] << ',' << (batch.truth.unseen[i] ? 1 : 0) << '\n';
    }
    os.flags(flags);
}

} // namespace oasis
