#pragma once

#include <span>
#include <vector>

#include "oasis/nn.hpp"

namespace oasis {

/// Unlabeled samples for one timestep, exactly as the learner sees them.
/// Ground truth lives in BatchTruth (stream.hpp) and is never reachable from here.
class TimestepBatch {
public:
    TimestepBatch() = default;
    TimestepBatch(int t, std::vector<Vector> samples) : t_(t), samples_(std::move(samples)) {}

    int t() const noexcept { return t_; }
    std::span<const Vector> samples() const noexcept { return samples_; }
    std::size_t size() const noexcept { return samples_.size(); }
    bool empty() const noexcept { return samples_.empty(); }

private:
    int t_ = 0;
    std::vector<Vector> samples_;
};

} // namespace oasis
