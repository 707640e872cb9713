#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "oasis/nn.hpp"
#include "oasis/rng.hpp"

namespace oasis::test {

/// Upper-tail p-value of Pearson's chi-square statistic for `counts` against
/// the probabilities `expected`. Cells with zero expected mass must have zero counts.
inline double chi_square_pvalue(std::span<const long> counts, std::span<const double> expected)
{
    long total = 0;
    for (long c : counts)
        total += c;
    double stat = 0.0;
    int cells = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (expected[i] == 0.0) {
            if (counts[i] != 0)
                return 0.0;
            continue;
        }
        const double e = expected[i] * static_cast<double>(total);
        stat += (counts[i] - e) * (counts[i] - e) / e;
        ++cells;
    }
    return boost::math::gamma_q(0.5 * (cells - 1), 0.5 * stat);
}

inline Vector random_vector(int n, Rng& rng, double scale = 1.0)
{
    std::normal_distribution<double> g(0.0, scale);
    Vector v(n);
    for (int i = 0; i < n; ++i)
        v(i) = g(rng);
    return v;
}

inline Model small_model(std::uint64_t seed, std::vector<int> widths = {2, 6, 4, 5, 3}, int latent = 2, int frozen = 2)
{
    Rng rng(seed);
    return Model::initialized(std::move(widths), latent, frozen, rng);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("oasis_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace oasis::test
