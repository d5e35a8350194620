#include "leakscan/sampling.hpp"

#include <numeric>
#include <utility>

#include "leakscan/error.hpp"

namespace leakscan {

std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, SplitMix64& rng) {
    if (k > n) fail(ErrorKind::Parameter, "sample size exceeds population");
    std::vector<std::size_t> pos(n);
    std::iota(pos.begin(), pos.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(pos[i], pos[j]);
    }
    pos.resize(k);
    return pos;
}

}  // namespace leakscan
