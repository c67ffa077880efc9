#include "fbmlt/rng.hpp"

namespace fbmlt {

Engine make_engine(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x66626d6cu};
    return Engine(seq);
}

}  // namespace fbmlt
