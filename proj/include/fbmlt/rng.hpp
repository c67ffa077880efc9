#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fbmlt {

/// Engine behind every random stream. Recorded verbatim in path files and reports.
inline constexpr std::string_view kGeneratorName = "mt19937_64/seed_seq(seed,stream)";

using Engine = std::mt19937_64;

/// Independent engine for (seed, stream). Streams depend only on the pair,
/// never on creation order, so replications can run in any order.
Engine make_engine(std::uint64_t seed, std::uint64_t stream);

/// Stream index reserved for auxiliary draws (e.g. Hölder pair times) of replication r.
inline constexpr std::uint64_t aux_stream(std::uint64_t replication) {
    return replication | (std::uint64_t{1} << 63);
}

}  // namespace fbmlt
