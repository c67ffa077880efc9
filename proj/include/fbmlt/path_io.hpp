#pragma once

#include <filesystem>
#include <iosfwd>

#include "fbmlt/fbm_engine.hpp"

namespace fbmlt {

enum class PathFormat { csv, binary };

/// CSV layout:
///   # fbmlt-path v1
///   hurst,n,horizon,seed,method,generator
///   <values of the header fields>
///   value
///   <one node value per line, %.17g>
///
/// Binary layout (little-endian): magic "FBMPATH1", f64 hurst, i64 n, f64 horizon,
/// u64 seed, u8 method (0 cholesky, 1 circulant), u32 generator length, generator
/// bytes, u64 node count, node count f64 values.
void write_path(std::ostream& os, const FbmPath& path, PathFormat format);
FbmPath read_path(std::istream& is, PathFormat format);

void save_path(const std::filesystem::path& file, const FbmPath& path, PathFormat format);
/// Format is detected from the leading bytes.
FbmPath load_path(const std::filesystem::path& file);

}  // namespace fbmlt
