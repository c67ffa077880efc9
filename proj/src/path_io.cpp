#include "fbmlt/path_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "fbmlt/errors.hpp"

namespace fbmlt {

namespace {

constexpr std::array<char, 8> kMagic{'F', 'B', 'M', 'P', 'A', 'T', 'H', '1'};
constexpr std::string_view kCsvTag = "# fbmlt-path v1";

static_assert(std::endian::native == std::endian::little, "binary path I/O assumes a little-endian host");

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
        throw ConfigError("truncated binary path record");
    }
    return v;
}

// The last of `fields` cells keeps any further commas (generator names contain them).
std::vector<std::string> split_csv(const std::string& line, std::size_t fields) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (out.size() + 1 < fields) {
        const auto comma = line.find(',', start);
        if (comma == std::string::npos) {
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    out.push_back(line.substr(start));
    return out;
}

bool next_line(std::istream& is, std::string& line) {
    if (!std::getline(is, line)) {
        return false;
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    return true;
}

FbmPath read_csv(std::istream& is) {
    std::string line;
    if (!next_line(is, line) || line != kCsvTag) {
        throw ConfigError("path CSV must start with '" + std::string(kCsvTag) + "'");
    }
    if (!next_line(is, line) || line != "hurst,n,horizon,seed,method,generator") {
        throw ConfigError("path CSV header row is malformed");
    }
    if (!next_line(is, line)) {
        throw ConfigError("path CSV metadata row missing");
    }
    const auto meta = split_csv(line, 6);
    if (meta.size() != 6) {
        throw ConfigError("path CSV metadata row must have 6 fields");
    }
    if (!next_line(is, line) || line != "value") {
        throw ConfigError("path CSV value header missing");
    }
    std::vector<double> values;
    while (next_line(is, line)) {
        if (line.empty()) {
            continue;
        }
        values.push_back(std::stod(line));
    }
    try {
        const Hurst h(std::stod(meta[0]));
        const TimeGrid grid(std::stoll(meta[1]), std::stod(meta[2]));
        return FbmPath(h, grid, std::move(values), std::stoull(meta[3]), method_from_string(meta[4]), meta[5]);
    } catch (const std::logic_error& e) {
        throw ConfigError(std::string("invalid path CSV: ") + e.what());
    }
}

FbmPath read_binary(std::istream& is) {
    std::array<char, 8> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
        throw ConfigError("binary path record has a bad magic number");
    }
    const auto hurst = get<double>(is);
    const auto n = get<std::int64_t>(is);
    const auto horizon = get<double>(is);
    const auto seed = get<std::uint64_t>(is);
    const auto method = get<std::uint8_t>(is);
    const auto name_len = get<std::uint32_t>(is);
    if (name_len > 4096) {
        throw ConfigError("binary path generator name is implausibly long");
    }
    std::string generator(name_len, '\0');
    if (!is.read(generator.data(), name_len)) {
        throw ConfigError("truncated binary path record");
    }
    const auto count = get<std::uint64_t>(is);
    const TimeGrid grid(n, horizon);
    if (count != grid.node_count()) {
        throw ConfigError("binary path node count does not match its grid");
    }
    std::vector<double> values(count);
    if (!is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(double)))) {
        throw ConfigError("truncated binary path values");
    }
    if (method > 1) {
        throw ConfigError("binary path has an unknown method code");
    }
    return FbmPath(Hurst(hurst), grid, std::move(values), seed, method == 0 ? Method::cholesky : Method::circulant,
                   std::move(generator));
}

}  // namespace

void write_path(std::ostream& os, const FbmPath& path, PathFormat format) {
    if (format == PathFormat::csv) {
        os << kCsvTag << '\n' << "hurst,n,horizon,seed,method,generator\n";
        os << std::setprecision(17) << path.hurst().value() << ',' << path.grid().n() << ','
           << path.grid().horizon() << ',' << path.seed() << ',' << to_string(path.method()) << ','
           << path.generator() << '\n';
        os << "value\n";
        for (double v : path.values()) {
            os << v << '\n';
        }
        return;
    }
    os.write(kMagic.data(), kMagic.size());
    put(os, path.hurst().value());
    put(os, path.grid().n());
    put(os, path.grid().horizon());
    put(os, path.seed());
    put(os, static_cast<std::uint8_t>(path.method() == Method::cholesky ? 0 : 1));
    put(os, static_cast<std::uint32_t>(path.generator().size()));
    os.write(path.generator().data(), static_cast<std::streamsize>(path.generator().size()));
    put(os, static_cast<std::uint64_t>(path.values().size()));
    os.write(reinterpret_cast<const char*>(path.values().data()),
             static_cast<std::streamsize>(path.values().size() * sizeof(double)));
}

FbmPath read_path(std::istream& is, PathFormat format) {
    return format == PathFormat::csv ? read_csv(is) : read_binary(is);
}

void save_path(const std::filesystem::path& file, const FbmPath& path, PathFormat format) {
    std::ofstream os(file, format == PathFormat::binary ? std::ios::binary : std::ios::out);
    if (!os) {
        throw std::runtime_error("cannot open " + file.string() + " for writing");
    }
    write_path(os, path, format);
    if (!os) {
        throw std::runtime_error("write failed for " + file.string());
    }
}

FbmPath load_path(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) {
        throw ConfigError("cannot open path file " + file.string());
    }
    std::array<char, 8> head{};
    is.read(head.data(), head.size());
    is.clear();
    is.seekg(0);
    return read_path(is, head == kMagic ? PathFormat::binary : PathFormat::csv);
}

}  // namespace fbmlt
