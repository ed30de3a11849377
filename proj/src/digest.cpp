#include "factdnf/digest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "factdnf/errors.hpp"
#include "factdnf/rng.hpp"

namespace factdnf {

std::string digest_hex(std::string_view bytes) {
    const std::uint64_t lo = fnv1a(bytes);
    const std::uint64_t hi = splitmix64(fnv1a(bytes, 0x84222325cbf29ce4ULL) ^ bytes.size());
    char buf[33];
    std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(hi),
                  static_cast<unsigned long long>(lo));
    return buf;
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return digest_hex(ss.str());
}

}  // namespace factdnf
