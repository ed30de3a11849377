#pragma once

#include <string>
#include <string_view>

namespace factdnf {

// Hex digest used for cache keys, manifests, and config fingerprints.
// Two independent FNV-1a lanes give 128 bits; collisions are additionally
// guarded wherever the digested text is stored alongside.
std::string digest_hex(std::string_view bytes);

std::string file_digest(const std::string& path);

}  // namespace factdnf
