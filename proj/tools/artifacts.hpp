#pragma once

#include <map>
#include <string>
#include <vector>

#include "factdnf/data.hpp"
#include "factdnf/logic.hpp"
#include "factdnf/trainer.hpp"

namespace factdnf::cli {

// One split's atom vectors: a header record (labels, predicate layout)
// followed by one record per sample.
struct VectorFile {
    std::string split;
    std::vector<std::string> labels;
    std::vector<Predicate> predicates;
    std::vector<Example> examples;

    std::vector<AtomGroup> grouping() const { return groups_for(predicates); }
};

void write_vectors(const std::string& path, const VectorFile& file);
VectorFile read_vectors(const std::string& path);
std::string vectors_path(const std::string& dir, Split split);

struct ArtifactEntry {
    std::string path;  // relative to the manifest's directory
    std::string digest;
};

struct RunManifest {
    std::string command;
    std::string config_digest;
    std::uint64_t seed = 0;
    std::string dataset_digest;
    std::string backend;
    std::string started;
    std::string finished;
    std::vector<ArtifactEntry> artifacts;
    // Digests of upstream manifests this run consumed.
    std::map<std::string, std::string> inputs;

    // Digests every artifact under `dir` and writes dir/<command>.manifest.json.
    void write(const std::string& dir);
    static RunManifest read(const std::string& path);
    // Throws DataError naming the first artifact whose digest changed.
    void verify(const std::string& dir) const;
};

// Verifies every *.manifest.json in `dir`; returns manifest name -> file
// digest for recording as inputs downstream.
std::map<std::string, std::string> verify_manifests(const std::string& dir);

// ISO-8601 UTC; honours SOURCE_DATE_EPOCH so reruns can be byte-identical.
std::string timestamp_now();

}  // namespace factdnf::cli
