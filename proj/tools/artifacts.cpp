#include "artifacts.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "factdnf/digest.hpp"
#include "factdnf/errors.hpp"

namespace factdnf::cli {

using nlohmann::json;
namespace fs = std::filesystem;

std::string vectors_path(const std::string& dir, Split split) {
    return (fs::path(dir) / "vectors" / (std::string(to_string(split)) + ".jsonl")).string();
}

void write_vectors(const std::string& path, const VectorFile& file) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    json preds = json::array();
    for (const auto& p : file.predicates) preds.push_back({{"id", p.id}, {"max_groundings", p.max_groundings}});
    out << json{{"format", "factdnf-vectors"},
                {"version", 1},
                {"split", file.split},
                {"labels", file.labels},
                {"predicates", preds}}
               .dump()
        << '\n';
    for (const auto& e : file.examples)
        out << json{{"id", e.id}, {"label", file.labels.at(e.label)}, {"atoms", e.atoms}}.dump() << '\n';
}

VectorFile read_vectors(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path);
    VectorFile f;
    std::string line;
    std::size_t lineno = 0;
    std::size_t width = 0;
    try {
        if (!std::getline(in, line)) throw DataError(path + ": empty vectors file");
        ++lineno;
        const auto h = json::parse(line);
        if (h.value("format", "") != "factdnf-vectors") throw DataError(path + ": not a vectors file");
        f.split = h.at("split").get<std::string>();
        f.labels = h.at("labels").get<std::vector<std::string>>();
        for (const auto& p : h.at("predicates")) {
            Predicate pred;
            pred.id = p.at("id").get<int>();
            pred.max_groundings = p.at("max_groundings").get<int>();
            width += static_cast<std::size_t>(pred.max_groundings);
            f.predicates.push_back(pred);
        }
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            const auto j = json::parse(line);
            Example e;
            e.id = j.at("id").get<std::string>();
            const auto label = j.at("label").get<std::string>();
            const auto it = std::find(f.labels.begin(), f.labels.end(), label);
            if (it == f.labels.end()) throw DataError(path + ":" + std::to_string(lineno) + ": unknown label " + label);
            e.label = static_cast<std::size_t>(it - f.labels.begin());
            e.atoms = j.at("atoms").get<std::vector<double>>();
            if (e.atoms.size() != width)
                throw DataError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(width) +
                                " atoms, found " + std::to_string(e.atoms.size()));
            f.examples.push_back(std::move(e));
        }
    } catch (const json::exception& ex) {
        throw DataError(path + ":" + std::to_string(lineno) + ": " + ex.what());
    }
    return f;
}

std::string timestamp_now() {
    std::time_t t;
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
        t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
    } else {
        t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void RunManifest::write(const std::string& dir) {
    for (auto& a : artifacts) a.digest = file_digest((fs::path(dir) / a.path).string());
    json arts = json::array();
    for (const auto& a : artifacts) arts.push_back({{"path", a.path}, {"digest", a.digest}});
    json j{{"command", command},
           {"config_digest", config_digest},
           {"seed", seed},
           {"dataset_digest", dataset_digest},
           {"backend", backend},
           {"started", started},
           {"finished", finished},
           {"artifacts", arts},
           {"inputs", inputs}};
    std::ofstream out(fs::path(dir) / (command + ".manifest.json"), std::ios::trunc | std::ios::binary);
    if (!out) throw DataError("cannot write manifest in " + dir);
    out << j.dump(1) << '\n';
}

RunManifest RunManifest::read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path);
    try {
        const auto j = json::parse(in);
        RunManifest m;
        m.command = j.at("command").get<std::string>();
        m.config_digest = j.at("config_digest").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.dataset_digest = j.at("dataset_digest").get<std::string>();
        m.backend = j.at("backend").get<std::string>();
        m.started = j.at("started").get<std::string>();
        m.finished = j.at("finished").get<std::string>();
        for (const auto& a : j.at("artifacts"))
            m.artifacts.push_back({a.at("path").get<std::string>(), a.at("digest").get<std::string>()});
        m.inputs = j.value("inputs", std::map<std::string, std::string>{});
        return m;
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
}

void RunManifest::verify(const std::string& dir) const {
    for (const auto& a : artifacts) {
        const auto path = (fs::path(dir) / a.path).string();
        if (!fs::exists(path)) throw DataError("manifest lists missing artifact " + a.path);
        if (file_digest(path) != a.digest) throw DataError("artifact " + a.path + " does not match its manifest digest");
    }
}

std::map<std::string, std::string> verify_manifests(const std::string& dir) {
    std::map<std::string, std::string> out;
    if (!fs::is_directory(dir)) return out;
    std::vector<fs::path> found;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (name.size() > 14 && name.ends_with(".manifest.json")) found.push_back(entry.path());
    }
    std::sort(found.begin(), found.end());
    for (const auto& p : found) {
        RunManifest::read(p.string()).verify(dir);
        out[p.filename().string()] = file_digest(p.string());
    }
    return out;
}

}  // namespace factdnf::cli
