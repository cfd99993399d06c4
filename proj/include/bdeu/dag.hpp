#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bdeu/errors.hpp"

namespace bdeu {

// Directed graph given as one parent set per node. Acyclicity is a property
// of the whole assignment, so it is checked by is_acyclic() and by the
// operations whose contracts require it, not at every mutation.
class Dag {
public:
    Dag() = default;

    explicit Dag(int node_count) {
        if (node_count < 1)
            throw ArgumentError("a DAG needs at least one node");
        parents_.resize(static_cast<std::size_t>(node_count));
    }

    int node_count() const { return static_cast<int>(parents_.size()); }

    const std::vector<int>& parents(int node) const {
        check_node(node);
        return parents_[static_cast<std::size_t>(node)];
    }

    // Stores the parent set sorted ascending; rejects self-loops, duplicates
    // and out-of-range indices.
    void set_parents(int child, std::vector<int> parents) {
        check_node(child);
        std::sort(parents.begin(), parents.end());
        for (std::size_t i = 0; i < parents.size(); ++i) {
            int p = parents[i];
            if (p < 0 || p >= node_count())
                throw ArgumentError("parent index out of range");
            if (p == child)
                throw ArgumentError("a node cannot be its own parent");
            if (i > 0 && parents[i - 1] == p)
                throw ArgumentError("duplicate parent index");
        }
        parents_[static_cast<std::size_t>(child)] = std::move(parents);
    }

    bool operator==(const Dag&) const = default;

private:
    void check_node(int node) const {
        if (node < 0 || node >= node_count())
            throw ArgumentError("node index out of range");
    }

    std::vector<std::vector<int>> parents_;
};

inline int arc_count(const Dag& dag) {
    int total = 0;
    for (int i = 0; i < dag.node_count(); ++i)
        total += static_cast<int>(dag.parents(i).size());
    return total;
}

// Kahn-style elimination: repeatedly remove nodes all of whose parents are
// already removed.
inline bool is_acyclic(const Dag& dag) {
    const int n = dag.node_count();
    std::vector<char> removed(static_cast<std::size_t>(n), 0);
    int left = n;
    bool progress = true;
    while (left > 0 && progress) {
        progress = false;
        for (int i = 0; i < n; ++i) {
            if (removed[static_cast<std::size_t>(i)])
                continue;
            bool ready = true;
            for (int p : dag.parents(i)) {
                if (!removed[static_cast<std::size_t>(p)]) {
                    ready = false;
                    break;
                }
            }
            if (ready) {
                removed[static_cast<std::size_t>(i)] = 1;
                --left;
                progress = true;
            }
        }
    }
    return left == 0;
}

inline nlohmann::json dag_to_json(const Dag& dag, std::span<const std::string> names = {}) {
    nlohmann::json parents = nlohmann::json::object();
    for (int i = 0; i < dag.node_count(); ++i)
        parents[std::to_string(i)] = dag.parents(i);
    nlohmann::json doc;
    doc["schema_version"] = 1;
    doc["n"] = dag.node_count();
    if (!names.empty())
        doc["names"] = std::vector<std::string>(names.begin(), names.end());
    else
        doc["names"] = nlohmann::json::array();
    doc["parents"] = std::move(parents);
    return doc;
}

inline Dag dag_from_json(const nlohmann::json& doc) {
    if (!doc.contains("n") || !doc.contains("parents"))
        throw FormatError("DAG document must contain \"n\" and \"parents\"");
    Dag dag(doc.at("n").get<int>());
    for (const auto& [key, value] : doc.at("parents").items()) {
        std::size_t used = 0;
        int node = 0;
        try {
            node = std::stoi(key, &used);
        } catch (const std::exception&) {
            throw FormatError("DAG document has a non-numeric node key '" + key + "'");
        }
        if (used != key.size())
            throw FormatError("DAG document has a non-numeric node key '" + key + "'");
        try {
            dag.set_parents(node, value.get<std::vector<int>>());
        } catch (const ArgumentError& e) {
            throw FormatError(std::string("DAG document: ") + e.what());
        }
    }
    if (!is_acyclic(dag))
        throw FormatError("DAG document encodes a cyclic graph");
    return dag;
}

// One edge per parent -> child arc; isolated nodes still get a node line.
inline std::string dag_to_dot(const Dag& dag, std::span<const std::string> names = {}) {
    auto label = [&](int i) {
        if (i < static_cast<int>(names.size()))
            return names[static_cast<std::size_t>(i)];
        return "v" + std::to_string(i);
    };
    std::string out = "digraph bdeu {\n";
    for (int i = 0; i < dag.node_count(); ++i)
        out += "  \"" + label(i) + "\";\n";
    for (int i = 0; i < dag.node_count(); ++i)
        for (int p : dag.parents(i))
            out += "  \"" + label(p) + "\" -> \"" + label(i) + "\";\n";
    out += "}\n";
    return out;
}

} // namespace bdeu
