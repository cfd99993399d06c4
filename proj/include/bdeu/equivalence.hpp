#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "bdeu/dag.hpp"
#include "bdeu/errors.hpp"

namespace bdeu {

// Canonical identity of a Markov equivalence class: skeleton plus the set of
// v-structures. Two DAGs encode the same independence statements exactly
// when these agree.
struct EquivalenceKey {
    std::vector<std::array<int, 2>> skeleton;     // pairs (a, b), a < b, sorted
    std::vector<std::array<int, 3>> v_structures; // triples (a, c, b), a < b, sorted

    bool operator==(const EquivalenceKey&) const = default;

    std::string canonical_json() const {
        nlohmann::json doc;
        doc["skeleton"] = skeleton;
        doc["v_structures"] = v_structures;
        return doc.dump();
    }
};

inline std::vector<std::array<int, 2>> skeleton(const Dag& dag) {
    std::set<std::array<int, 2>> edges;
    for (int i = 0; i < dag.node_count(); ++i)
        for (int p : dag.parents(i))
            edges.insert({std::min(i, p), std::max(i, p)});
    return {edges.begin(), edges.end()};
}

// Colliders a -> c <- b with a and b non-adjacent, reported as (a, c, b)
// with a < b.
inline std::vector<std::array<int, 3>> v_structures(const Dag& dag) {
    const auto edges = skeleton(dag);
    std::set<std::array<int, 2>> adjacent(edges.begin(), edges.end());
    std::set<std::array<int, 3>> triples;
    for (int c = 0; c < dag.node_count(); ++c) {
        const auto& ps = dag.parents(c);
        for (std::size_t x = 0; x < ps.size(); ++x) {
            for (std::size_t y = x + 1; y < ps.size(); ++y) {
                const int a = ps[x];
                const int b = ps[y]; // ps is sorted, so a < b
                if (!adjacent.count({a, b}))
                    triples.insert({a, c, b});
            }
        }
    }
    return {triples.begin(), triples.end()};
}

inline EquivalenceKey equivalence_key(const Dag& dag) {
    return EquivalenceKey{skeleton(dag), v_structures(dag)};
}

inline bool same_independence_model(const Dag& a, const Dag& b) {
    if (a.node_count() != b.node_count())
        throw ArgumentError("cannot compare DAGs over different variable counts");
    return equivalence_key(a) == equivalence_key(b);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Stable 16-hex-digit digest of the canonical key string, used in sweep CSVs.
inline std::string equivalence_key_hash(const EquivalenceKey& key) {
    static const char* digits = "0123456789abcdef";
    std::uint64_t h = fnv1a64(key.canonical_json());
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

} // namespace bdeu
