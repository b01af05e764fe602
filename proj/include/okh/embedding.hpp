#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "okh/error.hpp"
#include "okh/hash.hpp"
#include "okh/hypergraph.hpp"

namespace okh {

using Vector = std::vector<float>;

// relation | evidence | name [type]; ... | k=v; ...
// Entities are sorted by id, attributes by key. The attribute segment is
// dropped when the edge has no attributes.
inline std::string compose_text(const Hyperedge& edge, const KnowledgeHypergraph* graph = nullptr) {
    std::string out = edge.relation;
    out += " | ";
    out += edge.evidence;
    out += " | ";
    std::vector<std::string> ids = edge.entity_ids;
    std::sort(ids.begin(), ids.end());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += "; ";
        const Entity* e = graph ? graph->find_entity(ids[i]) : nullptr;
        out += e ? e->name : ids[i];
        out += " [";
        out += e ? to_string(e->type) : std::string_view("other");
        out += "]";
    }
    if (!edge.attributes.empty()) {
        out += " | ";
        bool first = true;
        for (const auto& [k, v] : edge.attributes) {
            if (!first) out += "; ";
            first = false;
            out += k + "=" + v;
        }
    }
    return out;
}

inline double dot(const Vector& u, const Vector& v) {
    if (u.size() != v.size()) throw DimensionMismatch(u.size(), v.size());
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += static_cast<double>(u[i]) * static_cast<double>(v[i]);
    return s;
}

inline double norm(const Vector& v) { return std::sqrt(dot(v, v)); }

inline double cosine(const Vector& u, const Vector& v) {
    if (u.size() != v.size()) throw DimensionMismatch(u.size(), v.size());
    const double nu = norm(u);
    const double nv = norm(v);
    if (nu == 0.0 || nv == 0.0) throw ZeroNorm();
    return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

// Returns false when the vector is all zeros or has a non-finite component.
inline bool normalize_in_place(Vector& v) {
    double s = 0.0;
    for (float x : v) {
        if (!std::isfinite(x)) return false;
        s += static_cast<double>(x) * static_cast<double>(x);
    }
    if (s == 0.0) return false;
    const double inv = 1.0 / std::sqrt(s);
    for (float& x : v) x = static_cast<float>(static_cast<double>(x) * inv);
    return true;
}

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::size_t dimension() const = 0;
    // Stable identifier folded into cache keys.
    virtual std::string id() const = 0;
    virtual std::vector<Vector> embed(const std::vector<std::string>& texts) = 0;
};

// Signed feature hashing over whitespace tokens.
class LocalEmbedder final : public EmbeddingProvider {
public:
    static constexpr std::size_t kMinDimension = 8;

    explicit LocalEmbedder(std::size_t dimension = 256) : d_(dimension) {
        if (d_ < kMinDimension) throw ConfigError("local embedder dimension must be >= 8");
    }

    std::size_t dimension() const override { return d_; }
    std::string id() const override { return "local-" + std::to_string(d_); }

    Vector embed_one(std::string_view text) const {
        std::vector<double> acc(d_, 0.0);
        std::size_t i = 0;
        while (i < text.size()) {
            while (i < text.size() && is_space(text[i])) ++i;
            std::size_t j = i;
            while (j < text.size() && !is_space(text[j])) ++j;
            if (j > i) {
                const std::uint64_t h = fnv1a64(text.substr(i, j - i));
                acc[h % d_] += (h >> 63) ? -1.0 : 1.0;
            }
            i = j;
        }
        double s = 0.0;
        for (double x : acc) s += x * x;
        Vector out(d_, 0.0f);
        if (s == 0.0) {
            out[0] = 1.0f;
            return out;
        }
        const double inv = 1.0 / std::sqrt(s);
        for (std::size_t k = 0; k < d_; ++k) out[k] = static_cast<float>(acc[k] * inv);
        return out;
    }

    std::vector<Vector> embed(const std::vector<std::string>& texts) override {
        std::vector<Vector> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(embed_one(t));
        return out;
    }

private:
    static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
    std::size_t d_;
};

inline Vector embed_local(std::string_view text, std::size_t d) { return LocalEmbedder(d).embed_one(text); }

// ---------------------------------------------------------------------------
// Persistent content-hash -> vector cache. Concurrent lookups, serialized
// inserts.

class EmbeddingCache {
public:
    static constexpr char kMagic[4] = {'O', 'K', 'H', 'E'};
    static constexpr std::uint32_t kVersion = 1;

    explicit EmbeddingCache(std::size_t dimension) : d_(dimension) {}

    EmbeddingCache(EmbeddingCache&& other) noexcept : d_(other.d_) {
        std::unique_lock lock(other.mutex_);
        entries_ = std::move(other.entries_);
    }

    std::size_t dimension() const { return d_; }

    std::size_t size() const {
        std::shared_lock lock(mutex_);
        return entries_.size();
    }

    static Digest128 key_for(std::string_view provider_id, std::string_view text) {
        std::string key(provider_id);
        key += '\n';
        key += text;
        return fnv1a128(key);
    }

    bool lookup(const Digest128& key, Vector& out) const {
        std::shared_lock lock(mutex_);
        auto it = entries_.find(key);
        if (it == entries_.end()) return false;
        out = it->second;
        return true;
    }

    // First write wins so repeated computations never replace a stored vector.
    void insert(const Digest128& key, Vector v) {
        if (v.size() != d_) throw DimensionMismatch(d_, v.size());
        std::unique_lock lock(mutex_);
        entries_.emplace(key, std::move(v));
    }

    // Embeds texts through `provider`, reusing cached vectors and sending only
    // misses (deduplicated) to the provider.
    std::vector<Vector> embed(EmbeddingProvider& provider, const std::vector<std::string>& texts) {
        if (provider.dimension() != d_) throw DimensionMismatch(d_, provider.dimension());
        const std::string pid = provider.id();
        std::vector<Vector> out(texts.size());
        std::vector<std::string> misses;
        std::map<Digest128, std::vector<std::size_t>> pending;
        for (std::size_t i = 0; i < texts.size(); ++i) {
            const auto key = key_for(pid, texts[i]);
            if (lookup(key, out[i])) continue;
            auto& slots = pending[key];
            if (slots.empty()) misses.push_back(texts[i]);
            slots.push_back(i);
        }
        if (misses.empty()) return out;
        auto fresh = provider.embed(misses);
        if (fresh.size() != misses.size()) throw DimensionMismatch(misses.size(), fresh.size());
        for (std::size_t m = 0; m < misses.size(); ++m) {
            const auto key = key_for(pid, misses[m]);
            insert(key, fresh[m]);
            Vector stored;
            lookup(key, stored);
            for (std::size_t slot : pending[key]) out[slot] = stored;
        }
        return out;
    }

    void save(std::ostream& out) const {
        std::shared_lock lock(mutex_);
        out.write(kMagic, 4);
        write_u32(out, kVersion);
        write_u32(out, static_cast<std::uint32_t>(d_));
        for (const auto& [key, v] : entries_) {
            out.write(reinterpret_cast<const char*>(key.data()), 16);
            for (float x : v) write_u32(out, std::bit_cast<std::uint32_t>(x));
        }
        if (!out) throw IoError("failed writing embedding cache");
    }

    static EmbeddingCache load(std::istream& in) {
        char magic[4];
        if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw IoError("not an embedding cache file");
        if (read_u32(in) != kVersion) throw IoError("unsupported embedding cache version");
        EmbeddingCache cache(read_u32(in));
        while (true) {
            Digest128 key{};
            if (!in.read(reinterpret_cast<char*>(key.data()), 16)) {
                if (in.gcount() == 0) break;
                throw IoError("truncated embedding cache record");
            }
            Vector v(cache.d_);
            for (float& x : v) x = std::bit_cast<float>(read_u32(in));
            cache.entries_.emplace(key, std::move(v));
        }
        return cache;
    }

    void save_file(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write " + path);
        save(out);
    }

    static EmbeddingCache load_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open " + path);
        return load(in);
    }

private:
    static void write_u32(std::ostream& out, std::uint32_t v) {
        const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                    static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
        out.write(reinterpret_cast<const char*>(b), 4);
    }
    static std::uint32_t read_u32(std::istream& in) {
        unsigned char b[4];
        if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated embedding cache");
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }

    std::size_t d_;
    mutable std::shared_mutex mutex_;
    std::map<Digest128, Vector> entries_;
};

// Per-edge embeddings for a hypergraph, keyed by edge id.
class EdgeEmbeddings {
public:
    EdgeEmbeddings() = default;
    explicit EdgeEmbeddings(std::size_t dimension) : d_(dimension) {}

    std::size_t dimension() const { return d_; }
    std::size_t size() const { return vectors_.size(); }

    const Vector& at(std::string_view edge_id) const {
        auto it = vectors_.find(std::string(edge_id));
        if (it == vectors_.end()) throw UnknownEdge(std::string(edge_id));
        return it->second;
    }
    bool contains(std::string_view edge_id) const { return vectors_.count(std::string(edge_id)) > 0; }
    const std::map<std::string, Vector>& vectors() const { return vectors_; }

    void set(const std::string& edge_id, Vector v) {
        if (v.size() != d_) throw DimensionMismatch(d_, v.size());
        if (!normalize_in_place(v)) throw ZeroNorm();
        vectors_[edge_id] = std::move(v);
    }

    static EdgeEmbeddings compute(const KnowledgeHypergraph& graph, EmbeddingProvider& provider,
                                  EmbeddingCache* cache = nullptr) {
        std::vector<std::string> ids;
        std::vector<std::string> texts;
        for (const auto& [id, edge] : graph.hyperedges()) {
            ids.push_back(id);
            texts.push_back(compose_text(edge, &graph));
        }
        auto vectors = cache ? cache->embed(provider, texts) : provider.embed(texts);
        EdgeEmbeddings out(provider.dimension());
        for (std::size_t i = 0; i < ids.size(); ++i) out.set(ids[i], std::move(vectors[i]));
        return out;
    }

private:
    std::size_t d_ = 0;
    std::map<std::string, Vector> vectors_;
};

}  // namespace okh
