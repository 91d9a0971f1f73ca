#pragma once
// Knowledge-graph ingestion: TSV triple files, id interning, split handling
// and per-entity degree features.
//
// Dataset directory layout: {facts,train,valid,test}.txt, one
// `head<TAB>relation<TAB>tail` triple per line, UTF-8, newline terminated.

#include <string>
#include <unordered_map>
#include <vector>

#include "kgr/common.hpp"

namespace kgr {

struct Triple {
    EntityId head = 0;
    RelationId rel = 0;
    EntityId tail = 0;

    bool operator==(const Triple&) const = default;
    bool operator<(const Triple& o) const {
        if (rel != o.rel) return rel < o.rel;
        if (head != o.head) return head < o.head;
        return tail < o.tail;
    }
};

// Dense, stable interning of entity and relation names, first-seen order over
// facts -> train -> valid -> test. With inverses enabled the relation id space
// doubles: inverse_of(k) = k + |R| for base k, and `inv_<name>` is registered
// in the name table for every base relation.
class Vocabulary {
public:
    EntityId intern_entity(const std::string& name);
    RelationId intern_relation(const std::string& name);

    // Appends inv_* relation names; base relation ids are frozen afterwards.
    void enable_inverses();

    EntityId entity_id(const std::string& name) const;       // -1 if unknown
    RelationId relation_id(const std::string& name) const;   // -1 if unknown
    const std::string& entity_name(EntityId id) const { return entity_names_.at(id); }
    const std::string& relation_name(RelationId id) const { return relation_names_.at(id); }

    std::int64_t num_entities() const { return static_cast<std::int64_t>(entity_names_.size()); }
    // Base relation count |R|.
    std::int64_t num_base_relations() const { return num_base_relations_; }
    // |R| without inverses, 2|R| with.
    std::int64_t num_relation_ids() const { return static_cast<std::int64_t>(relation_names_.size()); }

    bool inverse_enabled() const { return inverse_enabled_; }
    bool is_inverse(RelationId r) const { return inverse_enabled_ && r >= num_base_relations_; }
    RelationId inverse_of(RelationId r) const;

private:
    std::vector<std::string> entity_names_;
    std::vector<std::string> relation_names_;
    std::unordered_map<std::string, EntityId> entity_ids_;
    std::unordered_map<std::string, RelationId> relation_ids_;
    std::int64_t num_base_relations_ = 0;
    bool inverse_enabled_ = false;
};

struct SplitDataset {
    Vocabulary vocab;
    std::vector<Triple> facts;
    std::vector<Triple> train;
    std::vector<Triple> valid;
    std::vector<Triple> test;

    // Reasoning graph G = facts + train (base relations only, as loaded).
    std::vector<Triple> reasoning_graph() const;
    std::int64_t total_triples() const {
        return static_cast<std::int64_t>(facts.size() + train.size() + valid.size() + test.size());
    }
};

SplitDataset load_dataset(const std::string& dir, bool inverse);
void save_dataset(const SplitDataset& ds, const std::string& dir);

// One (relation, direction) incidence slot of an entity.
struct DegreeSlot {
    RelationId rel = kPadRelation;
    bool in = false;  // true: incoming edge, false: outgoing

    bool operator==(const DegreeSlot&) const = default;
    bool operator<(const DegreeSlot& o) const {
        if (in != o.in) return in;  // In slots sort before Out slots
        return rel < o.rel;
    }
};

struct DegreeFeature {
    EntityId entity = 0;
    std::vector<DegreeSlot> slots;  // unique, In-before-Out, ascending rel id

    std::int64_t d() const { return static_cast<std::int64_t>(slots.size()); }
};

// Row index of a slot in the (2|R|+1)-row degree embedding table:
// PAD -> 0, (r, In) -> 1 + 2r, (r, Out) -> 2 + 2r.
inline std::int64_t degree_slot_row(const DegreeSlot& s) {
    if (s.rel == kPadRelation) return 0;
    return 1 + 2 * static_cast<std::int64_t>(s.rel) + (s.in ? 0 : 1);
}

// Degree features for all entities over the reasoning graph (base relations
// only). Isolated entities get the reserved (PAD, Out) slot.
std::vector<DegreeFeature> degree_features(const std::vector<Triple>& g, const Vocabulary& vocab);

// Entities sharing a degree feature vector are interchangeable for the degree
// encoder; the signature id indexes the deduplicated slot sequences.
struct DegreeSignatureSet {
    std::vector<std::vector<DegreeSlot>> signatures;  // signature id -> slots
    std::vector<std::int32_t> entity_signature;       // entity id -> signature id

    std::int64_t num_signatures() const { return static_cast<std::int64_t>(signatures.size()); }
};

DegreeSignatureSet dedupe_degree_features(const std::vector<DegreeFeature>& feats);

// "in:r3 in:r7 out:r1" style key used in exports.
std::string degree_signature_string(const std::vector<DegreeSlot>& slots, const Vocabulary& vocab);

}  // namespace kgr
