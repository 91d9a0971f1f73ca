#include "kgr/kgdata.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

namespace kgr {

EntityId Vocabulary::intern_entity(const std::string& name) {
    auto it = entity_ids_.find(name);
    if (it != entity_ids_.end()) return it->second;
    EntityId id = static_cast<EntityId>(entity_names_.size());
    entity_names_.push_back(name);
    entity_ids_.emplace(name, id);
    return id;
}

RelationId Vocabulary::intern_relation(const std::string& name) {
    auto it = relation_ids_.find(name);
    if (it != relation_ids_.end()) {
        if (inverse_enabled_ && it->second >= num_base_relations_)
            throw ParseError("relation name collides with an inverse name: " + name);
        return it->second;
    }
    if (inverse_enabled_)
        throw ParseError("cannot intern new relation after inverses were enabled: " + name);
    RelationId id = static_cast<RelationId>(relation_names_.size());
    relation_names_.push_back(name);
    relation_ids_.emplace(name, id);
    num_base_relations_ = static_cast<std::int64_t>(relation_names_.size());
    return id;
}

void Vocabulary::enable_inverses() {
    if (inverse_enabled_) return;
    inverse_enabled_ = true;
    const std::int64_t base = num_base_relations_;
    for (std::int64_t r = 0; r < base; ++r) {
        std::string inv = "inv_" + relation_names_[static_cast<std::size_t>(r)];
        if (relation_ids_.count(inv))
            throw ParseError("relation name collides with an inverse name: " + inv);
        relation_ids_.emplace(inv, static_cast<RelationId>(base + r));
        relation_names_.push_back(std::move(inv));
    }
}

EntityId Vocabulary::entity_id(const std::string& name) const {
    auto it = entity_ids_.find(name);
    return it == entity_ids_.end() ? -1 : it->second;
}

RelationId Vocabulary::relation_id(const std::string& name) const {
    auto it = relation_ids_.find(name);
    return it == relation_ids_.end() ? -1 : it->second;
}

RelationId Vocabulary::inverse_of(RelationId r) const {
    contract(inverse_enabled_, "inverse_of on a vocabulary without inverses");
    contract(r >= 0 && r < num_relation_ids(), "relation id out of range");
    const RelationId base = static_cast<RelationId>(num_base_relations_);
    return r < base ? r + base : r - base;
}

std::vector<Triple> SplitDataset::reasoning_graph() const {
    std::vector<Triple> g;
    g.reserve(facts.size() + train.size());
    g.insert(g.end(), facts.begin(), facts.end());
    g.insert(g.end(), train.begin(), train.end());
    return g;
}

namespace {

void parse_split_file(const std::string& path, Vocabulary& vocab, std::vector<Triple>& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    std::int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        // Names are opaque byte strings; split on tabs only.
        std::size_t t1 = line.find('\t');
        std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        std::size_t t3 = t2 == std::string::npos ? std::string::npos : line.find('\t', t2 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos || t3 != std::string::npos)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected 3 tab-separated fields");
        Triple tr;
        tr.head = vocab.intern_entity(line.substr(0, t1));
        tr.rel = vocab.intern_relation(line.substr(t1 + 1, t2 - t1 - 1));
        tr.tail = vocab.intern_entity(line.substr(t2 + 1));
        out.push_back(tr);
    }
}

}  // namespace

SplitDataset load_dataset(const std::string& dir, bool inverse) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("dataset directory not found: " + dir);
    SplitDataset ds;
    parse_split_file(dir + "/facts.txt", ds.vocab, ds.facts);
    parse_split_file(dir + "/train.txt", ds.vocab, ds.train);
    parse_split_file(dir + "/valid.txt", ds.vocab, ds.valid);
    parse_split_file(dir + "/test.txt", ds.vocab, ds.test);
    if (inverse) ds.vocab.enable_inverses();
    return ds;
}

void save_dataset(const SplitDataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto dump = [&](const std::vector<Triple>& split, const std::string& name) {
        std::ofstream out(dir + "/" + name, std::ios::binary);
        if (!out) throw IoError("cannot write " + dir + "/" + name);
        for (const Triple& t : split) {
            out << ds.vocab.entity_name(t.head) << '\t' << ds.vocab.relation_name(t.rel) << '\t'
                << ds.vocab.entity_name(t.tail) << '\n';
        }
    };
    dump(ds.facts, "facts.txt");
    dump(ds.train, "train.txt");
    dump(ds.valid, "valid.txt");
    dump(ds.test, "test.txt");
}

std::vector<DegreeFeature> degree_features(const std::vector<Triple>& g, const Vocabulary& vocab) {
    const std::int64_t n = vocab.num_entities();
    std::vector<std::set<DegreeSlot>> slots(static_cast<std::size_t>(n));
    for (const Triple& t : g) {
        contract(t.head >= 0 && t.head < n && t.tail >= 0 && t.tail < n, "triple entity out of range");
        contract(t.rel >= 0 && t.rel < vocab.num_base_relations(),
                 "degree features expect base-relation triples");
        slots[static_cast<std::size_t>(t.head)].insert({t.rel, false});
        slots[static_cast<std::size_t>(t.tail)].insert({t.rel, true});
    }
    std::vector<DegreeFeature> feats(static_cast<std::size_t>(n));
    for (std::int64_t e = 0; e < n; ++e) {
        auto& f = feats[static_cast<std::size_t>(e)];
        f.entity = static_cast<EntityId>(e);
        const auto& s = slots[static_cast<std::size_t>(e)];
        if (s.empty()) {
            f.slots.push_back({kPadRelation, false});
        } else {
            f.slots.assign(s.begin(), s.end());  // set order == canonical order
        }
    }
    return feats;
}

DegreeSignatureSet dedupe_degree_features(const std::vector<DegreeFeature>& feats) {
    DegreeSignatureSet out;
    out.entity_signature.resize(feats.size(), -1);
    std::map<std::vector<DegreeSlot>, std::int32_t> seen;
    for (const DegreeFeature& f : feats) {
        auto [it, inserted] = seen.emplace(f.slots, static_cast<std::int32_t>(out.signatures.size()));
        if (inserted) out.signatures.push_back(f.slots);
        out.entity_signature[static_cast<std::size_t>(f.entity)] = it->second;
    }
    return out;
}

std::string degree_signature_string(const std::vector<DegreeSlot>& slots, const Vocabulary& vocab) {
    std::string s;
    for (const DegreeSlot& slot : slots) {
        if (!s.empty()) s += ' ';
        s += slot.in ? "in:" : "out:";
        s += slot.rel == kPadRelation ? std::string("PAD") : vocab.relation_name(slot.rel);
    }
    return s;
}

}  // namespace kgr
