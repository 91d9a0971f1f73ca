#include "kgr/sparseops.hpp"

#include <algorithm>

namespace kgr {

bool SparseOperator::has_entry(EntityId i, EntityId j) const {
    if (i < 0 || i >= n) return false;
    auto b = cols.begin() + row_ptr[static_cast<std::size_t>(i)];
    auto e = cols.begin() + row_ptr[static_cast<std::size_t>(i) + 1];
    return std::binary_search(b, e, j);
}

std::span<const EntityId> OperatorSet::any_neighbors(EntityId e) const {
    auto b = static_cast<std::size_t>(any_row_ptr[static_cast<std::size_t>(e)]);
    auto fin = static_cast<std::size_t>(any_row_ptr[static_cast<std::size_t>(e) + 1]);
    return {any_cols.data() + b, fin - b};
}

namespace {

SparseOperator from_rows(RelationId rel, std::int64_t n,
                         std::vector<std::vector<EntityId>>& rows) {
    SparseOperator op;
    op.rel = rel;
    op.n = n;
    op.row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
    std::int64_t nnz = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        auto& r = rows[static_cast<std::size_t>(i)];
        std::sort(r.begin(), r.end());
        r.erase(std::unique(r.begin(), r.end()), r.end());
        op.row_ptr[static_cast<std::size_t>(i)] = nnz;
        nnz += static_cast<std::int64_t>(r.size());
    }
    op.row_ptr[static_cast<std::size_t>(n)] = nnz;
    op.cols.reserve(static_cast<std::size_t>(nnz));
    for (std::int64_t i = 0; i < n; ++i) {
        auto& r = rows[static_cast<std::size_t>(i)];
        op.cols.insert(op.cols.end(), r.begin(), r.end());
        r.clear();
        r.shrink_to_fit();
    }
    return op;
}

}  // namespace

OperatorSet build_operators(const std::vector<Triple>& g, const Vocabulary& vocab) {
    const std::int64_t n = vocab.num_entities();
    const std::int64_t base = vocab.num_base_relations();
    const std::int64_t nrel = vocab.num_relation_ids();

    OperatorSet set;
    set.num_entities = n;
    set.ops.reserve(static_cast<std::size_t>(nrel) + 1);

    // Identity at slot 0.
    SparseOperator ident;
    ident.rel = -1;
    ident.n = n;
    ident.row_ptr.resize(static_cast<std::size_t>(n) + 1);
    ident.cols.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        ident.row_ptr[static_cast<std::size_t>(i)] = i;
        ident.cols[static_cast<std::size_t>(i)] = static_cast<EntityId>(i);
    }
    ident.row_ptr[static_cast<std::size_t>(n)] = n;
    set.ops.push_back(std::move(ident));

    std::vector<std::vector<EntityId>> rows(static_cast<std::size_t>(n));
    for (RelationId r = 0; r < nrel; ++r) {
        const bool inv = r >= base;
        const RelationId br = inv ? static_cast<RelationId>(r - base) : r;
        for (const Triple& t : g) {
            if (t.rel != br) continue;
            if (inv)
                rows[static_cast<std::size_t>(t.tail)].push_back(t.head);
            else
                rows[static_cast<std::size_t>(t.head)].push_back(t.tail);
        }
        set.ops.push_back(from_rows(r, n, rows));
    }

    // Union adjacency over relation operators, for reachability queries.
    std::vector<std::vector<EntityId>> any(static_cast<std::size_t>(n));
    for (const Triple& t : g) {
        any[static_cast<std::size_t>(t.head)].push_back(t.tail);
        if (nrel > base) any[static_cast<std::size_t>(t.tail)].push_back(t.head);
    }
    SparseOperator u = from_rows(-1, n, any);
    set.any_row_ptr = std::move(u.row_ptr);
    set.any_cols = std::move(u.cols);
    return set;
}

namespace {

inline bool edge_excluded(std::span<const ExcludedEdge> exclude, RelationId rel, EntityId i,
                          EntityId j) {
    for (const ExcludedEdge& x : exclude)
        if (x.rel == rel && x.head == i && x.tail == j) return true;
    return false;
}

}  // namespace

std::vector<double> vec_matmul(std::span<const double> v, const SparseOperator& op,
                               std::span<const ExcludedEdge> exclude) {
    contract(static_cast<std::int64_t>(v.size()) == op.n, "vec_matmul: dimension mismatch");
    std::vector<double> out(static_cast<std::size_t>(op.n), 0.0);
    const bool unit = op.weights.empty();
    for (std::int64_t i = 0; i < op.n; ++i) {
        const double vi = v[static_cast<std::size_t>(i)];
        if (vi == 0.0) continue;
        for (std::int64_t p = op.row_ptr[static_cast<std::size_t>(i)];
             p < op.row_ptr[static_cast<std::size_t>(i) + 1]; ++p) {
            const EntityId j = op.cols[static_cast<std::size_t>(p)];
            if (!exclude.empty() && edge_excluded(exclude, op.rel, static_cast<EntityId>(i), j))
                continue;
            out[static_cast<std::size_t>(j)] += vi * (unit ? 1.0 : op.weights[static_cast<std::size_t>(p)]);
        }
    }
    return out;
}

std::vector<std::uint64_t> count_paths_from(EntityId h, std::span<const RelationId> pattern,
                                            const OperatorSet& ops,
                                            std::span<const ExcludedEdge> exclude) {
    contract(!pattern.empty(), "count_paths: empty pattern");
    contract(h >= 0 && h < ops.num_entities, "count_paths: head out of range");
    std::vector<std::uint64_t> cur(static_cast<std::size_t>(ops.num_entities), 0);
    cur[static_cast<std::size_t>(h)] = 1;
    std::vector<std::uint64_t> next(cur.size());
    for (RelationId r : pattern) {
        const SparseOperator& op = ops.relation(r);
        contract(op.weights.empty(), "count_paths requires 0/1 operators");
        std::fill(next.begin(), next.end(), 0);
        for (std::int64_t i = 0; i < op.n; ++i) {
            const std::uint64_t c = cur[static_cast<std::size_t>(i)];
            if (c == 0) continue;
            for (std::int64_t p = op.row_ptr[static_cast<std::size_t>(i)];
                 p < op.row_ptr[static_cast<std::size_t>(i) + 1]; ++p) {
                const EntityId j = op.cols[static_cast<std::size_t>(p)];
                if (!exclude.empty() && edge_excluded(exclude, r, static_cast<EntityId>(i), j))
                    continue;
                next[static_cast<std::size_t>(j)] += c;
            }
        }
        cur.swap(next);
    }
    return cur;
}

std::uint64_t count_paths(EntityId h, EntityId t, std::span<const RelationId> pattern,
                          const OperatorSet& ops, std::span<const ExcludedEdge> exclude) {
    contract(t >= 0 && t < ops.num_entities, "count_paths: tail out of range");
    return count_paths_from(h, pattern, ops, exclude)[static_cast<std::size_t>(t)];
}

}  // namespace kgr
