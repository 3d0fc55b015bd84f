#pragma once
// Typed heterogeneous graph: node/relation schema, labeled nodes with dense
// contiguous indices, per-relation adjacency, and optional per-node text.
// Nodes carrying text form the content set V_S used by the text encoder.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "hetembed/common.hpp"
#include "hetembed/tsv.hpp"

namespace hetembed {

using NodeIndex = uint32_t;
using TypeId = uint16_t;
using RelId = uint16_t;

constexpr NodeIndex kNoNode = static_cast<NodeIndex>(-1);

struct RelationDef {
  std::string name;
  TypeId src = 0;
  TypeId dst = 0;
  bool directed = false;  // undirected relations are traversed both ways
};

// Declares the node types and the (src type, dst type) pair of every relation.
class GraphSchema {
 public:
  TypeId add_node_type(const std::string& name) {
    if (type_ids_.count(name)) throw DataError("duplicate node type: " + name);
    type_ids_[name] = static_cast<TypeId>(type_names_.size());
    type_names_.push_back(name);
    return static_cast<TypeId>(type_names_.size() - 1);
  }

  RelId add_relation(const std::string& name, const std::string& src,
                     const std::string& dst, bool directed = false) {
    if (rel_ids_.count(name)) throw DataError("duplicate relation: " + name);
    RelationDef def{name, node_type_id(src), node_type_id(dst), directed};
    rel_ids_[name] = static_cast<RelId>(relations_.size());
    relations_.push_back(def);
    return static_cast<RelId>(relations_.size() - 1);
  }

  size_t num_node_types() const { return type_names_.size(); }
  size_t num_relations() const { return relations_.size(); }

  bool has_node_type(const std::string& name) const { return type_ids_.count(name) > 0; }
  bool has_relation(const std::string& name) const { return rel_ids_.count(name) > 0; }

  TypeId node_type_id(const std::string& name) const {
    auto it = type_ids_.find(name);
    if (it == type_ids_.end()) throw DataError("unknown node type: " + name);
    return it->second;
  }
  RelId relation_id(const std::string& name) const {
    auto it = rel_ids_.find(name);
    if (it == rel_ids_.end()) throw DataError("unknown relation: " + name);
    return it->second;
  }

  const std::string& node_type_name(TypeId t) const { return type_names_.at(t); }
  const RelationDef& relation(RelId r) const { return relations_.at(r); }

  // True when some relation connects type a to type b (in a traversable direction).
  bool types_connectable(TypeId a, TypeId b) const {
    for (const auto& r : relations_) {
      if (r.src == a && r.dst == b) return true;
      if (!r.directed && r.src == b && r.dst == a) return true;
    }
    return false;
  }

 private:
  std::vector<std::string> type_names_;
  std::unordered_map<std::string, TypeId> type_ids_;
  std::vector<RelationDef> relations_;
  std::unordered_map<std::string, RelId> rel_ids_;
};

// Schema file: `node_type<TAB>author` or `relation<TAB>write<TAB>author<TAB>paper[<TAB>directed]`.
inline GraphSchema load_schema(const std::string& path) {
  GraphSchema schema;
  for_each_tsv_row(path, [&](size_t lineno, const std::vector<std::string>& f) {
    try {
      if (f[0] == "node_type" && f.size() == 2) {
        schema.add_node_type(f[1]);
      } else if (f[0] == "relation" && (f.size() == 4 || f.size() == 5)) {
        bool directed = false;
        if (f.size() == 5) {
          if (f[4] == "directed") directed = true;
          else if (f[4] != "undirected") throw DataError("bad directedness: " + f[4]);
        }
        schema.add_relation(f[1], f[2], f[3], directed);
      } else {
        throw DataError("unrecognized schema row");
      }
    } catch (const DataError& e) {
      throw DataError(tsv_context(path, lineno) + ": " + e.what());
    }
  });
  if (schema.num_node_types() == 0) throw DataError(path + ": schema declares no node types");
  return schema;
}

inline void save_schema(const GraphSchema& schema, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path);
  for (TypeId t = 0; t < schema.num_node_types(); ++t)
    out << "node_type\t" << schema.node_type_name(t) << "\n";
  for (RelId r = 0; r < schema.num_relations(); ++r) {
    const auto& def = schema.relation(r);
    out << "relation\t" << def.name << "\t" << schema.node_type_name(def.src) << "\t"
        << schema.node_type_name(def.dst) << "\t" << (def.directed ? "directed" : "undirected")
        << "\n";
  }
}

class HetGraph {
 public:
  explicit HetGraph(GraphSchema schema) : schema_(std::move(schema)) {}

  const GraphSchema& schema() const { return schema_; }

  size_t num_nodes() const { return labels_.size(); }
  size_t num_edges() const { return edges_.size(); }

  bool has_node(const std::string& label) const { return index_of_.count(label) > 0; }
  NodeIndex index_of(const std::string& label) const {
    auto it = index_of_.find(label);
    if (it == index_of_.end()) throw DataError("unknown node: " + label);
    return it->second;
  }
  const std::string& label(NodeIndex v) const { return labels_.at(v); }
  TypeId type_of(NodeIndex v) const { return types_.at(v); }

  bool has_content(NodeIndex v) const { return has_content_.at(v) != 0; }
  const std::string& content(NodeIndex v) const {
    if (!has_content(v)) throw DataError("node has no content: " + labels_.at(v));
    return content_.at(v);
  }
  // Content nodes (V_S) in ascending index order.
  std::vector<NodeIndex> content_nodes() const {
    std::vector<NodeIndex> out;
    for (NodeIndex v = 0; v < num_nodes(); ++v)
      if (has_content_[v]) out.push_back(v);
    return out;
  }

  NodeIndex add_node(const std::string& label, TypeId type) {
    if (index_of_.count(label)) throw DataError("duplicate node label: " + label);
    if (type >= schema_.num_node_types()) throw DataError("unknown node type id");
    NodeIndex v = static_cast<NodeIndex>(labels_.size());
    index_of_[label] = v;
    labels_.push_back(label);
    types_.push_back(type);
    has_content_.push_back(0);
    content_.emplace_back();
    rel_adj_.emplace_back(schema_.num_relations());
    typed_adj_.emplace_back(schema_.num_node_types());
    all_adj_.emplace_back();
    return v;
  }
  NodeIndex add_node(const std::string& label, const std::string& type_name) {
    return add_node(label, schema_.node_type_id(type_name));
  }

  void set_content(NodeIndex v, const std::string& text) {
    if (v >= num_nodes()) throw DataError("unknown node index");
    has_content_.at(v) = 1;
    content_.at(v) = text;
  }
  void set_content(const std::string& label, const std::string& text) {
    set_content(index_of(label), text);
  }

  // Adds one logical edge. The endpoint types must match the relation's
  // declared (src, dst) pair; for undirected relations either orientation is
  // accepted and traversal is installed both ways. Duplicate edges collapse.
  void add_edge(NodeIndex src, NodeIndex dst, RelId rel) {
    if (src >= num_nodes() || dst >= num_nodes()) throw DataError("unknown node index");
    if (rel >= schema_.num_relations()) throw DataError("unknown relation id");
    const RelationDef& def = schema_.relation(rel);
    bool forward = types_[src] == def.src && types_[dst] == def.dst;
    bool backward = types_[src] == def.dst && types_[dst] == def.src;
    if (def.directed ? !forward : (!forward && !backward)) {
      throw DataError("relation '" + def.name + "' expects (" +
                      schema_.node_type_name(def.src) + ", " + schema_.node_type_name(def.dst) +
                      ") but edge is (" + schema_.node_type_name(types_[src]) + ", " +
                      schema_.node_type_name(types_[dst]) + ")");
    }
    bool inserted = insert_arc(src, dst, rel);
    if (!def.directed && src != dst) insert_arc(dst, src, rel);
    if (inserted) edges_.emplace_back(src, rel, dst);
  }
  void add_edge(const std::string& src, const std::string& rel, const std::string& dst) {
    add_edge(index_of(src), index_of(dst), schema_.relation_id(rel));
  }

  // Traversable neighbors of v: all relations merged, sorted ascending, deduplicated.
  const std::vector<NodeIndex>& neighbors(NodeIndex v) const {
    if (v >= num_nodes()) throw DataError("unknown node index");
    return all_adj_[v];
  }
  // Traversable neighbors of v under one relation (out-neighbors if directed).
  const std::vector<NodeIndex>& neighbors(NodeIndex v, RelId rel) const {
    if (v >= num_nodes()) throw DataError("unknown node index");
    if (rel >= schema_.num_relations()) throw DataError("unknown relation id");
    return rel_adj_[v][rel];
  }
  // Traversable neighbors of v having node type t.
  const std::vector<NodeIndex>& neighbors_of_type(NodeIndex v, TypeId t) const {
    if (v >= num_nodes()) throw DataError("unknown node index");
    if (t >= schema_.num_node_types()) throw DataError("unknown node type id");
    return typed_adj_[v][t];
  }
  size_t degree(NodeIndex v) const { return neighbors(v).size(); }

  // Logical edges as (src, rel, dst) in insertion order (undirected edges once).
  const std::vector<std::tuple<NodeIndex, RelId, NodeIndex>>& edges() const { return edges_; }

 private:
  // Inserts dst into the sorted adjacency rows of src; returns false if present.
  bool insert_arc(NodeIndex src, NodeIndex dst, RelId rel) {
    auto& row = rel_adj_[src][rel];
    auto it = std::lower_bound(row.begin(), row.end(), dst);
    if (it != row.end() && *it == dst) return false;
    row.insert(it, dst);
    auto& all = all_adj_[src];
    auto ait = std::lower_bound(all.begin(), all.end(), dst);
    if (ait == all.end() || *ait != dst) {
      all.insert(ait, dst);
      auto& typed = typed_adj_[src][types_[dst]];
      typed.insert(std::lower_bound(typed.begin(), typed.end(), dst), dst);
    }
    return true;
  }

  GraphSchema schema_;
  std::vector<std::string> labels_;
  std::vector<TypeId> types_;
  std::vector<uint8_t> has_content_;
  std::vector<std::string> content_;
  std::unordered_map<std::string, NodeIndex> index_of_;
  std::vector<std::vector<std::vector<NodeIndex>>> rel_adj_;    // [node][relation]
  std::vector<std::vector<std::vector<NodeIndex>>> typed_adj_;  // [node][neighbor type]
  std::vector<std::vector<NodeIndex>> all_adj_;                 // [node], merged + dedup
  std::vector<std::tuple<NodeIndex, RelId, NodeIndex>> edges_;
};

// Loads nodes.tsv (`label<TAB>type`), edges.tsv (`src<TAB>relation<TAB>dst`)
// and optionally content.tsv (`label<TAB>text`). Indices follow first
// appearance in the nodes file; malformed rows are reported with file:line.
inline HetGraph load_graph(const std::string& nodes_path, const std::string& edges_path,
                           const std::string& content_path, const GraphSchema& schema) {
  HetGraph g(schema);
  for_each_tsv_row(nodes_path, [&](size_t lineno, const std::vector<std::string>& f) {
    try {
      if (f.size() != 2) throw DataError("expected `label<TAB>type`");
      g.add_node(f[0], f[1]);
    } catch (const DataError& e) {
      throw DataError(tsv_context(nodes_path, lineno) + ": " + e.what());
    }
  });
  for_each_tsv_row(edges_path, [&](size_t lineno, const std::vector<std::string>& f) {
    try {
      if (f.size() != 3) throw DataError("expected `src<TAB>relation<TAB>dst`");
      g.add_edge(f[0], f[1], f[2]);
    } catch (const DataError& e) {
      throw DataError(tsv_context(edges_path, lineno) + ": " + e.what());
    }
  });
  if (!content_path.empty()) {
    for_each_tsv_row(content_path, [&](size_t lineno, const std::vector<std::string>& f) {
      try {
        if (f.size() != 2) throw DataError("expected `label<TAB>text`");
        g.set_content(g.index_of(f[0]), f[1]);
      } catch (const DataError& e) {
        throw DataError(tsv_context(content_path, lineno) + ": " + e.what());
      }
    });
  }
  return g;
}

inline void save_graph(const HetGraph& g, const std::string& nodes_path,
                       const std::string& edges_path, const std::string& content_path) {
  std::ofstream nodes(nodes_path);
  if (!nodes) throw DataError("cannot open " + nodes_path);
  for (NodeIndex v = 0; v < g.num_nodes(); ++v)
    nodes << g.label(v) << "\t" << g.schema().node_type_name(g.type_of(v)) << "\n";

  std::ofstream edges(edges_path);
  if (!edges) throw DataError("cannot open " + edges_path);
  for (const auto& [src, rel, dst] : g.edges())
    edges << g.label(src) << "\t" << g.schema().relation(rel).name << "\t" << g.label(dst) << "\n";

  if (!content_path.empty()) {
    std::ofstream content(content_path);
    if (!content) throw DataError("cannot open " + content_path);
    for (NodeIndex v : g.content_nodes()) content << g.label(v) << "\t" << g.content(v) << "\n";
  }
}

}  // namespace hetembed
