#pragma once

#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>

#include "vht/tree/binary_io.hpp"
#include "vht/tree/tree_model.hpp"

namespace vht {

// Tree checkpoint layout:
//   magic "VHTM" | u32 version | sections...
//   section = u16 tag | u64 byte length | payload
// Readers skip sections with unknown tags.
namespace tree_format {

inline constexpr char kMagic[4] = {'V', 'H', 'T', 'M'};
inline constexpr std::uint32_t kVersion = 1;

enum Section : std::uint16_t { schema = 1, nodes = 2, seen = 3, counters = 4 };

inline void write_schema(BinaryWriter& w, const Schema& s) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.attributes.size()));
  for (const auto& a : s.attributes) {
    w.put_string(a.name);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(a.kind));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(a.values.size()));
    for (const auto& v : a.values) w.put_string(v);
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.classes.size()));
  for (const auto& c : s.classes) w.put_string(c);
}

inline Schema read_schema(BinaryReader& r) {
  Schema s;
  const auto m = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < m; ++i) {
    AttributeInfo a;
    a.name = r.get_string();
    const auto kind = r.get<std::uint8_t>();
    if (kind > 1) throw FormatError("unknown attribute kind");
    a.kind = static_cast<AttributeKind>(kind);
    const auto nv = r.get<std::uint32_t>();
    for (std::uint32_t v = 0; v < nv; ++v) a.values.push_back(r.get_string());
    s.attributes.push_back(std::move(a));
  }
  const auto nc = r.get<std::uint32_t>();
  for (std::uint32_t k = 0; k < nc; ++k) s.classes.push_back(r.get_string());
  return s;
}

inline void write_doubles(BinaryWriter& w, const std::vector<double>& v) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(v.size()));
  for (double x : v) w.put<double>(x);
}

inline std::vector<double> read_doubles(BinaryReader& r) {
  const auto n = r.get<std::uint32_t>();
  std::vector<double> v(n);
  for (auto& x : v) x = r.get<double>();
  return v;
}

inline void write_node(BinaryWriter& w, const std::vector<TreeNode>& nodes, std::size_t i) {
  if (const auto* l = std::get_if<LeafNode>(&nodes[i])) {
    w.put<std::uint8_t>(0);
    w.put<std::uint64_t>(l->id);
    w.put<double>(l->weight_at_last_attempt);
    write_doubles(w, l->class_counts);
    write_doubles(w, l->basis_counts);
    return;
  }
  const auto& s = std::get<SplitNode>(nodes[i]);
  w.put<std::uint8_t>(1);
  w.put<std::uint32_t>(s.attribute);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(s.kind));
  w.put<double>(s.threshold);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.children.size()));
  for (auto c : s.children) write_node(w, nodes, c);
}

inline std::size_t read_node(BinaryReader& r, std::vector<TreeNode>& nodes, int depth = 0) {
  if (depth > 10000) throw FormatError("tree too deep");
  const auto type = r.get<std::uint8_t>();
  const std::size_t index = nodes.size();
  if (type == 0) {
    LeafNode l;
    l.id = r.get<std::uint64_t>();
    l.weight_at_last_attempt = r.get<double>();
    l.class_counts = read_doubles(r);
    l.basis_counts = read_doubles(r);
    nodes.emplace_back(std::move(l));
    return index;
  }
  if (type != 1) throw FormatError("unknown node type");
  SplitNode s;
  s.attribute = r.get<std::uint32_t>();
  const auto kind = r.get<std::uint8_t>();
  if (kind > 1) throw FormatError("unknown attribute kind");
  s.kind = static_cast<AttributeKind>(kind);
  s.threshold = r.get<double>();
  const auto n = r.get<std::uint32_t>();
  nodes.emplace_back(SplitNode{});
  for (std::uint32_t c = 0; c < n; ++c) s.children.push_back(read_node(r, nodes, depth + 1));
  nodes[index] = std::move(s);
  return index;
}

inline void put_section(BinaryWriter& out, Section tag, const BinaryWriter& payload) {
  out.put<std::uint16_t>(tag);
  out.put<std::uint64_t>(payload.bytes().size());
  out.put_bytes(payload.bytes());
}

}  // namespace tree_format

inline std::vector<unsigned char> serialize_tree(const TreeModel& tree) {
  using namespace tree_format;
  BinaryWriter out;
  for (char c : kMagic) out.put<std::uint8_t>(static_cast<std::uint8_t>(c));
  out.put<std::uint32_t>(kVersion);

  BinaryWriter schema_w;
  write_schema(schema_w, tree.schema());
  put_section(out, Section::schema, schema_w);

  BinaryWriter nodes_w;
  write_node(nodes_w, tree.nodes(), 0);
  put_section(out, Section::nodes, nodes_w);

  BinaryWriter seen_w;
  write_doubles(seen_w, tree.seen_class_counts());
  put_section(out, Section::seen, seen_w);

  BinaryWriter counters_w;
  counters_w.put<std::uint64_t>(tree.next_leaf_id());
  counters_w.put<std::uint64_t>(tree.num_splits());
  put_section(out, Section::counters, counters_w);
  return out.take();
}

inline TreeModel deserialize_tree(const std::vector<unsigned char>& bytes) {
  using namespace tree_format;
  BinaryReader r(bytes);
  for (char c : kMagic) {
    if (r.get<std::uint8_t>() != static_cast<std::uint8_t>(c)) throw FormatError("not a tree checkpoint");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));

  std::optional<Schema> schema;
  std::vector<TreeNode> nodes;
  std::vector<double> seen;
  LeafId next_id = 0;
  std::uint64_t splits = 0;
  while (!r.at_end()) {
    const auto tag = r.get<std::uint16_t>();
    const auto len = r.get<std::uint64_t>();
    auto body = r.sub(static_cast<std::size_t>(len));
    switch (tag) {
      case Section::schema: schema = read_schema(body); break;
      case Section::nodes: read_node(body, nodes); break;
      case Section::seen: seen = read_doubles(body); break;
      case Section::counters:
        next_id = body.get<std::uint64_t>();
        splits = body.get<std::uint64_t>();
        break;
      default: break;
    }
  }
  if (!schema || nodes.empty()) throw FormatError("checkpoint is missing schema or nodes");
  return TreeModel::from_parts(std::move(*schema), std::move(nodes), std::move(seen), next_id,
                               static_cast<std::size_t>(splits));
}

inline void save_tree(const TreeModel& tree, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  const auto bytes = serialize_tree(tree);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path);
}

inline TreeModel load_tree(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_tree(bytes);
}

}  // namespace vht
