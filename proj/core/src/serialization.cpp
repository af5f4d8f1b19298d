#include "spinhtm/serialization.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "spinhtm/dataset_io.hpp"
#include "spinhtm/error.hpp"

namespace spinhtm::htm {

namespace {

constexpr char kMagic[8] = {'S', 'P', 'H', 'T', 'M', 'N', 'E', 'T'};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void size(std::size_t v) { u64(v); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{in_[pos_++]} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{in_[pos_++]} << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  // Counts are bounded by the bytes left so corrupt files fail fast.
  std::size_t size(std::size_t min_bytes_each = 1) {
    const auto v = u64();
    if (min_bytes_each > 0 && v > (in_.size() - pos_) / min_bytes_each) bad("element count exceeds file size");
    return static_cast<std::size_t>(v);
  }
  bool done() const { return pos_ == in_.size(); }
  [[noreturn]] static void bad(const std::string& msg) { throw Error(ErrorKind::BadNetworkFile, msg); }

 private:
  void need(std::size_t n) {
    if (in_.size() - pos_ < n) bad("truncated network file");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_matrix(Writer& w, const WeightMatrix& m) {
  w.size(m.rows());
  w.size(m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    w.size(row.size());
    for (const auto& e : row) {
      w.u32(e.col);
      w.f64(e.value);
    }
  }
}

WeightMatrix read_matrix(Reader& r) {
  const auto rows = r.size(8);
  const auto cols = static_cast<std::size_t>(r.u64());
  WeightMatrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto n = r.size(12);
    for (std::size_t k = 0; k < n; ++k) {
      const auto c = r.u32();
      const double v = r.f64();
      if (c >= cols || v == 0.0) Reader::bad("malformed matrix entry");
      m.set(i, c, v);
    }
  }
  return m;
}

void write_params(Writer& w, const NodeParams& p) {
  w.f64(p.matching_threshold);
  w.size(p.max_group_size);
  w.i32(p.weight_bits);
  w.f64(p.y_threshold);
}

NodeParams read_params(Reader& r) {
  NodeParams p;
  p.matching_threshold = r.f64();
  p.max_group_size = static_cast<std::size_t>(r.u64());
  p.weight_bits = r.i32();
  p.y_threshold = r.f64();
  return p;
}

void write_index_lists(Writer& w, const std::vector<std::vector<std::size_t>>& lists) {
  w.size(lists.size());
  for (const auto& l : lists) {
    w.size(l.size());
    for (auto v : l) w.size(v);
  }
}

std::vector<std::vector<std::size_t>> read_index_lists(Reader& r) {
  std::vector<std::vector<std::size_t>> lists(r.size(8));
  for (auto& l : lists) {
    l.resize(r.size(8));
    for (auto& v : l) v = static_cast<std::size_t>(r.u64());
  }
  return lists;
}

}  // namespace

class NodeCodec {
 public:
  static void write(Writer& w, const HtmNode& n) {
    w.size(n.input_dim_);
    write_params(w, n.params_);
    w.u8(n.output_ ? 1 : 0);
    w.size(n.n_classes_);
    w.u8(n.finalized_ ? 1 : 0);
    w.size(n.coincidences_.size());
    for (const auto& c : n.coincidences_) {
      w.size(c.index.size());
      for (std::size_t k = 0; k < c.index.size(); ++k) {
        w.u32(c.index[k]);
        w.f64(c.value[k]);
      }
      w.f64(c.norm);
    }
    for (auto c : n.counts_) w.u64(c);
    w.u64(n.total_count_);
    for (const auto& row : n.tac_) {
      w.size(row.size());
      for (const auto& [j, t] : row) {
        w.u32(j);
        w.u32(t);
      }
    }
    w.size(n.groups_.size());
    for (const auto& g : n.groups_) {
      w.size(g.size());
      for (auto i : g) w.u32(i);
    }
    w.size(n.pcw_counts_.size());
    for (const auto& row : n.pcw_counts_) {
      w.size(row.size());
      for (auto v : row) w.u32(v);
    }
    write_matrix(w, n.coincidence_matrix_);
    write_matrix(w, n.inference_matrix_);
    w.i32(static_cast<std::int32_t>(n.zero_coincidence_));
  }

  static HtmNode read(Reader& r) {
    HtmNode n;
    n.input_dim_ = static_cast<std::size_t>(r.u64());
    n.params_ = read_params(r);
    n.output_ = r.u8() != 0;
    n.n_classes_ = static_cast<std::size_t>(r.u64());
    n.finalized_ = r.u8() != 0;
    n.coincidences_.resize(r.size(16));
    for (auto& c : n.coincidences_) {
      const auto k = r.size(12);
      c.index.resize(k);
      c.value.resize(k);
      for (std::size_t i = 0; i < k; ++i) {
        c.index[i] = r.u32();
        c.value[i] = r.f64();
        if (c.index[i] >= n.input_dim_) Reader::bad("coincidence index out of range");
      }
      c.norm = r.f64();
    }
    const std::size_t nc = n.coincidences_.size();
    n.counts_.resize(nc);
    for (auto& c : n.counts_) c = r.u64();
    n.total_count_ = r.u64();
    n.tac_.resize(nc);
    for (auto& row : n.tac_) {
      const auto k = r.size(8);
      for (std::size_t i = 0; i < k; ++i) {
        const auto j = r.u32();
        const auto t = r.u32();
        if (j >= nc) Reader::bad("TAC index out of range");
        row[j] = t;
      }
    }
    n.groups_.resize(r.size(8));
    for (auto& g : n.groups_) {
      g.resize(r.size(4));
      for (auto& i : g) {
        i = r.u32();
        if (i >= nc) Reader::bad("group member out of range");
      }
    }
    n.pcw_counts_.resize(r.size(8));
    for (auto& row : n.pcw_counts_) {
      row.resize(r.size(4));
      for (auto& v : row) v = r.u32();
    }
    n.coincidence_matrix_ = read_matrix(r);
    n.inference_matrix_ = read_matrix(r);
    n.zero_coincidence_ = r.i32();
    return n;
  }
};

class NetworkCodec {
 public:
  static std::vector<std::uint8_t> write(const Network& net) {
    Writer w;
    for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
    w.u32(kNetworkFormatVersion);
    const auto& t = net.topology_;
    w.i32(t.field_width);
    w.i32(t.field_height);
    w.i32(t.patch_size);
    write_index_lists(w, t.levels);
    write_index_lists(w, t.children);
    w.size(t.patches.size());
    for (const auto& p : t.patches) {
      w.i32(p.x);
      w.i32(p.y);
    }
    w.size(t.parent.size());
    for (auto p : t.parent) w.size(p);
    write_params(w, net.params_);
    w.size(net.n_classes_);
    w.size(net.nodes_.size());
    for (const auto& n : net.nodes_) NodeCodec::write(w, n);
    return w.take();
  }

  static Network read(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    for (char c : kMagic) {
      if (r.u8() != static_cast<std::uint8_t>(c)) Reader::bad("not a network file (bad magic)");
    }
    const auto version = r.u32();
    if (version != kNetworkFormatVersion) {
      Reader::bad("unsupported network format version " + std::to_string(version));
    }
    Network net;
    auto& t = net.topology_;
    t.field_width = r.i32();
    t.field_height = r.i32();
    t.patch_size = r.i32();
    t.levels = read_index_lists(r);
    t.children = read_index_lists(r);
    t.patches.resize(r.size(8));
    for (auto& p : t.patches) {
      p.x = r.i32();
      p.y = r.i32();
    }
    t.parent.resize(r.size(8));
    for (auto& p : t.parent) p = static_cast<std::size_t>(r.u64());
    try {
      t.validate();
    } catch (const Error& e) {
      Reader::bad(std::string("invalid topology: ") + e.what());
    }
    net.params_ = read_params(r);
    net.n_classes_ = static_cast<std::size_t>(r.u64());
    const auto count = r.size(8);
    if (count != t.node_count()) Reader::bad("node count does not match topology");
    net.nodes_.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      net.nodes_.push_back(NodeCodec::read(r));
      net.nodes_.back().set_matrix_ids(i);
    }
    if (!r.done()) Reader::bad("trailing bytes after network");
    return net;
  }
};

std::vector<std::uint8_t> serialize_network(const Network& net) { return NetworkCodec::write(net); }

Network deserialize_network(std::span<const std::uint8_t> bytes) { return NetworkCodec::read(bytes); }

void save_network(const Network& net, const std::string& path) {
  const auto bytes = serialize_network(net);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, "cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorKind::Io, "write failed: " + path);
}

Network load_network(const std::string& path) {
  const auto bytes = dataset::read_file_bytes(path);
  return deserialize_network(bytes);
}

}  // namespace spinhtm::htm
