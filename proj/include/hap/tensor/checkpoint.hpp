#pragma once

// Parameter checkpoint format (text, versioned by its magic line):
//
//   HAPCKPT1
//   seed <u64>
//   blocks <count>
//   net <name> layers <L> <size_0> ... <size_{L-1}> params <N>
//   <N hex-float values, whitespace separated>
//   array <name> params <N>
//   <N hex-float values>
//   end
//
// Values are written as C99 hex floats so a save/load cycle is bit exact.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hap/core/error.hpp"
#include "hap/tensor/mlp.hpp"

namespace hap::tensor {

inline constexpr const char* kCheckpointMagic = "HAPCKPT1";

struct Checkpoint {
  struct Net {
    std::string name;
    Mlp net;
  };
  struct Array {
    std::string name;
    std::vector<double> values;
  };

  std::uint64_t seed = 0;
  std::vector<Net> nets;
  std::vector<Array> arrays;

  [[nodiscard]] const Mlp& net(const std::string& name) const {
    for (const auto& n : nets)
      if (n.name == name) return n.net;
    throw FormatError("checkpoint: no network named '" + name + "'");
  }

  [[nodiscard]] const std::vector<double>* array(const std::string& name) const {
    for (const auto& a : arrays)
      if (a.name == name) return &a.values;
    return nullptr;
  }
};

namespace detail {

inline void write_values(std::ostream& out, const double* data, std::size_t n) {
  char buf[64];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof buf, "%a", data[i]);
    out << buf << ((i % 4 == 3 || i + 1 == n) ? '\n' : ' ');
  }
}

inline std::vector<double> read_values(std::istream& in, std::size_t n) {
  std::vector<double> values(n);
  std::string token;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(in >> token)) throw FormatError("checkpoint: truncated parameter block");
    char* end = nullptr;
    values[i] = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0') throw FormatError("checkpoint: bad value '" + token + "'");
  }
  return values;
}

inline void expect(std::istream& in, const std::string& word) {
  std::string token;
  if (!(in >> token) || token != word)
    throw FormatError("checkpoint: expected '" + word + "' but found '" + token + "'");
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out << kCheckpointMagic << '\n';
  out << "seed " << ckpt.seed << '\n';
  out << "blocks " << (ckpt.nets.size() + ckpt.arrays.size()) << '\n';
  for (const auto& [name, net] : ckpt.nets) {
    out << "net " << name << " layers " << net.layer_sizes().size();
    for (auto s : net.layer_sizes()) out << ' ' << s;
    out << " params " << net.parameter_count() << '\n';
    detail::write_values(out, net.parameters().data(), net.parameter_count());
  }
  for (const auto& [name, values] : ckpt.arrays) {
    out << "array " << name << " params " << values.size() << '\n';
    detail::write_values(out, values.data(), values.size());
  }
  out << "end\n";
}

inline Checkpoint read_checkpoint(std::istream& in) {
  std::string magic;
  if (!(in >> magic) || magic != kCheckpointMagic) throw FormatError("checkpoint: missing HAPCKPT1 header");
  Checkpoint ckpt;
  detail::expect(in, "seed");
  if (!(in >> ckpt.seed)) throw FormatError("checkpoint: bad seed");
  detail::expect(in, "blocks");
  std::size_t blocks = 0;
  if (!(in >> blocks)) throw FormatError("checkpoint: bad block count");
  for (std::size_t b = 0; b < blocks; ++b) {
    std::string kind, name;
    if (!(in >> kind >> name)) throw FormatError("checkpoint: truncated block header");
    if (kind == "net") {
      detail::expect(in, "layers");
      std::size_t count = 0;
      if (!(in >> count) || count < 2) throw FormatError("checkpoint: bad layer count");
      std::vector<std::size_t> sizes(count);
      for (auto& s : sizes)
        if (!(in >> s) || s == 0) throw FormatError("checkpoint: bad layer size");
      detail::expect(in, "params");
      std::size_t n = 0;
      if (!(in >> n)) throw FormatError("checkpoint: bad parameter count");
      Mlp net(sizes);
      if (n != net.parameter_count()) throw FormatError("checkpoint: parameter count does not match layer sizes");
      const auto values = detail::read_values(in, n);
      for (std::size_t i = 0; i < n; ++i) net.parameters()[static_cast<Eigen::Index>(i)] = values[i];
      ckpt.nets.push_back({name, std::move(net)});
    } else if (kind == "array") {
      detail::expect(in, "params");
      std::size_t n = 0;
      if (!(in >> n)) throw FormatError("checkpoint: bad array length");
      ckpt.arrays.push_back({name, detail::read_values(in, n)});
    } else {
      throw FormatError("checkpoint: unknown block kind '" + kind + "'");
    }
  }
  detail::expect(in, "end");
  return ckpt;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw FormatError("checkpoint: cannot write " + path);
  write_checkpoint(out, ckpt);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("checkpoint: cannot read " + path);
  return read_checkpoint(in);
}

}  // namespace hap::tensor
