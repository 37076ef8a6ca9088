// spkv/container.hpp

// Copyright 2026 The spkv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Checkpoint container: a versioned text file mapping names to shaped arrays,
// plus string metadata. Layout (version 1):
//
//   spkv-container 1
//   meta <key> <value...>             zero or more, value runs to end of line
//   array <name> <ndim> <d1> ... <dn>
//   <v1> <v2> ... <vN>                N = d1 * ... * dn values, row-major
//   ...
//   end
//
// Values use the shortest decimal form that reads back bit-exactly, so a
// write/read cycle is lossless and reruns produce identical files.

#ifndef SPKV_CONTAINER_HPP_
#define SPKV_CONTAINER_HPP_

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "spkv/common.hpp"
#include "spkv/nn.hpp"

namespace spkv {

class Container {
 public:
  static constexpr int kVersion = 1;

  void set_meta(const std::string &key, const std::string &value) { meta_[key] = value; }
  bool has_meta(const std::string &key) const { return meta_.count(key) > 0; }
  const std::string &meta(const std::string &key) const {
    auto it = meta_.find(key);
    if (it == meta_.end()) throw ParseError("container has no metadata '" + key + "'");
    return it->second;
  }
  const std::map<std::string, std::string> &all_meta() const { return meta_; }

  void put(const std::string &name, nn::Tensor t) {
    for (auto &[n, existing] : arrays_)
      if (n == name) {
        existing = std::move(t);
        return;
      }
    arrays_.emplace_back(name, std::move(t));
  }
  void put_matrix(const std::string &name, const Eigen::Ref<const Matrix> &m) {
    put(name, nn::Tensor::from_matrix(m));
  }
  void put_vector(const std::string &name, const Eigen::Ref<const Vector> &v) {
    put(name, nn::Tensor::from_vector(v));
  }
  void put_scalar(const std::string &name, double v) { put(name, nn::Tensor::scalar(v)); }

  bool has(const std::string &name) const {
    for (auto &[n, t] : arrays_)
      if (n == name) return true;
    return false;
  }
  const nn::Tensor &get(const std::string &name) const {
    for (auto &[n, t] : arrays_)
      if (n == name) return t;
    throw ParseError("container has no array '" + name + "'");
  }
  Matrix get_matrix(const std::string &name) const {
    const nn::Tensor &t = get(name);
    if (t.shape().size() != 2) throw ParseError("array '" + name + "' is not a matrix");
    return t.matrix();
  }
  Vector get_vector(const std::string &name) const {
    const nn::Tensor &t = get(name);
    if (t.shape().size() != 1) throw ParseError("array '" + name + "' is not a vector");
    return t.vector();
  }
  double get_scalar(const std::string &name) const {
    const nn::Tensor &t = get(name);
    if (t.size() != 1) throw ParseError("array '" + name + "' is not a scalar");
    return t.value();
  }
  const std::vector<std::pair<std::string, nn::Tensor>> &arrays() const { return arrays_; }

  void write(std::ostream &os) const {
    os << "spkv-container " << kVersion << '\n';
    for (auto &[k, v] : meta_) os << "meta " << k << ' ' << v << '\n';
    for (auto &[name, t] : arrays_) {
      os << "array " << name << ' ' << t.shape().size();
      for (auto d : t.shape()) os << ' ' << d;
      os << '\n';
      for (size_t i = 0; i < t.size(); ++i) {
        if (i) os << ' ';
        os << format_double(t.values()[i]);
      }
      os << '\n';
    }
    os << "end\n";
  }

  void write(const std::string &path) const {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    write(os);
    os.flush();
    if (!os) throw IoError("write to " + path + " failed");
  }

  static Container read(std::istream &is, const std::string &what = "<stream>") {
    Container c;
    std::string line;
    size_t line_no = 0;
    auto fail = [&](const std::string &msg) -> void {
      throw ParseError(what + ":" + std::to_string(line_no) + ": " + msg);
    };
    if (!std::getline(is, line)) fail("empty container");
    ++line_no;
    {
      auto tok = split_ws(line);
      int version = 0;
      if (tok.size() != 2 || tok[0] != "spkv-container" || !parse_int(tok[1], &version))
        fail("not an spkv container");
      if (version != kVersion) fail("unsupported container version " + std::string(tok[1]));
    }
    bool ended = false;
    while (std::getline(is, line)) {
      ++line_no;
      auto tok = split_ws(line);
      if (tok.empty()) continue;
      if (tok[0] == "end") {
        ended = true;
        break;
      }
      if (tok[0] == "meta") {
        if (tok.size() < 2) fail("bad meta line");
        const size_t key_pos = static_cast<size_t>(tok[1].data() - line.data());
        auto value_pos = line.find_first_not_of(" \t", key_pos + tok[1].size());
        c.meta_[std::string(tok[1])] =
            value_pos == std::string::npos ? "" : line.substr(value_pos);
        continue;
      }
      if (tok[0] != "array" || tok.size() < 3) fail("expected 'array', 'meta' or 'end'");
      size_t ndim = 0;
      if (!parse_int(tok[2], &ndim) || tok.size() != 3 + ndim) fail("bad array header");
      std::vector<Eigen::Index> shape(ndim);
      for (size_t i = 0; i < ndim; ++i)
        if (!parse_int(tok[3 + i], &shape[i]) || shape[i] < 0) fail("bad array dimension");
      nn::Tensor t(shape);
      std::string values;
      if (!std::getline(is, values)) fail("missing values for " + std::string(tok[1]));
      ++line_no;
      auto vals = split_ws(values);
      if (vals.size() != t.size())
        fail("array " + std::string(tok[1]) + " has " + std::to_string(vals.size()) +
             " values, expected " + std::to_string(t.size()));
      for (size_t i = 0; i < vals.size(); ++i)
        if (!parse_double(vals[i], &t.values()[i])) fail("bad value '" + std::string(vals[i]) + "'");
      c.put(std::string(tok[1]), std::move(t));
    }
    if (!ended) fail("missing 'end'");
    return c;
  }

  static Container read(const std::string &path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path + " for reading");
    return read(is, path);
  }

 private:
  std::map<std::string, std::string> meta_;
  std::vector<std::pair<std::string, nn::Tensor>> arrays_;
};

}  // namespace spkv

#endif  // SPKV_CONTAINER_HPP_
