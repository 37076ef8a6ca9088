// spkv/common.hpp

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

#ifndef SPKV_COMMON_HPP_
#define SPKV_COMMON_HPP_

#include <charconv>
#include <cmath>
#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Dense>

namespace spkv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Base of every error the toolkit raises on bad input or invalid state.
/// The CLI maps these to exit code 1; anything else is an internal error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SPKV_DEFINE_ERROR(Name)            \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  }

SPKV_DEFINE_ERROR(ParseError);
SPKV_DEFINE_ERROR(DimensionError);
SPKV_DEFINE_ERROR(ShapeError);
SPKV_DEFINE_ERROR(LengthError);
SPKV_DEFINE_ERROR(ArgumentError);
SPKV_DEFINE_ERROR(ModelError);
SPKV_DEFINE_ERROR(NumericalError);
SPKV_DEFINE_ERROR(LookupError);
SPKV_DEFINE_ERROR(StateError);
SPKV_DEFINE_ERROR(OptimizerError);
SPKV_DEFINE_ERROR(SamplerError);
SPKV_DEFINE_ERROR(MetricError);
SPKV_DEFINE_ERROR(BatchCompositionError);
SPKV_DEFINE_ERROR(TrainingError);
SPKV_DEFINE_ERROR(ConfigError);
SPKV_DEFINE_ERROR(IoError);

#undef SPKV_DEFINE_ERROR

// Warnings go through a replaceable sink so tests can capture them.
inline std::function<void(const std::string &)> &warning_sink() {
  static std::function<void(const std::string &)> sink =
      [](const std::string &msg) { std::cerr << "WARNING: " << msg << '\n'; };
  return sink;
}

inline void warn(const std::string &msg) { warning_sink()(msg); }

/// Shortest decimal representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw NumericalError("cannot format value");
  return std::string(buf, ptr);
}

inline bool parse_double(std::string_view token, double *out) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), *out);
  return ec == std::errc() && ptr == token.data() + token.size();
}

template <typename Int>
bool parse_int(std::string_view token, Int *out) {
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), *out);
  return ec == std::errc() && ptr == token.data() + token.size();
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace spkv

#endif  // SPKV_COMMON_HPP_
