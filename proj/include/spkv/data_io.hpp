// spkv/data_io.hpp

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

// Line-oriented text formats:
//
//   embeddings:  utt_id speaker_id gender dataset_id v1 ... vD
//   features:    utt_id speaker_id gender dataset_id T d   (header)
//                followed by T lines of d values
//   trials:      enroll_id test_id [target|nontarget]
//   scores:      enroll_id test_id score
//
// Blank lines and lines starting with '#' are ignored by the readers.

#ifndef SPKV_DATA_IO_HPP_
#define SPKV_DATA_IO_HPP_

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "spkv/data.hpp"

namespace spkv {

namespace detail {

inline bool skippable(std::string_view line) {
  for (char c : line) {
    if (c == '#') return true;
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return true;
}

[[noreturn]] inline void parse_fail(const std::string &what, size_t line_no,
                                    const std::string &msg) {
  throw ParseError(what + ":" + std::to_string(line_no) + ": " + msg);
}

inline std::ifstream open_in(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path + " for reading");
  return is;
}

inline std::ofstream open_out(const std::string &path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  return os;
}

inline void check_written(std::ostream &os, const std::string &path) {
  os.flush();
  if (!os) throw IoError("write to " + path + " failed");
}

inline Utterance parse_labels(const std::vector<std::string_view> &tok, const std::string &what,
                              size_t line_no) {
  Utterance u;
  u.id = std::string(tok[0]);
  u.speaker_id = std::string(tok[1]);
  auto g = parse_gender(tok[2]);
  if (!g) parse_fail(what, line_no, "bad gender '" + std::string(tok[2]) + "'");
  u.gender = *g;
  u.dataset_id = std::string(tok[3]);
  return u;
}

inline void write_labels(std::ostream &os, const Utterance &u) {
  os << u.id << ' ' << u.speaker_id << ' ' << gender_code(u.gender) << ' ' << u.dataset_id;
}

}  // namespace detail

inline UtteranceSet read_embeddings(std::istream &is, const std::string &what = "<stream>") {
  UtteranceSet out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (detail::skippable(line)) continue;
    auto tok = split_ws(line);
    if (tok.size() < 5) detail::parse_fail(what, line_no, "expected id, speaker, gender, dataset and values");
    Utterance u = detail::parse_labels(tok, what, line_no);
    Vector v(static_cast<Eigen::Index>(tok.size() - 4));
    for (size_t i = 4; i < tok.size(); ++i) {
      if (!parse_double(tok[i], &v[static_cast<Eigen::Index>(i - 4)]) ||
          !std::isfinite(v[static_cast<Eigen::Index>(i - 4)]))
        detail::parse_fail(what, line_no, "bad value '" + std::string(tok[i]) + "'");
    }
    if (out.dim() >= 0 && v.size() != out.dim())
      throw DimensionError(what + ":" + std::to_string(line_no) + ": record has dimension " +
                           std::to_string(v.size()) + ", expected " + std::to_string(out.dim()));
    u.payload = Embedding{std::move(v)};
    try {
      out.add(std::move(u));
    } catch (const ArgumentError &e) {
      detail::parse_fail(what, line_no, e.what());
    }
  }
  return out;
}

inline UtteranceSet read_embeddings(const std::string &path) {
  auto is = detail::open_in(path);
  return read_embeddings(is, path);
}

inline void write_embeddings(std::ostream &os, const UtteranceSet &utts) {
  for (const Utterance &u : utts) {
    detail::write_labels(os, u);
    for (double v : u.embedding()) os << ' ' << format_double(v);
    os << '\n';
  }
}

inline void write_embeddings(const std::string &path, const UtteranceSet &utts) {
  auto os = detail::open_out(path);
  write_embeddings(os, utts);
  detail::check_written(os, path);
}

inline UtteranceSet read_features(std::istream &is, const std::string &what = "<stream>") {
  UtteranceSet out;
  std::string line;
  size_t line_no = 0;
  auto next_line = [&](std::string &l) {
    while (std::getline(is, l)) {
      ++line_no;
      if (!detail::skippable(l)) return true;
    }
    return false;
  };
  while (next_line(line)) {
    auto tok = split_ws(line);
    if (tok.size() != 6) detail::parse_fail(what, line_no, "expected header 'utt spk gender dataset T d'");
    Utterance u = detail::parse_labels(tok, what, line_no);
    Eigen::Index frames = 0, dim = 0;
    if (!parse_int(tok[4], &frames) || !parse_int(tok[5], &dim) || frames < 1 || dim < 1)
      detail::parse_fail(what, line_no, "bad frame count or dimension");
    if (out.dim() >= 0 && dim != out.dim())
      throw DimensionError(what + ":" + std::to_string(line_no) + ": feature dimension " +
                           std::to_string(dim) + ", expected " + std::to_string(out.dim()));
    Matrix m(frames, dim);
    for (Eigen::Index t = 0; t < frames; ++t) {
      if (!next_line(line)) detail::parse_fail(what, line_no, "unexpected end of file inside " + u.id);
      auto vals = split_ws(line);
      if (static_cast<Eigen::Index>(vals.size()) != dim)
        throw DimensionError(what + ":" + std::to_string(line_no) + ": frame has " +
                             std::to_string(vals.size()) + " values, expected " + std::to_string(dim));
      for (Eigen::Index j = 0; j < dim; ++j)
        if (!parse_double(vals[static_cast<size_t>(j)], &m(t, j)) || !std::isfinite(m(t, j)))
          detail::parse_fail(what, line_no, "bad value '" + std::string(vals[static_cast<size_t>(j)]) + "'");
    }
    u.payload = FeatureMatrix{std::move(m)};
    try {
      out.add(std::move(u));
    } catch (const ArgumentError &e) {
      detail::parse_fail(what, line_no, e.what());
    }
  }
  return out;
}

inline UtteranceSet read_features(const std::string &path) {
  auto is = detail::open_in(path);
  return read_features(is, path);
}

inline void write_features(std::ostream &os, const UtteranceSet &utts) {
  for (const Utterance &u : utts) {
    const Matrix &f = u.features();
    detail::write_labels(os, u);
    os << ' ' << f.rows() << ' ' << f.cols() << '\n';
    for (Eigen::Index t = 0; t < f.rows(); ++t) {
      for (Eigen::Index j = 0; j < f.cols(); ++j) {
        if (j) os << ' ';
        os << format_double(f(t, j));
      }
      os << '\n';
    }
  }
}

inline void write_features(const std::string &path, const UtteranceSet &utts) {
  auto os = detail::open_out(path);
  write_features(os, utts);
  detail::check_written(os, path);
}

/// Reads either format, deciding from the first record: a feature header has
/// exactly six fields with integer T and d.
inline UtteranceSet read_utterances(const std::string &path) {
  auto is = detail::open_in(path);
  std::string line;
  bool features = false;
  while (std::getline(is, line)) {
    if (detail::skippable(line)) continue;
    auto tok = split_ws(line);
    long a = 0, b = 0;
    features = tok.size() == 6 && parse_int(tok[4], &a) && parse_int(tok[5], &b);
    if (features) {
      // A 2-D embedding with integer values would look the same; the next
      // line disambiguates.
      std::string next;
      while (std::getline(is, next) && detail::skippable(next)) {}
      auto ntok = split_ws(next);
      features = static_cast<long>(ntok.size()) == b;
    }
    break;
  }
  return features ? read_features(path) : read_embeddings(path);
}

inline std::vector<Trial> read_trials(std::istream &is, const std::string &what = "<stream>") {
  std::vector<Trial> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (detail::skippable(line)) continue;
    auto tok = split_ws(line);
    if (tok.size() != 2 && tok.size() != 3)
      detail::parse_fail(what, line_no, "expected 'enroll test [target|nontarget]'");
    Trial t{std::string(tok[0]), std::string(tok[1]), std::nullopt};
    if (tok.size() == 3) {
      if (tok[2] == "target") t.label = Label::kTarget;
      else if (tok[2] == "nontarget") t.label = Label::kNontarget;
      else detail::parse_fail(what, line_no, "bad label '" + std::string(tok[2]) + "'");
    }
    out.push_back(std::move(t));
  }
  return out;
}

inline std::vector<Trial> read_trials(const std::string &path) {
  auto is = detail::open_in(path);
  return read_trials(is, path);
}

inline void write_trials(std::ostream &os, const std::vector<Trial> &trials) {
  for (const Trial &t : trials) {
    os << t.enroll_id << ' ' << t.test_id;
    if (t.label) os << ' ' << label_name(*t.label);
    os << '\n';
  }
}

inline void write_trials(const std::string &path, const std::vector<Trial> &trials) {
  auto os = detail::open_out(path);
  write_trials(os, trials);
  detail::check_written(os, path);
}

/// Score lines carry no label; labels are attached later from a key.
inline ScoredTrialSet read_scores(std::istream &is, const std::string &what = "<stream>") {
  ScoredTrialSet out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (detail::skippable(line)) continue;
    auto tok = split_ws(line);
    if (tok.size() != 3) detail::parse_fail(what, line_no, "expected 'enroll test score'");
    ScoredTrial st{{std::string(tok[0]), std::string(tok[1]), std::nullopt}, 0.0};
    if (!parse_double(tok[2], &st.score) || !std::isfinite(st.score))
      detail::parse_fail(what, line_no, "bad score '" + std::string(tok[2]) + "'");
    out.push_back(std::move(st));
  }
  return out;
}

inline ScoredTrialSet read_scores(const std::string &path) {
  auto is = detail::open_in(path);
  return read_scores(is, path);
}

inline void write_scores(std::ostream &os, const ScoredTrialSet &scores) {
  for (const ScoredTrial &s : scores)
    os << s.trial.enroll_id << ' ' << s.trial.test_id << ' ' << format_double(s.score) << '\n';
}

inline void write_scores(const std::string &path, const ScoredTrialSet &scores) {
  auto os = detail::open_out(path);
  write_scores(os, scores);
  detail::check_written(os, path);
}

/// Attaches labels from `key` to every scored trial. The pair lookup ignores
/// enroll/test order. Throws LookupError for trials missing from the key.
inline ScoredTrialSet attach_key(ScoredTrialSet scores, const std::vector<Trial> &key) {
  std::unordered_map<std::string, Label> labels;
  auto pair_key = [](const std::string &a, const std::string &b) {
    return a < b ? a + '\n' + b : b + '\n' + a;
  };
  for (const Trial &t : key)
    if (t.label) labels[pair_key(t.enroll_id, t.test_id)] = *t.label;
  for (ScoredTrial &s : scores) {
    auto it = labels.find(pair_key(s.trial.enroll_id, s.trial.test_id));
    if (it == labels.end())
      throw LookupError("trial " + s.trial.enroll_id + " " + s.trial.test_id + " is not in the key");
    s.trial.label = it->second;
  }
  return scores;
}

}  // namespace spkv

#endif  // SPKV_DATA_IO_HPP_
