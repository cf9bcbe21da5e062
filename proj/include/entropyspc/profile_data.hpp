#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "entropyspc/error.hpp"

namespace entropyspc {

enum class Phase { PhaseI, PhaseII };

/// Fixed x design shared by every sample of a profile dataset.
class DesignVector {
 public:
  DesignVector() = default;

  explicit DesignVector(std::vector<double> x) : x_(std::move(x)) {
    if (x_.size() < 2) {
      fail(ErrorKind::DegenerateDesign, "design needs at least 2 points, got " + std::to_string(x_.size()));
    }
    for (double v : x_) {
      if (!std::isfinite(v)) fail(ErrorKind::DegenerateDesign, "design contains a non-finite value");
    }
    const auto [lo, hi] = std::minmax_element(x_.begin(), x_.end());
    if (*lo == *hi) fail(ErrorKind::DegenerateDesign, "design has a single distinct x value");
  }

  std::span<const double> values() const noexcept { return x_; }
  std::size_t size() const noexcept { return x_.size(); }
  double operator[](std::size_t i) const { return x_[i]; }

  friend bool operator==(const DesignVector&, const DesignVector&) = default;

 private:
  std::vector<double> x_;
};

struct ProfileSample {
  std::int64_t sample_id = 0;
  std::vector<double> y;
};

/// k samples of y observed on one design. Immutable after construction.
class ProfileDataset {
 public:
  ProfileDataset(DesignVector design, std::vector<ProfileSample> samples, Phase phase)
      : design_(std::move(design)), samples_(std::move(samples)), phase_(phase) {
    if (samples_.empty()) fail(ErrorKind::EmptyDataset, "dataset has no samples");
    for (std::size_t j = 0; j < samples_.size(); ++j) {
      const auto& s = samples_[j];
      if (s.sample_id <= 0) fail(ErrorKind::InvalidArgument, "sample ids must be positive");
      if (j > 0 && s.sample_id <= samples_[j - 1].sample_id) {
        fail(ErrorKind::InvalidArgument, "sample ids must be unique and increasing");
      }
      if (s.y.size() != design_.size()) {
        fail(ErrorKind::InconsistentDesign, "sample " + std::to_string(s.sample_id) + " has " +
                                                std::to_string(s.y.size()) + " points, design has " +
                                                std::to_string(design_.size()));
      }
    }
  }

  const DesignVector& design() const noexcept { return design_; }
  std::span<const ProfileSample> samples() const noexcept { return samples_; }
  Phase phase() const noexcept { return phase_; }
  std::size_t k() const noexcept { return samples_.size(); }
  std::size_t n() const noexcept { return design_.size(); }

  const ProfileSample& sample(std::int64_t sample_id) const {
    auto it = std::lower_bound(samples_.begin(), samples_.end(), sample_id,
                               [](const ProfileSample& s, std::int64_t id) { return s.sample_id < id; });
    if (it == samples_.end() || it->sample_id != sample_id) {
      fail(ErrorKind::UnknownSample, "no sample with id " + std::to_string(sample_id));
    }
    return *it;
  }

 private:
  DesignVector design_;
  std::vector<ProfileSample> samples_;
  Phase phase_;
};

/// Empirical averages over the n points of one sample; the right-hand sides
/// of the maximum-entropy moment constraints.
struct SampleMoments {
  double mean_x = 0;
  double mean_y = 0;
  double mean_x2 = 0;
  double mean_y2 = 0;
  double mean_xy = 0;
};

inline SampleMoments sample_moments(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) fail(ErrorKind::InvalidArgument, "x and y must be nonempty and equal length");
  SampleMoments m;
  for (std::size_t i = 0; i < x.size(); ++i) {
    m.mean_x += x[i];
    m.mean_y += y[i];
    m.mean_x2 += x[i] * x[i];
    m.mean_y2 += y[i] * y[i];
    m.mean_xy += x[i] * y[i];
  }
  const double n = static_cast<double>(x.size());
  m.mean_x /= n;
  m.mean_y /= n;
  m.mean_x2 /= n;
  m.mean_y2 /= n;
  m.mean_xy /= n;
  return m;
}

inline SampleMoments sample_moments(const ProfileDataset& dataset, std::int64_t sample_id) {
  return sample_moments(dataset.design().values(), dataset.sample(sample_id).y);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

inline bool parse_int(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

inline bool skippable(std::string_view line) {
  const auto t = trim(line);
  return t.empty() || t.front() == '#';
}

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

/// Reads a headed CSV whose cells are all numeric, skipping blank and '#' lines.
/// Each returned row is paired with its 1-based line number.
inline std::vector<std::pair<std::size_t, std::vector<std::string_view>>> read_rows(
    const std::string& text, std::string_view expected_header, std::size_t arity, const std::string& origin,
    std::vector<std::string>& storage) {
  storage.clear();
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) storage.push_back(line);

  std::vector<std::pair<std::size_t, std::vector<std::string_view>>> rows;
  bool header_seen = false;
  for (std::size_t i = 0; i < storage.size(); ++i) {
    std::string_view line_view = storage[i];
    if (i == 0 && line_view.starts_with("\xEF\xBB\xBF")) line_view.remove_prefix(3);
    if (skippable(line_view)) continue;
    auto cells = split_commas(line_view);
    const auto where = origin + ":" + std::to_string(i + 1);
    if (!header_seen) {
      std::string joined;
      for (std::size_t c = 0; c < cells.size(); ++c) {
        if (c) joined += ',';
        joined += cells[c];
      }
      if (joined != expected_header) {
        fail(ErrorKind::MalformedCsv, where + ": expected header '" + std::string(expected_header) + "', got '" +
                                          joined + "'");
      }
      header_seen = true;
      continue;
    }
    if (cells.size() != arity) {
      fail(ErrorKind::MalformedCsv,
           where + ": expected " + std::to_string(arity) + " fields, got " + std::to_string(cells.size()));
    }
    rows.emplace_back(i + 1, std::move(cells));
  }
  if (!header_seen) fail(ErrorKind::MalformedCsv, origin + ": missing header '" + std::string(expected_header) + "'");
  return rows;
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

/// Parses the long-format profile CSV (`sample_id,x,y`). Rows of one sample
/// keep their file order; samples are returned sorted by id.
inline ProfileDataset parse_dataset(const std::string& text, Phase phase, const std::string& origin = "<input>") {
  std::vector<std::string> storage;
  const auto rows = detail::read_rows(text, "sample_id,x,y", 3, origin, storage);
  if (rows.empty()) fail(ErrorKind::EmptyDataset, origin + ": no data rows");

  struct Points {
    std::vector<double> x, y;
    std::size_t first_line = 0;
  };
  std::map<std::int64_t, Points> by_id;
  for (const auto& [line_no, cells] : rows) {
    const auto where = origin + ":" + std::to_string(line_no);
    std::int64_t id = 0;
    double x = 0, y = 0;
    if (!detail::parse_int(cells[0], id) || id <= 0) {
      fail(ErrorKind::MalformedCsv, where + ": sample_id must be a positive integer, got '" + std::string(cells[0]) + "'");
    }
    if (!detail::parse_double(cells[1], x) || !std::isfinite(x)) {
      fail(ErrorKind::MalformedCsv, where + ": bad x value '" + std::string(cells[1]) + "'");
    }
    if (!detail::parse_double(cells[2], y) || !std::isfinite(y)) {
      fail(ErrorKind::MalformedCsv, where + ": bad y value '" + std::string(cells[2]) + "'");
    }
    auto& p = by_id[id];
    if (p.x.empty()) p.first_line = line_no;
    p.x.push_back(x);
    p.y.push_back(y);
  }

  const auto& reference = by_id.begin()->second;
  std::vector<ProfileSample> samples;
  samples.reserve(by_id.size());
  for (auto& [id, p] : by_id) {
    if (p.x != reference.x) {
      fail(ErrorKind::InconsistentDesign, origin + ":" + std::to_string(p.first_line) + ": sample " +
                                              std::to_string(id) + " does not share the design of sample " +
                                              std::to_string(by_id.begin()->first));
    }
    samples.push_back({id, std::move(p.y)});
  }
  return ProfileDataset(DesignVector(reference.x), std::move(samples), phase);
}

inline ProfileDataset load_dataset(const std::string& path, Phase phase) {
  return parse_dataset(detail::slurp(path), phase, path);
}

inline void write_dataset(std::ostream& out, const ProfileDataset& dataset) {
  out << "sample_id,x,y\n";
  const auto x = dataset.design().values();
  for (const auto& s : dataset.samples()) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      out << s.sample_id << ',' << detail::format_double(x[i]) << ',' << detail::format_double(s.y[i]) << '\n';
    }
  }
}

}  // namespace entropyspc
