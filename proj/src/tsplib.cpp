#include "netsp/tsplib.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "netsp/error.hpp"

namespace netsp::tsplib {

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

// Line-oriented cursor that remembers 1-based line numbers for diagnostics.
class Lines {
 public:
  explicit Lines(std::string_view text) {
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      std::string_view line = text.substr(start, end - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines_.push_back(line);
      if (end == text.size()) break;
      start = end + 1;
    }
  }

  bool done() const { return pos_ >= lines_.size(); }
  std::string_view next() { return lines_[pos_++]; }
  std::size_t line_no() const { return pos_; }  // of the last line returned

  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorKind::parse, "line " + std::to_string(line_no()) + ": " + what);
  }

  // Pulls whitespace-separated tokens across line boundaries, skipping
  // blank lines. Returns false at end of input.
  bool next_token(std::string_view& tok) {
    while (pending_.empty()) {
      if (done()) return false;
      pending_ = split_ws(next());
      std::reverse(pending_.begin(), pending_.end());
    }
    tok = pending_.back();
    pending_.pop_back();
    return true;
  }

  bool has_pending_tokens() const { return !pending_.empty(); }

 private:
  std::vector<std::string_view> lines_;
  std::size_t pos_ = 0;
  std::vector<std::string_view> pending_;
};

double parse_double(const Lines& in, std::string_view tok) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    in.error("malformed number '" + std::string(tok) + "'");
  }
  return v;
}

long parse_long(const Lines& in, std::string_view tok) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    in.error("malformed integer '" + std::string(tok) + "'");
  }
  return v;
}

struct KeyValue {
  std::string key;
  std::string_view value;
};

KeyValue split_keyword(std::string_view line) {
  line = trim(line);
  std::size_t colon = line.find(':');
  std::string_view key;
  std::string_view value;
  if (colon != std::string_view::npos) {
    key = trim(line.substr(0, colon));
    value = trim(line.substr(colon + 1));
  } else {
    std::size_t ws = 0;
    while (ws < line.size() && !std::isspace(static_cast<unsigned char>(line[ws]))) ++ws;
    key = line.substr(0, ws);
    value = trim(line.substr(ws));
  }
  return {upper(key), value};
}

std::size_t weight_count(EdgeWeightFormat f, std::size_t n) {
  switch (f) {
    case EdgeWeightFormat::full_matrix: return n * n;
    case EdgeWeightFormat::upper_row: return n * (n - 1) / 2;
    case EdgeWeightFormat::lower_diag_row:
    case EdgeWeightFormat::upper_diag_row: return n * (n + 1) / 2;
  }
  return 0;
}

std::vector<double> expand(EdgeWeightFormat f, std::size_t n,
                           const std::vector<double>& w) {
  std::vector<double> m(n * n, 0.0);
  auto set = [&](std::size_t i, std::size_t j, double v) {
    m[i * n + j] = v;
    m[j * n + i] = v;
  };
  std::size_t k = 0;
  switch (f) {
    case EdgeWeightFormat::full_matrix:
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m[i * n + j] = w[k++];
      break;
    case EdgeWeightFormat::upper_row:
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) set(i, j, w[k++]);
      break;
    case EdgeWeightFormat::upper_diag_row:
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) set(i, j, w[k++]);
      break;
    case EdgeWeightFormat::lower_diag_row:
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) set(i, j, w[k++]);
      break;
  }
  for (std::size_t i = 0; i < n; ++i) m[i * n + i] = 0.0;
  return m;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_number(double v) {
  if (v == std::trunc(v) && std::abs(v) < 1e15) {
    return std::to_string(static_cast<long long>(v));
  }
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::string_view to_string(EdgeWeightType t) {
  switch (t) {
    case EdgeWeightType::euc_2d: return "EUC_2D";
    case EdgeWeightType::geo: return "GEO";
    case EdgeWeightType::att: return "ATT";
    case EdgeWeightType::explicit_matrix: return "EXPLICIT";
  }
  return "?";
}

std::string_view to_string(EdgeWeightFormat f) {
  switch (f) {
    case EdgeWeightFormat::full_matrix: return "FULL_MATRIX";
    case EdgeWeightFormat::upper_row: return "UPPER_ROW";
    case EdgeWeightFormat::lower_diag_row: return "LOWER_DIAG_ROW";
    case EdgeWeightFormat::upper_diag_row: return "UPPER_DIAG_ROW";
  }
  return "?";
}

TsplibInstance parse_instance(std::string_view text) {
  TsplibInstance out;
  Lines in(text);
  bool have_type = false;
  bool saw_coords = false;
  bool saw_weights = false;

  auto require_dimension = [&](const char* section) {
    if (out.dimension == 0) {
      in.error(std::string("missing DIMENSION before ") + section);
    }
  };

  while (!in.done()) {
    std::string_view raw = in.next();
    if (trim(raw).empty()) continue;
    auto [key, value] = split_keyword(raw);

    if (key == "EOF") break;
    if (key == "NAME") {
      out.name = std::string(value);
    } else if (key == "TYPE") {
      const std::string v = upper(value);
      if (v != "TSP") in.error("unsupported TYPE '" + std::string(value) + "'");
    } else if (key == "COMMENT") {
      if (!out.comment.empty()) out.comment += '\n';
      out.comment += std::string(value);
    } else if (key == "DIMENSION") {
      const long d = parse_long(in, value);
      if (d <= 0) in.error("DIMENSION must be positive");
      out.dimension = static_cast<std::size_t>(d);
    } else if (key == "EDGE_WEIGHT_TYPE") {
      const std::string v = upper(value);
      if (v == "EUC_2D") out.edge_weight_type = EdgeWeightType::euc_2d;
      else if (v == "GEO") out.edge_weight_type = EdgeWeightType::geo;
      else if (v == "ATT") out.edge_weight_type = EdgeWeightType::att;
      else if (v == "EXPLICIT") out.edge_weight_type = EdgeWeightType::explicit_matrix;
      else in.error("unsupported EDGE_WEIGHT_TYPE '" + std::string(value) + "'");
      have_type = true;
    } else if (key == "EDGE_WEIGHT_FORMAT") {
      const std::string v = upper(value);
      if (v == "FULL_MATRIX") out.edge_weight_format = EdgeWeightFormat::full_matrix;
      else if (v == "UPPER_ROW") out.edge_weight_format = EdgeWeightFormat::upper_row;
      else if (v == "LOWER_DIAG_ROW") out.edge_weight_format = EdgeWeightFormat::lower_diag_row;
      else if (v == "UPPER_DIAG_ROW") out.edge_weight_format = EdgeWeightFormat::upper_diag_row;
      else in.error("unsupported EDGE_WEIGHT_FORMAT '" + std::string(value) + "'");
    } else if (key == "NODE_COORD_SECTION" || key == "DISPLAY_DATA_SECTION") {
      const bool keep = key == "NODE_COORD_SECTION";
      require_dimension(key.c_str());
      std::vector<NodeCoord> coords;
      std::vector<char> seen(out.dimension + 1, 0);
      for (std::size_t k = 0; k < out.dimension; ++k) {
        std::string_view line;
        do {
          if (in.done()) in.error("truncated " + key);
          line = trim(in.next());
        } while (line.empty());
        auto toks = split_ws(line);
        if (toks.size() != 3) in.error("expected 'index x y' in " + key);
        const long idx = parse_long(in, toks[0]);
        if (idx < 1 || static_cast<std::size_t>(idx) > out.dimension) {
          in.error("node index " + std::to_string(idx) + " out of range");
        }
        if (seen[idx]) in.error("duplicate node index " + std::to_string(idx));
        seen[idx] = 1;
        coords.push_back({static_cast<int>(idx), parse_double(in, toks[1]),
                          parse_double(in, toks[2])});
      }
      if (keep) {
        std::sort(coords.begin(), coords.end(),
                  [](const NodeCoord& a, const NodeCoord& b) { return a.index < b.index; });
        out.node_coords = std::move(coords);
        saw_coords = true;
      }
    } else if (key == "EDGE_WEIGHT_SECTION") {
      require_dimension("EDGE_WEIGHT_SECTION");
      if (!out.edge_weight_format) in.error("EDGE_WEIGHT_SECTION without EDGE_WEIGHT_FORMAT");
      const std::size_t need = weight_count(*out.edge_weight_format, out.dimension);
      std::vector<double> w;
      w.reserve(need);
      std::string_view tok;
      while (w.size() < need) {
        if (!in.next_token(tok)) in.error("truncated EDGE_WEIGHT_SECTION");
        w.push_back(parse_double(in, tok));
      }
      if (in.has_pending_tokens()) in.error("extra values in EDGE_WEIGHT_SECTION");
      try {
        out.explicit_weights = DistanceMatrix(
            out.dimension, expand(*out.edge_weight_format, out.dimension, w),
            Metric{MetricKind::explicit_matrix, 1.0});
      } catch (const Error& e) {
        in.error(e.what());
      }
      saw_weights = true;
    } else if (key == "DISPLAY_DATA_TYPE" || key == "NODE_COORD_TYPE" ||
               key == "EDGE_DATA_FORMAT") {
      // Informational only.
    } else {
      out.warnings.push_back("line " + std::to_string(in.line_no()) +
                             ": skipped unknown keyword '" + key + "'");
    }
  }

  if (out.dimension == 0) fail(ErrorKind::parse, "missing DIMENSION");
  if (!have_type) fail(ErrorKind::parse, "missing EDGE_WEIGHT_TYPE");
  if (out.edge_weight_type == EdgeWeightType::explicit_matrix) {
    if (!saw_weights) fail(ErrorKind::parse, "EXPLICIT instance without EDGE_WEIGHT_SECTION");
    out.node_coords.clear();
  } else if (!saw_coords) {
    fail(ErrorKind::parse, "missing NODE_COORD_SECTION");
  }
  for (const auto& w : out.warnings) std::cerr << "warning: " << w << '\n';
  return out;
}

TourFile parse_tour(std::string_view text) {
  TourFile out;
  Lines in(text);
  bool terminated = false;
  bool saw_section = false;
  while (!in.done() && !terminated) {
    std::string_view raw = in.next();
    if (trim(raw).empty()) continue;
    auto [key, value] = split_keyword(raw);
    if (key == "EOF") break;
    if (key == "NAME") {
      out.name = std::string(value);
    } else if (key == "DIMENSION") {
      const long d = parse_long(in, value);
      if (d <= 0) in.error("DIMENSION must be positive");
      out.dimension = static_cast<std::size_t>(d);
    } else if (key == "TOUR_SECTION") {
      if (out.dimension == 0) in.error("missing DIMENSION before TOUR_SECTION");
      saw_section = true;
      std::string_view tok;
      while (in.next_token(tok)) {
        const long v = parse_long(in, tok);
        if (v == -1) {
          terminated = true;
          break;
        }
        if (v < 1 || static_cast<std::size_t>(v) > out.dimension) {
          in.error("tour index " + std::to_string(v) + " out of range");
        }
        out.tour.order.push_back(static_cast<int>(v - 1));
      }
    }
  }
  if (!saw_section) fail(ErrorKind::parse, "missing TOUR_SECTION");
  if (!terminated) fail(ErrorKind::parse, "TOUR_SECTION missing -1 terminator");
  if (!is_permutation(out.tour.order, out.dimension)) {
    fail(ErrorKind::parse, "tour is not a permutation of 1.." +
                               std::to_string(out.dimension));
  }
  return out;
}

TsplibInstance load_instance(const std::string& path) {
  try {
    return parse_instance(read_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::io) throw;
    fail(e.kind(), path + ": " + e.what());
  }
}

TourFile load_tour(const std::string& path) {
  try {
    return parse_tour(read_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::io) throw;
    fail(e.kind(), path + ": " + e.what());
  }
}

std::string serialize(const TsplibInstance& t) {
  std::ostringstream os;
  os << "NAME : " << t.name << '\n';
  if (!t.comment.empty()) {
    std::istringstream cs(t.comment);
    for (std::string line; std::getline(cs, line);) os << "COMMENT : " << line << '\n';
  }
  os << "TYPE : TSP\n";
  os << "DIMENSION : " << t.dimension << '\n';
  os << "EDGE_WEIGHT_TYPE : " << to_string(t.edge_weight_type) << '\n';
  if (t.edge_weight_type == EdgeWeightType::explicit_matrix) {
    os << "EDGE_WEIGHT_FORMAT : FULL_MATRIX\n";
    os << "EDGE_WEIGHT_SECTION\n";
    const auto& m = *t.explicit_weights;
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (std::size_t j = 0; j < m.size(); ++j) {
        os << (j ? " " : "") << format_number(m(i, j));
      }
      os << '\n';
    }
  } else {
    os << "NODE_COORD_SECTION\n";
    for (const auto& c : t.node_coords) {
      os << c.index << ' ' << format_number(c.x) << ' ' << format_number(c.y) << '\n';
    }
  }
  os << "EOF\n";
  return os.str();
}

std::string serialize(const TourFile& t) {
  std::ostringstream os;
  os << "NAME : " << t.name << '\n';
  os << "TYPE : TOUR\n";
  os << "DIMENSION : " << t.dimension << '\n';
  os << "TOUR_SECTION\n";
  for (int c : t.tour.order) os << c + 1 << '\n';
  os << "-1\nEOF\n";
  return os.str();
}

Instance to_instance(const TsplibInstance& t) {
  Instance inst;
  inst.id = t.name;
  switch (t.edge_weight_type) {
    case EdgeWeightType::euc_2d: inst.metric.kind = MetricKind::euc2d_tsplib; break;
    case EdgeWeightType::att: inst.metric.kind = MetricKind::att_tsplib; break;
    case EdgeWeightType::geo: inst.metric.kind = MetricKind::geo_tsplib; break;
    case EdgeWeightType::explicit_matrix:
      inst.metric.kind = MetricKind::explicit_matrix;
      if (!t.explicit_weights) {
        fail(ErrorKind::validity, "EXPLICIT instance '" + t.name + "' has no matrix");
      }
      inst.explicit_weights = std::make_shared<const DistanceMatrix>(*t.explicit_weights);
      return inst;
  }
  inst.points.reserve(t.node_coords.size());
  for (const auto& c : t.node_coords) inst.points.emplace_back(c.x, c.y);
  return inst;
}

std::vector<Point> normalized_coords(const std::vector<Point>& points) {
  if (points.empty()) return {};
  const std::size_t d = points.front().dim();
  std::vector<double> lo(d, std::numeric_limits<double>::infinity());
  std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
  for (const auto& p : points) {
    for (std::size_t k = 0; k < d; ++k) {
      lo[k] = std::min(lo[k], p[k]);
      hi[k] = std::max(hi[k], p[k]);
    }
  }
  std::vector<Point> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    std::vector<double> c(d);
    for (std::size_t k = 0; k < d; ++k) {
      const double span = hi[k] - lo[k];
      c[k] = span > 0.0 ? std::clamp((p[k] - lo[k]) / span, 0.0, 1.0) : 0.0;
    }
    out.emplace_back(std::move(c));
  }
  return out;
}

}  // namespace netsp::tsplib
