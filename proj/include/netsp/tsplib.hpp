#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "netsp/geometry.hpp"

namespace netsp::tsplib {

enum class EdgeWeightType { euc_2d, geo, att, explicit_matrix };
enum class EdgeWeightFormat { full_matrix, upper_row, lower_diag_row, upper_diag_row };

std::string_view to_string(EdgeWeightType t);
std::string_view to_string(EdgeWeightFormat f);

struct NodeCoord {
  int index = 0;  // 1-based, as in the file
  double x = 0.0;
  double y = 0.0;
};

struct TsplibInstance {
  std::string name;
  std::size_t dimension = 0;
  EdgeWeightType edge_weight_type = EdgeWeightType::euc_2d;
  std::optional<EdgeWeightFormat> edge_weight_format;
  // Sorted by index, indices 1..dimension.
  std::vector<NodeCoord> node_coords;
  std::optional<DistanceMatrix> explicit_weights;
  std::string comment;
  // Keywords that were skipped; kept so callers can surface warnings.
  std::vector<std::string> warnings;
};

struct TourFile {
  std::string name;
  std::size_t dimension = 0;
  Tour tour;  // 0-based
};

/// Parses a TSPLIB TSP file. Keywords are case-insensitive and the ':'
/// separator is optional. Throws a parse error naming the offending line.
TsplibInstance parse_instance(std::string_view text);

/// Parses a TOUR_SECTION file; indices are converted to 0-based.
TourFile parse_tour(std::string_view text);

TsplibInstance load_instance(const std::string& path);
TourFile load_tour(const std::string& path);

/// Writes `t` back in TSPLIB syntax. Explicit weights are always emitted as
/// FULL_MATRIX.
std::string serialize(const TsplibInstance& t);
std::string serialize(const TourFile& t);

/// Maps a parsed file onto the library's Instance (EUC_2D -> EUC2D_TSPLIB,
/// ATT -> ATT_TSPLIB, GEO -> GEO_TSPLIB with DDD.MM coordinates retained,
/// EXPLICIT -> attached matrix).
Instance to_instance(const TsplibInstance& t);

/// Min-max normalised copy of the coordinates, each axis mapped into [0,1].
/// A constant axis maps to 0.
std::vector<Point> normalized_coords(const std::vector<Point>& points);

}  // namespace netsp::tsplib
