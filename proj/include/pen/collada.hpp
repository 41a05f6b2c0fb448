#pragma once

#include <string>
#include <string_view>

#include "pen/dataset.hpp"

namespace pen {

/// Reads the scene-graph subset of COLLADA used by shape repositories:
/// nested <node> elements (name/id, matrix/translate/rotate/scale),
/// <instance_geometry>, and <triangles> or all-triangle <polylist> primitives
/// with a POSITION input.
///
/// A node holding exactly one geometry instance and no child nodes becomes a
/// leaf; any other node becomes a group with one leaf child per geometry
/// instance. Nodes with no geometry below them are dropped. Several
/// top-level scene nodes are gathered under a synthetic root named after the
/// visual scene.
///
/// Throws ParseError (with line) on malformed XML, ReferenceError for
/// undefined geometry or sources, UnsupportedPrimitiveError naming any
/// non-triangle primitive.
ShapeRecord parse_collada(std::string_view bytes, std::string shape_id = {},
                          std::string category = {});

}  // namespace pen
