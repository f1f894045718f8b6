#pragma once

#include <string>

#include "hitadv/point_cloud.hpp"

namespace hitadv {

enum class CloudFormat { XYZ, OFF, PLY };

/// Parses a point cloud file. XYZ: one "x y z" line per point, extra columns
/// ignored. OFF: vertices kept, faces discarded. PLY: ASCII 1.0, vertex
/// element with float x/y/z; extra float properties become attrs channels.
/// Throws std::runtime_error with a line number on malformed input and on
/// empty clouds.
PointCloud load_cloud(const std::string& path, CloudFormat format);

/// Writes XYZ or PLY (ASCII 1.0; one float property per attrs channel).
/// Round-trips coordinates and attrs to 1e-6.
void save_cloud(const PointCloud& cloud, const std::string& path, CloudFormat format);

/// PLY export carrying a single named scalar channel, for external viewers.
void export_colored(const PointCloud& cloud, const std::string& channel, const std::string& path);

CloudFormat format_from_extension(const std::string& path);

}  // namespace hitadv
