#include "hitadv/io.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hitadv {

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

bool parse_double(const std::string& tok, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(tok, &pos);
    return pos == tok.size();
  } catch (...) {
    return false;
  }
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> toks;
  std::istringstream ss(line);
  std::string t;
  while (ss >> t) toks.push_back(t);
  return toks;
}

PointCloud load_xyz(const std::string& path, std::istream& in) {
  PointCloud cloud;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = split_ws(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    if (toks.size() < 3) parse_fail(path, lineno, "expected at least 3 coordinates");
    Vec3 p;
    for (int c = 0; c < 3; ++c)
      if (!parse_double(toks[c], p[c])) parse_fail(path, lineno, "non-numeric token '" + toks[c] + "'");
    cloud.points.push_back(p);  // trailing columns ignored
  }
  return cloud;
}

PointCloud load_off(const std::string& path, std::istream& in) {
  std::string line;
  int lineno = 0;
  auto next_content_line = [&]() -> std::vector<std::string> {
    while (std::getline(in, line)) {
      ++lineno;
      auto toks = split_ws(line);
      if (!toks.empty() && toks[0][0] != '#') return toks;
    }
    parse_fail(path, lineno, "unexpected end of file");
  };

  auto header = next_content_line();
  if (header[0] != "OFF") parse_fail(path, lineno, "missing OFF header");
  std::vector<std::string> counts(header.begin() + 1, header.end());
  if (counts.empty()) counts = next_content_line();
  if (counts.size() < 2) parse_fail(path, lineno, "expected 'nv nf [ne]' counts");
  double nv_d = 0;
  if (!parse_double(counts[0], nv_d) || nv_d < 0) parse_fail(path, lineno, "bad vertex count");
  int nv = static_cast<int>(nv_d);

  PointCloud cloud;
  cloud.points.reserve(nv);
  for (int i = 0; i < nv; ++i) {
    auto toks = next_content_line();
    if (toks.size() < 3) parse_fail(path, lineno, "expected 3 vertex coordinates");
    Vec3 p;
    for (int c = 0; c < 3; ++c)
      if (!parse_double(toks[c], p[c])) parse_fail(path, lineno, "non-numeric token '" + toks[c] + "'");
    cloud.points.push_back(p);
  }
  // faces, if any, are deliberately not read
  return cloud;
}

PointCloud load_ply(const std::string& path, std::istream& in) {
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line) || split_ws(line) != std::vector<std::string>{"ply"})
    parse_fail(path, 1, "missing 'ply' magic");
  ++lineno;

  int vertex_count = -1;
  bool in_vertex_element = false;
  std::vector<std::string> vertex_props;
  // elements after vertex are skipped; remember their row counts
  long trailing_rows = 0;

  while (std::getline(in, line)) {
    ++lineno;
    auto toks = split_ws(line);
    if (toks.empty() || toks[0] == "comment") continue;
    if (toks[0] == "format") {
      if (toks.size() < 2 || toks[1] != "ascii") parse_fail(path, lineno, "only ascii PLY is supported");
    } else if (toks[0] == "element") {
      if (toks.size() < 3) parse_fail(path, lineno, "malformed element line");
      double cnt = 0;
      if (!parse_double(toks[2], cnt)) parse_fail(path, lineno, "bad element count");
      if (toks[1] == "vertex") {
        vertex_count = static_cast<int>(cnt);
        in_vertex_element = true;
      } else {
        in_vertex_element = false;
        trailing_rows += static_cast<long>(cnt);
      }
    } else if (toks[0] == "property") {
      if (in_vertex_element) {
        if (toks.size() < 3) parse_fail(path, lineno, "malformed property line");
        if (toks[1] != "float" && toks[1] != "double" && toks[1] != "float32" && toks[1] != "float64")
          parse_fail(path, lineno, "unsupported vertex property type '" + toks[1] + "'");
        vertex_props.push_back(toks.back());
      }
    } else if (toks[0] == "end_header") {
      break;
    } else {
      parse_fail(path, lineno, "unexpected header line '" + toks[0] + "'");
    }
  }
  if (vertex_count < 0) parse_fail(path, lineno, "no vertex element declared");
  if (vertex_props.size() < 3 || vertex_props[0] != "x" || vertex_props[1] != "y" ||
      vertex_props[2] != "z")
    parse_fail(path, lineno, "vertex element must start with float x, y, z");

  PointCloud cloud;
  cloud.points.reserve(vertex_count);
  std::vector<std::string> channels(vertex_props.begin() + 3, vertex_props.end());
  for (const auto& name : channels) cloud.attrs[name].reserve(vertex_count);

  for (int i = 0; i < vertex_count; ++i) {
    if (!std::getline(in, line)) parse_fail(path, lineno, "unexpected end of file");
    ++lineno;
    auto toks = split_ws(line);
    if (toks.size() < vertex_props.size())
      parse_fail(path, lineno, "expected " + std::to_string(vertex_props.size()) + " values");
    std::vector<double> vals(vertex_props.size());
    for (std::size_t c = 0; c < vertex_props.size(); ++c)
      if (!parse_double(toks[c], vals[c])) parse_fail(path, lineno, "non-numeric token '" + toks[c] + "'");
    cloud.points.push_back({vals[0], vals[1], vals[2]});
    for (std::size_t c = 0; c < channels.size(); ++c)
      cloud.attrs[channels[c]].push_back(vals[3 + c]);
  }
  return cloud;
}

}  // namespace

PointCloud load_cloud(const std::string& path, CloudFormat format) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  PointCloud cloud;
  switch (format) {
    case CloudFormat::XYZ: cloud = load_xyz(path, in); break;
    case CloudFormat::OFF: cloud = load_off(path, in); break;
    case CloudFormat::PLY: cloud = load_ply(path, in); break;
  }
  if (cloud.points.empty()) throw std::runtime_error(path + ": empty point cloud");
  cloud.validate();
  return cloud;
}

void save_cloud(const PointCloud& cloud, const std::string& path, CloudFormat format) {
  cloud.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  char buf[64];

  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
  };

  if (format == CloudFormat::XYZ) {
    for (const Vec3& p : cloud.points)
      out << fmt(p.x) << ' ' << fmt(p.y) << ' ' << fmt(p.z) << '\n';
  } else if (format == CloudFormat::PLY) {
    out << "ply\nformat ascii 1.0\n";
    out << "element vertex " << cloud.points.size() << '\n';
    out << "property float x\nproperty float y\nproperty float z\n";
    for (const auto& [name, _] : cloud.attrs) out << "property float " << name << '\n';
    out << "end_header\n";
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
      const Vec3& p = cloud.points[i];
      out << fmt(p.x) << ' ' << fmt(p.y) << ' ' << fmt(p.z);
      for (const auto& [_, values] : cloud.attrs) out << ' ' << fmt(values[i]);
      out << '\n';
    }
  } else {
    throw std::invalid_argument("save_cloud: unsupported format (use XYZ or PLY)");
  }
  out.flush();
  if (!out) throw std::runtime_error("I/O error writing '" + path + "'");
}

void export_colored(const PointCloud& cloud, const std::string& channel, const std::string& path) {
  if (!cloud.attrs.count(channel))
    throw std::invalid_argument("export_colored: no channel named '" + channel + "'");
  PointCloud slim;
  slim.points = cloud.points;
  slim.attrs[channel] = cloud.attrs.at(channel);
  save_cloud(slim, path, CloudFormat::PLY);
}

CloudFormat format_from_extension(const std::string& path) {
  auto dot = path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  for (char& c : ext) c = static_cast<char>(std::tolower(c));
  if (ext == "xyz" || ext == "txt") return CloudFormat::XYZ;
  if (ext == "off") return CloudFormat::OFF;
  if (ext == "ply") return CloudFormat::PLY;
  throw std::invalid_argument("unrecognized point cloud extension '" + ext + "'");
}

}  // namespace hitadv
