#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "graphfit/data/dataset.hpp"

namespace graphfit::data {

namespace {

std::vector<geom::Vec3> read_triples(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw IoError(std::string("cannot open ") + what + " file: " + path);
  std::vector<geom::Vec3> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    double x, y, z;
    if (!(ss >> x >> y >> z))
      throw ParseError(path + ":" + std::to_string(line_no) + ": malformed " +
                       what + " line");
    std::string trailing;
    if (ss >> trailing)
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected exactly three values");
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": non-finite value");
    out.emplace_back(x, y, z);
  }
  return out;
}

}  // namespace

std::vector<geom::Vec3> read_xyz(const std::string& path) {
  return read_triples(path, "xyz");
}

std::vector<geom::Vec3> read_normals(const std::string& path) {
  return read_triples(path, "normals");
}

std::vector<int> read_pidx(const std::string& path, std::size_t cloud_size) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pidx file: " + path);
  std::vector<int> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    long long idx;
    if (!(ss >> idx))
      throw ParseError(path + ":" + std::to_string(line_no) + ": malformed index");
    if (idx < 0 || static_cast<std::size_t>(idx) >= cloud_size)
      throw BoundsError(path + ":" + std::to_string(line_no) + ": index " +
                        std::to_string(idx) + " out of range for cloud of " +
                        std::to_string(cloud_size) + " points");
    out.push_back(static_cast<int>(idx));
  }
  return out;
}

namespace {

void write_triples(const std::string& path, const std::vector<geom::Vec3>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  char buf[96];
  for (const geom::Vec3& v : rows) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    out << buf;
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace

void write_xyz(const std::string& path, const std::vector<geom::Vec3>& points) {
  write_triples(path, points);
}

void write_normals(const std::string& path, const std::vector<geom::Vec3>& normals) {
  write_triples(path, normals);
}

void write_pidx(const std::string& path, const std::vector<int>& indices) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  for (int idx : indices) out << idx << "\n";
  if (!out) throw IoError("write failed: " + path);
}

std::vector<std::string> read_shape_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open shape list: " + path);
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) names.push_back(line);
  }
  return names;
}

ShapeRecord load_shape(const std::string& dir, const std::string& name) {
  ShapeRecord record;
  record.name = name;
  const std::string base = dir.empty() ? name : dir + "/" + name;
  std::vector<geom::Vec3> points = read_xyz(base + ".xyz");
  std::vector<geom::Vec3> normals;
  if (std::ifstream probe(base + ".normals"); probe.good()) {
    normals = read_normals(base + ".normals");
    if (normals.size() != points.size())
      throw ParseError(base + ".normals: " + std::to_string(normals.size()) +
                       " normals for " + std::to_string(points.size()) + " points");
  }
  record.cloud = geom::PointCloud(std::move(points), std::move(normals));
  return record;
}

}  // namespace graphfit::data
