#include "isrm/grid.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace isrm {

namespace {

constexpr char kMagic[4] = {'I', 'S', 'R', 'M'};
constexpr std::uint16_t kVersion = 1;

void write_raw(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_raw(std::istream& in, void* p, std::size_t n) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("truncated map file");
}

// Shortest text form that parses back to the identical f32.
std::string f32_to_text(float v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  return buf;
}

}  // namespace

RegionGrid::RegionGrid(int side, int num_labels, double cell_size, Vec2 origin)
    : side_(side),
      num_labels_(num_labels),
      cell_size_(cell_size),
      origin_(origin),
      occ_(static_cast<std::size_t>(side) * side, 0.0f),
      exp_(static_cast<std::size_t>(side) * side, 0.0f),
      reg_(static_cast<std::size_t>(side) * side * num_labels, 0.0f),
      cnt_(static_cast<std::size_t>(side) * side, 0u) {
  if (side < 1) throw std::invalid_argument("grid side must be positive");
  if (num_labels < 1) throw std::invalid_argument("grid needs >= 1 label");
  if (cell_size <= 0.0) throw std::invalid_argument("cell size must be > 0");
}

RegionGrid RegionGrid::egocentric(int side, int num_labels, double cell_size) {
  const int anchor_col = (side - 1) / 2;
  const Vec2 origin{-(anchor_col + 0.5) * cell_size, -0.5 * cell_size};
  return RegionGrid(side, num_labels, cell_size, origin);
}

RegionGrid RegionGrid::global(int side, int num_labels, Vec2 origin,
                              double cell_size) {
  return RegionGrid(side, num_labels, cell_size, origin);
}

CategoricalCell RegionGrid::cell(int row, int col) const {
  const int i = flat(row, col);
  CategoricalCell c;
  c.occupancy = occ_[i];
  c.explored = exp_[i];
  c.obs_count = cnt_[i];
  const auto r = region(i);
  c.region.assign(r.begin(), r.end());
  return c;
}

void RegionGrid::set_cell(int row, int col, const CategoricalCell& cell) {
  if (static_cast<int>(cell.region.size()) != num_labels_) {
    throw std::invalid_argument("cell region size mismatch");
  }
  const int i = flat(row, col);
  occ_[i] = cell.occupancy;
  exp_[i] = cell.explored;
  cnt_[i] = cell.obs_count;
  auto r = region(i);
  std::copy(cell.region.begin(), cell.region.end(), r.begin());
}

bool RegionGrid::is_blank(int i) const {
  if (occ_[i] != 0.0f || exp_[i] != 0.0f || cnt_[i] != 0u) return false;
  for (float v : region(i)) {
    if (v != 0.0f) return false;
  }
  return true;
}

CellIndex RegionGrid::world_to_cell(const Vec2& p) const {
  const int ix = static_cast<int>(std::floor((p.x - origin_.x) / cell_size_));
  const int iy = static_cast<int>(std::floor((p.y - origin_.y) / cell_size_));
  if (!in_bounds(iy, ix)) {
    throw std::out_of_range("point outside map bounds");
  }
  return {ix, iy};
}

Vec2 RegionGrid::cell_center(int row, int col) const {
  return {origin_.x + (col + 0.5) * cell_size_,
          origin_.y + (row + 0.5) * cell_size_};
}

std::vector<std::string> RegionGrid::validate() const {
  std::vector<std::string> issues;
  auto note = [&](int i, const std::string& what) {
    issues.push_back("cell (" + std::to_string(i / side_) + "," +
                     std::to_string(i % side_) + "): " + what);
  };
  for (int i = 0; i < num_cells(); ++i) {
    if (occ_[i] < 0.0f || occ_[i] > 1.0f) note(i, "occupancy out of [0,1]");
    if (exp_[i] < 0.0f || exp_[i] > 1.0f) note(i, "explored out of [0,1]");
    double sum = 0.0;
    bool all_zero = true;
    for (float v : region(i)) {
      if (v < 0.0f || v > 1.0f) {
        note(i, "region entry out of [0,1]");
        break;
      }
      if (v != 0.0f) all_zero = false;
      sum += v;
    }
    if (!all_zero && std::abs(sum - 1.0) > 1e-6) {
      note(i, "region sum " + std::to_string(sum));
    }
    const bool observed = cnt_[i] > 0;
    if (observed == all_zero) note(i, "obs_count inconsistent with region");
    if (observed != (exp_[i] > 0.0f)) {
      note(i, "explored inconsistent with obs_count");
    }
  }
  return issues;
}

void RegionGrid::save_binary(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_raw(out, kMagic, 4);
  write_raw(out, &kVersion, sizeof(kVersion));
  const std::uint32_t side = side_, labels = num_labels_;
  write_raw(out, &side, 4);
  write_raw(out, &labels, 4);
  write_raw(out, &cell_size_, 8);
  write_raw(out, &origin_.x, 8);
  write_raw(out, &origin_.y, 8);
  for (int i = 0; i < num_cells(); ++i) {
    write_raw(out, &occ_[i], 4);
    write_raw(out, &exp_[i], 4);
    write_raw(out, region(i).data(), 4u * num_labels_);
    const float count = static_cast<float>(cnt_[i]);
    write_raw(out, &count, 4);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

RegionGrid RegionGrid::load_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  char magic[4];
  read_raw(in, magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("not a map file: " + path);
  }
  std::uint16_t version;
  read_raw(in, &version, sizeof(version));
  if (version != kVersion) throw std::runtime_error("unsupported map version");
  std::uint32_t side, labels;
  read_raw(in, &side, 4);
  read_raw(in, &labels, 4);
  double cell_size;
  Vec2 origin;
  read_raw(in, &cell_size, 8);
  read_raw(in, &origin.x, 8);
  read_raw(in, &origin.y, 8);
  RegionGrid grid(static_cast<int>(side), static_cast<int>(labels), cell_size,
                  origin);
  for (int i = 0; i < grid.num_cells(); ++i) {
    read_raw(in, &grid.occ_[i], 4);
    read_raw(in, &grid.exp_[i], 4);
    read_raw(in, grid.region(i).data(), 4u * labels);
    float count;
    read_raw(in, &count, 4);
    grid.cnt_[i] = static_cast<std::uint32_t>(count);
  }
  return grid;
}

void RegionGrid::save_text(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  char header[256];
  std::snprintf(header, sizeof(header),
                "ISRM-TEXT v1\nside=%d\nlabels=%d\ncell_size=%.17g\n"
                "origin=%.17g %.17g\n",
                side_, num_labels_, cell_size_, origin_.x, origin_.y);
  out << header;
  for (int row = 0; row < side_; ++row) {
    for (int col = 0; col < side_; ++col) {
      const int i = flat(row, col);
      if (is_blank(i)) continue;
      out << row << ' ' << col << ' ' << f32_to_text(occ_[i]) << ' '
          << f32_to_text(exp_[i]) << ' ' << cnt_[i];
      for (float v : region(i)) out << ' ' << f32_to_text(v);
      out << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

RegionGrid RegionGrid::load_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  std::getline(in, line);
  if (line != "ISRM-TEXT v1") throw std::runtime_error("not a text map file");
  int side = 0, labels = 0;
  double cell_size = 0.0;
  Vec2 origin;
  for (int k = 0; k < 4; ++k) {
    std::getline(in, line);
    if (std::sscanf(line.c_str(), "side=%d", &side) == 1) continue;
    if (std::sscanf(line.c_str(), "labels=%d", &labels) == 1) continue;
    if (std::sscanf(line.c_str(), "cell_size=%lg", &cell_size) == 1) continue;
    if (std::sscanf(line.c_str(), "origin=%lg %lg", &origin.x, &origin.y) == 2)
      continue;
    throw std::runtime_error("bad text map header line: " + line);
  }
  RegionGrid grid(side, labels, cell_size, origin);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    int row, col;
    std::uint32_t count;
    float occ, expl;
    if (!(ls >> row >> col >> occ >> expl >> count)) {
      throw std::runtime_error("bad text map cell line: " + line);
    }
    const int i = grid.flat(row, col);
    grid.occ_[i] = occ;
    grid.exp_[i] = expl;
    grid.cnt_[i] = count;
    for (float& v : grid.region(i)) {
      if (!(ls >> v)) throw std::runtime_error("short region row: " + line);
    }
  }
  return grid;
}

bool RegionGrid::operator==(const RegionGrid& o) const {
  return side_ == o.side_ && num_labels_ == o.num_labels_ &&
         cell_size_ == o.cell_size_ && origin_ == o.origin_ &&
         occ_ == o.occ_ && exp_ == o.exp_ && reg_ == o.reg_ && cnt_ == o.cnt_;
}

int argmax_region(std::span<const float> region) {
  int best = kUnobserved;
  float best_value = 0.0f;
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (region[i] > best_value) {
      best_value = region[i];
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace isrm
