#include "mdt/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace mdt {

std::vector<Box> read_groundtruth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ground truth: " + path);
  std::vector<Box> boxes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double x, y, w, h;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &x, &y, &w, &h) != 4)
      throw IoError("bad ground-truth line '" + line + "' in " + path);
    Box b = Box::from_xywh(x, y, w, h);
    if (!b.valid()) throw IoError("degenerate ground-truth box in " + path);
    boxes.push_back(b);
  }
  if (boxes.empty()) throw IoError("empty ground truth: " + path);
  return boxes;
}

void write_groundtruth(const std::string& path, const std::vector<Box>& boxes) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open ground truth for writing: " + path);
  char buf[160];
  for (const Box& b : boxes) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f\n", b.x1, b.y1, b.width(), b.height());
    out << buf;
  }
}

Sequence load_sequence(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a sequence directory: " + dir);
  Sequence seq;
  seq.name = fs::path(dir).filename().string();
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm")
      seq.frame_paths.push_back(entry.path().string());
  }
  std::sort(seq.frame_paths.begin(), seq.frame_paths.end());
  if (seq.frame_paths.empty()) throw IoError("no .ppm frames in " + dir);
  seq.gt = read_groundtruth((fs::path(dir) / "groundtruth.txt").string());
  if (seq.gt.size() != seq.frame_paths.size())
    throw IoError("frame/ground-truth count mismatch in " + dir);
  return seq;
}

DomainDataset load_domains(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a dataset directory: " + dir);
  std::vector<std::string> subdirs;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory()) subdirs.push_back(entry.path().string());
  std::sort(subdirs.begin(), subdirs.end());
  DomainDataset ds;
  for (const auto& sub : subdirs) ds.domains.push_back(load_sequence(sub));
  if (ds.domains.empty()) throw IoError("no domain subdirectories in " + dir);
  return ds;
}

void write_results(const std::string& path, const std::vector<FrameRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open results for writing: " + path);
  char buf[200];
  for (const FrameRecord& r : records) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.frame, r.box.x1, r.box.y1,
                  r.box.width(), r.box.height(), r.score);
    out << buf;
  }
  if (!out) throw IoError("results write failed: " + path);
}

std::vector<FrameRecord> read_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open results: " + path);
  std::vector<FrameRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    FrameRecord r;
    double x, y, w, h;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf", &r.frame, &x, &y, &w, &h, &r.score) != 6)
      throw IoError("bad results line '" + line + "' in " + path);
    r.box = Box::from_xywh(x, y, w, h);
    out.push_back(r);
  }
  return out;
}

}  // namespace mdt
