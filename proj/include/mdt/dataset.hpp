// On-disk sequence layout: a directory of numbered .ppm frames plus
// groundtruth.txt holding one "x,y,w,h" line per frame (top-left corner and
// size, in pixels). A multi-domain dataset is a directory of such sequence
// directories, one per domain.
#pragma once

#include <string>
#include <vector>

#include "mdt/box.hpp"
#include "mdt/image.hpp"

namespace mdt {

struct Sequence {
  std::string name;
  std::vector<std::string> frame_paths;  // sorted
  std::vector<Box> gt;                   // one per frame

  std::size_t size() const { return frame_paths.size(); }
  Image frame(std::size_t i) const { return load_ppm(frame_paths.at(i)); }
};

struct DomainDataset {
  std::vector<Sequence> domains;
};

std::vector<Box> read_groundtruth(const std::string& path);
void write_groundtruth(const std::string& path, const std::vector<Box>& boxes);

Sequence load_sequence(const std::string& dir);
DomainDataset load_domains(const std::string& dir);

/// Per-frame tracking output, one "frame_index,x,y,w,h,score" line each.
struct FrameRecord {
  int frame = 0;
  Box box;
  double score = 0;
};

void write_results(const std::string& path, const std::vector<FrameRecord>& records);
std::vector<FrameRecord> read_results(const std::string& path);

}  // namespace mdt
