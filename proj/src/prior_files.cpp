#include "iidlab/prior_files.hpp"

#include "iidlab/image_io.hpp"

namespace iid::priors {

namespace fs = std::filesystem;

std::vector<fs::path> write_bundle(const PriorBundle& b, const fs::path& dir, const std::string& stem) {
  if (!b.edge_pyramid.full.same_size(b.s_est)) {
    throw Error(ErrorCode::SizeMismatch, "write_bundle: the edge pyramid is missing or mis-sized");
  }
  fs::create_directories(dir);
  std::vector<fs::path> paths;
  auto emit = [&](const auto& img, const std::string& name) {
    const fs::path pfm = dir / (stem + "." + name + ".pfm");
    io::save_pfm(img, pfm);
    io::save_png(clamp01(img), dir / (stem + "." + name + ".png"));
    paths.push_back(pfm);
  };
  emit(b.ccr.strength, kPriorFileNames[0]);
  emit(b.r_est, kPriorFileNames[1]);
  emit(b.s_est, kPriorFileNames[2]);
  emit(b.nrgb, kPriorFileNames[3]);
  emit(b.edge_pyramid.full, kPriorFileNames[4]);
  emit(b.edge_pyramid.half, kPriorFileNames[5]);
  emit(b.edge_pyramid.quarter, kPriorFileNames[6]);
  return paths;
}

}  // namespace iid::priors
