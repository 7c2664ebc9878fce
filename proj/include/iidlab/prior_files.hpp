#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "iidlab/priors.hpp"

namespace iid::priors {

/// Per-sample prior file names, in write order. The edge levels keep their
/// full-scale names (256/128/64) whatever the actual resolution is.
inline const std::vector<std::string> kPriorFileNames = {"ccr_strength", "r_est",    "s_est",  "nrgb",
                                                         "edge_256",     "edge_128", "edge_64"};

/// Writes dir/<stem>.<name>.pfm (exact) and dir/<stem>.<name>.png (clamped preview)
/// for every bundle member; returns the PFM paths.
std::vector<std::filesystem::path> write_bundle(const PriorBundle& bundle, const std::filesystem::path& dir,
                                                const std::string& stem);

}  // namespace iid::priors
