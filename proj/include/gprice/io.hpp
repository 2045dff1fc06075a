#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gprice/path.hpp"
#include "gprice/pde.hpp"

namespace gprice {

/// Two-column text: header `time,value`, then one row per sample written with
/// 17 significant digits.
void write_path_csv(std::ostream& os, const SampledPath& path);
void write_path_csv(const std::string& file, const SampledPath& path);

/// Parses the two-column format. Blank lines are ignored; anything else that
/// is not two numbers is an error naming the line.
SampledPath read_path_csv(std::istream& is, bool positive = false);
SampledPath read_path_csv(const std::string& file, bool positive = false);

/// Header `time,path_0,...,path_{n-1}`; all paths must share one time grid.
void write_ensemble_csv(std::ostream& os, const std::vector<SampledPath>& paths);
void write_ensemble_csv(const std::string& file, const std::vector<SampledPath>& paths);
std::vector<SampledPath> read_ensemble_csv(std::istream& is);

/// Header row `time,<space nodes>`; each following row is one time slice.
void write_surface_matrix(std::ostream& os, const PriceSurface& surface);
void write_surface_matrix(const std::string& file, const PriceSurface& surface);

}  // namespace gprice
