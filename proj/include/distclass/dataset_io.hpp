#pragma once

#include "distclass/core.hpp"

#include <filesystem>

namespace distclass {

/// Current on-disk format version written into manifest.json.
inline constexpr int kDatasetFormatVersion = 1;

/// Writes `ds` as a directory: manifest.json plus one CSV per item under
/// items/. Point sets are written one support point per row, with a trailing
/// weight column only when weights are not uniform. Gaussians are written as
/// the mean row followed by the d covariance rows. Numbers use the shortest
/// round-trip representation, so a reload is bit-identical.
void save_dataset(const DistributionDataset& ds, const std::filesystem::path& dir);

/// Inverse of save_dataset. Throws ParseError (with byte offset) on malformed
/// content and InvalidArgument when files are missing.
DistributionDataset load_dataset(const std::filesystem::path& dir);

/// Reads a single point-set CSV of dimension `dim` (d or d+1 columns).
PointSet load_point_set_csv(const std::filesystem::path& file, std::size_t dim);

}  // namespace distclass
