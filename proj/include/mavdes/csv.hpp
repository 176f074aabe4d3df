#pragma once

#include <filesystem>
#include <string>

#include "mavdes/criterion.hpp"
#include "mavdes/simulate.hpp"

namespace mavdes {

// Writes via a temp file in the same directory plus rename, so readers never
// see a partial file.
void atomic_write_text(const std::filesystem::path& file, const std::string& content);

// Metadata header lines every CSV starts with.
std::string csv_metadata(std::uint64_t seed, const std::string& units);

std::string sensitivity_csv(const SensitivityReport& report, std::uint64_t seed);
std::string mse_csv(const MseReport& report);

}  // namespace mavdes
