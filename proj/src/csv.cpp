#include "mavdes/csv.hpp"

#include <fstream>
#include <sstream>

namespace mavdes {

void atomic_write_text(const std::filesystem::path& file, const std::string& content) {
  namespace fs = std::filesystem;
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, file);
}

std::string csv_metadata(std::uint64_t seed, const std::string& units) {
  std::ostringstream os;
  os << "# artifact=mavdes version=1\n";
  os << "# seed=" << seed << "\n";
  os << "# units=" << units << "\n";
  return os.str();
}

std::string sensitivity_csv(const SensitivityReport& report, std::uint64_t seed) {
  std::ostringstream os;
  os << csv_metadata(seed, "dose (x), criterion directional derivative (d_pi)");
  os.precision(12);
  os << "x,d_pi,is_support\n";
  for (size_t i = 0; i < report.grid.size(); ++i) {
    os << report.grid[i] << "," << report.values[i] << "," << (report.is_support[i] ? 1 : 0)
       << "\n";
  }
  return os.str();
}

std::string mse_csv(const MseReport& report) {
  std::ostringstream os;
  os << csv_metadata(report.seed, "squared dose");
  os << "# scale=" << report.scale << " (reported values are raw means of squared error times scale)\n";
  os.precision(10);
  os << "truth,design,n,estimator,mse,bias2,var,reps,excluded\n";
  for (const MseCell& c : report.cells) {
    os << c.truth << "," << c.design << "," << c.n << "," << scheme_name(c.scheme) << ","
       << c.mse * report.scale << "," << c.bias2 * report.scale << ","
       << c.variance * report.scale << "," << c.reps << "," << c.excluded << "\n";
  }
  return os.str();
}

}  // namespace mavdes
