#ifndef ISCA_TESTS_HELPERS_HPP
#define ISCA_TESTS_HELPERS_HPP

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "isca/acoustic.hpp"
#include "isca/types.hpp"

namespace test_support {

// Inventory with the blank at index 0 followed by the given labels.
inline isca::UnitInventory blank_inventory(std::vector<std::string> labels) {
  labels.insert(labels.begin(), "<b>");
  return isca::UnitInventory(std::move(labels), 0, isca::UnitKind::graphemic);
}

inline isca::UnitInventory plain_inventory(std::vector<std::string> labels) {
  return isca::UnitInventory(std::move(labels), std::nullopt, isca::UnitKind::graphemic);
}

inline isca::PosteriorMatrix make_matrix(const std::string& id,
                                         const std::vector<std::vector<double>>& rows) {
  std::vector<double> flat;
  for (const auto& row : rows) flat.insert(flat.end(), row.begin(), row.end());
  return isca::PosteriorMatrix(id, static_cast<int>(rows.size()),
                               static_cast<int>(rows.front().size()), std::move(flat));
}

// Raw log posteriors: no prior subtraction, no blank penalty.
inline isca::ScoredFrames raw_log_frames(const isca::PosteriorMatrix& matrix,
                                         const isca::UnitInventory& inventory) {
  return isca::score_frames(matrix, inventory, nullptr, isca::ScoreWeights{}, 0.0);
}

inline std::vector<std::vector<double>> random_rows(std::mt19937& rng, int num_frames,
                                                    int num_units) {
  std::uniform_real_distribution<double> uniform(0.05, 1.0);
  std::vector<std::vector<double>> rows(num_frames, std::vector<double>(num_units));
  for (auto& row : rows) {
    double sum = 0.0;
    for (double& p : row) sum += p = uniform(rng);
    for (double& p : row) p /= sum;
  }
  return rows;
}

// Probability that T frames of raw posteriors collapse to exactly `labels`,
// by brute force over all U^T frame-label paths (blank removal + repeat
// merging). Independent of the graph machinery on purpose.
inline double brute_force_ctc_mass(const isca::PosteriorMatrix& matrix, int blank,
                                   const std::vector<int>& labels) {
  const int T = matrix.num_frames();
  const int U = matrix.num_units();
  double total = 0.0;
  std::vector<int> path(T, 0);
  for (;;) {
    // Remove adjacent repeats first, then blanks.
    std::vector<int> collapsed;
    for (int t = 0; t < T; ++t) {
      if (t > 0 && path[t] == path[t - 1]) continue;
      if (path[t] == blank) continue;
      collapsed.push_back(path[t]);
    }
    if (collapsed == labels) {
      double p = 1.0;
      for (int t = 0; t < T; ++t) p *= matrix.at(t, path[t]);
      total += p;
    }
    int t = T - 1;
    while (t >= 0 && path[t] == U - 1) path[t--] = 0;
    if (t < 0) break;
    ++path[t];
  }
  return total;
}

class TempDir {
 public:
  TempDir() {
    std::string pattern =
        (std::filesystem::temp_directory_path() / "isca_test_XXXXXX").string();
    if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path);
  out << contents;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace test_support

#endif
