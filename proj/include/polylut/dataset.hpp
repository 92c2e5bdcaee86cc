#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace polylut {

/// Per-feature affine map of training data into [-1, 1].
struct Normalization {
  std::vector<double> min;
  std::vector<double> max;

  bool empty() const noexcept { return min.empty(); }
  /// Maps one value of feature `j`; degenerate features (min == max) map to 0.
  double apply(std::size_t j, double v) const;
  bool operator==(const Normalization&) const = default;
};

/// Dense labelled feature matrix (row-major).
struct Dataset {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> features;
  std::vector<int> labels;
  int n_classes = 0;

  std::vector<std::string> feature_names;  // CSV header names, if any
  std::string label_name;
  std::vector<std::string> class_names;  // class id -> original label text
  std::size_t image_rows = 0;            // IDX image geometry, if any
  std::size_t image_cols = 0;
  Normalization norm;

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * cols, cols);
  }
  /// Class counts indexed by class id.
  std::vector<std::size_t> class_histogram() const;
};

/// Reads a delimited text file with a header row. The label column's
/// distinct values are mapped to contiguous ids (numeric order when every
/// label parses as a number, lexicographic otherwise). Throws ParseError with
/// the offending line number on missing columns, non-numeric cells, or ragged
/// rows.
Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::vector<std::string>& feature_columns, char delimiter = ',');
Dataset parse_csv(const std::string& text, const std::string& label_column,
                  const std::vector<std::string>& feature_columns, char delimiter = ',');
/// Writes features then the label column, reals in shortest round-trip form.
std::string format_csv(const Dataset& ds, char delimiter = ',');
void save_csv(const std::string& path, const Dataset& ds, char delimiter = ',');

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Reads an IDX image file (u8, 3 dims) and its IDX label file (u8, 1 dim).
/// Pixels are scaled by 1/255 and flattened row-major.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
Dataset parse_idx(const std::vector<std::uint8_t>& images, const std::vector<std::uint8_t>& labels);
/// Inverse of parse_idx for datasets whose features are multiples of 1/255.
std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>> format_idx(const Dataset& ds);
void save_idx(const std::string& images_path, const std::string& labels_path, const Dataset& ds);

/// Two interleaved Archimedean spirals, `n_per_class` points each. Class 1 is
/// class 0 rotated by pi; radial Gaussian noise with standard deviation
/// `noise_sd` is added independently to every point.
Dataset gen_spirals(std::size_t n_per_class, double noise_sd, double turns, std::uint64_t seed);

/// Seeded shuffle and split; min/max are taken from the training part only
/// and applied to both parts. Test values may fall outside [-1, 1].
std::pair<Dataset, Dataset> split_normalize(const Dataset& ds, double train_fraction,
                                            std::uint64_t seed);

/// Applies an existing normalization record to every row of `ds`.
Dataset apply_normalization(const Dataset& ds, const Normalization& norm);

}  // namespace polylut
