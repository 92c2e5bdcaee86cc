#include "polylut/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "polylut/error.hpp"
#include "polylut/rng.hpp"

namespace polylut {

double Normalization::apply(std::size_t j, double v) const {
  const double lo = min[j];
  const double hi = max[j];
  if (hi == lo) return 0.0;
  return 2.0 * (v - lo) / (hi - lo) - 1.0;
}

std::vector<std::size_t> Dataset::class_histogram() const {
  std::vector<std::size_t> h(static_cast<std::size_t>(n_classes), 0);
  for (int y : labels) ++h[static_cast<std::size_t>(y)];
  return h;
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << text;
}

// Splits CSV text into records of fields. Double-quoted fields may contain
// delimiters, doubled quotes and line breaks. Each record remembers the line
// it started on.
struct Record {
  std::size_t line;
  std::vector<std::string> fields;
};

std::vector<Record> tokenize_csv(const std::string& text, char delim) {
  std::vector<Record> records;
  Record cur{1, {}};
  std::string field;
  std::size_t line = 1;
  bool in_quotes = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
      any = true;
    } else if (c == delim) {
      cur.fields.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\r') {
      // tolerate CRLF
    } else if (c == '\n') {
      if (any || !field.empty()) {
        cur.fields.push_back(std::move(field));
        records.push_back(std::move(cur));
      }
      field.clear();
      any = false;
      ++line;
      cur = Record{line, {}};
    } else {
      field += c;
      any = true;
    }
  }
  if (in_quotes) throw ParseError("line " + std::to_string(cur.line) + ": unterminated quoted field");
  if (any || !field.empty()) {
    cur.fields.push_back(std::move(field));
    records.push_back(std::move(cur));
  }
  return records;
}

bool parse_real(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  while (e > b && (e[-1] == ' ' || e[-1] == '\t')) --e;
  if (b == e) return false;
  if (*b == '+') ++b;
  const auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e && std::isfinite(out);
}

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

bool needs_quotes(const std::string& s, char delim) {
  return s.find_first_of(std::string{delim, '"', '\n', '\r'}) != std::string::npos;
}

std::string quote(const std::string& s, char delim) {
  if (!needs_quotes(s, delim)) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

}  // namespace

Dataset parse_csv(const std::string& text, const std::string& label_column,
                  const std::vector<std::string>& feature_columns, char delimiter) {
  if (feature_columns.empty()) throw ParseError("csv: empty feature selection");
  const auto records = tokenize_csv(text, delimiter);
  if (records.empty()) throw ParseError("csv: missing header row");

  const auto& header = records.front().fields;
  auto column_of = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw ParseError("line " + std::to_string(records.front().line) + ": missing column '" + name +
                       "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t label_idx = column_of(label_column);
  std::vector<std::size_t> feature_idx;
  for (const auto& name : feature_columns) feature_idx.push_back(column_of(name));

  Dataset ds;
  ds.cols = feature_columns.size();
  ds.feature_names = feature_columns;
  ds.label_name = label_column;
  std::vector<std::string> raw_labels;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != header.size()) {
      throw ParseError("line " + std::to_string(rec.line) + ": expected " +
                       std::to_string(header.size()) + " fields, found " +
                       std::to_string(rec.fields.size()));
    }
    for (std::size_t k = 0; k < feature_idx.size(); ++k) {
      double v;
      if (!parse_real(rec.fields[feature_idx[k]], v)) {
        throw ParseError("line " + std::to_string(rec.line) + ": column '" + feature_columns[k] +
                         "': non-numeric value '" + rec.fields[feature_idx[k]] + "'");
      }
      ds.features.push_back(v);
    }
    raw_labels.push_back(rec.fields[label_idx]);
  }
  ds.rows = raw_labels.size();

  std::vector<std::string> classes(raw_labels);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  const bool numeric = std::all_of(classes.begin(), classes.end(), [](const std::string& s) {
    double v;
    return parse_real(s, v);
  });
  if (numeric) {
    std::stable_sort(classes.begin(), classes.end(), [](const std::string& a, const std::string& b) {
      double x, y;
      parse_real(a, x);
      parse_real(b, y);
      return x < y;
    });
  }
  std::map<std::string, int> ids;
  for (std::size_t i = 0; i < classes.size(); ++i) ids[classes[i]] = static_cast<int>(i);
  for (const auto& s : raw_labels) ds.labels.push_back(ids.at(s));
  ds.n_classes = static_cast<int>(classes.size());
  ds.class_names = std::move(classes);
  return ds;
}

Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::vector<std::string>& feature_columns, char delimiter) {
  try {
    return parse_csv(read_file(path), label_column, feature_columns, delimiter);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::string format_csv(const Dataset& ds, char delimiter) {
  std::string out;
  for (std::size_t j = 0; j < ds.cols; ++j) {
    out += quote(j < ds.feature_names.size() ? ds.feature_names[j] : "f" + std::to_string(j),
                 delimiter);
    out += delimiter;
  }
  out += quote(ds.label_name.empty() ? "label" : ds.label_name, delimiter);
  out += '\n';
  for (std::size_t i = 0; i < ds.rows; ++i) {
    for (std::size_t j = 0; j < ds.cols; ++j) {
      out += format_real(ds.features[i * ds.cols + j]);
      out += delimiter;
    }
    const auto y = static_cast<std::size_t>(ds.labels[i]);
    out += quote(y < ds.class_names.size() ? ds.class_names[y] : std::to_string(y), delimiter);
    out += '\n';
  }
  return out;
}

void save_csv(const std::string& path, const Dataset& ds, char delimiter) {
  write_text(path, format_csv(ds, delimiter));
}

namespace {

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>((v >> s) & 0xff));
}

std::string hex32(std::uint32_t v) {
  char buf[11];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

}  // namespace

Dataset parse_idx(const std::vector<std::uint8_t>& images, const std::vector<std::uint8_t>& labels) {
  if (images.size() < 16) throw ParseError("idx images: truncated header");
  if (const auto m = be32(images, 0); m != kIdxImagesMagic) {
    throw ParseError("idx images: bad magic " + hex32(m) + ", expected " + hex32(kIdxImagesMagic));
  }
  if (labels.size() < 8) throw ParseError("idx labels: truncated header");
  if (const auto m = be32(labels, 0); m != kIdxLabelsMagic) {
    throw ParseError("idx labels: bad magic " + hex32(m) + ", expected " + hex32(kIdxLabelsMagic));
  }
  const std::size_t count = be32(images, 4);
  const std::size_t rows = be32(images, 8);
  const std::size_t cols = be32(images, 12);
  const std::size_t label_count = be32(labels, 4);
  if (label_count != count) {
    throw ParseError("idx: " + std::to_string(count) + " images but " + std::to_string(label_count) +
                     " labels");
  }
  const std::size_t pixels = rows * cols;
  if (images.size() - 16 < count * pixels) throw ParseError("idx images: truncated payload");
  if (images.size() - 16 > count * pixels) throw ParseError("idx images: trailing bytes");
  if (labels.size() - 8 < count) throw ParseError("idx labels: truncated payload");
  if (labels.size() - 8 > count) throw ParseError("idx labels: trailing bytes");

  Dataset ds;
  ds.rows = count;
  ds.cols = pixels;
  ds.image_rows = rows;
  ds.image_cols = cols;
  ds.features.resize(count * pixels);
  for (std::size_t i = 0; i < count * pixels; ++i) ds.features[i] = images[16 + i] / 255.0;
  ds.labels.resize(count);
  int max_label = -1;
  for (std::size_t i = 0; i < count; ++i) {
    ds.labels[i] = labels[8 + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.n_classes = max_label + 1;
  for (int c = 0; c < ds.n_classes; ++c) ds.class_names.push_back(std::to_string(c));
  ds.label_name = "label";
  return ds;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  return parse_idx(read_bytes(images_path), read_bytes(labels_path));
}

std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>> format_idx(const Dataset& ds) {
  std::size_t rows = ds.image_rows;
  std::size_t cols = ds.image_cols;
  if (rows * cols != ds.cols) {
    rows = 1;
    cols = ds.cols;
  }
  std::vector<std::uint8_t> images;
  put_be32(images, kIdxImagesMagic);
  put_be32(images, static_cast<std::uint32_t>(ds.rows));
  put_be32(images, static_cast<std::uint32_t>(rows));
  put_be32(images, static_cast<std::uint32_t>(cols));
  for (double v : ds.features) {
    const double p = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
    images.push_back(static_cast<std::uint8_t>(p));
  }
  std::vector<std::uint8_t> labels;
  put_be32(labels, kIdxLabelsMagic);
  put_be32(labels, static_cast<std::uint32_t>(ds.rows));
  for (int y : ds.labels) labels.push_back(static_cast<std::uint8_t>(y));
  return {std::move(images), std::move(labels)};
}

void save_idx(const std::string& images_path, const std::string& labels_path, const Dataset& ds) {
  const auto [images, labels] = format_idx(ds);
  std::ofstream a(images_path, std::ios::binary);
  std::ofstream b(labels_path, std::ios::binary);
  if (!a || !b) throw Error("cannot open idx output files");
  a.write(reinterpret_cast<const char*>(images.data()), static_cast<std::streamsize>(images.size()));
  b.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

Dataset gen_spirals(std::size_t n_per_class, double noise_sd, double turns, std::uint64_t seed) {
  if (n_per_class < 1) throw Error("gen_spirals: need at least one point per class");
  Rng rng(seed);
  Dataset ds;
  ds.rows = 2 * n_per_class;
  ds.cols = 2;
  ds.n_classes = 2;
  ds.feature_names = {"x", "y"};
  ds.label_name = "class";
  ds.class_names = {"0", "1"};
  ds.features.resize(ds.rows * 2);
  ds.labels.resize(ds.rows);
  const double sweep = 2.0 * std::numbers::pi * turns;
  for (int cls = 0; cls < 2; ++cls) {
    const double phase = cls == 0 ? 0.0 : std::numbers::pi;
    for (std::size_t k = 0; k < n_per_class; ++k) {
      // Radius grows linearly with angle and reaches 1 at the outer end.
      const double t = n_per_class == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(n_per_class - 1);
      const double theta = t * sweep;
      double r = 0.05 + 0.95 * t;
      if (noise_sd > 0.0) r += noise_sd * rng.normal();
      const std::size_t i = static_cast<std::size_t>(cls) * n_per_class + k;
      ds.features[2 * i] = r * std::cos(theta + phase);
      ds.features[2 * i + 1] = r * std::sin(theta + phase);
      ds.labels[i] = cls;
    }
  }
  return ds;
}

Dataset apply_normalization(const Dataset& ds, const Normalization& norm) {
  Dataset out = ds;
  for (std::size_t i = 0; i < ds.rows; ++i)
    for (std::size_t j = 0; j < ds.cols; ++j)
      out.features[i * ds.cols + j] = norm.apply(j, ds.features[i * ds.cols + j]);
  out.norm = norm;
  return out;
}

std::pair<Dataset, Dataset> split_normalize(const Dataset& ds, double train_fraction,
                                            std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error("split_normalize: train fraction must be in (0, 1)");
  }
  std::vector<std::size_t> order(ds.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(ds.rows)));

  auto take = [&](std::size_t begin, std::size_t end) {
    Dataset part = ds;
    part.rows = end - begin;
    part.features.assign(part.rows * ds.cols, 0.0);
    part.labels.assign(part.rows, 0);
    for (std::size_t i = begin; i < end; ++i) {
      std::copy_n(ds.features.begin() + static_cast<std::ptrdiff_t>(order[i] * ds.cols), ds.cols,
                  part.features.begin() + static_cast<std::ptrdiff_t>((i - begin) * ds.cols));
      part.labels[i - begin] = ds.labels[order[i]];
    }
    return part;
  };
  Dataset train = take(0, n_train);
  Dataset test = take(n_train, ds.rows);

  Normalization norm;
  norm.min.assign(ds.cols, 0.0);
  norm.max.assign(ds.cols, 0.0);
  for (std::size_t j = 0; j < ds.cols; ++j) {
    if (train.rows == 0) break;
    double lo = train.features[j];
    double hi = lo;
    for (std::size_t i = 1; i < train.rows; ++i) {
      lo = std::min(lo, train.features[i * ds.cols + j]);
      hi = std::max(hi, train.features[i * ds.cols + j]);
    }
    norm.min[j] = lo;
    norm.max[j] = hi;
    if (lo == hi) {
      std::cerr << "warning: feature " << j << " is constant on the training split; mapped to 0\n";
    }
  }
  return {apply_normalization(train, norm), apply_normalization(test, norm)};
}

}  // namespace polylut
