#include "vfiq/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "csv.hpp"
#include "vfiq/errors.hpp"
#include "vfiq/prng.hpp"

namespace vfiq {

namespace fs = std::filesystem;

Frame::Frame(int width, int height, std::vector<float> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width_ < kMinSide || height_ < kMinSide) {
    throw InputError("frame is " + std::to_string(width_) + "x" + std::to_string(height_) +
                     ", minimum is 32x32");
  }
  const auto expected = static_cast<std::size_t>(width_) * height_ * kChannels;
  if (data_.size() != expected) {
    throw InputError("frame data has " + std::to_string(data_.size()) + " values, expected " +
                     std::to_string(expected));
  }
  for (float v : data_) {
    if (!(v >= 0.0f && v <= 1.0f)) throw InputError("frame intensity outside [0,1]");
  }
}

Frame Frame::filled(int width, int height, float value) {
  const auto n = static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0) * kChannels;
  return Frame(width, height, std::vector<float>(n, value));
}

bool DatasetManifest::has_mos() const {
  return !records.empty() &&
         std::all_of(records.begin(), records.end(), [](const auto& r) { return r.mos.has_value(); });
}

bool DatasetManifest::has_reference() const {
  return !records.empty() && std::all_of(records.begin(), records.end(),
                                         [](const auto& r) { return r.path_ref.has_value(); });
}

void SplitConfig::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InputError("train_fraction must lie strictly between 0 and 1");
  }
  if (repeats < 1) throw InputError("repeats must be at least 1");
}

namespace {

constexpr const char* kRequiredColumns[] = {"id", "path_i0", "path_it", "path_i1"};

fs::path resolve(const fs::path& base, const std::string& cell) {
  fs::path p(cell);
  if (p.is_relative()) p = base / p;
  return p.lexically_normal();
}

void check_record(const TripletRecord& r, const std::string& where) {
  if (r.id.empty()) throw InputError(where + ": empty id");
  if (r.path_i0 == r.path_it || r.path_i0 == r.path_i1 || r.path_it == r.path_i1) {
    throw InputError(where + ": triplet '" + r.id + "' repeats a path");
  }
  if (r.mos && !(*r.mos >= 0.0 && *r.mos <= 100.0)) {
    std::ostringstream os;
    os << where << ": mos " << *r.mos << " of '" << r.id << "' outside [0,100]";
    throw InputError(os.str());
  }
}

}  // namespace

void validate_manifest(const DatasetManifest& manifest) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& r = manifest.records[i];
    check_record(r, "record " + std::to_string(i + 1));
    if (!seen.insert(r.id).second) throw InputError("duplicate id '" + r.id + "'");
  }
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();

  std::string line;
  if (!std::getline(in, line)) throw InputError("manifest " + path.string() + " is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = detail::split_csv_line(line);
  if (header.size() < 4 || !std::equal(std::begin(kRequiredColumns), std::end(kRequiredColumns),
                                       header.begin())) {
    throw InputError("manifest header must start with id,path_i0,path_it,path_i1");
  }
  int mos_col = -1;
  int ref_col = -1;
  for (std::size_t c = 4; c < header.size(); ++c) {
    if (header[c] == "mos" && mos_col < 0) {
      mos_col = static_cast<int>(c);
    } else if (header[c] == "path_ref" && ref_col < 0) {
      ref_col = static_cast<int>(c);
    } else {
      throw InputError("unexpected manifest column '" + header[c] + "'");
    }
  }

  DatasetManifest manifest;
  std::set<std::string> seen;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path.filename().string() + " row " + std::to_string(line_no);
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw InputError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                       std::to_string(cells.size()));
    }
    TripletRecord r;
    r.id = cells[0];
    r.path_i0 = resolve(base, cells[1]);
    r.path_it = resolve(base, cells[2]);
    r.path_i1 = resolve(base, cells[3]);
    if (mos_col >= 0 && !cells[mos_col].empty()) {
      const auto& text = cells[mos_col];
      std::size_t used = 0;
      double value = 0.0;
      try {
        value = std::stod(text, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != text.size() || !std::isfinite(value)) {
        throw InputError(where + ": malformed mos '" + text + "'");
      }
      r.mos = value;
    }
    if (ref_col >= 0 && !cells[ref_col].empty()) r.path_ref = resolve(base, cells[ref_col]);
    check_record(r, where);
    if (!seen.insert(r.id).second) throw InputError(where + ": duplicate id '" + r.id + "'");
    manifest.records.push_back(std::move(r));
  }
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  validate_manifest(manifest);
  const fs::path base = fs::absolute(path).parent_path();
  auto rel = [&](const fs::path& p) {
    const fs::path abs = fs::absolute(p).lexically_normal();
    const fs::path r = abs.lexically_relative(base);
    return detail::quote_csv(r.empty() ? abs.string() : r.string());
  };
  bool any_mos = false;
  bool any_ref = false;
  for (const auto& r : manifest.records) {
    any_mos = any_mos || r.mos.has_value();
    any_ref = any_ref || r.path_ref.has_value();
  }

  std::ofstream out(path);
  if (!out) throw InputError("cannot write manifest " + path.string());
  out << "id,path_i0,path_it,path_i1";
  if (any_mos) out << ",mos";
  if (any_ref) out << ",path_ref";
  out << '\n';
  out.precision(17);
  for (const auto& r : manifest.records) {
    out << detail::quote_csv(r.id) << ',' << rel(r.path_i0) << ',' << rel(r.path_it) << ','
        << rel(r.path_i1);
    if (any_mos) {
      out << ',';
      if (r.mos) out << *r.mos;
    }
    if (any_ref) {
      out << ',';
      if (r.path_ref) out << rel(*r.path_ref);
    }
    out << '\n';
  }
}

std::size_t train_size(std::size_t n, double train_fraction) {
  return static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
}

Split split_dataset(const DatasetManifest& manifest, const SplitConfig& cfg, int repeat_index) {
  cfg.validate();
  if (manifest.empty()) throw InputError("cannot split an empty manifest");
  if (repeat_index < 0 || repeat_index >= cfg.repeats) {
    throw InputError("repeat index " + std::to_string(repeat_index) + " out of range");
  }

  std::vector<std::size_t> order(manifest.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return manifest.records[a].id < manifest.records[b].id;
  });

  std::vector<std::size_t> shuffled = order;
  SplitMix64 rng(cfg.seed + static_cast<std::uint64_t>(repeat_index));
  for (std::size_t i = shuffled.size(); i-- > 1;) {
    const auto j = static_cast<std::size_t>(rng.below(i + 1));
    std::swap(shuffled[i], shuffled[j]);
  }

  const std::size_t n_train = train_size(manifest.size(), cfg.train_fraction);
  std::vector<bool> in_train(manifest.size(), false);
  for (std::size_t k = 0; k < n_train; ++k) in_train[shuffled[k]] = true;

  Split split;
  for (std::size_t idx : order) {
    (in_train[idx] ? split.train : split.test).records.push_back(manifest.records[idx]);
  }
  return split;
}

}  // namespace vfiq
