#include "gcp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gcp/binary_io.hpp"
#include "gcp/error.hpp"
#include "gcp/label_io.hpp"
#include "gcp/parallel.hpp"
#include "json.hpp"

namespace gcp {

using nlohmann::json;

std::string_view to_string(ClassKind kind) {
  switch (kind) {
    case ClassKind::unlabeled:
      return "unlabeled";
    case ClassKind::stuff:
      return "stuff";
    case ClassKind::things:
      return "things";
  }
  return "?";
}

ClassKind parse_class_kind(std::string_view s) {
  if (s == "stuff") return ClassKind::stuff;
  if (s == "things" || s == "thing") return ClassKind::things;
  if (s == "unlabeled") return ClassKind::unlabeled;
  throw Error("unknown class kind \"" + std::string(s) + "\"");
}

void ClassTable::validate() const {
  if (names.size() != kinds.size()) throw Error("class table: names/kinds size mismatch");
  if (names.size() < 2) throw Error("class table: need at least one labeled class");
  if (kinds[kUnlabeled] != ClassKind::unlabeled) throw Error("class table: index 0 is reserved for unlabeled");
  for (std::size_t c = 1; c < kinds.size(); ++c) {
    if (kinds[c] == ClassKind::unlabeled) {
      throw Error("class table: class " + std::to_string(c) + " (" + names[c] + ") must be stuff or things");
    }
  }
}

LabelMap::LabelMap(std::size_t height, std::size_t width, ClassId fill)
    : height_(height), width_(width), labels_(height * width, fill) {}

LabelMap::LabelMap(std::size_t height, std::size_t width, std::vector<ClassId> labels)
    : height_(height), width_(width), labels_(std::move(labels)) {
  if (labels_.size() != height_ * width_) throw Error("LabelMap: label count does not match dimensions");
}

ClassId LabelMap::max_label() const {
  return labels_.empty() ? kUnlabeled : *std::max_element(labels_.begin(), labels_.end());
}

std::optional<std::size_t> Dataset::find(std::string_view id) const {
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].id == id) return i;
  }
  return std::nullopt;
}

void validate_label_map(const LabelMap& map, const ClassTable& classes, std::string_view image_id) {
  if (map.height() == 0 || map.width() == 0) {
    throw Error("image '" + std::string(image_id) + "': zero-area label map");
  }
  const ClassId maxv = map.max_label();
  if (maxv >= classes.num_classes()) {
    throw Error("image '" + std::string(image_id) + "': class index " + std::to_string(maxv) +
                " out of range (C=" + std::to_string(classes.num_classes()) + ")");
  }
}

std::vector<bool> present_classes(const LabelMap& map, std::size_t num_classes) {
  std::vector<bool> present(num_classes, false);
  for (ClassId v : map.labels()) {
    if (v != kUnlabeled && v < num_classes) present[v] = true;
  }
  return present;
}

ClassFrequency class_frequency(const Dataset& dataset) { return class_frequency(dataset, "all"); }

ClassFrequency class_frequency(const Dataset& dataset, std::string_view split) {
  if (dataset.size() == 0) throw Error("class_frequency: empty dataset");
  const bool every = split.empty() || split == "all";
  ClassFrequency freq;
  freq.counts.assign(dataset.classes.num_classes(), 0);
  std::size_t used = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!every && dataset.images[i].split != split) continue;
    ++used;
    const auto present = present_classes(dataset.labels[i], freq.counts.size());
    for (std::size_t c = 1; c < present.size(); ++c) freq.counts[c] += present[c] ? 1 : 0;
  }
  if (used == 0) throw Error("class_frequency: no images in split \"" + std::string(split) + "\"");
  return freq;
}

std::vector<double> rare_class_weights(const ClassFrequency& freq) {
  std::vector<double> w(freq.counts.size(), 1.0);
  for (std::size_t c = 1; c < w.size(); ++c) {
    if (freq.counts[c] > 0) w[c] = static_cast<double>(freq.counts[c]);
  }
  return w;
}

// ---------------------------------------------------------------------------
// descriptor store

std::string encode_descriptors(const DescriptorSet& set) {
  io::ByteWriter w;
  w.magic("GCPD");
  w.u32(static_cast<std::uint32_t>(set.count()));
  w.u32(static_cast<std::uint32_t>(set.dim));
  w.f32s(set.values);
  return w.bytes();
}

DescriptorSet decode_descriptors(std::string_view bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  r.expect_magic("GCPD");
  const std::uint32_t count = r.u32();
  const std::uint32_t dim = r.u32();
  DescriptorSet set;
  set.dim = dim;
  set.values.resize(static_cast<std::size_t>(count) * dim);
  r.f32s(set.values);
  r.expect_end();
  for (std::size_t i = 0; i < set.values.size(); ++i) {
    if (!std::isfinite(set.values[i])) {
      throw Error(source + ": non-finite value in descriptor row " + std::to_string(i / std::max<std::size_t>(dim, 1)));
    }
  }
  return set;
}

DescriptorSet read_descriptors(const std::filesystem::path& path) {
  return decode_descriptors(io::read_file(path), path.string());
}

void write_descriptors(const DescriptorSet& set, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_descriptors(set));
}

// ---------------------------------------------------------------------------
// manifest

namespace {

std::vector<json> read_json_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

ClassTable load_class_table(const std::filesystem::path& path) {
  const auto records = read_json_lines(path);
  std::size_t max_index = 0;
  for (const auto& rec : records) max_index = std::max(max_index, rec.at("index").get<std::size_t>());
  ClassTable table;
  table.names.assign(max_index + 1, "");
  table.kinds.assign(max_index + 1, ClassKind::unlabeled);
  std::vector<bool> seen(max_index + 1, false);
  table.names[kUnlabeled] = "unlabeled";
  seen[kUnlabeled] = true;
  for (const auto& rec : records) {
    const auto idx = rec.at("index").get<std::size_t>();
    const auto kind = parse_class_kind(rec.value("kind", std::string("unlabeled")));
    if (idx == kUnlabeled) {
      if (kind != ClassKind::unlabeled) throw Error(path.string() + ": index 0 is reserved for unlabeled");
      table.names[0] = rec.value("name", std::string("unlabeled"));
      continue;
    }
    if (seen[idx]) throw Error(path.string() + ": duplicate class index " + std::to_string(idx));
    seen[idx] = true;
    table.names[idx] = rec.at("name").get<std::string>();
    table.kinds[idx] = kind;
  }
  for (std::size_t c = 0; c < seen.size(); ++c) {
    if (!seen[c]) throw Error(path.string() + ": class index " + std::to_string(c) + " missing");
  }
  table.validate();
  return table;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  return p.is_absolute() ? p : base / p;
}

std::string file_stem_for(std::string_view id, std::size_t index) {
  std::string s;
  for (char c : id) s.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_');
  return std::to_string(index) + "_" + s;
}

}  // namespace

Dataset load_manifest(const std::filesystem::path& manifest) {
  const auto base = manifest.parent_path();
  auto records = read_json_lines(manifest);
  if (records.empty()) throw Error(manifest.string() + ": empty dataset");
  if (records.front().value("format", "") != "gcp-manifest") {
    throw Error(manifest.string() + ": first record must be the {\"format\":\"gcp-manifest\"} header");
  }
  const json header = records.front();
  records.erase(records.begin());
  if (records.empty()) throw Error(manifest.string() + ": empty dataset");

  Dataset ds;
  ds.classes = load_class_table(resolve(base, header.at("classes").get<std::string>()));

  ds.images.reserve(records.size());
  for (const auto& rec : records) {
    ImageRecord img;
    img.id = rec.at("id").is_string() ? rec.at("id").get<std::string>() : rec.at("id").dump();
    img.labelmap_path = rec.at("labelmap").get<std::string>();
    img.split = rec.value("split", std::string("train"));
    if (rec.contains("descriptor")) img.descriptor_row = rec.at("descriptor").get<std::size_t>();
    if (ds.find(img.id)) throw Error(manifest.string() + ": duplicate image id '" + img.id + "'");
    ds.images.push_back(std::move(img));
  }

  ds.labels.resize(ds.images.size());
  std::vector<std::string> errors(ds.images.size());
  parallel_for(ds.images.size(), [&](std::size_t i) {
    try {
      const auto path = resolve(base, ds.images[i].labelmap_path);
      if (!std::filesystem::exists(path)) throw Error("missing label map " + path.string());
      ds.labels[i] = read_label_map(path);
      validate_label_map(ds.labels[i], ds.classes, ds.images[i].id);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i].empty()) continue;
    if (errors[i].rfind("image '", 0) == 0) throw Error(errors[i]);
    throw Error("image '" + ds.images[i].id + "': " + errors[i]);
  }

  if (header.contains("descriptors")) {
    const auto path = resolve(base, header.at("descriptors").get<std::string>());
    const DescriptorSet raw = read_descriptors(path);
    if (header.contains("descriptor_dim") && header.at("descriptor_dim").get<std::size_t>() != raw.dim) {
      throw Error(path.string() + ": descriptor length " + std::to_string(raw.dim) + " does not match manifest dim " +
                  std::to_string(header.at("descriptor_dim").get<std::size_t>()));
    }
    DescriptorSet aligned;
    aligned.dim = raw.dim;
    aligned.values.resize(ds.size() * raw.dim);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const std::size_t row = ds.images[i].descriptor_row.value_or(i);
      if (row >= raw.count()) {
        throw Error("image '" + ds.images[i].id + "': descriptor row " + std::to_string(row) + " missing from " +
                    path.string() + " (" + std::to_string(raw.count()) + " rows)");
      }
      std::copy_n(raw.values.begin() + static_cast<std::ptrdiff_t>(row * raw.dim), raw.dim,
                  aligned.values.begin() + static_cast<std::ptrdiff_t>(i * raw.dim));
    }
    ds.descriptors = std::move(aligned);
  }
  return ds;
}

std::filesystem::path save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  if (dataset.size() == 0) throw Error("save_dataset: empty dataset");
  std::filesystem::create_directories(dir / "labels");

  std::ostringstream classes;
  for (std::size_t c = 0; c < dataset.classes.num_classes(); ++c) {
    json rec = {{"index", c}, {"name", dataset.classes.names[c]}, {"kind", to_string(dataset.classes.kinds[c])}};
    classes << rec.dump() << "\n";
  }
  io::write_file_atomic(dir / "classes.jsonl", classes.str());

  json header = {{"format", "gcp-manifest"}, {"classes", "classes.jsonl"}};
  if (dataset.descriptors) {
    header["descriptors"] = "descriptors.gcpd";
    header["descriptor_dim"] = dataset.descriptors->dim;
    write_descriptors(*dataset.descriptors, dir / "descriptors.gcpd");
  }
  std::ostringstream manifest;
  manifest << header.dump() << "\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto rel = std::filesystem::path("labels") / (file_stem_for(dataset.images[i].id, i) + ".pgm");
    write_label_map_pgm(dataset.labels[i], dir / rel);
    json rec = {{"id", dataset.images[i].id}, {"labelmap", rel.generic_string()}, {"split", dataset.images[i].split}};
    manifest << rec.dump() << "\n";
  }
  const auto path = dir / "manifest.jsonl";
  io::write_file_atomic(path, manifest.str());
  return path;
}

}  // namespace gcp
