#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gcp {

using ClassId = std::uint16_t;

// Index 0 is reserved for unannotated pixels and never counted.
inline constexpr ClassId kUnlabeled = 0;

enum class ClassKind : std::uint8_t { unlabeled, stuff, things };

std::string_view to_string(ClassKind kind);
ClassKind parse_class_kind(std::string_view s);

struct ClassTable {
  std::vector<std::string> names;  // size C, names[0] is the unlabeled slot
  std::vector<ClassKind> kinds;    // size C, kinds[0] == unlabeled

  std::size_t num_classes() const { return names.size(); }
  bool is_things(ClassId c) const { return c < kinds.size() && kinds[c] == ClassKind::things; }
  bool is_stuff(ClassId c) const { return c < kinds.size() && kinds[c] == ClassKind::stuff; }

  // Every non-unlabeled class must be exactly one of stuff / things.
  void validate() const;
};

class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(std::size_t height, std::size_t width, ClassId fill = kUnlabeled);
  LabelMap(std::size_t height, std::size_t width, std::vector<ClassId> labels);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t area() const { return height_ * width_; }

  ClassId at(std::size_t row, std::size_t col) const { return labels_[row * width_ + col]; }
  ClassId& at(std::size_t row, std::size_t col) { return labels_[row * width_ + col]; }

  std::span<const ClassId> labels() const { return labels_; }
  std::span<const ClassId> row(std::size_t r) const {
    return std::span<const ClassId>(labels_).subspan(r * width_, width_);
  }

  ClassId max_label() const;

  bool operator==(const LabelMap&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<ClassId> labels_;
};

struct DescriptorSet {
  std::size_t dim = 0;
  std::vector<float> values;  // count x dim, row-major

  std::size_t count() const { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(values).subspan(i * dim, dim);
  }
};

struct ImageRecord {
  std::string id;
  std::filesystem::path labelmap_path;  // as written in the manifest
  std::string split;
  std::optional<std::size_t> descriptor_row;
};

// A loaded dataset is immutable after construction and safe to share.
struct Dataset {
  ClassTable classes;
  std::vector<ImageRecord> images;
  std::vector<LabelMap> labels;             // aligned with images
  std::optional<DescriptorSet> descriptors;  // rows aligned with images

  std::size_t size() const { return images.size(); }
  std::optional<std::size_t> find(std::string_view id) const;
};

// Per-class count of images with at least one pixel of that class.
struct ClassFrequency {
  std::vector<std::size_t> counts;  // size C; counts[kUnlabeled] == 0
};

// Checks dimensions and every label against the class table; `image_id`
// names the offending image in the error.
void validate_label_map(const LabelMap& map, const ClassTable& classes, std::string_view image_id);

// Per-class presence flags (index 0 always false).
std::vector<bool> present_classes(const LabelMap& map, std::size_t num_classes);

ClassFrequency class_frequency(const Dataset& dataset);
// Restricted to images whose split equals `split`; "all" / "" means every image.
ClassFrequency class_frequency(const Dataset& dataset, std::string_view split);

// Rare-class weights: weight[c] = f(c); classes absent from the dataset get
// weight 1 (they have no pixels to reweight).
std::vector<double> rare_class_weights(const ClassFrequency& freq);

// Manifest (JSON lines):
//   line 1: {"format":"gcp-manifest","classes":"classes.jsonl","descriptors":"descriptors.gcpd"}
//           ("descriptors" optional)
//   then one record per image: {"id":..., "labelmap":..., "split":..., "descriptor": row?}
// Class table (JSON lines): {"index":i, "name":..., "kind":"stuff"|"things"}
// Relative paths resolve against the manifest's directory. Manifest order is
// the canonical image index.
Dataset load_manifest(const std::filesystem::path& manifest);

// Writes manifest.jsonl, classes.jsonl, labels/<index>_<id>.pgm and (if present)
// descriptors.gcpd under `dir`. Returns the manifest path.
std::filesystem::path save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

// Descriptor store: "GCPD", u32 count, u32 dim, count*dim little-endian f32.
DescriptorSet read_descriptors(const std::filesystem::path& path);
void write_descriptors(const DescriptorSet& set, const std::filesystem::path& path);
std::string encode_descriptors(const DescriptorSet& set);
DescriptorSet decode_descriptors(std::string_view bytes, const std::string& source);

}  // namespace gcp
