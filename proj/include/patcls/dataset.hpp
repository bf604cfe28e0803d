#pragma once

#include "patcls/matrix.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace patcls {

enum class Task : std::uint8_t { image_type = 0, perspective = 1 };

std::string_view to_string(Task t);
std::optional<Task> task_from_name(std::string_view name);
/// Label space of a task: the ten image types, or the seven perspective leaves.
std::vector<std::string> task_class_names(Task t);

enum class Split : std::uint8_t { train, val, test };

std::string_view to_string(Split s);
std::optional<Split> split_from_name(std::string_view name);

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct ManifestRecord {
    std::string id;
    Split split = Split::train;
    std::string label;
    std::string caption;  // empty when absent
    std::string path;     // empty when absent

    bool operator==(const ManifestRecord&) const = default;
};

struct DatasetManifest {
    Task task = Task::image_type;
    std::vector<std::string> class_names;
    std::vector<ManifestRecord> records;
};

inline constexpr std::string_view kManifestHeader = "id,split,label,caption,path";

/// Parses and validates a manifest CSV. Errors carry the file line number.
DatasetManifest load_manifest(const std::string& path, Task task);
/// Checks ids, labels and record count against the task's label set.
void validate_manifest(const DatasetManifest& manifest);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

/// Per-class counts over one split, in class_names order.
struct ClassHistogram {
    std::vector<std::string> class_names;
    std::vector<std::size_t> counts;

    /// Count for a class name; throws ValidationError for unknown names.
    std::size_t at(std::string_view name) const;
    std::size_t total() const;
};

ClassHistogram class_histogram(const DatasetManifest& manifest, Split split);
/// Throws ValidationError for split names other than train/val/test.
ClassHistogram class_histogram(const DatasetManifest& manifest, std::string_view split);

// ---------------------------------------------------------------------------
// Embedding store (PEMB v1)
// ---------------------------------------------------------------------------

/// Id-keyed fixed-dimension float vectors, kept in insertion order.
class EmbeddingStore {
public:
    explicit EmbeddingStore(std::size_t dim);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }

    /// Throws ValidationError on a duplicate id, empty id or length mismatch.
    void add(std::string id, std::span<const float> values);
    std::span<const float> vector(std::size_t index) const;
    std::optional<std::span<const float>> find(std::string_view id) const;

    bool operator==(const EmbeddingStore& other) const;

private:
    std::size_t dim_;
    std::vector<std::string> ids_;
    std::vector<float> values_;
    std::unordered_map<std::string, std::size_t> index_;
};

inline constexpr char kPembMagic[4] = {'P', 'E', 'M', 'B'};
inline constexpr std::uint32_t kPembVersion = 1;

std::vector<std::uint8_t> encode_embeddings(const EmbeddingStore& store);
EmbeddingStore decode_embeddings(std::span<const std::uint8_t> bytes,
                                 const std::string& context = "embeddings");
/// Refuses stores containing non-finite values; nothing is written then.
void write_embeddings(const EmbeddingStore& store, const std::string& path);
EmbeddingStore read_embeddings(const std::string& path);

// ---------------------------------------------------------------------------
// Join
// ---------------------------------------------------------------------------

struct LabeledDataset {
    Matrix x;                 // n x dim
    std::vector<int> y;       // class indices into class_names
    std::vector<std::string> ids;
    std::vector<std::string> class_names;

    std::size_t size() const { return y.size(); }
    std::size_t dim() const { return x.cols; }
};

enum class JoinMode { strict, lenient };

struct JoinResult {
    LabeledDataset data;
    std::vector<std::string> missing_ids;
};

/// Aligns the records of one split with their embeddings, in manifest order.
/// Strict mode throws ValidationError listing missing ids; lenient mode skips
/// them and reports them in missing_ids.
JoinResult join(const DatasetManifest& manifest, const EmbeddingStore& store, Split split,
                JoinMode mode = JoinMode::strict);

/// Scales every row to unit L2 norm; all-zero rows are left unchanged.
void l2_normalize_rows(Matrix& x);

} // namespace patcls
