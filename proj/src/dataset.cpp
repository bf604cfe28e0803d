#include "patcls/dataset.hpp"

#include "patcls/binary_io.hpp"
#include "patcls/csv.hpp"
#include "patcls/error.hpp"
#include "patcls/taxonomy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace patcls {

std::string_view to_string(Task t) {
    return t == Task::image_type ? "image_type" : "perspective";
}

std::optional<Task> task_from_name(std::string_view name) {
    if (name == "image_type") return Task::image_type;
    if (name == "perspective") return Task::perspective;
    return std::nullopt;
}

std::vector<std::string> task_class_names(Task t) {
    std::vector<std::string> names;
    if (t == Task::image_type) {
        for (const auto& l : image_type_labels()) names.emplace_back(l.name);
    } else {
        for (const auto& l : perspective_labels()) names.emplace_back(l.name);
    }
    return names;
}

std::string_view to_string(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    }
    return "?";
}

std::optional<Split> split_from_name(std::string_view name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    return std::nullopt;
}

// ---------------------------------------------------------------------------

DatasetManifest load_manifest(const std::string& path, Task task) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": cannot open manifest");

    DatasetManifest manifest;
    manifest.task = task;
    manifest.class_names = task_class_names(task);

    csv::Reader reader(in, path);
    csv::Row row;
    if (!reader.next(row)) throw ValidationError(path + ": missing header");
    if (!row.fields.empty() && row.fields[0].starts_with("\xEF\xBB\xBF")) {
        row.fields[0].erase(0, 3);
    }
    if (csv::join(row.fields) != kManifestHeader) {
        throw ValidationError(path + ":1: expected header '" + std::string(kManifestHeader) + "'");
    }

    std::unordered_set<std::string> ids;
    while (reader.next(row)) {
        const auto where = path + ":" + std::to_string(row.line) + ": ";
        if (row.fields.size() == 1 && row.fields[0].empty()) continue;  // blank line
        if (row.fields.size() != 5) {
            throw ValidationError(where + "expected 5 fields, found " +
                                  std::to_string(row.fields.size()));
        }
        ManifestRecord rec;
        rec.id = row.fields[0];
        if (rec.id.empty()) throw ValidationError(where + "empty id");
        const auto split = split_from_name(row.fields[1]);
        if (!split) throw ValidationError(where + "unknown split '" + row.fields[1] + "'");
        rec.split = *split;
        rec.label = row.fields[2];
        if (std::find(manifest.class_names.begin(), manifest.class_names.end(), rec.label) ==
            manifest.class_names.end()) {
            throw ValidationError(where + "unknown label '" + rec.label + "' for task " +
                                  std::string(to_string(task)));
        }
        rec.caption = row.fields[3];
        rec.path = row.fields[4];
        if (!ids.insert(rec.id).second) throw ValidationError(where + "duplicate id '" + rec.id + "'");
        manifest.records.push_back(std::move(rec));
    }
    if (in.bad()) throw IoError(path + ": read failed");
    return manifest;
}

void validate_manifest(const DatasetManifest& manifest) {
    std::unordered_set<std::string_view> ids;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const auto& r = manifest.records[i];
        const auto where = "record " + std::to_string(i) + ": ";
        if (r.id.empty()) throw ValidationError(where + "empty id");
        if (!ids.insert(r.id).second) throw ValidationError(where + "duplicate id '" + r.id + "'");
        if (std::find(manifest.class_names.begin(), manifest.class_names.end(), r.label) ==
            manifest.class_names.end()) {
            throw ValidationError(where + "unknown label '" + r.label + "'");
        }
    }
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    validate_manifest(manifest);
    std::string text(kManifestHeader);
    text.push_back('\n');
    for (const auto& r : manifest.records) {
        text += csv::join({r.id, std::string(to_string(r.split)), r.label, r.caption, r.path});
        text.push_back('\n');
    }
    binio::write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::size_t ClassHistogram::at(std::string_view name) const {
    for (std::size_t i = 0; i < class_names.size(); ++i) {
        if (class_names[i] == name) return counts[i];
    }
    throw ValidationError("unknown class '" + std::string(name) + "'");
}

std::size_t ClassHistogram::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

ClassHistogram class_histogram(const DatasetManifest& manifest, Split split) {
    ClassHistogram h{manifest.class_names, std::vector<std::size_t>(manifest.class_names.size(), 0)};
    for (const auto& r : manifest.records) {
        if (r.split != split) continue;
        const auto it = std::find(h.class_names.begin(), h.class_names.end(), r.label);
        if (it == h.class_names.end()) throw ValidationError("unknown label '" + r.label + "'");
        ++h.counts[static_cast<std::size_t>(it - h.class_names.begin())];
    }
    return h;
}

ClassHistogram class_histogram(const DatasetManifest& manifest, std::string_view split) {
    const auto s = split_from_name(split);
    if (!s) throw ValidationError("unknown split '" + std::string(split) + "'");
    return class_histogram(manifest, *s);
}

// ---------------------------------------------------------------------------

EmbeddingStore::EmbeddingStore(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw ValidationError("embedding dim must be positive");
}

void EmbeddingStore::add(std::string id, std::span<const float> values) {
    if (id.empty()) throw ValidationError("empty embedding id");
    if (values.size() != dim_) {
        throw ValidationError("embedding '" + id + "' has length " + std::to_string(values.size()) +
                              ", expected " + std::to_string(dim_));
    }
    if (index_.contains(id)) throw ValidationError("duplicate embedding id '" + id + "'");
    index_.emplace(id, ids_.size());
    ids_.push_back(std::move(id));
    values_.insert(values_.end(), values.begin(), values.end());
}

std::span<const float> EmbeddingStore::vector(std::size_t index) const {
    return {values_.data() + index * dim_, dim_};
}

std::optional<std::span<const float>> EmbeddingStore::find(std::string_view id) const {
    const auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return vector(it->second);
}

bool EmbeddingStore::operator==(const EmbeddingStore& other) const {
    if (dim_ != other.dim_ || ids_ != other.ids_) return false;
    // Bitwise comparison so that -0.0f and 0.0f differ.
    return std::equal(values_.begin(), values_.end(), other.values_.begin(), other.values_.end(),
                      [](float a, float b) {
                          return std::bit_cast<std::uint32_t>(a) == std::bit_cast<std::uint32_t>(b);
                      });
}

std::vector<std::uint8_t> encode_embeddings(const EmbeddingStore& store) {
    binio::Writer w;
    w.bytes({kPembMagic, 4});
    w.u32(kPembVersion);
    w.u32(static_cast<std::uint32_t>(store.size()));
    w.u32(static_cast<std::uint32_t>(store.dim()));
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& id = store.ids()[i];
        w.short_string(id, "embedding id");
        for (float v : store.vector(i)) {
            if (!std::isfinite(v)) throw ValidationError("embedding '" + id + "' has a non-finite value");
            w.f32(v);
        }
    }
    return w.buffer();
}

EmbeddingStore decode_embeddings(std::span<const std::uint8_t> bytes, const std::string& context) {
    binio::Reader r(bytes, context);
    if (r.bytes(4) != std::string_view(kPembMagic, 4)) r.fail("bad magic");
    const auto version = r.u32();
    if (version != kPembVersion) r.fail("unsupported version " + std::to_string(version));
    const auto count = r.u32();
    const auto dim = r.u32();
    if (dim == 0) r.fail("dim must be positive");

    EmbeddingStore store(dim);
    std::vector<float> values(dim);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string id = r.short_string();
        if (id.empty()) r.fail("empty id in record " + std::to_string(i));
        if (store.find(id)) r.fail("duplicate id '" + id + "'");
        for (auto& v : values) {
            v = r.f32();
            if (!std::isfinite(v)) r.fail("non-finite value in '" + id + "'");
        }
        store.add(std::move(id), values);
    }
    if (r.remaining() != 0) {
        r.fail(std::to_string(r.remaining()) + " trailing bytes (record length does not match dim)");
    }
    return store;
}

void write_embeddings(const EmbeddingStore& store, const std::string& path) {
    binio::write_file(path, encode_embeddings(store));
}

EmbeddingStore read_embeddings(const std::string& path) {
    return decode_embeddings(binio::read_file(path), path);
}

// ---------------------------------------------------------------------------

JoinResult join(const DatasetManifest& manifest, const EmbeddingStore& store, Split split,
                JoinMode mode) {
    JoinResult out;
    auto& data = out.data;
    data.class_names = manifest.class_names;

    std::vector<const float*> rows;
    for (const auto& r : manifest.records) {
        if (r.split != split) continue;
        const auto vec = store.find(r.id);
        if (!vec) {
            out.missing_ids.push_back(r.id);
            continue;
        }
        const auto it = std::find(data.class_names.begin(), data.class_names.end(), r.label);
        if (it == data.class_names.end()) throw ValidationError("unknown label '" + r.label + "'");
        data.y.push_back(static_cast<int>(it - data.class_names.begin()));
        data.ids.push_back(r.id);
        rows.push_back(vec->data());
    }

    if (!out.missing_ids.empty() && mode == JoinMode::strict) {
        std::ostringstream msg;
        msg << out.missing_ids.size() << " " << to_string(split)
            << " id(s) missing from embeddings:";
        const std::size_t shown = std::min<std::size_t>(out.missing_ids.size(), 20);
        for (std::size_t i = 0; i < shown; ++i) msg << " " << out.missing_ids[i];
        if (shown < out.missing_ids.size()) msg << " ...";
        throw ValidationError(msg.str());
    }

    data.x = Matrix(rows.size(), store.dim());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy(rows[i], rows[i] + store.dim(), data.x.row(i).begin());
    }
    return out;
}

void l2_normalize_rows(Matrix& x) {
    for (std::size_t i = 0; i < x.rows; ++i) {
        auto row = x.row(i);
        double sq = 0.0;
        for (double v : row) sq += v * v;
        if (sq == 0.0) continue;
        const double inv = 1.0 / std::sqrt(sq);
        for (double& v : row) v *= inv;
    }
}

} // namespace patcls
