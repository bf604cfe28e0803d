#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace patcls {

// ---------------------------------------------------------------------------
// Image-type task: ten flat classes.
// ---------------------------------------------------------------------------

enum class ImageType : std::uint8_t {
    block_circuit,
    chemical,
    drawing,
    flowchart,
    genesequence,
    graph,
    maths,
    program,
    symbol,
    table,
};

struct ImageTypeLabel {
    std::string_view name;
    int ordinal;
};

inline constexpr std::size_t kImageTypeCount = 10;

/// The ten image-type labels in ordinal order.
std::span<const ImageTypeLabel> image_type_labels();
std::optional<ImageType> image_type_from_name(std::string_view name);

// ---------------------------------------------------------------------------
// Perspective task: seven leaves arranged under a fixed hierarchy.
// ---------------------------------------------------------------------------

enum class Perspective : std::uint8_t {
    left,
    right,
    bottom,
    top,
    front,
    rear,
    perspective_view,
};

struct PerspectiveLabel {
    std::string_view name;
    int ordinal;
};

inline constexpr std::size_t kPerspectiveCount = 7;

std::span<const PerspectiveLabel> perspective_labels();
std::optional<Perspective> perspective_from_name(std::string_view name);
std::string_view to_string(Perspective p);

enum class Granularity : std::uint8_t { C2, C4, C7 };

struct GranularityLevel {
    Granularity tag;
    std::size_t class_count;
    std::vector<std::string> class_names;
};

std::string_view to_string(Granularity g);
/// Accepts "C2"/"c2" etc.
std::optional<Granularity> granularity_from_name(std::string_view name);
const GranularityLevel& granularity_level(Granularity g);

/// Rooted tree of perspective classes. Node names are snake_case identifiers;
/// display names carry the hyphenated forms ("Left-Right").
class LabelTaxonomy {
public:
    static constexpr std::string_view kRoot = "root";

    struct Node {
        std::string name;
        std::string display_name;
        int parent;  // -1 for the root
        std::vector<int> children;
    };

    LabelTaxonomy();

    std::span<const Node> nodes() const { return nodes_; }
    std::optional<int> find(std::string_view name) const;
    /// Name of the parent node, kRoot for top-level classes, nullopt for the
    /// root itself or unknown names.
    std::optional<std::string_view> parent(std::string_view name) const;
    std::vector<std::string_view> children(std::string_view name) const;
    /// Edge count from the root; -1 for unknown names.
    int depth(std::string_view name) const;
    std::vector<std::string_view> leaves() const;
    bool is_member(std::string_view name, Granularity level) const;
    std::string_view display_name(std::string_view name) const;

private:
    int add(std::string name, std::string display, int parent);

    std::vector<Node> nodes_;
};

const LabelTaxonomy& perspective_taxonomy();

/// Ancestor of `leaf` (or the leaf itself) that belongs to `level`.
std::string_view coarsen(Perspective leaf, Granularity level);
/// Same as coarsen, as an index into granularity_level(level).class_names.
int coarsen_index(Perspective leaf, Granularity level);

// ---------------------------------------------------------------------------
// Caption rules for weak labeling.
// ---------------------------------------------------------------------------

struct CaptionRule {
    std::string pattern;
    Perspective target;
    int priority;  // lower wins
};

std::vector<CaptionRule> default_caption_rules();

/// Lowercases ASCII, maps every whitespace run to one space, trims ends.
std::string normalize_caption(std::string_view text);

/// Matches captions against a rule table. Patterns match as substrings of the
/// normalized caption that start and end on word boundaries. Among matching
/// rules the lowest priority wins, then the longest pattern, then the
/// lexicographically smallest one, so storage order never matters.
class CaptionParser {
public:
    /// Throws ValidationError on empty or duplicate (normalized) patterns.
    explicit CaptionParser(std::vector<CaptionRule> rules);

    std::optional<Perspective> parse(std::string_view caption) const;
    std::span<const CaptionRule> rules() const { return rules_; }

private:
    std::vector<CaptionRule> rules_;  // normalized, sorted by precedence
};

std::optional<Perspective> parse_perspective_caption(std::string_view caption);

/// Reads a rules file: `priority<TAB>pattern<TAB>target_leaf` per line, `#`
/// comments and blank lines skipped. Errors name the offending line.
std::vector<CaptionRule> load_caption_rules(const std::string& path);

/// Overlays `overrides` on `base`; a rule whose normalized pattern already
/// exists replaces the base entry.
std::vector<CaptionRule> merge_caption_rules(std::vector<CaptionRule> base,
                                             const std::vector<CaptionRule>& overrides);

} // namespace patcls
