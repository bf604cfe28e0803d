#include "patcls/taxonomy.hpp"

#include "patcls/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>

namespace patcls {

namespace {

constexpr std::array<ImageTypeLabel, kImageTypeCount> kImageTypes{{
    {"block_circuit", 0},
    {"chemical", 1},
    {"drawing", 2},
    {"flowchart", 3},
    {"genesequence", 4},
    {"graph", 5},
    {"maths", 6},
    {"program", 7},
    {"symbol", 8},
    {"table", 9},
}};

constexpr std::array<PerspectiveLabel, kPerspectiveCount> kPerspectives{{
    {"left", 0},
    {"right", 1},
    {"bottom", 2},
    {"top", 3},
    {"front", 4},
    {"rear", 5},
    {"perspective_view", 6},
}};

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

bool rule_precedes(const CaptionRule& a, const CaptionRule& b) {
    if (a.priority != b.priority) return a.priority < b.priority;
    if (a.pattern.size() != b.pattern.size()) return a.pattern.size() > b.pattern.size();
    return a.pattern < b.pattern;
}

} // namespace

std::span<const ImageTypeLabel> image_type_labels() { return kImageTypes; }

std::optional<ImageType> image_type_from_name(std::string_view name) {
    for (const auto& l : kImageTypes) {
        if (l.name == name) return static_cast<ImageType>(l.ordinal);
    }
    return std::nullopt;
}

std::span<const PerspectiveLabel> perspective_labels() { return kPerspectives; }

std::optional<Perspective> perspective_from_name(std::string_view name) {
    for (const auto& l : kPerspectives) {
        if (l.name == name) return static_cast<Perspective>(l.ordinal);
    }
    return std::nullopt;
}

std::string_view to_string(Perspective p) {
    return kPerspectives[static_cast<std::size_t>(p)].name;
}

std::string_view to_string(Granularity g) {
    switch (g) {
    case Granularity::C2: return "C2";
    case Granularity::C4: return "C4";
    case Granularity::C7: return "C7";
    }
    return "?";
}

std::optional<Granularity> granularity_from_name(std::string_view name) {
    if (name == "C2" || name == "c2") return Granularity::C2;
    if (name == "C4" || name == "c4") return Granularity::C4;
    if (name == "C7" || name == "c7") return Granularity::C7;
    return std::nullopt;
}

const GranularityLevel& granularity_level(Granularity g) {
    static const std::array<GranularityLevel, 3> levels{{
        {Granularity::C2, 2, {"perspective_view", "non_perspective"}},
        {Granularity::C4, 4, {"perspective_view", "left_right", "bottom_top", "front_rear"}},
        {Granularity::C7, 7, {"left", "right", "bottom", "top", "front", "rear", "perspective_view"}},
    }};
    return levels[static_cast<std::size_t>(g)];
}

// ---------------------------------------------------------------------------

LabelTaxonomy::LabelTaxonomy() {
    const int root = add(std::string(kRoot), "Root", -1);
    add("perspective_view", "Perspective View", root);
    const int non = add("non_perspective", "Non-Perspective", root);
    const int lr = add("left_right", "Left-Right", non);
    add("left", "Left", lr);
    add("right", "Right", lr);
    const int bt = add("bottom_top", "Bottom-Top", non);
    add("bottom", "Bottom", bt);
    add("top", "Top", bt);
    const int fr = add("front_rear", "Front-Rear", non);
    add("front", "Front", fr);
    add("rear", "Rear", fr);
}

int LabelTaxonomy::add(std::string name, std::string display, int parent) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({std::move(name), std::move(display), parent, {}});
    if (parent >= 0) nodes_[static_cast<std::size_t>(parent)].children.push_back(id);
    return id;
}

std::optional<int> LabelTaxonomy::find(std::string_view name) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].name == name) return static_cast<int>(i);
    }
    return std::nullopt;
}

std::optional<std::string_view> LabelTaxonomy::parent(std::string_view name) const {
    const auto id = find(name);
    if (!id) return std::nullopt;
    const int p = nodes_[static_cast<std::size_t>(*id)].parent;
    if (p < 0) return std::nullopt;
    return std::string_view(nodes_[static_cast<std::size_t>(p)].name);
}

std::vector<std::string_view> LabelTaxonomy::children(std::string_view name) const {
    std::vector<std::string_view> out;
    if (const auto id = find(name)) {
        for (int c : nodes_[static_cast<std::size_t>(*id)].children) {
            out.emplace_back(nodes_[static_cast<std::size_t>(c)].name);
        }
    }
    return out;
}

int LabelTaxonomy::depth(std::string_view name) const {
    auto id = find(name);
    if (!id) return -1;
    int d = 0;
    for (int n = *id; nodes_[static_cast<std::size_t>(n)].parent >= 0;
         n = nodes_[static_cast<std::size_t>(n)].parent) {
        ++d;
    }
    return d;
}

std::vector<std::string_view> LabelTaxonomy::leaves() const {
    std::vector<std::string_view> out;
    for (const auto& n : nodes_) {
        if (n.children.empty()) out.emplace_back(n.name);
    }
    return out;
}

bool LabelTaxonomy::is_member(std::string_view name, Granularity level) const {
    const auto& names = granularity_level(level).class_names;
    return std::find(names.begin(), names.end(), name) != names.end();
}

std::string_view LabelTaxonomy::display_name(std::string_view name) const {
    if (const auto id = find(name)) return nodes_[static_cast<std::size_t>(*id)].display_name;
    return {};
}

const LabelTaxonomy& perspective_taxonomy() {
    static const LabelTaxonomy taxonomy;
    return taxonomy;
}

std::string_view coarsen(Perspective leaf, Granularity level) {
    const auto& tax = perspective_taxonomy();
    std::optional<std::string_view> node = to_string(leaf);
    while (node && *node != LabelTaxonomy::kRoot) {
        if (tax.is_member(*node, level)) return *node;
        node = tax.parent(*node);
    }
    // Unreachable for the fixed taxonomy: every leaf has an ancestor at each level.
    throw std::logic_error("taxonomy has no class for leaf at requested level");
}

int coarsen_index(Perspective leaf, Granularity level) {
    const auto& names = granularity_level(level).class_names;
    const auto name = coarsen(leaf, level);
    return static_cast<int>(std::find(names.begin(), names.end(), name) - names.begin());
}

// ---------------------------------------------------------------------------

std::vector<CaptionRule> default_caption_rules() {
    using P = Perspective;
    return {
        {"perspective view", P::perspective_view, 10},
        {"isometric view", P::perspective_view, 10},
        {"left side view", P::left, 10},
        {"left side elevational view", P::left, 10},
        {"left side elevation view", P::left, 10},
        {"right side view", P::right, 10},
        {"right side elevational view", P::right, 10},
        {"right side elevation view", P::right, 10},
        {"bottom plan view", P::bottom, 10},
        {"top plan view", P::top, 10},
        {"front elevational view", P::front, 10},
        {"front elevation view", P::front, 10},
        {"rear elevational view", P::rear, 10},
        {"rear elevation view", P::rear, 10},
        {"left view", P::left, 20},
        {"right view", P::right, 20},
        {"bottom view", P::bottom, 20},
        {"underside view", P::bottom, 20},
        {"top view", P::top, 20},
        {"front view", P::front, 20},
        {"rear view", P::rear, 20},
        {"back view", P::rear, 20},
        {"plan view", P::top, 30},
    };
}

std::string normalize_caption(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

CaptionParser::CaptionParser(std::vector<CaptionRule> rules) : rules_(std::move(rules)) {
    std::set<std::string> seen;
    for (auto& r : rules_) {
        r.pattern = normalize_caption(r.pattern);
        if (r.pattern.empty()) throw ValidationError("caption rule with empty pattern");
        if (!seen.insert(r.pattern).second) {
            throw ValidationError("duplicate caption rule pattern '" + r.pattern + "'");
        }
    }
    std::sort(rules_.begin(), rules_.end(), rule_precedes);
}

std::optional<Perspective> CaptionParser::parse(std::string_view caption) const {
    const std::string text = normalize_caption(caption);
    for (const auto& rule : rules_) {
        for (std::size_t pos = text.find(rule.pattern); pos != std::string::npos;
             pos = text.find(rule.pattern, pos + 1)) {
            const std::size_t end = pos + rule.pattern.size();
            const bool starts_word = pos == 0 || !is_word_char(text[pos - 1]);
            const bool ends_word = end == text.size() || !is_word_char(text[end]);
            if (starts_word && ends_word) return rule.target;
        }
    }
    return std::nullopt;
}

std::optional<Perspective> parse_perspective_caption(std::string_view caption) {
    static const CaptionParser parser(default_caption_rules());
    return parser.parse(caption);
}

std::vector<CaptionRule> load_caption_rules(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path + ": cannot open rules file");

    std::vector<CaptionRule> rules;
    std::set<std::string> seen;
    std::string line;
    for (int lineno = 1; std::getline(in, line); ++lineno) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;

        const auto where = path + ":" + std::to_string(lineno) + ": ";
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
        if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
            throw ValidationError(where + "expected priority<TAB>pattern<TAB>target");
        }
        const std::string_view prio_text(line.data(), t1);
        int priority = 0;
        const auto [ptr, ec] =
            std::from_chars(prio_text.data(), prio_text.data() + prio_text.size(), priority);
        if (ec != std::errc{} || ptr != prio_text.data() + prio_text.size() || prio_text.empty()) {
            throw ValidationError(where + "priority is not an integer");
        }
        std::string pattern = normalize_caption(line.substr(t1 + 1, t2 - t1 - 1));
        if (pattern.empty()) throw ValidationError(where + "empty pattern");
        const auto target = perspective_from_name(line.substr(t2 + 1));
        if (!target) {
            throw ValidationError(where + "unknown target leaf '" + line.substr(t2 + 1) + "'");
        }
        if (!seen.insert(pattern).second) {
            throw ValidationError(where + "duplicate pattern '" + pattern + "'");
        }
        rules.push_back({std::move(pattern), *target, priority});
    }
    if (in.bad()) throw IoError(path + ": read failed");
    return rules;
}

std::vector<CaptionRule> merge_caption_rules(std::vector<CaptionRule> base,
                                             const std::vector<CaptionRule>& overrides) {
    for (auto& r : base) r.pattern = normalize_caption(r.pattern);
    for (const auto& o : overrides) {
        const std::string key = normalize_caption(o.pattern);
        auto it = std::find_if(base.begin(), base.end(),
                               [&](const CaptionRule& r) { return r.pattern == key; });
        if (it != base.end()) {
            *it = {key, o.target, o.priority};
        } else {
            base.push_back({key, o.target, o.priority});
        }
    }
    return base;
}

} // namespace patcls
