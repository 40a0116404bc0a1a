#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fitgate/core/stats.hpp"

namespace fitgate::semantics {

// Rooted class tree. Depth counts nodes on the root path inclusive, so the
// root has depth 1.
class Taxonomy {
 public:
  explicit Taxonomy(std::string root);

  // Text format: first non-comment line is the root name, every following
  // line is "parent child". Lines starting with '#' and blank lines are
  // ignored. Parents must be declared before their children.
  static Taxonomy parse(std::string_view text);

  // Same validation as parse(): kTaxonomyCycle for parent == child,
  // kTaxonomyUnknownParent, then kTaxonomyDuplicateChild.
  void add_child(const std::string& parent, const std::string& child);

  std::size_t size() const noexcept { return names_.size(); }
  const std::string& root() const noexcept { return names_.front(); }
  bool contains(std::string_view name) const;
  int depth(std::string_view name) const;
  std::optional<std::string> parent(std::string_view name) const;
  const std::vector<std::string>& nodes() const noexcept { return names_; }

  // Names from `name` up to and including the root.
  std::vector<std::string> path_to_root(std::string_view name) const;
  // Deepest common ancestor.
  const std::string& lowest_common_ancestor(std::string_view a, std::string_view b) const;

  std::string to_text() const;

 private:
  int index_of(std::string_view name) const;

  std::vector<std::string> names_;
  std::vector<int> parent_;
  std::vector<int> depth_;
  std::unordered_map<std::string, int> index_;
};

Taxonomy parse_taxonomy(std::string_view text);

// 2 * depth(lcs) / (depth(a) + depth(b)). Throws kUnknownNode.
double wup_similarity(const Taxonomy& tax, std::string_view a, std::string_view b);

struct SemanticPair {
  std::string group;
  double wup = 0.0;
  double mos = 0.0;
};

struct SemanticReport {
  std::map<std::string, Stats> groups;
  std::vector<SemanticPair> pairs;  // input order
};

// Per-group Stats of wup(class_names[pristine_i], class_names[variant_i]),
// plus the raw (group, wup, mos) table. All spans must have equal length
// (kDimensionMismatch otherwise).
SemanticReport semantic_report(const Taxonomy& tax, std::span<const std::string> class_names,
                               std::span<const int> pristine_classes,
                               std::span<const int> variant_classes,
                               std::span<const std::string> group_keys,
                               std::span<const double> mos);

// CSV with header "group,wup,mos".
void write_semantic_csv(const SemanticReport& report, const std::filesystem::path& path);

}  // namespace fitgate::semantics
