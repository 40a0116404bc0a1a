#include "fitgate/semantics/taxonomy.hpp"

#include <sstream>

#include "fitgate/core/error.hpp"
#include "fitgate/core/text.hpp"

namespace fitgate::semantics {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

Taxonomy::Taxonomy(std::string root) {
  if (root.empty() || root.find(' ') != std::string::npos) {
    fail(ErrorCode::kTaxonomyMalformedLine, "taxonomy root name must be a single token");
  }
  index_.emplace(root, 0);
  names_.push_back(std::move(root));
  parent_.push_back(-1);
  depth_.push_back(1);
}

void Taxonomy::add_child(const std::string& parent, const std::string& child) {
  if (parent == child) {
    fail(ErrorCode::kTaxonomyCycle, "taxonomy: node '" + child + "' cannot be its own parent");
  }
  const auto p = index_.find(parent);
  if (p == index_.end()) {
    fail(ErrorCode::kTaxonomyUnknownParent, "taxonomy: unknown parent '" + parent + "'");
  }
  if (index_.contains(child)) {
    fail(ErrorCode::kTaxonomyDuplicateChild, "taxonomy: node '" + child + "' already defined");
  }
  const int id = static_cast<int>(names_.size());
  index_.emplace(child, id);
  names_.push_back(child);
  parent_.push_back(p->second);
  depth_.push_back(depth_[p->second] + 1);
}

Taxonomy Taxonomy::parse(std::string_view text) {
  std::optional<Taxonomy> tax;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find('\n', start), text.size());
    const std::string_view line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;

    const auto fields = split(line, ' ');
    if (!tax) {
      if (fields.size() != 1 || fields[0].empty()) {
        fail(ErrorCode::kTaxonomyMalformedLine,
             "taxonomy line " + std::to_string(line_no) + ": first line must be the root name");
      }
      tax.emplace(fields[0]);
      continue;
    }
    if (fields.size() == 1) {
      fail(ErrorCode::kTaxonomyMultipleRoots,
           "taxonomy line " + std::to_string(line_no) + ": second root '" + fields[0] + "'");
    }
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      fail(ErrorCode::kTaxonomyMalformedLine,
           "taxonomy line " + std::to_string(line_no) + ": expected 'parent child'");
    }
    tax->add_child(fields[0], fields[1]);
  }
  if (!tax) fail(ErrorCode::kTaxonomyEmpty, "taxonomy text has no nodes");
  return std::move(*tax);
}

Taxonomy parse_taxonomy(std::string_view text) { return Taxonomy::parse(text); }

int Taxonomy::index_of(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) fail(ErrorCode::kUnknownNode, "unknown taxonomy node '" + std::string(name) + "'");
  return it->second;
}

bool Taxonomy::contains(std::string_view name) const { return index_.contains(std::string(name)); }

int Taxonomy::depth(std::string_view name) const { return depth_[index_of(name)]; }

std::optional<std::string> Taxonomy::parent(std::string_view name) const {
  const int p = parent_[index_of(name)];
  if (p < 0) return std::nullopt;
  return names_[p];
}

std::vector<std::string> Taxonomy::path_to_root(std::string_view name) const {
  std::vector<std::string> path;
  for (int i = index_of(name); i >= 0; i = parent_[i]) path.push_back(names_[i]);
  return path;
}

const std::string& Taxonomy::lowest_common_ancestor(std::string_view a, std::string_view b) const {
  int x = index_of(a);
  int y = index_of(b);
  while (depth_[x] > depth_[y]) x = parent_[x];
  while (depth_[y] > depth_[x]) y = parent_[y];
  while (x != y) {
    x = parent_[x];
    y = parent_[y];
  }
  return names_[x];
}

std::string Taxonomy::to_text() const {
  std::ostringstream out;
  out << names_[0] << '\n';
  for (std::size_t i = 1; i < names_.size(); ++i) {
    out << names_[parent_[i]] << ' ' << names_[i] << '\n';
  }
  return out.str();
}

double wup_similarity(const Taxonomy& tax, std::string_view a, std::string_view b) {
  const int da = tax.depth(a);
  const int db = tax.depth(b);
  const int dl = tax.depth(tax.lowest_common_ancestor(a, b));
  return 2.0 * dl / static_cast<double>(da + db);
}

SemanticReport semantic_report(const Taxonomy& tax, std::span<const std::string> class_names,
                               std::span<const int> pristine_classes,
                               std::span<const int> variant_classes,
                               std::span<const std::string> group_keys,
                               std::span<const double> mos) {
  const std::size_t n = pristine_classes.size();
  if (variant_classes.size() != n || group_keys.size() != n || mos.size() != n) {
    fail(ErrorCode::kDimensionMismatch, "semantic_report: input sequences differ in length");
  }
  auto name_of = [&](int id) -> const std::string& {
    if (id < 0 || static_cast<std::size_t>(id) >= class_names.size()) {
      fail(ErrorCode::kUnknownNode, "semantic_report: class id out of range");
    }
    return class_names[id];
  };

  SemanticReport report;
  std::map<std::string, std::vector<double>> by_group;
  report.pairs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = wup_similarity(tax, name_of(pristine_classes[i]), name_of(variant_classes[i]));
    by_group[group_keys[i]].push_back(w);
    report.pairs.push_back({group_keys[i], w, mos[i]});
  }
  for (const auto& [group, values] : by_group) report.groups[group] = summarize(values);
  return report;
}

void write_semantic_csv(const SemanticReport& report, const std::filesystem::path& path) {
  std::string out = "group,wup,mos\n";
  for (const auto& p : report.pairs) {
    out += p.group + "," + format_double(p.wup) + "," + format_double(p.mos) + "\n";
  }
  write_text_file(path, out);
}

}  // namespace fitgate::semantics
