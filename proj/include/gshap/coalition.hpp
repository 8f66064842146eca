#pragma once

#include <bit>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gshap/errors.hpp"
#include "gshap/matrix.hpp"

namespace gshap {

// Largest partition for which full coalition tables may be built.
inline constexpr std::size_t kMaxEnumeratedGroups = 25;
// Width of the coalition bitmask; the sampled path may use up to this many groups.
inline constexpr std::size_t kMaxGroups = 63;

// A coalition of groups, stored as a bitset over group indices.
class CoalitionMask {
 public:
  constexpr CoalitionMask() = default;
  constexpr explicit CoalitionMask(std::uint64_t bits) : bits_(bits) {}

  static CoalitionMask of(std::initializer_list<std::size_t> groups) {
    std::uint64_t b = 0;
    for (std::size_t g : groups) {
      if (g >= kMaxGroups) throw InputError("CoalitionMask: group index out of range");
      b |= std::uint64_t{1} << g;
    }
    return CoalitionMask(b);
  }

  static constexpr CoalitionMask full(std::size_t n_groups) {
    return CoalitionMask(n_groups >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n_groups) - 1);
  }

  constexpr std::uint64_t bits() const noexcept { return bits_; }
  constexpr bool empty() const noexcept { return bits_ == 0; }
  constexpr std::size_t size() const noexcept { return static_cast<std::size_t>(std::popcount(bits_)); }
  constexpr bool contains(std::size_t g) const noexcept { return (bits_ >> g) & 1U; }
  constexpr CoalitionMask with(std::size_t g) const noexcept { return CoalitionMask(bits_ | (std::uint64_t{1} << g)); }
  constexpr CoalitionMask without(std::size_t g) const noexcept { return CoalitionMask(bits_ & ~(std::uint64_t{1} << g)); }

  // Group indices in ascending order.
  std::vector<std::size_t> members() const {
    std::vector<std::size_t> out;
    for (std::uint64_t b = bits_; b != 0; b &= b - 1) out.push_back(static_cast<std::size_t>(std::countr_zero(b)));
    return out;
  }

  friend constexpr bool operator==(CoalitionMask, CoalitionMask) = default;
  friend constexpr auto operator<=>(CoalitionMask, CoalitionMask) = default;

 private:
  std::uint64_t bits_ = 0;
};

// Canonical coalition order: by size, then by ascending mask value within a size.
// For three groups this is {0},{1},{2},{0,1},{0,2},{1,2}.
inline bool canonical_less(CoalitionMask a, CoalitionMask b) noexcept {
  const auto sa = a.size(), sb = b.size();
  return sa != sb ? sa < sb : a.bits() < b.bits();
}

// Named groups forming a partition of the base parameter set, optionally with
// the base-parameter names that belong to each group.
class GroupPartition {
 public:
  explicit GroupPartition(std::vector<std::string> labels) : labels_(std::move(labels)) { validate(); }

  GroupPartition(std::vector<std::string> labels, std::vector<std::vector<std::string>> members)
      : labels_(std::move(labels)), members_(std::move(members)) {
    if (members_.size() != labels_.size())
      throw InputError("GroupPartition: member lists must be given for every group");
    validate();
  }

  // Groups labelled "G1".."Gn" without member lists.
  static GroupPartition anonymous(std::size_t n) {
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) labels.push_back("G" + std::to_string(i + 1));
    return GroupPartition(std::move(labels));
  }

  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& label(std::size_t i) const { return labels_.at(i); }
  bool has_members() const noexcept { return !members_.empty(); }
  const std::vector<std::string>& members(std::size_t i) const { return members_.at(i); }
  CoalitionMask full_mask() const noexcept { return CoalitionMask::full(size()); }

  std::optional<std::size_t> group_of(const std::string& member) const {
    for (std::size_t g = 0; g < members_.size(); ++g)
      for (const auto& m : members_[g])
        if (m == member) return g;
    return std::nullopt;
  }

  // Checks that the member lists cover exactly `base`.
  void require_covers(std::span<const std::string> base) const {
    if (!has_members()) throw InputError("GroupPartition: no member lists to check against the base set");
    std::unordered_set<std::string> want(base.begin(), base.end());
    std::size_t count = 0;
    for (const auto& list : members_)
      for (const auto& m : list) {
        if (!want.contains(m)) throw InputError("GroupPartition: member '" + m + "' is not a base parameter");
        ++count;
      }
    if (count != want.size()) throw InputError("GroupPartition: member lists do not cover every base parameter");
  }

  friend bool operator==(const GroupPartition&, const GroupPartition&) = default;

 private:
  void validate() const {
    if (labels_.empty()) throw InputError("GroupPartition: at least one group is required");
    if (labels_.size() > kMaxGroups)
      throw CapacityError("GroupPartition: at most " + std::to_string(kMaxGroups) + " groups are supported");
    std::unordered_set<std::string> seen;
    for (const auto& l : labels_) {
      if (l.empty()) throw InputError("GroupPartition: group labels must be non-empty");
      if (!seen.insert(l).second) throw InputError("GroupPartition: duplicate group label '" + l + "'");
    }
    std::unordered_set<std::string> members;
    for (const auto& list : members_)
      for (const auto& m : list) {
        if (m.empty()) throw InputError("GroupPartition: member names must be non-empty");
        if (!members.insert(m).second) throw InputError("GroupPartition: member '" + m + "' is in more than one group");
      }
  }

  std::vector<std::string> labels_;
  std::vector<std::vector<std::string>> members_;
};

namespace detail {

inline void require_enumerable(std::size_t n) {
  if (n > kMaxEnumeratedGroups)
    throw CapacityError("coalition enumeration is limited to " + std::to_string(kMaxEnumeratedGroups) +
                        " groups; use the sampled estimator instead");
}

// Exact binomial coefficient; every intermediate value is itself a binomial, so
// 128-bit products cannot overflow for n < 64.
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return static_cast<std::uint64_t>(r);
}

}  // namespace detail

// All proper non-empty coalitions of an n-group partition, in canonical order.
inline std::vector<CoalitionMask> enumerate_proper_coalitions(std::size_t n_groups) {
  detail::require_enumerable(n_groups);
  std::vector<CoalitionMask> out;
  if (n_groups < 2) return out;
  out.reserve((std::size_t{1} << n_groups) - 2);
  const std::uint64_t limit = std::uint64_t{1} << n_groups;
  for (std::size_t size = 1; size < n_groups; ++size) {
    // Gosper's hack walks same-popcount masks in ascending order.
    std::uint64_t v = (std::uint64_t{1} << size) - 1;
    while (v < limit) {
      out.emplace_back(v);
      const std::uint64_t c = v & (~v + 1);
      const std::uint64_t r = v + c;
      v = (((r ^ v) >> 2) / c) | r;
    }
  }
  return out;
}

inline std::vector<CoalitionMask> enumerate_proper_coalitions(const GroupPartition& partition) {
  return enumerate_proper_coalitions(partition.size());
}

// Shapley kernel weight 1 / C(n-2, s-1) for a coalition of s groups out of n.
inline double kernel_weight(std::size_t n_groups, std::size_t coalition_size) {
  if (n_groups < 2 || n_groups > kMaxGroups)
    throw DomainError("kernel_weight: group count must be in [2, " + std::to_string(kMaxGroups) + "]");
  if (coalition_size < 1 || coalition_size > n_groups - 1)
    throw DomainError("kernel_weight: coalition size must be in [1, n_groups - 1]");
  return 1.0 / static_cast<double>(detail::binomial(n_groups - 2, coalition_size - 1));
}

// Maps proper coalitions to their row in canonical order.
class CoalitionIndex {
 public:
  explicit CoalitionIndex(std::size_t n_groups)
      : n_(n_groups), masks_(enumerate_proper_coalitions(n_groups)) {
    row_of_.assign(std::size_t{1} << n_groups, npos);
    for (std::size_t i = 0; i < masks_.size(); ++i) row_of_[masks_[i].bits()] = i;
  }

  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  std::size_t groups() const noexcept { return n_; }
  std::size_t size() const noexcept { return masks_.size(); }
  const std::vector<CoalitionMask>& masks() const noexcept { return masks_; }
  CoalitionMask mask(std::size_t row) const { return masks_.at(row); }

  // Row of a proper non-empty coalition, or npos for the empty / full coalitions.
  std::size_t row(CoalitionMask m) const {
    if (m.bits() >= row_of_.size()) throw InputError("CoalitionIndex: coalition references unknown groups");
    return row_of_[m.bits()];
  }

 private:
  std::size_t n_;
  std::vector<CoalitionMask> masks_;
  std::vector<std::size_t> row_of_;
};

class UtilityTable;
void require_complete(const UtilityTable& t);

// The value g(union of coalition) for every proper coalition of a partition,
// with possibly missing entries. g(empty) = 0 is implicit; g(P) is always known.
class UtilityTable {
 public:
  // A table where every proper coalition is still missing.
  UtilityTable(GroupPartition partition, double grand) : partition_(std::move(partition)), grand_(grand) {
    detail::require_enumerable(partition_.size());
    const std::size_t slots = std::size_t{1} << partition_.size();
    values_.assign(slots, 0.0);
    known_.assign(slots, false);
  }

  // A complete table from values listed in canonical coalition order.
  static UtilityTable complete(GroupPartition partition, std::span<const double> canonical_values, double grand) {
    UtilityTable t(std::move(partition), grand);
    const auto masks = enumerate_proper_coalitions(t.groups());
    if (canonical_values.size() != masks.size())
      throw InputError("UtilityTable: expected " + std::to_string(masks.size()) + " coalition values, got " +
                       std::to_string(canonical_values.size()));
    for (std::size_t i = 0; i < masks.size(); ++i) t.set(masks[i], canonical_values[i]);
    return t;
  }

  const GroupPartition& partition() const noexcept { return partition_; }
  std::size_t groups() const noexcept { return partition_.size(); }
  double grand() const noexcept { return grand_; }

  bool is_proper(CoalitionMask m) const noexcept {
    return !m.empty() && m.bits() < partition_.full_mask().bits();
  }

  void set(CoalitionMask m, double value) {
    require_proper(m);
    values_[m.bits()] = value;
    known_[m.bits()] = true;
  }

  void mark_missing(CoalitionMask m) {
    require_proper(m);
    values_[m.bits()] = 0.0;
    known_[m.bits()] = false;
  }

  bool is_missing(CoalitionMask m) const {
    require_proper(m);
    return !known_[m.bits()];
  }

  // Value of any coalition including the empty and full ones; nullopt when missing.
  std::optional<double> value(CoalitionMask m) const {
    if (m.empty()) return 0.0;
    if (m == partition_.full_mask()) return grand_;
    require_proper(m);
    if (!known_[m.bits()]) return std::nullopt;
    return values_[m.bits()];
  }

  double at(CoalitionMask m) const {
    const auto v = value(m);
    if (!v) throw IncompleteTableError("UtilityTable: value for coalition is missing");
    return *v;
  }

  std::vector<CoalitionMask> missing() const {
    std::vector<CoalitionMask> out;
    for (CoalitionMask m : enumerate_proper_coalitions(groups()))
      if (!known_[m.bits()]) out.push_back(m);
    return out;
  }

  bool complete() const {
    const std::uint64_t full = partition_.full_mask().bits();
    for (std::uint64_t b = 1; b < full; ++b)
      if (!known_[b]) return false;
    return true;
  }

  // Observed values in canonical order; throws when the table is incomplete.
  Vector canonical_values() const {
    require_complete(*this);
    Vector out;
    for (CoalitionMask m : enumerate_proper_coalitions(groups())) out.push_back(values_[m.bits()]);
    return out;
  }

  friend bool operator==(const UtilityTable&, const UtilityTable&) = default;

 private:
  void require_proper(CoalitionMask m) const {
    if (!is_proper(m)) throw InputError("UtilityTable: coalition must be proper and non-empty");
  }

  GroupPartition partition_;
  double grand_;
  std::vector<double> values_;
  std::vector<bool> known_;
};

// Formats a coalition as comma-joined ascending group indices ("0,2").
inline std::string coalition_key(CoalitionMask m) {
  std::string out;
  for (std::size_t g : m.members()) {
    if (!out.empty()) out += ',';
    out += std::to_string(g);
  }
  return out;
}

inline void require_complete(const UtilityTable& t) {
  if (t.complete()) return;
  std::string list;
  for (CoalitionMask m : t.missing()) {
    if (!list.empty()) list += "; ";
    list += "{" + coalition_key(m) + "}";
  }
  throw IncompleteTableError("utility table is missing coalitions: " + list);
}

// The binary design matrix D (one row per proper coalition), the diagonal kernel
// weights K, and the aligned utility vector of the constrained least squares form.
struct DesignSystem {
  std::size_t groups = 0;
  std::vector<CoalitionMask> rows;
  Vector weights;
  Vector utilities;
  double grand = 0.0;

  double d(std::size_t row, std::size_t group) const { return rows.at(row).contains(group) ? 1.0 : 0.0; }

  Matrix design_matrix() const {
    Matrix m(rows.size(), groups);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < groups; ++j) m(i, j) = d(i, j);
    return m;
  }

  friend bool operator==(const DesignSystem&, const DesignSystem&) = default;
};

inline DesignSystem build_design_system(const UtilityTable& table) {
  require_complete(table);
  DesignSystem sys;
  sys.groups = table.groups();
  sys.grand = table.grand();
  sys.rows = enumerate_proper_coalitions(table.groups());
  sys.weights.reserve(sys.rows.size());
  sys.utilities.reserve(sys.rows.size());
  for (CoalitionMask m : sys.rows) {
    sys.weights.push_back(kernel_weight(sys.groups, m.size()));
    sys.utilities.push_back(*table.value(m));
  }
  return sys;
}

}  // namespace gshap
