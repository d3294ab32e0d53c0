#pragma once

// MDL code-table mining over transaction databases.
//
// Total encoded size is L(D,CT) = L(D|CT) + L(CT|D):
//   L(D|CT) = sum over entries of usage * code_length
//   L(CT|D) = sum over entries with usage > 0 of
//             (sum of standard code lengths of its items) + code_length
// with code_length = -log2(usage / total_usage).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "relx/corpus.hpp"
#include "relx/error.hpp"

namespace relx {

struct Candidate {
  Itemset itemset;
  std::size_t support = 0;

  bool operator==(const Candidate&) const = default;
};

struct CodeTableEntry {
  Itemset itemset;
  std::size_t usage = 0;
  std::size_t support = 0;
  double code_length = 0.0;

  bool operator==(const CodeTableEntry&) const = default;
};

/// Cover order: cardinality desc, support desc, lexicographic asc.
inline bool cover_order_less(const Itemset& a, std::size_t support_a, const Itemset& b, std::size_t support_b) {
  if (a.size() != b.size()) return a.size() > b.size();
  if (support_a != support_b) return support_a > support_b;
  return a < b;
}

/// Candidate order: support desc, cardinality desc, lexicographic asc.
inline bool candidate_order_less(const Candidate& a, const Candidate& b) {
  if (a.support != b.support) return a.support > b.support;
  if (a.itemset.size() != b.itemset.size()) return a.itemset.size() > b.itemset.size();
  return a.itemset < b.itemset;
}

inline bool contains_all(const Itemset& superset, const Itemset& subset) {
  return std::includes(superset.begin(), superset.end(), subset.begin(), subset.end());
}

inline std::size_t support_of(std::span<const Transaction> db, const Itemset& itemset) {
  std::size_t n = 0;
  for (const auto& t : db) n += contains_all(t.items, itemset) ? 1 : 0;
  return n;
}

class CodeTable {
 public:
  CodeTable() = default;

  /// Singleton-only table for items [0, item_count), usages equal to supports.
  static CodeTable standard(std::span<const Transaction> db, std::size_t item_count) {
    CodeTable ct;
    std::vector<std::size_t> support(item_count, 0);
    for (const auto& t : db) {
      for (Item i : t.items) {
        if (i >= item_count) throw ContractViolation("transaction item " + std::to_string(i) + " outside the item range");
        ++support[i];
      }
    }
    std::size_t total = 0;
    for (auto s : support) total += s;
    ct.standard_lengths_.assign(item_count, 0.0);
    for (std::size_t i = 0; i < item_count; ++i) {
      if (support[i] > 0) ct.standard_lengths_[i] = -std::log2(static_cast<double>(support[i]) / static_cast<double>(total));
    }
    for (std::size_t i = 0; i < item_count; ++i) {
      ct.entries_.push_back({Itemset{static_cast<Item>(i)}, support[i], support[i], 0.0});
    }
    std::stable_sort(ct.entries_.begin(), ct.entries_.end(), [](const auto& a, const auto& b) {
      return cover_order_less(a.itemset, a.support, b.itemset, b.support);
    });
    ct.refresh();
    return ct;
  }

  /// Rebuilds a table from stored entries (e.g. a code-table file). Standard lengths
  /// are unknown, so encoded_size() only reflects L(D|CT) plus code lengths.
  static CodeTable from_entries(std::vector<CodeTableEntry> entries, std::vector<double> standard_lengths = {}) {
    CodeTable ct;
    ct.entries_ = std::move(entries);
    ct.standard_lengths_ = std::move(standard_lengths);
    ct.refresh();
    return ct;
  }

  const std::vector<CodeTableEntry>& entries() const { return entries_; }
  const CodeTableEntry& entry(std::size_t i) const { return entries_.at(i); }
  std::size_t size() const { return entries_.size(); }
  const std::vector<double>& standard_lengths() const { return standard_lengths_; }
  std::size_t total_usage() const { return total_usage_; }
  /// Cached L(D,CT) in bits.
  double encoded_size() const { return encoded_size_; }

  std::size_t non_singleton_count() const {
    return static_cast<std::size_t>(
        std::count_if(entries_.begin(), entries_.end(), [](const auto& e) { return e.itemset.size() > 1; }));
  }

  /// Inserts at the cover-order position and returns that index. Usages are left to the caller.
  std::size_t insert(CodeTableEntry entry) {
    auto pos = std::lower_bound(entries_.begin(), entries_.end(), entry, [](const auto& a, const auto& b) {
      return cover_order_less(a.itemset, a.support, b.itemset, b.support);
    });
    auto index = static_cast<std::size_t>(pos - entries_.begin());
    entries_.insert(pos, std::move(entry));
    return index;
  }

  void erase(std::size_t index) { entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(index)); }

  void set_usages(const std::vector<std::size_t>& usages) {
    for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i].usage = usages.at(i);
    refresh();
  }
  std::vector<std::size_t> usages() const {
    std::vector<std::size_t> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.usage);
    return out;
  }

  std::optional<std::size_t> index_of(const Itemset& itemset) const {
    for (std::size_t i = 0; i < entries_.size(); ++i)
      if (entries_[i].itemset == itemset) return i;
    return std::nullopt;
  }

  /// Recomputes code lengths, total usage and the cached size from current usages.
  void refresh() {
    total_usage_ = 0;
    for (const auto& e : entries_) total_usage_ += e.usage;
    double data_bits = 0.0, model_bits = 0.0;
    for (auto& e : entries_) {
      if (e.usage == 0) {
        e.code_length = 0.0;
        continue;
      }
      e.code_length = -std::log2(static_cast<double>(e.usage) / static_cast<double>(total_usage_));
      // -log2(1) may come out as -0.0
      if (e.code_length == 0.0) e.code_length = 0.0;
      data_bits += static_cast<double>(e.usage) * e.code_length;
      double itemset_bits = 0.0;
      for (Item i : e.itemset) {
        if (i < standard_lengths_.size()) itemset_bits += standard_lengths_[i];
      }
      model_bits += itemset_bits + e.code_length;
    }
    data_bits_ = data_bits;
    encoded_size_ = data_bits + model_bits;
  }

  /// L(D|CT) for the current usages.
  double data_size() const { return data_bits_; }

 private:
  std::vector<CodeTableEntry> entries_;
  std::vector<double> standard_lengths_;
  std::size_t total_usage_ = 0;
  double data_bits_ = 0.0;
  double encoded_size_ = 0.0;
};

/// Greedy cover: entry indices in the order they were taken.
inline std::vector<std::size_t> cover_indices(const Itemset& transaction, const CodeTable& ct) {
  std::vector<std::size_t> used;
  Itemset remainder = transaction;
  Itemset scratch;
  const auto& entries = ct.entries();
  for (std::size_t i = 0; i < entries.size() && !remainder.empty(); ++i) {
    const auto& itemset = entries[i].itemset;
    if (itemset.size() > remainder.size() || !contains_all(remainder, itemset)) continue;
    used.push_back(i);
    scratch.clear();
    std::set_difference(remainder.begin(), remainder.end(), itemset.begin(), itemset.end(),
                        std::back_inserter(scratch));
    remainder.swap(scratch);
  }
  if (!remainder.empty()) {
    throw ContractViolation("item " + std::to_string(remainder.front()) +
                            " of the transaction has no singleton in the code table");
  }
  return used;
}

inline std::vector<Itemset> cover(const Transaction& t, const CodeTable& ct) {
  std::vector<Itemset> out;
  for (auto i : cover_indices(t.items, ct)) out.push_back(ct.entry(i).itemset);
  return out;
}

/// Usages of every entry from a full cover of the database.
inline std::vector<std::size_t> compute_usages(std::span<const Transaction> db, const CodeTable& ct) {
  std::vector<std::size_t> usage(ct.size(), 0);
  for (const auto& t : db)
    for (auto i : cover_indices(t.items, ct)) ++usage[i];
  return usage;
}

/// Recomputes usages from scratch and returns L(D,CT) in bits.
inline double total_length(std::span<const Transaction> db, CodeTable& ct) {
  if (db.empty()) {
    warn("total_length on an empty database is 0 bits");
    ct.set_usages(std::vector<std::size_t>(ct.size(), 0));
    return 0.0;
  }
  ct.set_usages(compute_usages(db, ct));
  return ct.encoded_size();
}

/// L(D,CT) of the singleton-only table.
inline double standard_length(std::span<const Transaction> db, std::size_t item_count) {
  if (db.empty()) return 0.0;
  return CodeTable::standard(db, item_count).encoded_size();
}

inline constexpr std::size_t kDefaultCandidateCap = 1'000'000;

/// Every itemset of size >= 2 with support >= minsup, level by level, in candidate order.
inline std::vector<Candidate> mine_frequent(std::span<const Transaction> db, std::size_t minsup,
                                            std::size_t cap = kDefaultCandidateCap) {
  if (minsup < 1) throw DomainError("minsup must be at least 1");
  using TidList = std::vector<std::uint32_t>;
  struct Node {
    Itemset items;
    TidList tids;
  };

  std::map<Item, TidList> by_item;
  for (std::size_t t = 0; t < db.size(); ++t)
    for (Item i : db[t].items) by_item[i].push_back(static_cast<std::uint32_t>(t));

  std::vector<Node> level;
  for (auto& [item, tids] : by_item)
    if (tids.size() >= minsup) level.push_back({{item}, std::move(tids)});

  std::vector<Candidate> out;
  while (level.size() > 1) {
    std::vector<Node> next;
    // Nodes are lexicographically sorted, so shared prefixes are contiguous.
    for (std::size_t a = 0; a < level.size(); ++a) {
      const auto& left = level[a];
      for (std::size_t b = a + 1; b < level.size(); ++b) {
        const auto& right = level[b];
        if (!std::equal(left.items.begin(), left.items.end() - 1, right.items.begin())) break;
        TidList tids;
        std::set_intersection(left.tids.begin(), left.tids.end(), right.tids.begin(), right.tids.end(),
                              std::back_inserter(tids));
        if (tids.size() < minsup) continue;
        Itemset items = left.items;
        items.push_back(right.items.back());
        out.push_back({items, tids.size()});
        if (out.size() > cap) {
          throw ResourceError("frequent itemset count exceeds the candidate cap of " + std::to_string(cap));
        }
        next.push_back({std::move(items), std::move(tids)});
      }
    }
    level = std::move(next);
  }
  std::sort(out.begin(), out.end(), candidate_order_less);
  return out;
}

struct KrimpOptions {
  std::size_t minsup = 2;
  bool prune = false;
  std::size_t candidate_cap = kDefaultCandidateCap;
};

struct KrimpTrace {
  std::size_t candidates_tested = 0;
  std::size_t accepted = 0;
  std::size_t pruned = 0;
  /// Size before/after each acceptance.
  std::vector<std::pair<double, double>> acceptance_steps;
};

namespace detail {

// Moves the usages of transactions that contain `itemset` from their old cover to the
// cover under the (already modified) table `after`. Only such transactions can change.
class CoverUpdater {
 public:
  explicit CoverUpdater(std::span<const Transaction> db) : db_(db) {}

  std::vector<std::size_t> affected(const Itemset& itemset) const {
    std::vector<std::size_t> out;
    for (std::size_t t = 0; t < db_.size(); ++t)
      if (db_[t].items.size() >= itemset.size() && contains_all(db_[t].items, itemset)) out.push_back(t);
    return out;
  }

  void remove_covers(const std::vector<std::size_t>& tids, const CodeTable& ct, std::vector<std::size_t>& usage) const {
    for (auto t : tids)
      for (auto i : cover_indices(db_[t].items, ct)) --usage[i];
  }

  void add_covers(const std::vector<std::size_t>& tids, const CodeTable& ct, std::vector<std::size_t>& usage) const {
    for (auto t : tids)
      for (auto i : cover_indices(db_[t].items, ct)) ++usage[i];
  }

 private:
  std::span<const Transaction> db_;
};

}  // namespace detail

/// Greedy MDL code table: try candidates in candidate order, keep each one only if the
/// total encoded size strictly decreases.
inline CodeTable build_code_table(std::span<const Transaction> db, std::size_t item_count, const KrimpOptions& options,
                                  KrimpTrace* trace = nullptr) {
  if (db.empty()) throw DomainError("cannot build a code table for an empty database");
  auto candidates = mine_frequent(db, options.minsup, options.candidate_cap);
  CodeTable ct = CodeTable::standard(db, item_count);
  detail::CoverUpdater updater(db);
  KrimpTrace local;

  for (const auto& cand : candidates) {
    ++local.candidates_tested;
    const double before = ct.encoded_size();
    auto usage = ct.usages();
    const auto saved_usage = usage;
    const auto tids = updater.affected(cand.itemset);

    updater.remove_covers(tids, ct, usage);
    const auto pos = ct.insert({cand.itemset, 0, cand.support, 0.0});
    usage.insert(usage.begin() + static_cast<std::ptrdiff_t>(pos), 0);
    updater.add_covers(tids, ct, usage);
    ct.set_usages(usage);

    if (!(ct.encoded_size() < before)) {
      ct.erase(pos);
      ct.set_usages(saved_usage);
      continue;
    }
    ++local.accepted;
    local.acceptance_steps.emplace_back(before, ct.encoded_size());

    if (!options.prune) continue;

    // Re-test non-singletons whose usage dropped, lowest usage first.
    std::vector<Itemset> prune_set;
    for (std::size_t i = 0; i < ct.size(); ++i) {
      if (i == pos || ct.entry(i).itemset.size() < 2) continue;
      const std::size_t old_i = i < pos ? i : i - 1;
      if (ct.entry(i).usage < saved_usage[old_i]) prune_set.push_back(ct.entry(i).itemset);
    }
    while (!prune_set.empty()) {
      auto it = std::min_element(prune_set.begin(), prune_set.end(), [&](const Itemset& a, const Itemset& b) {
        const auto ua = ct.entry(*ct.index_of(a)).usage;
        const auto ub = ct.entry(*ct.index_of(b)).usage;
        return ua != ub ? ua < ub : a < b;
      });
      Itemset victim = *it;
      prune_set.erase(it);
      const auto victim_pos = *ct.index_of(victim);

      const double with_victim = ct.encoded_size();
      auto pusage = ct.usages();
      const auto psaved = pusage;
      const auto ptids = updater.affected(victim);
      const auto victim_entry = ct.entry(victim_pos);
      updater.remove_covers(ptids, ct, pusage);
      ct.erase(victim_pos);
      pusage.erase(pusage.begin() + static_cast<std::ptrdiff_t>(victim_pos));
      updater.add_covers(ptids, ct, pusage);
      ct.set_usages(pusage);
      if (ct.encoded_size() < with_victim) {
        ++local.pruned;
        // Further entries whose usage fell become prune candidates too.
        for (std::size_t i = 0; i < ct.size(); ++i) {
          if (ct.entry(i).itemset.size() < 2) continue;
          const std::size_t old_i = i < victim_pos ? i : i + 1;
          if (ct.entry(i).usage < psaved[old_i] &&
              std::find(prune_set.begin(), prune_set.end(), ct.entry(i).itemset) == prune_set.end())
            prune_set.push_back(ct.entry(i).itemset);
        }
      } else {
        ct.insert(victim_entry);
        ct.set_usages(psaved);
      }
    }
  }
  if (trace) *trace = std::move(local);
  return ct;
}

/// L(D,CT) / L(D, standard table).
inline double compression_ratio(std::span<const Transaction> db, const CodeTable& ct) {
  if (ct.standard_lengths().empty()) throw ContractViolation("code table carries no standard code lengths");
  const double baseline = standard_length(db, ct.standard_lengths().size());
  if (!(baseline > 0.0)) throw DomainError("compression ratio undefined for a zero-length baseline");
  CodeTable copy = ct;
  return total_length(db, copy) / baseline;
}

// ---------------------------------------------------------------------------
// Code-table file: "#total_usage=<n>" then "i1,i2,...<TAB>usage<TAB>support<TAB>bits".

inline void write_code_table(std::ostream& out, const CodeTable& ct) {
  out << "#total_usage=" << ct.total_usage() << '\n';
  std::ostringstream bits;
  bits << std::fixed << std::setprecision(12);
  for (const auto& e : ct.entries()) {
    for (std::size_t i = 0; i < e.itemset.size(); ++i) out << (i ? "," : "") << e.itemset[i];
    bits.str("");
    bits << e.code_length;
    out << '\t' << e.usage << '\t' << e.support << '\t' << bits.str() << '\n';
  }
}

inline CodeTable read_code_table(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> declared_total;
  std::vector<CodeTableEntry> entries;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.rfind("#total_usage=", 0) == 0) {
      declared_total = std::stoul(line.substr(13));
      continue;
    }
    std::istringstream fields(line);
    std::string items_text, usage_text, support_text, bits_text;
    if (!std::getline(fields, items_text, '\t') || !std::getline(fields, usage_text, '\t') ||
        !std::getline(fields, support_text, '\t') || !std::getline(fields, bits_text, '\t'))
      throw ParseError(line_no, "record", "expected itemset<TAB>usage<TAB>support<TAB>code_length");
    CodeTableEntry e;
    std::istringstream items(items_text);
    std::string item;
    try {
      while (std::getline(items, item, ',')) e.itemset.push_back(static_cast<Item>(std::stoul(item)));
    } catch (const std::exception&) {
      throw ParseError(line_no, "itemset", "non-numeric item");
    }
    if (e.itemset.empty() || !std::is_sorted(e.itemset.begin(), e.itemset.end()) ||
        std::adjacent_find(e.itemset.begin(), e.itemset.end()) != e.itemset.end())
      throw ParseError(line_no, "itemset", "items must be non-empty and strictly ascending");
    try {
      e.usage = std::stoul(usage_text);
      e.support = std::stoul(support_text);
    } catch (const std::exception&) {
      throw ParseError(line_no, "usage", "not an integer");
    }
    entries.push_back(std::move(e));
  }
  auto ct = CodeTable::from_entries(std::move(entries));
  if (declared_total && *declared_total != ct.total_usage())
    throw ParseError(1, "total_usage", "header disagrees with the sum of entry usages");
  return ct;
}

}  // namespace relx
