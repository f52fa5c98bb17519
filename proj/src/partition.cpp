#include "borrow/partition.hpp"

#include "borrow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

namespace borrow {

namespace {

std::string format_edge(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

template <typename T>
std::vector<std::string> bin_names(const std::vector<T>& bins, const std::string& rule, bool integer_steps) {
  if (bins.empty()) throw BinGapError(rule + ": at least one bin is required");
  if (bins.front() > 0) {
    throw BinGapError(rule + ": first bin starts at " + format_edge(static_cast<double>(bins.front())) +
                      " so distance 0 is not covered");
  }
  for (std::size_t k = 1; k < bins.size(); ++k) {
    if (!(bins[k] > bins[k - 1])) throw BinGapError(rule + ": bin edges must be strictly increasing");
  }
  std::vector<std::string> names;
  for (std::size_t k = 0; k < bins.size(); ++k) {
    const double lo = static_cast<double>(bins[k]);
    if (k + 1 == bins.size()) {
      names.push_back(format_edge(lo) + "+");
    } else {
      const double hi = static_cast<double>(bins[k + 1]);
      // [lo, lo + 1) holds a single distance when distances are integers.
      const bool unit = integer_steps && lo == std::floor(lo) && hi == lo + 1;
      names.push_back(unit ? format_edge(lo) : format_edge(lo) + "-" + format_edge(hi));
    }
  }
  return names;
}

template <typename T>
int bin_of(const std::vector<T>& bins, double value) {
  if (value < static_cast<double>(bins.front())) throw BinGapError("value below the first bin");
  int k = 0;
  while (k + 1 < static_cast<int>(bins.size()) && value >= static_cast<double>(bins[k + 1])) ++k;
  return k;
}

}  // namespace

RelationshipPartition::RelationshipPartition(const ValidatedModel& model, std::vector<RelationshipRule> rules) {
  const auto n = static_cast<std::size_t>(model.n_obs());
  auto state = std::make_shared<State>();
  for (const auto& rule : rules) {
    std::visit(
        [&](const auto& r) {
          using T = std::decay_t<decltype(r)>;
          std::vector<int> hops;
          if constexpr (std::is_same_v<T, ColumnEqualRule>) {
            if (r.codes.size() != n) throw DimensionError(r.name + ": expected one code per observation");
            state->outcome_names.push_back({"same", "diff"});
          } else if constexpr (std::is_same_v<T, GraphDistanceRule>) {
            if (r.node_of.size() != n) throw DimensionError(r.name + ": expected one node per observation");
            const int nodes = r.adjacency.nodes();
            for (int v : r.node_of) {
              if (v < 0 || v >= nodes) throw IndexOutOfRange(r.name + ": node " + std::to_string(v));
            }
            state->outcome_names.push_back(bin_names(r.bins, r.name, true));
            hops.resize(static_cast<std::size_t>(nodes) * nodes);
            for (int s = 0; s < nodes; ++s) {
              const auto d = r.adjacency.hop_distances(s);
              std::copy(d.begin(), d.end(), hops.begin() + static_cast<std::ptrdiff_t>(s) * nodes);
            }
          } else {
            if (r.values.size() != n) throw DimensionError(r.name + ": expected one value per observation");
            const bool integral = std::all_of(r.values.begin(), r.values.end(),
                                              [](double v) { return v == std::floor(v); });
            state->outcome_names.push_back(bin_names(r.bins, r.name, integral));
          }
          state->hops.push_back(std::move(hops));
        },
        rule);
  }
  state->radix.assign(rules.size(), 1);
  int stride = 1;
  for (std::size_t k = rules.size(); k-- > 0;) {
    state->radix[k] = stride;
    stride *= static_cast<int>(state->outcome_names[k].size());
  }
  state->group_count = stride;
  state->rules = std::move(rules);
  state_ = std::move(state);
}

int RelationshipPartition::label(int i, int j) const {
  if (!state_) return 0;
  int code = 0;
  for (std::size_t k = 0; k < state_->rules.size(); ++k) {
    const int outcome = std::visit(
        [&](const auto& r) -> int {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, ColumnEqualRule>) {
            return r.codes[i] == r.codes[j] ? 0 : 1;
          } else if constexpr (std::is_same_v<T, GraphDistanceRule>) {
            const int nodes = r.adjacency.nodes();
            const int d = state_->hops[k][static_cast<std::size_t>(r.node_of[i]) * nodes + r.node_of[j]];
            return d < 0 ? static_cast<int>(r.bins.size()) - 1 : bin_of(r.bins, d);
          } else {
            return bin_of(r.bins, std::abs(r.values[i] - r.values[j]));
          }
        },
        state_->rules[k]);
    code += outcome * state_->radix[k];
  }
  return code;
}

std::string RelationshipPartition::group_name(int code) const {
  if (!state_ || state_->rules.empty()) return "lender";
  std::string out;
  for (std::size_t k = 0; k < state_->rules.size(); ++k) {
    const int outcome = (code / state_->radix[k]) % static_cast<int>(state_->outcome_names[k].size());
    const std::string& name = std::visit([](const auto& r) -> const std::string& { return r.name; },
                                         state_->rules[k]);
    if (!out.empty()) out += ';';
    out += name + '=' + state_->outcome_names[k][outcome];
  }
  return out;
}

RelationshipPartition relationship_partition(const ValidatedModel& model, const ClusterIndex&,
                                             std::vector<RelationshipRule> rules) {
  return RelationshipPartition(model, std::move(rules));
}

}  // namespace borrow
