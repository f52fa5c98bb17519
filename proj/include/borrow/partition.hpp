#pragma once

#include "borrow/covariance.hpp"
#include "borrow/model.hpp"

#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace borrow {

/// Outcomes "same" / "diff" on a per-observation categorical code.
struct ColumnEqualRule {
  std::string name;
  std::vector<int> codes;
};

/// Hop distance between the graph nodes of two observations, binned by ascending lower
/// edges; the last bin is open-ended and also receives unreachable pairs.
struct GraphDistanceRule {
  std::string name;
  std::vector<int> node_of;
  Adjacency adjacency;
  std::vector<int> bins{0, 1, 2};
};

/// |value_i - value_j| binned by ascending lower edges; the last bin is open-ended.
struct LagRule {
  std::string name;
  std::vector<double> values;
  std::vector<double> bins{0.0, 1.0, 2.0};
};

using RelationshipRule = std::variant<ColumnEqualRule, GraphDistanceRule, LagRule>;

/// Labels every (borrower, lender) pair with a cross-product of rule outcomes. Group codes are
/// mixed-radix with the first rule most significant; with no rules there is a single group.
class RelationshipPartition {
 public:
  RelationshipPartition() = default;
  RelationshipPartition(const ValidatedModel& model, std::vector<RelationshipRule> rules);

  int group_count() const { return state_ ? state_->group_count : 1; }
  int label(int i, int j) const;
  std::string group_name(int code) const;
  std::size_t rule_count() const { return state_ ? state_->rules.size() : 0; }

 private:
  struct State {
    std::vector<RelationshipRule> rules;
    std::vector<int> radix;
    std::vector<std::vector<std::string>> outcome_names;
    std::vector<std::vector<int>> hops;  // per graph rule: node x node hop counts, row-major
    int group_count = 1;
  };
  std::shared_ptr<const State> state_;
};

RelationshipPartition relationship_partition(const ValidatedModel& model, const ClusterIndex& clusters,
                                             std::vector<RelationshipRule> rules);

}  // namespace borrow
