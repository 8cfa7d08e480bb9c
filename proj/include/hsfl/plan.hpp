#pragma once

#include <string>
#include <vector>

namespace hsfl {

// Strictly increasing layer indices c_1 < ... < c_{M-1}, each in [1, L-1].
// Tier t (0-based) hosts layers [begin(t), end(t)) so every tier gets at
// least one layer.
class CutVector {
public:
  CutVector(std::vector<int> cuts, int num_layers);

  int num_tiers() const { return static_cast<int>(cuts_.size()) + 1; }
  int num_layers() const { return num_layers_; }
  const std::vector<int>& cuts() const { return cuts_; }

  int begin(int tier) const;  // prefix length below tier
  int end(int tier) const;    // prefix length through tier

  bool operator==(const CutVector& o) const {
    return cuts_ == o.cuts_ && num_layers_ == o.num_layers_;
  }

  std::string to_string() const;

private:
  std::vector<int> cuts_;
  int num_layers_;
};

// Aggregation intervals I_1..I_{M-1} for the bottom M-1 tiers; the top tier
// is synchronized every round by construction.
class AggSchedule {
public:
  explicit AggSchedule(std::vector<int> intervals);

  int size() const { return static_cast<int>(intervals_.size()); }
  int interval(int tier) const;
  const std::vector<int>& intervals() const { return intervals_; }

  bool operator==(const AggSchedule& o) const { return intervals_ == o.intervals_; }

  std::string to_string() const;

private:
  std::vector<int> intervals_;
};

struct Plan {
  CutVector cut;
  AggSchedule intervals;
};

}  // namespace hsfl
