#include "hsfl/plan.hpp"

#include "hsfl/errors.hpp"

namespace hsfl {

CutVector::CutVector(std::vector<int> cuts, int num_layers)
    : cuts_(std::move(cuts)), num_layers_(num_layers) {
  if (num_layers_ < 2) throw InvalidArgumentError("cut vector needs a model with >= 2 layers");
  int prev = 0;
  for (int c : cuts_) {
    if (c <= prev || c > num_layers_ - 1)
      throw InvalidArgumentError("cut vector must be strictly increasing within [1, L-1]");
    prev = c;
  }
}

int CutVector::begin(int tier) const {
  if (tier < 0 || tier >= num_tiers()) throw InvalidArgumentError("tier index out of range");
  return tier == 0 ? 0 : cuts_[static_cast<std::size_t>(tier - 1)];
}

int CutVector::end(int tier) const {
  if (tier < 0 || tier >= num_tiers()) throw InvalidArgumentError("tier index out of range");
  return tier == num_tiers() - 1 ? num_layers_ : cuts_[static_cast<std::size_t>(tier)];
}

std::string CutVector::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < cuts_.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(cuts_[i]);
  }
  return out;
}

AggSchedule::AggSchedule(std::vector<int> intervals) : intervals_(std::move(intervals)) {
  for (int i : intervals_)
    if (i < 1) throw InvalidArgumentError("aggregation intervals must be positive integers");
}

int AggSchedule::interval(int tier) const {
  if (tier < 0 || tier >= size()) throw InvalidArgumentError("tier index out of range");
  return intervals_[static_cast<std::size_t>(tier)];
}

std::string AggSchedule::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < intervals_.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(intervals_[i]);
  }
  return out;
}

}  // namespace hsfl
