#pragma once

#include <memory>
#include <span>
#include <vector>

#include "stlsplit/formula.hpp"
#include "stlsplit/predicate.hpp"

namespace stlsplit {

/// Incremental online robustness monitor. Holds one time-indexed buffer per
/// subformula node; after ingesting states x_0..x_t, buffer(node)[i] equals
/// the batch nominal robustness of that node over the prefix at index i.
///
/// Owned by exactly one trajectory worker at a time; copyable so a resumed
/// trajectory can branch from a prefix.
class WorkList {
 public:
  WorkList(Formula formula, std::shared_ptr<const PredicateTable> preds,
           int max_timestep = -1);

  /// Advance the watermark and update every buffer with the state for
  /// timestep watermark+1.
  void ingest(std::span<const double> state);

  /// Robustness of the ingested prefix at index 0; throws before any ingest.
  double robustness() const;

  int watermark() const { return watermark_; }
  const Formula& formula() const { return formula_; }
  const std::vector<double>& buffer(int node_id) const {
    return buffers_[static_cast<size_t>(node_id)];
  }

 private:
  void update_node(int id, int t1);

  Formula formula_;
  std::shared_ptr<const PredicateTable> preds_;
  std::vector<std::vector<double>> buffers_;
  std::vector<int> dirty_;  // per-node first changed index of this ingest
  int watermark_ = -1;
  int max_timestep_;  // final scenario timestep, or -1 for unlimited
};

}  // namespace stlsplit
