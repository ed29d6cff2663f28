#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace pmbm {

/// Measurement indices (0-based, ascending) forming one cell of an association.
using Cell = std::vector<int>;

/// One data-association event for a predicted global hypothesis: which measurements go to each
/// clutter slot, to each predicted Bernoulli, and which cells initiate new Bernoullis.
struct Association {
    std::vector<Cell> slot_cells;  ///< per clutter slot, empty when the slot takes nothing
    std::vector<Cell> tree_cells;  ///< per predicted Bernoulli, empty for a misdetection
    std::vector<Cell> new_cells;   ///< ascending by first index
    double log_weight = 0.0;
};

/// Admissible labels for exhaustive enumeration.
struct AssociationSpace {
    int measurements = 0;
    int slots = 0;
    int trees = 0;
    /// Target-generated cells must be singletons (point-target model).
    bool singleton_targets = true;
    std::function<bool(int tree, const Cell& cell)> tree_allowed;
    std::function<bool(const Cell& cell)> new_allowed;
};

/// Calls `visit` with every partition of {0..m-1} into non-empty cells (restricted growth order).
void for_each_partition(int m, const std::function<void(const std::vector<Cell>&)>& visit);

/// All associations in `space` (log_weight left at 0). Throws SizeError beyond `limit` results.
std::vector<Association> enumerate_labelled(const AssociationSpace& space, std::uint64_t limit);

}  // namespace pmbm
