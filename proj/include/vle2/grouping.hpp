#pragma once

#include <span>
#include <vector>

namespace vle2 {

/// First-quantizer codes partitioned into fixed-size groups. `clipped` codes
/// were removed from the start so the remainder is a whole number of groups.
struct GroupedCodes {
  int group_size = 1;
  int clipped = 0;
  std::vector<int> codes;  // flattened groups, size = group_size * num_groups

  int num_groups() const { return static_cast<int>(codes.size()) / group_size; }
  std::span<const int> group(int g) const {
    return {codes.data() + static_cast<size_t>(g) * group_size,
            static_cast<size_t>(group_size)};
  }
  static GroupedCodes empty(int group_size) { return GroupedCodes{group_size, 0, {}}; }
};

bool valid_group_size(int g);

/// Clips len(codes) mod G codes from the start, then cuts consecutive
/// G-tuples. Throws if the sequence is shorter than one group.
GroupedCodes partition_into_groups(std::span<const int> codes, int group_size);

std::vector<int> flatten_groups(const GroupedCodes& g);

}  // namespace vle2
