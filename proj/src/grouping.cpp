#include "vle2/grouping.hpp"

#include <stdexcept>
#include <string>

namespace vle2 {

bool valid_group_size(int g) { return g == 1 || g == 2 || g == 4 || g == 8; }

GroupedCodes partition_into_groups(std::span<const int> codes, int group_size) {
  if (!valid_group_size(group_size))
    throw std::invalid_argument("partition_into_groups: group size must be one of {1,2,4,8}, got " +
                                std::to_string(group_size));
  if (static_cast<int>(codes.size()) < group_size)
    throw std::invalid_argument("partition_into_groups: sequence shorter than one group");
  GroupedCodes g;
  g.group_size = group_size;
  g.clipped = static_cast<int>(codes.size()) % group_size;
  g.codes.assign(codes.begin() + g.clipped, codes.end());
  return g;
}

std::vector<int> flatten_groups(const GroupedCodes& g) { return g.codes; }

}  // namespace vle2
