#pragma once

#include <vector>

namespace pico {

using Adjacency = std::vector<std::vector<int>>;

// Tarjan's algorithm, iterative. Each component is sorted ascending;
// components come out in reverse topological order of the condensation.
std::vector<std::vector<int>> strongly_connected_components(const Adjacency& adj);

}  // namespace pico
