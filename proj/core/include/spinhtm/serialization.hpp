#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spinhtm/network.hpp"

namespace spinhtm::htm {

/// Current on-disk format version. Files carry magic "SPHTMNET" + version.
inline constexpr std::uint32_t kNetworkFormatVersion = 1;

/// Little-endian binary image of a network: topology, node parameters,
/// coincidences, counts, TAC, groups, PCW counts and inference matrices.
/// Doubles are stored as IEEE-754 bit patterns, so the round trip is exact.
std::vector<std::uint8_t> serialize_network(const Network& net);
Network deserialize_network(std::span<const std::uint8_t> bytes);

void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

}  // namespace spinhtm::htm
