#ifndef COBRA_SERIALIZE_HPP
#define COBRA_SERIALIZE_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cobra/graph.hpp"

namespace cobra {

// Binary model container (.cbr): magic "CBRG", u16 version, graph section of
// length-prefixed node records, weight section, trailing CRC-32 (IEEE, over
// every preceding byte). Little-endian throughout; strings are u16 length +
// bytes. Round-trips are bit-exact: serializing a deserialized model yields
// the same bytes.
inline constexpr uint16_t kModelFormatVersion = 1;

std::vector<uint8_t> serialize_bytes(const Graph& g, const WeightStore& w);
std::pair<Graph, WeightStore> deserialize_bytes(const std::vector<uint8_t>& bytes);

void serialize(const Graph& g, const WeightStore& w, const std::string& path);
std::pair<Graph, WeightStore> deserialize(const std::string& path);

// Standalone weight container (.cbw): magic "CBRW", then the same weight
// section + CRC. Used for preprocessed tensors and other named-tensor
// bundles.
void write_weight_store(const WeightStore& w, const std::string& path);
WeightStore read_weight_store(const std::string& path);

}  // namespace cobra

#endif
