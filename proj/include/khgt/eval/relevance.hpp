#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>

#include "khgt/model/khgt.hpp"

namespace khgt::eval {

/// Writes the mutual-attention weights lambda(k, k') of each listed node and
/// layer, one line per head plus a head-averaged `mean` line, to `relevance`
/// (`node_type,node_id,layer,head,k,k_prime,weight`), and the fusion gates
/// (eta over behaviors, xi over item relations) to `gates`
/// (`node_type,node_id,layer,gate,index,weight`). Node ids are rows of
/// `graph`. The mutual-attention switch must be on for lambda lines.
void export_relevance(const model::ModelParams& params, const model::PreparedGraph& graph,
                      const model::Variant& variant, std::span<const std::uint32_t> users,
                      std::span<const std::uint32_t> items, std::ostream& relevance, std::ostream& gates);

}  // namespace khgt::eval
