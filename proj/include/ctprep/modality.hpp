#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace ctprep {

enum class Modality { NCCT, CTA, CBF, CBV, MTT, TMAX, MASK, OTHER };

std::string_view to_string(Modality m);

/// Case-insensitive; accepts "Tmax" as well as "TMAX".
std::optional<Modality> parse_modality(std::string_view name);

}  // namespace ctprep
