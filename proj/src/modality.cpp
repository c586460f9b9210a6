#include "ctprep/modality.hpp"

#include <algorithm>
#include <cctype>

namespace ctprep {

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::NCCT: return "NCCT";
    case Modality::CTA: return "CTA";
    case Modality::CBF: return "CBF";
    case Modality::CBV: return "CBV";
    case Modality::MTT: return "MTT";
    case Modality::TMAX: return "TMAX";
    case Modality::MASK: return "MASK";
    case Modality::OTHER: return "OTHER";
  }
  return "OTHER";
}

std::optional<Modality> parse_modality(std::string_view name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (Modality m : {Modality::NCCT, Modality::CTA, Modality::CBF, Modality::CBV, Modality::MTT,
                     Modality::TMAX, Modality::MASK, Modality::OTHER}) {
    if (upper == to_string(m)) return m;
  }
  return std::nullopt;
}

}  // namespace ctprep
