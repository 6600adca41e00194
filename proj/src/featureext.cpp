#include "seismo/featureext.hpp"

namespace seismo::featureext {

LayerSelection parse_selection(const std::string& text) {
    if (text == "A") return LayerSelection::A;
    if (text == "B") return LayerSelection::B;
    if (text == "C") return LayerSelection::C;
    if (text == "D") return LayerSelection::D;
    throw std::invalid_argument("layer selection must be one of A, B, C, D (got '" + text + "')");
}

std::string to_string(LayerSelection s) {
    switch (s) {
        case LayerSelection::A: return "A";
        case LayerSelection::B: return "B";
        case LayerSelection::C: return "C";
        case LayerSelection::D: return "D";
    }
    return "?";
}

std::string layer_name(int block) { return "conv" + std::to_string(block + 1) + "_1"; }

}  // namespace seismo::featureext
