#pragma once

#include <string>

#include "gmoe/model.hpp"

namespace gmoe {

enum class ModelId { Model1 = 1, Model2 = 2, Model3 = 3, Model4 = 4 };

inline std::string to_string(ModelId id) { return "model" + std::to_string(static_cast<int>(id)); }

inline ModelId model_id_from_string(const std::string& s) {
    if (s == "model1" || s == "1" || s == "I") return ModelId::Model1;
    if (s == "model2" || s == "2" || s == "II") return ModelId::Model2;
    if (s == "model3" || s == "3" || s == "III") return ModelId::Model3;
    if (s == "model4" || s == "4" || s == "IV") return ModelId::Model4;
    throw DomainError("unknown model id '" + s + "' (expected model1..model4)");
}

namespace detail {

inline Component iso_component(std::size_t d, double c, double gamma, double a, double b, double nu) {
    const auto n = static_cast<Eigen::Index>(d);
    Component comp;
    comp.c = Vector::Constant(n, c);
    comp.gamma = gamma * Matrix::Identity(n, n);
    comp.a = Vector::Constant(n, a);
    comp.b = b;
    comp.nu = nu;
    return comp;
}

}  // namespace detail

/// The four simulation models, k0 = 3. Models I and II have d = 1, Models
/// III and IV d = 2 with every vector a multiple of 1_d and every Gamma a
/// multiple of I_d. Models II and IV move the first gating location to
/// the origin (and set b = 0.3 there).
inline MixingMeasure model_preset(ModelId id) {
    const std::size_t d = (id == ModelId::Model1 || id == ModelId::Model2) ? 1 : 2;
    const bool zero_first = id == ModelId::Model2 || id == ModelId::Model4;
    std::vector<Component> comps{
        detail::iso_component(d, zero_first ? 0.0 : -0.1, 0.04, 0.40, zero_first ? 0.3 : 0.34, 0.01),
        detail::iso_component(d, 0.1, 0.02, -0.71, -0.33, 0.03),
        detail::iso_component(d, 0.5, 0.01, 0.0, 0.2, 0.02),
    };
    return MixingMeasure({0.3, 0.4, 0.3}, std::move(comps));
}

}  // namespace gmoe
