#pragma once

#include <cstdint>
#include <string_view>

#include <json.hpp>

#include "fruitscan/classifier.hpp"

namespace fruitscan {

std::uint64_t fnv1a64(std::string_view bytes);

nlohmann::json descriptor_config_to_json(const DescriptorConfig& config);
DescriptorConfig descriptor_config_from_json(const nlohmann::json& j);
nlohmann::json kmeans_config_to_json(const KMeansConfig& config);
KMeansConfig kmeans_config_from_json(const nlohmann::json& j);
nlohmann::json svm_config_to_json(const SvmConfig& config);
SvmConfig svm_config_from_json(const nlohmann::json& j);

}  // namespace fruitscan
