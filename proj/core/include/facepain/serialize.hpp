#pragma once

// Model persistence: a versioned JSON envelope with a config echo and weight
// buffers stored as Base64 little-endian float64.

#include <string>
#include <string_view>

#include "facepain/gp.hpp"
#include "facepain/mil.hpp"
#include "facepain/mlp.hpp"
#include "facepain/second_level.hpp"
#include "facepain/svm.hpp"

namespace facepain {

inline constexpr int kModelFormatVersion = 1;

std::string to_json(const MlpModel& model);
std::string to_json(const SvcModel& model);
std::string to_json(const SvrModel& model);
std::string to_json(const GpModel& model);
std::string to_json(const Aggregator& agg);
std::string to_json(const MilModel& model);

MlpModel mlp_from_json(std::string_view text);
SvcModel svc_from_json(std::string_view text);
SvrModel svr_from_json(std::string_view text);
GpModel gp_from_json(std::string_view text);
Aggregator aggregator_from_json(std::string_view text);
MilModel mil_from_json(std::string_view text);

}  // namespace facepain
