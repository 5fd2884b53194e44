#pragma once

// JSON conversions for the geometric value types shared by manifests,
// sidecars and checkpoints.

#include "motorseg/common.hpp"

#include "json.hpp"

#include <filesystem>

namespace nlohmann {

template <>
struct adl_serializer<motorseg::Vec3> {
  static void to_json(json& j, const motorseg::Vec3& v) { j = json::array({v.x(), v.y(), v.z()}); }
  static void from_json(const json& j, motorseg::Vec3& v) {
    if (!j.is_array() || j.size() != 3) throw json::type_error::create(302, "expected a 3-vector", &j);
    v = motorseg::Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
  }
};

/// Row-major nested arrays.
template <>
struct adl_serializer<motorseg::Mat3> {
  static void to_json(json& j, const motorseg::Mat3& m) {
    j = json::array();
    for (int r = 0; r < 3; ++r) j.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
  }
  static void from_json(const json& j, motorseg::Mat3& m) {
    if (!j.is_array() || j.size() != 3) throw json::type_error::create(302, "expected a 3x3 matrix", &j);
    for (int r = 0; r < 3; ++r) {
      if (!j[r].is_array() || j[r].size() != 3)
        throw json::type_error::create(302, "expected a 3x3 matrix", &j);
      for (int c = 0; c < 3; ++c) m(r, c) = j[r][c].get<double>();
    }
  }
};

}  // namespace nlohmann

namespace motorseg {

inline void to_json(nlohmann::json& j, const RigidTransform& t) {
  j = {{"rotation", t.rotation}, {"translation", t.translation}};
}
inline void from_json(const nlohmann::json& j, RigidTransform& t) {
  t.rotation = j.at("rotation").get<Mat3>();
  t.translation = j.at("translation").get<Vec3>();
}

/// Reads a JSON document. Throws IoError when unreadable and ParseError on
/// malformed content.
nlohmann::json read_json_file(const std::filesystem::path& path);
/// Writes with two-space indentation. Throws IoError.
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace motorseg
