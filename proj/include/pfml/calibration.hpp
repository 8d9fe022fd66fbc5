#pragma once

// Camera calibration file: point correspondences (camera -> overhead),
// overhead canvas size, per-coupon regions and known hot pixels.

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "pfml/error.hpp"
#include "pfml/imaging.hpp"

namespace pfml {

struct Calibration {
  std::vector<Correspondence> correspondences;
  std::vector<RegionSpec> regions;
  std::vector<PixelCoord> hot_pixels;  // tomography camera coordinates
  int overhead_width = 0;
  int overhead_height = 0;

  const RegionSpec& region(const std::string& coupon_id) const {
    for (const auto& r : regions)
      if (r.coupon_id == coupon_id) return r;
    throw Error("no calibration region for coupon '" + coupon_id + "'");
  }
};

inline nlohmann::json calibration_to_json(const Calibration& cal) {
  nlohmann::json j;
  j["overhead_size"] = {cal.overhead_width, cal.overhead_height};
  j["correspondences"] = nlohmann::json::array();
  for (const auto& c : cal.correspondences)
    j["correspondences"].push_back({{"src", {c.src.x, c.src.y}}, {"dst", {c.dst.x, c.dst.y}}});
  j["regions"] = nlohmann::json::array();
  for (const auto& r : cal.regions)
    j["regions"].push_back({{"coupon_id", r.coupon_id}, {"rect", {r.rect.x, r.rect.y, r.rect.w, r.rect.h}}});
  j["hot_pixels"] = nlohmann::json::array();
  for (const auto& p : cal.hot_pixels) j["hot_pixels"].push_back({p.x, p.y});
  return j;
}

inline Calibration calibration_from_json(const nlohmann::json& j) {
  Calibration cal;
  try {
    const auto& size = j.at("overhead_size");
    cal.overhead_width = size.at(0).get<int>();
    cal.overhead_height = size.at(1).get<int>();
    for (const auto& c : j.at("correspondences")) {
      const auto& s = c.at("src");
      const auto& d = c.at("dst");
      cal.correspondences.push_back({{s.at(0).get<double>(), s.at(1).get<double>()},
                                     {d.at(0).get<double>(), d.at(1).get<double>()}});
    }
    for (const auto& r : j.at("regions")) {
      const auto& rc = r.at("rect");
      cal.regions.push_back({r.at("coupon_id").get<std::string>(),
                             {rc.at(0).get<int>(), rc.at(1).get<int>(), rc.at(2).get<int>(), rc.at(3).get<int>()}});
    }
    if (j.contains("hot_pixels"))
      for (const auto& p : j.at("hot_pixels")) cal.hot_pixels.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed calibration: ") + e.what());
  }
  if (cal.overhead_width < 1 || cal.overhead_height < 1) throw Error("overhead size must be positive");
  if (cal.correspondences.size() < 4) throw Error("calibration needs at least 4 correspondences");
  std::set<std::string> seen;
  for (const auto& r : cal.regions) {
    if (!seen.insert(r.coupon_id).second) throw Error("duplicate region for coupon '" + r.coupon_id + "'");
    if (r.rect.w < 2 || r.rect.h < 2) throw Error("region for coupon '" + r.coupon_id + "' is smaller than 2x2");
    if (r.rect.x < 0 || r.rect.y < 0 || r.rect.x + r.rect.w > cal.overhead_width ||
        r.rect.y + r.rect.h > cal.overhead_height)
      throw Error("region for coupon '" + r.coupon_id + "' lies outside the overhead view");
  }
  return cal;
}

inline Calibration load_calibration(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError(path, "cannot open");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path, std::string("invalid JSON: ") + e.what());
  }
  try {
    return calibration_from_json(j);
  } catch (const Error& e) {
    throw IoError(path, e.what());
  }
}

}  // namespace pfml
