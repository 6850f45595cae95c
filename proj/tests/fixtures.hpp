#pragma once

#include <array>
#include <string>

#include "firelabel/dataset.hpp"

namespace firelabel::testing {

struct TallyRow {
  const char* location;
  std::size_t excluded;
  std::size_t final_count;
};

// Reviewed-image tallies per burn location.
inline constexpr std::array<TallyRow, 4> kReviewTallies{{
    {"Shoetank", 554, 731},
    {"Sycan2A", 40, 324},
    {"Sycan2D", 33, 225},
    {"Willamette Valley", 0, 232},
}};

// One record per reviewed image; decisions interleave so exclusions are not
// simply a prefix of each location.
inline Manifest reviewed_fixture() {
  Manifest m;
  m.config_snapshot = {{"fixture", "reviewed"}};
  for (const auto& row : kReviewTallies) {
    const std::size_t n = row.excluded + row.final_count;
    std::size_t excluded_left = row.excluded;
    for (std::size_t i = 0; i < n; ++i) {
      ImageRecord r;
      r.id = std::string(row.location) + "-" + std::to_string(i);
      for (auto& c : r.id)
        if (c == ' ') c = '_';
      r.burn_location = row.location;
      r.rgb_path = "rgb/" + r.id + ".png";
      r.thermal_path = "thermal/" + r.id + ".png";
      r.tiff_path = "tiff/" + r.id + ".tif";
      // Exclude every other record until the quota is used up.
      const bool exclude = excluded_left > 0 && (i % 2 == 0 || n - i == excluded_left);
      r.decision = exclude ? Decision::excluded : Decision::accepted;
      if (exclude) --excluded_left;
      m.records.push_back(std::move(r));
    }
  }
  return m;
}

}  // namespace firelabel::testing
