#pragma once

// Per-frame object records shared by the tracker output, ground truth and
// the metric evaluators.

#include "mot3d/core.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

namespace mot3d {

struct TrajectoryRecord {
    std::int64_t frame = 0;
    std::int64_t id = 0;
    Vec3 pos = Vec3::Zero();
    std::optional<BBox> bbox;

    bool operator==(const TrajectoryRecord& o) const {
        return frame == o.frame && id == o.id && pos == o.pos && bbox == o.bbox;
    }
};

struct TrajectorySet {
    std::vector<TrajectoryRecord> records;

    /// At most one record per (frame, id).
    void validate() const {
        std::set<std::pair<std::int64_t, std::int64_t>> seen;
        for (const auto& r : records) {
            if (!seen.emplace(r.frame, r.id).second) {
                throw ValidationError("TrajectorySet: duplicate record for frame " + std::to_string(r.frame) +
                                      ", id " + std::to_string(r.id));
            }
            if (!r.pos.allFinite()) throw ValidationError("TrajectorySet: non-finite position");
            if (r.bbox) validate_bbox(*r.bbox);
        }
    }

    /// Records grouped by frame, in ascending frame order.
    std::map<std::int64_t, std::vector<const TrajectoryRecord*>> by_frame() const {
        std::map<std::int64_t, std::vector<const TrajectoryRecord*>> out;
        for (const auto& r : records) out[r.frame].push_back(&r);
        return out;
    }

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
};

}  // namespace mot3d
