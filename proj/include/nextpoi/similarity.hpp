#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nextpoi/dataset.hpp"

namespace nextpoi {

inline constexpr double kEarthRadiusKm = 6371.0;

/// Great-circle distance in kilometers.
double haversine_km(GeoPoint a, GeoPoint b);

/// Classic unconstrained DTW with haversine local cost, raw cumulative cost
/// (no warping window, no path-length normalization). Throws on empty input.
double dtw_distance(std::span<const GeoPoint> a, std::span<const GeoPoint> b);

/// |set(a) & set(b)| / |set(a) | set(b)|, duplicates collapsed.
double jaccard_similarity(std::span<const int32_t> a, std::span<const int32_t> b);

/// Longest common subsequence length over id equality.
size_t lcs_length(std::span<const int32_t> a, std::span<const int32_t> b);

/// dot(u,v) / (|u||v|). Throws on dimension mismatch or zero-norm input.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

// Sequence views of trajectories / task contexts.
std::vector<GeoPoint> geo_sequence(const std::vector<CheckIn>& checkins);
std::vector<int32_t> poi_sequence(const std::vector<CheckIn>& checkins);

}  // namespace nextpoi
