#include "nextpoi/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <unordered_set>

namespace nextpoi {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;
}

double haversine_km(GeoPoint a, GeoPoint b) {
    const double lat1 = a.lat * kDegToRad;
    const double lat2 = b.lat * kDegToRad;
    const double dlat = (b.lat - a.lat) * kDegToRad;
    const double dlon = (b.lon - a.lon) * kDegToRad;
    const double sdlat = std::sin(dlat / 2.0);
    const double sdlon = std::sin(dlon / 2.0);
    const double h = sdlat * sdlat + std::cos(lat1) * std::cos(lat2) * sdlon * sdlon;
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

double dtw_distance(std::span<const GeoPoint> a, std::span<const GeoPoint> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("dtw_distance: empty sequence");
    const size_t n = a.size();
    const size_t m = b.size();
    constexpr double kInf = std::numeric_limits<double>::infinity();

    // Rolling two-row DP; row index 0 is the virtual border.
    std::vector<double> prev(m + 1, kInf);
    std::vector<double> curr(m + 1, kInf);
    prev[0] = 0.0;
    for (size_t i = 1; i <= n; ++i) {
        curr[0] = kInf;
        const GeoPoint ai = a[i - 1];
        for (size_t j = 1; j <= m; ++j) {
            const double cost = haversine_km(ai, b[j - 1]);
            curr[j] = cost + std::min({prev[j], prev[j - 1], curr[j - 1]});
        }
        std::swap(prev, curr);
    }
    return prev[m];
}

double jaccard_similarity(std::span<const int32_t> a, std::span<const int32_t> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("jaccard_similarity: empty sequence");
    std::unordered_set<int32_t> sa(a.begin(), a.end());
    std::unordered_set<int32_t> sb(b.begin(), b.end());
    size_t inter = 0;
    for (const int32_t x : sa) inter += sb.count(x);
    const size_t uni = sa.size() + sb.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

size_t lcs_length(std::span<const int32_t> a, std::span<const int32_t> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("lcs_length: empty sequence");
    const size_t n = a.size();
    const size_t m = b.size();
    std::vector<size_t> prev(m + 1, 0);
    std::vector<size_t> curr(m + 1, 0);
    for (size_t i = 1; i <= n; ++i) {
        for (size_t j = 1; j <= m; ++j) {
            curr[j] = (a[i - 1] == b[j - 1]) ? prev[j - 1] + 1 : std::max(prev[j], curr[j - 1]);
        }
        std::swap(prev, curr);
    }
    return prev[m];
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size())
        throw std::invalid_argument("cosine_similarity: dimension mismatch (" +
                                    std::to_string(u.size()) + " vs " + std::to_string(v.size()) +
                                    ")");
    if (u.empty()) throw std::invalid_argument("cosine_similarity: empty vector");
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) throw std::invalid_argument("cosine_similarity: zero-norm vector");
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

std::vector<GeoPoint> geo_sequence(const std::vector<CheckIn>& checkins) {
    std::vector<GeoPoint> out;
    out.reserve(checkins.size());
    for (const auto& c : checkins) out.push_back(c.geo);
    return out;
}

std::vector<int32_t> poi_sequence(const std::vector<CheckIn>& checkins) {
    std::vector<int32_t> out;
    out.reserve(checkins.size());
    for (const auto& c : checkins) out.push_back(c.poi);
    return out;
}

}  // namespace nextpoi
