// Closed forms, exact enumeration and simulation of one Geo-D system.

#include <cstdio>

#include "aoi/aoi.hpp"

int main() {
  const auto params = aoi::GeoDParams::make(0.2, 5);

  std::printf("closed form     AoI %.6f  PAoI %.6f (published)  %.6f (exact)\n",
              aoi::avg_aoi_geo_d(params), aoi::avg_paoi_geo_d(params),
              aoi::avg_paoi_geo_d_exact(params));

  const auto enumerated = aoi::reconstruct_theorem1(params, aoi::ExpectationSource::oracle);
  std::printf("state sum       AoI %.6f  PAoI %.6f\n", enumerated.avg_aoi, enumerated.avg_paoi);

  aoi::DualQueueSpec spec{aoi::ServiceModel::geometric(params.p),
                          aoi::ServiceModel::deterministic(params.T)};
  const aoi::AoiMetrics m = aoi::estimate_with_ci(spec, aoi::SimConfig{});
  std::printf("simulation      AoI %.6f +/- %.6f  PAoI %.6f +/- %.6f\n", m.avg_aoi,
              *m.stderr_aoi, m.avg_paoi, *m.stderr_paoi);
}
