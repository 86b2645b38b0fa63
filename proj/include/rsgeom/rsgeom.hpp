#pragma once

#include "rsgeom/error.hpp"
#include "rsgeom/raster.hpp"
#include "rsgeom/geometry.hpp"
#include "rsgeom/scene.hpp"
#include "rsgeom/warping.hpp"
#include "rsgeom/metrics.hpp"
#include "rsgeom/io.hpp"
#include "rsgeom/estimation.hpp"
#include "rsgeom/optical_flow_lk.hpp"
#include "rsgeom/pipeline.hpp"
#include "rsgeom/scene_config.hpp"
#include "rsgeom/selfcheck.hpp"
