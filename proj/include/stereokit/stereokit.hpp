#pragma once

#include "stereokit/config.hpp"
#include "stereokit/dispvol.hpp"
#include "stereokit/distill.hpp"
#include "stereokit/error.hpp"
#include "stereokit/grid.hpp"
#include "stereokit/imgio.hpp"
#include "stereokit/losses.hpp"
#include "stereokit/matting.hpp"
#include "stereokit/metrics.hpp"
#include "stereokit/npe.hpp"
#include "stereokit/viz.hpp"
