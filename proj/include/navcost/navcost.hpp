#pragma once

#include "navcost/costmap.hpp"
#include "navcost/errors.hpp"
#include "navcost/evalkit.hpp"
#include "navcost/geometry.hpp"
#include "navcost/image.hpp"
#include "navcost/json_io.hpp"
#include "navcost/label_gen.hpp"
#include "navcost/path_oracle.hpp"
#include "navcost/pipeline.hpp"
#include "navcost/rng.hpp"
#include "navcost/route_map.hpp"
#include "navcost/simworld.hpp"
