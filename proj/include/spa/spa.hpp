#pragma once

#include "spa/common.hpp"
#include "spa/transform.hpp"
#include "spa/rangeio.hpp"
#include "spa/synth.hpp"
#include "spa/segment.hpp"
#include "spa/geometry.hpp"
#include "spa/matching.hpp"
#include "spa/kdtree.hpp"
#include "spa/assoc.hpp"
#include "spa/ply.hpp"
#include "spa/sidecar.hpp"
#include "spa/pipeline.hpp"
