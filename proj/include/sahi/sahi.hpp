#ifndef SAHI_SAHI_HPP
#define SAHI_SAHI_HPP

#include "sahi/geometry.hpp"
#include "sahi/raster.hpp"
#include "sahi/tiling.hpp"
#include "sahi/detector.hpp"
#include "sahi/oracle.hpp"
#include "sahi/subprocess.hpp"
#include "sahi/fusion.hpp"
#include "sahi/refinement.hpp"
#include "sahi/datasets.hpp"
#include "sahi/metrics.hpp"
#include "sahi/synthgen.hpp"
#include "sahi/pipeline.hpp"

#endif  // SAHI_SAHI_HPP
