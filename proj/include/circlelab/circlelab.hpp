#pragma once

#include "circlelab/circle.hpp"
#include "circlelab/continued_fraction.hpp"
#include "circlelab/distortion.hpp"
#include "circlelab/experiments.hpp"
#include "circlelab/map_io.hpp"
#include "circlelab/partition.hpp"
#include "circlelab/real.hpp"
#include "circlelab/svg.hpp"
#include "circlelab/trig_map.hpp"
#include "circlelab/tuning.hpp"
