#pragma once

#include "gmoe/errors.hpp"
#include "gmoe/model.hpp"
#include "gmoe/json_io.hpp"
#include "gmoe/rng.hpp"
#include "gmoe/sampler.hpp"
#include "gmoe/em.hpp"
#include "gmoe/voronoi.hpp"
#include "gmoe/polysys.hpp"
#include "gmoe/presets.hpp"
#include "gmoe/experiments.hpp"
#include "gmoe/report.hpp"
