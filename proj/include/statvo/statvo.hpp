#pragma once

// Convenience umbrella for the whole engine.

#include "statvo/box_tracker.hpp"
#include "statvo/config.hpp"
#include "statvo/depth_clustering.hpp"
#include "statvo/errors.hpp"
#include "statvo/eval.hpp"
#include "statvo/geometry.hpp"
#include "statvo/hungarian.hpp"
#include "statvo/io.hpp"
#include "statvo/keypoint_probability.hpp"
#include "statvo/kvfile.hpp"
#include "statvo/object_probability.hpp"
#include "statvo/pipeline.hpp"
#include "statvo/pose_optimizer.hpp"
#include "statvo/random.hpp"
#include "statvo/synth.hpp"
#include "statvo/types.hpp"
