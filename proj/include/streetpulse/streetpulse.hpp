#pragma once

#include "streetpulse/census.hpp"
#include "streetpulse/detect.hpp"
#include "streetpulse/emotion.hpp"
#include "streetpulse/hog.hpp"
#include "streetpulse/image.hpp"
#include "streetpulse/nn.hpp"
#include "streetpulse/rng.hpp"
#include "streetpulse/stats.hpp"
#include "streetpulse/tensor.hpp"
#include "streetpulse/weights_io.hpp"
