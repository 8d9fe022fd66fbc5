#pragma once

#include "pfml/calibration.hpp"
#include "pfml/config.hpp"
#include "pfml/dataset.hpp"
#include "pfml/error.hpp"
#include "pfml/eval.hpp"
#include "pfml/features.hpp"
#include "pfml/image.hpp"
#include "pfml/imaging.hpp"
#include "pfml/models/model.hpp"
#include "pfml/pipeline.hpp"
#include "pfml/rng.hpp"
#include "pfml/synth.hpp"
