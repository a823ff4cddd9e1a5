#pragma once

#include "edgefit/error.hpp"
#include "edgefit/tensor.hpp"
#include "edgefit/dataset.hpp"
#include "edgefit/model.hpp"
#include "edgefit/trainer.hpp"
#include "edgefit/quantizer.hpp"
#include "edgefit/platform.hpp"
