#pragma once

#include "vtac/dataset_io.hpp"
#include "vtac/error.hpp"
#include "vtac/eval.hpp"
#include "vtac/features.hpp"
#include "vtac/imbalance.hpp"
#include "vtac/matrix.hpp"
#include "vtac/nn/checkpoint.hpp"
#include "vtac/nn/model.hpp"
#include "vtac/nn/train.hpp"
#include "vtac/pipeline.hpp"
#include "vtac/preprocess.hpp"
#include "vtac/rng.hpp"
#include "vtac/synth.hpp"
#include "vtac/wfdb.hpp"
