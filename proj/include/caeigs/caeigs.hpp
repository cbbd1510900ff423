#pragma once

#include "caeigs/bundle_io.hpp"
#include "caeigs/cnn.hpp"
#include "caeigs/dataset.hpp"
#include "caeigs/domain.hpp"
#include "caeigs/error.hpp"
#include "caeigs/eval.hpp"
#include "caeigs/features.hpp"
#include "caeigs/ingest.hpp"
#include "caeigs/ladder.hpp"
#include "caeigs/runtime.hpp"
#include "caeigs/synthetic.hpp"
