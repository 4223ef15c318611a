#pragma once

#include "attnet/augmentation.hpp"
#include "attnet/benchmark.hpp"
#include "attnet/decision.hpp"
#include "attnet/detector.hpp"
#include "attnet/errors.hpp"
#include "attnet/eval.hpp"
#include "attnet/geometry.hpp"
#include "attnet/io.hpp"
#include "attnet/labeling.hpp"
#include "attnet/merge_refine.hpp"
#include "attnet/oracles.hpp"
#include "attnet/parallel.hpp"
#include "attnet/proposals.hpp"
#include "attnet/random.hpp"
