#pragma once

// Umbrella header for the whole pipeline.

#include "facet/artifacts.hpp"
#include "facet/checkpoint.hpp"
#include "facet/cluster.hpp"
#include "facet/data.hpp"
#include "facet/error.hpp"
#include "facet/graph.hpp"
#include "facet/io.hpp"
#include "facet/metrics.hpp"
#include "facet/model.hpp"
#include "facet/nn.hpp"
#include "facet/rng.hpp"
#include "facet/sweep.hpp"
#include "facet/tensor.hpp"
#include "facet/train.hpp"
