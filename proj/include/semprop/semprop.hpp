#pragma once

#include "semprop/dataset.hpp"
#include "semprop/experiment.hpp"
#include "semprop/folds.hpp"
#include "semprop/hiernet.hpp"
#include "semprop/io.hpp"
#include "semprop/propagation.hpp"
#include "semprop/seeder.hpp"
#include "semprop/semantic_graph.hpp"
#include "semprop/synth.hpp"
#include "semprop/types.hpp"
