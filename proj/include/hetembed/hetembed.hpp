#pragma once
// Umbrella header for the whole library.

#include "hetembed/common.hpp"
#include "hetembed/eval.hpp"
#include "hetembed/graph.hpp"
#include "hetembed/model.hpp"
#include "hetembed/online.hpp"
#include "hetembed/rng.hpp"
#include "hetembed/synth.hpp"
#include "hetembed/text_encoder.hpp"
#include "hetembed/trainer.hpp"
#include "hetembed/tsv.hpp"
#include "hetembed/walker.hpp"
