#pragma once

// Umbrella header.

#include "commands.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "grpo.hpp"
#include "logging.hpp"
#include "mcts.hpp"
#include "rng.hpp"
#include "shaping.hpp"
#include "synthenv.hpp"
#include "tree.hpp"
#include "tree_io.hpp"
#include "value_head.hpp"
