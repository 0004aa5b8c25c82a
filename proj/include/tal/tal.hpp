#pragma once

#include "tal/ablation.hpp"
#include "tal/eval.hpp"
#include "tal/io.hpp"
#include "tal/losses.hpp"
#include "tal/model.hpp"
#include "tal/ops.hpp"
#include "tal/rng.hpp"
#include "tal/seq_tensor.hpp"
#include "tal/synth.hpp"
#include "tal/tape.hpp"
#include "tal/targets.hpp"
#include "tal/trainer.hpp"
