#pragma once

#include "prcnn/nn/adam.hpp"
#include "prcnn/nn/conv.hpp"
#include "prcnn/nn/gradcheck.hpp"
#include "prcnn/nn/loss.hpp"
#include "prcnn/nn/ops.hpp"
#include "prcnn/nn/tape.hpp"
#include "prcnn/nn/tensor.hpp"
