#pragma once

#include "audiosr/diffgraph/adam.hpp"
#include "audiosr/diffgraph/autograd.hpp"
#include "audiosr/diffgraph/ops.hpp"
#include "audiosr/diffgraph/tensor.hpp"
