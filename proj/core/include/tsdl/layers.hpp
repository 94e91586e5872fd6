#pragma once

#include "tsdl/layer.hpp"
#include "tsdl/layers/activation.hpp"
#include "tsdl/layers/attention.hpp"
#include "tsdl/layers/conv.hpp"
#include "tsdl/layers/dense.hpp"
#include "tsdl/layers/normalization.hpp"
#include "tsdl/layers/recurrent.hpp"
#include "tsdl/layers/shape_ops.hpp"
