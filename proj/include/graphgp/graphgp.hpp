#pragma once

#include "graphgp/dataset.hpp"
#include "graphgp/errors.hpp"
#include "graphgp/experiments.hpp"
#include "graphgp/graph.hpp"
#include "graphgp/io.hpp"
#include "graphgp/kernels.hpp"
#include "graphgp/matrix.hpp"
#include "graphgp/model.hpp"
#include "graphgp/numerics.hpp"
#include "graphgp/training.hpp"
