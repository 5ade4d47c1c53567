#pragma once

#include "fpseg/constraint.hpp"
#include "fpseg/error.hpp"
#include "fpseg/io.hpp"
#include "fpseg/loss.hpp"
#include "fpseg/oracle.hpp"
#include "fpseg/piecewise.hpp"
#include "fpseg/segmentation.hpp"
#include "fpseg/sequence.hpp"
#include "fpseg/solver_op.hpp"
#include "fpseg/solver_sn.hpp"
#include "fpseg/state_graph.hpp"
#include "fpseg/synthetic.hpp"
