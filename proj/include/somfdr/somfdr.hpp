#pragma once

#include "somfdr/bench.hpp"
#include "somfdr/domain.hpp"
#include "somfdr/dpmix.hpp"
#include "somfdr/error.hpp"
#include "somfdr/fdr.hpp"
#include "somfdr/genmodel.hpp"
#include "somfdr/io.hpp"
#include "somfdr/scores.hpp"
#include "somfdr/synthetic.hpp"
