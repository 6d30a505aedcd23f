#pragma once

#include "pino/binio.hpp"
#include "pino/checkpoint.hpp"
#include "pino/csv.hpp"
#include "pino/dataset.hpp"
#include "pino/evaluate.hpp"
#include "pino/geometry.hpp"
#include "pino/gp.hpp"
#include "pino/models.hpp"
#include "pino/parallel.hpp"
#include "pino/physics.hpp"
#include "pino/rng.hpp"
#include "pino/sample.hpp"
#include "pino/svg.hpp"
#include "pino/tape.hpp"
#include "pino/tensor.hpp"
#include "pino/training.hpp"
#include "pino/wos.hpp"
