#pragma once

#include "heaplet/model.hpp"
#include "heaplet/unify.hpp"
#include "heaplet/syntax.hpp"
#include "heaplet/normalize.hpp"
#include "heaplet/partition.hpp"
#include "heaplet/grammar.hpp"
#include "heaplet/entail.hpp"
#include "heaplet/pipeline.hpp"
