#pragma once

#include "mela/ast.hpp"
#include "mela/ctmc.hpp"
#include "mela/diagnostics.hpp"
#include "mela/eval.hpp"
#include "mela/fluid.hpp"
#include "mela/individual_lts.hpp"
#include "mela/io.hpp"
#include "mela/lexer.hpp"
#include "mela/location.hpp"
#include "mela/model.hpp"
#include "mela/parser.hpp"
#include "mela/printer.hpp"
#include "mela/rng.hpp"
#include "mela/semantics.hpp"
#include "mela/space.hpp"
#include "mela/ssa.hpp"
#include "mela/state.hpp"
#include "mela/validate.hpp"
