#pragma once

#include "zsldict/dataset.hpp"
#include "zsldict/dict_admm.hpp"
#include "zsldict/errors.hpp"
#include "zsldict/eval.hpp"
#include "zsldict/inference.hpp"
#include "zsldict/io.hpp"
#include "zsldict/jedm.hpp"
#include "zsldict/linalg.hpp"
#include "zsldict/matrix.hpp"
#include "zsldict/random.hpp"
#include "zsldict/synth.hpp"
#include "zsldict/tstd.hpp"
