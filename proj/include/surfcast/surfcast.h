#ifndef SURFCAST_SURFCAST_H
#define SURFCAST_SURFCAST_H

#include "surfcast/dates.h"
#include "surfcast/errors.h"
#include "surfcast/eval.h"
#include "surfcast/fem.h"
#include "surfcast/forecast.h"
#include "surfcast/fpca.h"
#include "surfcast/geometry.h"
#include "surfcast/io.h"
#include "surfcast/pipeline.h"
#include "surfcast/random.h"
#include "surfcast/synth.h"

#endif  // SURFCAST_SURFCAST_H
