#pragma once

// Umbrella header: the full one-pixel attack toolkit.

#include "onepixel/attack.hpp"
#include "onepixel/campaign.hpp"
#include "onepixel/csv.hpp"
#include "onepixel/de.hpp"
#include "onepixel/errors.hpp"
#include "onepixel/http_oracle.hpp"
#include "onepixel/image.hpp"
#include "onepixel/model_server.hpp"
#include "onepixel/oracle.hpp"
#include "onepixel/oracle_spec.hpp"
#include "onepixel/plots.hpp"
#include "onepixel/png_io.hpp"
#include "onepixel/rng.hpp"
#include "onepixel/stats.hpp"
