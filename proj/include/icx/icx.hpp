#pragma once

#include "icx/embed.hpp"
#include "icx/error.hpp"
#include "icx/ica.hpp"
#include "icx/io.hpp"
#include "icx/metrics.hpp"
#include "icx/model_text.hpp"
#include "icx/ordinal_head.hpp"
#include "icx/pca.hpp"
#include "icx/rng.hpp"
#include "icx/scoremap.hpp"
#include "icx/selection.hpp"
#include "icx/serialize.hpp"
#include "icx/synthetic.hpp"
#include "icx/types.hpp"
