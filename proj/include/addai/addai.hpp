#pragma once

// Umbrella header.

#include "addai/adaboost.hpp"
#include "addai/autoencoder.hpp"
#include "addai/binio.hpp"
#include "addai/cli.hpp"
#include "addai/config.hpp"
#include "addai/dataset.hpp"
#include "addai/federation.hpp"
#include "addai/metrics.hpp"
#include "addai/neuralnet.hpp"
#include "addai/report.hpp"
