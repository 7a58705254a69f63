#pragma once

#include "sainet/common.hpp"
#include "sainet/tensor.hpp"
#include "sainet/conv.hpp"
#include "sainet/adam.hpp"
#include "sainet/image.hpp"
#include "sainet/imageproc.hpp"
#include "sainet/maskbank.hpp"
#include "sainet/stereo.hpp"
#include "sainet/synthetic.hpp"
#include "sainet/datagen.hpp"
#include "sainet/network.hpp"
#include "sainet/losses.hpp"
#include "sainet/metrics.hpp"
#include "sainet/dataio.hpp"
#include "sainet/config.hpp"
#include "sainet/checkpoint.hpp"
#include "sainet/pipeline.hpp"
#include "sainet/commands.hpp"
