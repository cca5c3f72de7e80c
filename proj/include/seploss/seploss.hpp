#ifndef SEPLOSS_SEPLOSS_HPP
#define SEPLOSS_SEPLOSS_HPP

// Umbrella header.

#include "seploss/adversarial.hpp"
#include "seploss/audio.hpp"
#include "seploss/common.hpp"
#include "seploss/deep_feature.hpp"
#include "seploss/fft.hpp"
#include "seploss/grad_check.hpp"
#include "seploss/harness.hpp"
#include "seploss/loss_output.hpp"
#include "seploss/losses_spec.hpp"
#include "seploss/losses_time.hpp"
#include "seploss/masks.hpp"
#include "seploss/metrics.hpp"
#include "seploss/nn.hpp"
#include "seploss/registry.hpp"
#include "seploss/report.hpp"
#include "seploss/stft.hpp"
#include "seploss/synth.hpp"
#include "seploss/version.hpp"
#include "seploss/wav.hpp"

#endif
