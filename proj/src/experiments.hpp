#pragma once

#include <string>

#include "config.hpp"

namespace batchgfn {

// Experiment drivers. Each command validates the config, creates a fresh run
// directory (refusing to touch an existing non-empty one), writes the
// resolved config + seed manifest, and emits its outputs:
//   synth-data     dataset.jsonl
//   fit-gp         dataset.jsonl, gp-checkpoint.json, lml-trace.jsonl
//   train-gfn      dataset.jsonl, gp-checkpoint.json, policy-checkpoint.bin,
//                  loss-trace.jsonl
//   oracle-compare report.jsonl (+ loss-trace.jsonl)
//   jmi-sweep      jmi-samples.csv, jmi-summary.csv
//   al-run         runlog-<strategy>-r<k>.jsonl, al-curve.csv, timings.jsonl
//   transfer-exp   transfer-curves.csv, transfer-summary.json
// Results are bit-reproducible from the resolved config; wall-clock timings
// go to the timings sidecar only.
void run_command(const Config& cfg, const std::string& command,
                 const std::string& out_dir);

bool is_known_command(const std::string& command);

}  // namespace batchgfn
