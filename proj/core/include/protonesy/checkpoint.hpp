#pragma once

#include <string>

#include "protonesy/backbone.hpp"
#include "protonesy/prototypes.hpp"

namespace protonesy {

// Versioned JSON checkpoint container shared by parameter states and
// centroid banks. Doubles are stored as 16-digit hex IEEE-754 bit patterns,
// so a load-save cycle is bit-exact.
struct Checkpoint {
    MlpSpec spec;
    ParamState params;
    CentroidBank bank;    // may be empty (baseline models)
    bool has_bank = false;
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& json_text);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace protonesy
