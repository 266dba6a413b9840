#pragma once

#include <string>

#include "medfpca/fpca.hpp"

namespace medfpca {

/// Companion metadata file for a posterior CSV (same path + ".meta.json").
std::string posterior_meta_path(const std::string& csv_path);

/// Writes the posterior draws as long-format CSV (columns
/// draw,block,i,j,value; doubles at full precision) plus a JSON metadata
/// sidecar carrying the role, basis, sampler configuration, seed, dataset
/// echoes, and chain diagnostics. Blocks:
///
///   phi      basis coefficient i of component j
///   zeta     score of subject i on component j
///   tau0     control-arm mean of component j      (i = 0)
///   tau1     treated-arm mean of component j      (i = 0)
///   beta     covariate coefficient j              (i = 0)
///   sigma2   observation noise variance           (i = j = 0)
///   lambda2  score variance of component j        (i = 0)
///   fev      sorted variance share j              (i = 0)
///   gamma    concurrent-mediator coefficient      (i = j = 0)
///   med_draw index of the mediator draw imputed   (i = j = 0; -1 if none)
void write_posterior(const FpcaPosterior& post, const std::string& csv_path);

/// Inverse of write_posterior; throws DataError on missing or inconsistent
/// files. write → read round-trips draws bit for bit.
FpcaPosterior read_posterior(const std::string& csv_path);

/// JSON (de)serialization of the sampler configuration. Parsing starts from
/// `base`, overrides any keys present, and throws UsageError on unknown keys
/// or ill-typed values.
std::string config_to_json_string(const FpcaConfig& cfg);
FpcaConfig config_from_json_string(const std::string& text,
                                   FpcaConfig base = {});

}  // namespace medfpca
