#pragma once

#include "drive/percept/types.hpp"

namespace drive::percept {

// ρ = min(m, score_prev);  S = (1 − ρ)·S_bu + ρ·S_td
double daf_rho(double score_prev, double m);
AttentionMap daf_fuse(const AttentionMap& s_bu, const AttentionMap& s_td, double score_prev, double m);

// concat(l2n(GMP(S ⊙ V)), l2n(GAP(S ⊙ V))), [2C]. A zero half stays zero.
ObservationState build_state(const AttentionMap& s, const FeatureVolume& v);

}  // namespace drive::percept
