#ifndef COBRA_TRAIN_HPP
#define COBRA_TRAIN_HPP

#include <cstdint>
#include <vector>

#include "cobra/tensor.hpp"
#include "cobra/volume.hpp"

namespace cobra {

// Weighted multi-class soft Dice configuration. Weights default to uniform;
// inverse_frequency_weights offers the usual alternative. epsilon smooths
// both numerator and denominator.
struct LossSpec {
    std::vector<double> weights;  // length K, >= 0, not all zero
    double epsilon = 1e-5;

    static LossSpec uniform(int64_t k) { return {std::vector<double>(k, 1.0), 1e-5}; }
    void validate(int64_t k) const;
};

// Per-voxel softmax over the channel axis of a (K,D,H,W) tensor,
// max-subtracted for stability. Channel sums are 1 to within rounding.
Tensor softmax_channels(const Tensor& logits);

// One-hot encoding of a label volume: (K,D,H,W) with a single 1 per voxel.
Tensor one_hot(const LabelVolume& lv);

// Class weights proportional to 1 / voxel frequency, normalized to sum to
// K. Classes absent from the volume get the largest weight present.
std::vector<double> inverse_frequency_weights(const LabelVolume& lv);

// loss = 1 − Σ_c w_c·d_c / Σ_c w_c with
// d_c = (2 Σ p_c g_c + ε) / (Σ p_c² + Σ g_c² + ε). Accumulation in double.
// `onehot` must contain only exact 0/1 values with channel sums of 1.
double weighted_soft_dice_loss(const Tensor& probs, const Tensor& onehot,
                               const LossSpec& spec);

// Analytic ∂loss/∂p, same shape as probs:
// −(w_c/Σw) · (2 g (Σp²+Σg²+ε) − (2Σpg+ε)·2p) / (Σp²+Σg²+ε)².
Tensor soft_dice_grad(const Tensor& probs, const Tensor& onehot, const LossSpec& spec);

// Training augmentations. Images fill vacated space with −1024 HU and use
// trilinear sampling; labels fill with 0 and sample nearest. Identity
// parameters are exact for shifts and for scale 1 / rotation 0.
Volume augment_shift(const Volume& v, int64_t dz, int64_t dy, int64_t dx);
LabelVolume augment_shift(const LabelVolume& lv, int64_t dz, int64_t dy, int64_t dx);

// In-plane rotation by theta degrees about the (y,x) center ((H−1)/2,
// (W−1)/2); z slices rotate independently.
Volume augment_rotate_inplane(const Volume& v, double theta_deg);
LabelVolume augment_rotate_inplane(const LabelVolume& lv, double theta_deg);

// Isotropic scaling about the volume center by factor s (s > 1 zooms in).
Volume augment_scale(const Volume& v, double s);
LabelVolume augment_scale(const LabelVolume& lv, double s);

}  // namespace cobra

#endif
