#pragma once

#include "psamp/numeric.hpp"
#include "psamp/rng.hpp"
#include "psamp/token_buffer.hpp"

#include <atomic>
#include <cstdint>
#include <functional>
#include <vector>

namespace psamp {

struct ArmConfig {
  Index d = 0;  // sequence length
  Index K = 0;  // categories
  Index H = 64; // hidden width
  Index E = 16; // embedding width
  Index L = 4;  // causal conv layers, dilations 1,2,4,...
};

/// Forward-pass tally. Copying a model copies the current count.
struct CallCounter {
  std::atomic<std::int64_t> n{0};
  CallCounter() = default;
  CallCounter(const CallCounter& o) : n(o.n.load()) {}
  CallCounter& operator=(const CallCounter& o) {
    n.store(o.n.load());
    return *this;
  }
};

/// Reference ARM: embedded tokens shifted right by one step (position 0
/// sees a learned start symbol) plus a learned per-position embedding, a
/// stack of strictly causal width-2 dilated conv layers with ReLU, and a
/// linear projection to per-position category logits. Output row i depends
/// on tokens strictly before i; the positional term is input-independent,
/// so it cannot leak future tokens. Raster-scan data needs it: the conv
/// stack alone is translation-invariant and cannot locate row boundaries.
struct ArmModel {
  ArmConfig cfg;

  Matrix embed;  // K x E
  Matrix pos;    // d x E, added to the shifted input
  Matrix sos;    // 1 x E, start-of-sequence input
  struct ConvLayer {
    Matrix w_prev;  // in x H, tap at position i - dilation
    Matrix w_curr;  // in x H, tap at position i
    Matrix bias;    // 1 x H
    Index dilation = 1;
  };
  std::vector<ConvLayer> layers;
  Matrix w_out;  // H x K
  Matrix b_out;  // 1 x K

  mutable CallCounter calls;

  std::vector<Matrix*> param_list();
  std::vector<const Matrix*> param_list() const;
  Index param_count() const;
};

/// Gradient buffers shaped like a model's parameters, in param_list order.
struct ArmGradients {
  Matrix embed, pos, sos;
  struct LayerGrad {
    Matrix w_prev, w_curr, bias;
  };
  std::vector<LayerGrad> layers;
  Matrix w_out, b_out;

  std::vector<Matrix*> param_list();
  void set_zero();
};

ArmGradients make_gradients(const ArmModel& model);

/// Output projection starts at zero so an untrained model is exactly
/// uniform; inner layers use scaled-uniform fan-in init.
ArmModel make_arm(const ArmConfig& cfg, Rng& rng);
/// All parameters randomized (non-uniform logits); exactness fuzzing.
ArmModel make_arm_random(const ArmConfig& cfg, Rng& rng);

struct ForwardResult {
  Matrix logits;  // d x K, rows are normalized log-probabilities
  Matrix hidden;  // d x H, row i depends on tokens < i only
};

/// Everything the backward pass needs from one teacher-forced forward.
struct ArmTrace {
  Matrix input;             // d x E
  std::vector<Matrix> pre;  // d x H per layer
  std::vector<Matrix> act;  // d x H per layer; act.back() is the hidden grid
  Matrix logp;              // d x K normalized
};

/// One parallel pass over the full buffer. Placeholder tokens are allowed
/// anywhere; increments the model call counter by exactly 1.
ForwardResult arm_forward(const ArmModel& model, const TokenBuffer& buffer);

/// Forward keeping intermediate activations. shift_input=false removes the
/// one-step shift (a deliberately non-causal variant used to prove the
/// causality checker detects violations); it never serves sampling.
ArmTrace arm_forward_traced(const ArmModel& model, const TokenBuffer& buffer,
                            bool shift_input = true);

/// Accumulates parameter gradients given d(loss)/d(logp) and an optional
/// extra d(loss)/d(hidden) term (used by jointly trained forecast heads).
void arm_backward(const ArmModel& model, const TokenBuffer& buffer, const ArmTrace& trace,
                  const Matrix& dlogp, const Matrix* dhidden_extra, ArmGradients& grads);

/// Teacher-forced negative log-likelihood in bits per dimension.
double arm_nll(const ArmModel& model, const TokenBuffer& x);

/// bpd plus its parameter gradients (accumulated into grads).
double arm_nll_with_gradients(const ArmModel& model, const TokenBuffer& x, ArmGradients& grads);

struct CausalityResult {
  bool pass = true;
  Index trial = -1;
  Index position = -1;  // first row that changed although it should not have
};

using ForwardFn = std::function<ForwardResult(const TokenBuffer&)>;

/// Perturbs one random position per trial and requires logits and hidden
/// rows 0..j to be bitwise unchanged.
CausalityResult check_causality_fn(const ForwardFn& forward, Index d, Index K, Index trials,
                                   Rng& rng);
CausalityResult check_causality(const ArmModel& model, Index trials, Rng& rng);

}  // namespace psamp
