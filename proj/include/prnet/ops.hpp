#pragma once

#include <cstddef>
#include <vector>

#include "prnet/tensor.hpp"

namespace prnet {

// ---- dense / activation kernels ------------------------------------------

// y = x.w + b, x:[B,D] w:[D,U] b:[U]
Tensor affine_forward(const Tensor& x, const Tensor& w, const Tensor& b);

struct AffineGrads {
    Tensor dx, dw, db;
};
AffineGrads affine_backward(const Tensor& dy, const Tensor& x, const Tensor& w);

Tensor relu_forward(const Tensor& x);
// Subgradient 0 at the kink: propagates only where x > 0.
Tensor relu_backward(const Tensor& dy, const Tensor& x);

// ---- convolution / pooling ------------------------------------------------

enum class Padding { Same, Valid };

// Output extent for one spatial axis. Same: ceil(in/stride); Valid:
// floor((in-k)/stride)+1.
size_t conv_out_size(size_t in, size_t kernel, size_t stride, Padding pad);

struct Conv2dSpec {
    size_t stride = 1;
    Padding padding = Padding::Same;
};

// x:[B,H,W,Cin] w:[KH,KW,Cin,Cout] b:[Cout] -> [B,OH,OW,Cout]
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, const Conv2dSpec& spec);

struct Conv2dGrads {
    Tensor dx, dw, db;
};
Conv2dGrads conv2d_backward(const Tensor& dy, const Tensor& x, const Tensor& w,
                            const Conv2dSpec& spec);

struct MaxPoolResult {
    Tensor y;
    std::vector<size_t> argmax;  // flat input index per output element
};
MaxPoolResult maxpool_forward(const Tensor& x, size_t kernel, size_t stride, Padding pad);
Tensor maxpool_backward(const Tensor& dy, const Tensor& x, const MaxPoolResult& fwd);

// ---- batch normalization ---------------------------------------------------

// Per-feature standardization over rows of a [rows, features] view.
// Training mode requires rows >= 2.
struct BatchNormCache {
    Tensor xhat;     // normalized input
    Tensor inv_std;  // 1/sqrt(var+eps) per feature
    Tensor mean;     // batch mean per feature
    Tensor var;      // biased batch variance per feature
};
Tensor batch_norm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                          BatchNormCache* cache);
Tensor batch_norm_infer(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                        const Tensor& running_mean, const Tensor& running_var, double eps);

struct BatchNormGrads {
    Tensor dx, dgamma, dbeta;
};
BatchNormGrads batch_norm_backward(const Tensor& dy, const BatchNormCache& cache,
                                   const Tensor& gamma);
BatchNormGrads batch_norm_infer_backward(const Tensor& dy, const Tensor& x, const Tensor& gamma,
                                         const Tensor& running_mean, const Tensor& running_var,
                                         double eps);

// ---- LSTM cell -------------------------------------------------------------

struct LstmWeights {
    Tensor wx;  // [D, 4H]
    Tensor wh;  // [H, 4H]
    Tensor b;   // [4H], gate blocks ordered i,f,g,o
};

struct LstmState {
    Tensor hidden;  // [B,H]
    Tensor cell;    // [B,H]
};

struct LstmCache {
    Tensor x, h_prev, c_prev;
    Tensor i, f, g, o;  // post-activation gates, [B,H] each
    Tensor c_new, tanh_c;
};

LstmState lstm_cell_forward(const Tensor& x, const LstmState& state, const LstmWeights& w,
                            LstmCache* cache);

struct LstmGrads {
    Tensor dx, dh_prev, dc_prev, dwx, dwh, db;
};
LstmGrads lstm_cell_backward(const Tensor& dh, const Tensor& dc, const LstmCache& cache,
                             const LstmWeights& w);

// ---- softmax cross-entropy -------------------------------------------------

struct SoftmaxCE {
    double loss = 0.0;  // mean over batch
    Tensor probs;       // [B,K]
    Tensor dlogits;     // (probs - onehot)/B
};
SoftmaxCE softmax_cross_entropy(const Tensor& logits, const std::vector<size_t>& labels);

// ---- row plumbing used by the graph ops -------------------------------------

Tensor gather_rows(const Tensor& x, const std::vector<size_t>& idx);
void scatter_add_rows(Tensor& dst, const std::vector<size_t>& idx, const Tensor& src);
Tensor concat_cols(const std::vector<const Tensor*>& parts);
// Sum of consecutive row groups: [G*group, F] -> [G, F]; scale applied after.
Tensor sum_row_groups(const Tensor& x, size_t group, double scale);
Tensor colsum(const Tensor& x);

}  // namespace prnet
