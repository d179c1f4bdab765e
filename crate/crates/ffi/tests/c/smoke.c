#include <math.h>
#include <stdio.h>
#include "lpq_sampling.h"

int main(void) {
    double c[4] = {1.0, 1.0, 1.0, 1.0};
    double norm = 0.0;
    if (lpq_seq_mixed_norm(c, 2, 2, 2.0, 2.0, &norm) != LPQ_STATUS_OK || fabs(norm - 2.0) > 1e-12)
        return 1;
    if (lpq_seq_mixed_norm(c, 2, 2, 0.5, 2.0, &norm) != LPQ_STATUS_INVALID_ARGUMENT || lpq_last_error() == NULL)
        return 2;

    LpqKernel *k = NULL;
    if (lpq_kernel_new(2.0, 2.0, 1, &k) != LPQ_STATUS_OK || lpq_kernel_node_count(k) != 9)
        return 3;
    LpqSampleSet *s = NULL;
    if (lpq_samples_regular(k, 20, 20, &s) != LPQ_STATUS_OK || lpq_samples_len(s) != 400)
        return 4;
    double vals[400];
    for (int i = 0; i < 400; i++) vals[i] = 0.0;
    LpqReconstruction *r = NULL;
    if (lpq_reconstruct(k, s, vals, 400, 0.05, 60, 2.0, 2.0, 1e-9, 20, &r) != LPQ_STATUS_OK)
        return 5;
    double coeffs[9];
    if (lpq_reconstruction_coefficients(r, coeffs, 9) != LPQ_STATUS_OK)
        return 6;
    for (int i = 0; i < 9; i++)
        if (coeffs[i] != 0.0) return 7;
    lpq_reconstruction_free(r);
    lpq_samples_free(s);
    lpq_kernel_free(k);
    printf("%s\n", lpq_version());
    return 0;
}
