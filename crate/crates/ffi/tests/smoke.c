#include <stdio.h>
#include <string.h>

#include "vstrata.h"

#define CHECK(call)                                                          \
    do {                                                                     \
        VstStatus s_ = (call);                                               \
        if (s_ != VST_STATUS_OK) {                                           \
            fprintf(stderr, "%s failed: %s (%s)\n", #call,                   \
                    vst_status_name(s_), vst_last_error());                  \
            return 1;                                                        \
        }                                                                    \
    } while (0)

int main(void) {
    /* 8x6 canvas: 2-wide strip on rows 1..2, 3-wide strip on rows 3..5 */
    uint8_t pixels[48] = {0};
    for (size_t r = 1; r < 6; r++)
        for (size_t c = 0; c < 8; c++)
            pixels[r * 8 + c] = 1;

    VstMask *mask = NULL;
    CHECK(vst_mask_new(8, 6, pixels, &mask));

    VstMask *thin = NULL, *stem = NULL, *raw = NULL;
    CHECK(vst_stack3(mask, 2, &thin, &stem, &raw));
    if (vst_mask_count(raw) != 40 || vst_mask_count(thin) + vst_mask_count(stem) != 40) {
        fprintf(stderr, "unexpected channel counts\n");
        return 1;
    }

    size_t ladder[] = {1, 2};
    VstStrata *strata = NULL;
    CHECK(vst_stratify(mask, ladder, 2, &strata));
    size_t total = 0;
    for (size_t i = 0; i < vst_strata_count(strata); i++) {
        VstMask *s = NULL;
        CHECK(vst_strata_get(strata, i, &s));
        total += vst_mask_count(s);
        vst_mask_free(s);
    }
    if (total != 40) {
        fprintf(stderr, "strata cover %zu pixels, expected 40\n", total);
        return 1;
    }

    VstPoint a[] = {{0, 0}, {1, 0}};
    VstPoint b[] = {{0, 2}, {1, 2}};
    size_t d = 0;
    CHECK(vst_discrete_frechet(a, 2, b, 2, &d));

    VstMask *bad = NULL;
    VstStatus s = vst_open(mask, 0, false, &bad);
    if (s != VST_STATUS_INVALID_ARGUMENT || bad != NULL || vst_last_error() == NULL) {
        fprintf(stderr, "kernel 0 was not rejected\n");
        return 1;
    }

    printf("vstrata %s: frechet=%zu strata=%zu\n", vst_version(), d, vst_strata_count(strata));
    vst_strata_free(strata);
    vst_mask_free(thin);
    vst_mask_free(stem);
    vst_mask_free(raw);
    vst_mask_free(mask);
    return d == 2 ? 0 : 1;
}
