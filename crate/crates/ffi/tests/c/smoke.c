#include <stdio.h>
#include <string.h>

#include "madegan.h"

int main(int argc, char **argv) {
    if (argc < 2) {
        fprintf(stderr, "usage: smoke CHECKPOINT\n");
        return 64;
    }
    MgModel *model = NULL;
    if (mg_model_load(argv[1], &model) != MG_STATUS_OK) {
        fprintf(stderr, "load: %s\n", mg_last_error());
        return 1;
    }
    MgModelInfo info;
    mg_model_info(model, &info);

    size_t len = mg_beat_len();
    double beats[2 * 320];
    for (size_t i = 0; i < 2 * len; i++) {
        beats[i] = (double)((i * 37) % 101) / 101.0;
    }
    double scores[2];
    MgStatus st = mg_model_score(model, beats, 2, scores);
    double probs[6];
    MgStatus no_head = mg_model_classify(model, beats, 2, probs);
    printf("width=%zu latent=%zu slots=%zu score=%d classify=%d err=%s\n", info.width, info.latent, info.slots,
           (int)st, (int)no_head, mg_last_error());
    printf("%.17g %.17g\n", scores[0], scores[1]);

    MgModel *bad = NULL;
    MgStatus missing = mg_model_load("/nonexistent.mgan", &bad);
    printf("missing=%d null=%d\n", (int)missing, bad == NULL);
    mg_model_free(model);
    return st == MG_STATUS_OK ? 0 : 2;
}
