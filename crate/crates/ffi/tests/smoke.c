#include <stdio.h>
#include <string.h>

#include "emkit.h"

static int fail(const char *what) {
    const char *msg = emkit_last_error_message();
    fprintf(stderr, "%s: %s\n", what, msg ? msg : "(no message)");
    return 1;
}

int main(int argc, char **argv) {
    if (argc < 2) {
        fprintf(stderr, "usage: smoke CHUNKS_JSONL\n");
        return 2;
    }
    EmkitEmbedder *emb = NULL;
    EmkitDenseIndex *idx = NULL;
    EmkitRankedList *list = NULL;
    if (emkit_embedder_stub_new(7, 32, &emb) != EMKIT_STATUS_OK) return fail("embedder");
    if (emkit_dense_index_build(argv[1], emb, &idx) != EMKIT_STATUS_OK) return fail("index");
    if (emkit_dense_search(idx, emb, "opening a deposit account", 3, &list) != EMKIT_STATUS_OK) return fail("search");
    for (size_t i = 0; i < emkit_ranked_list_len(list); i++) {
        const char *id = NULL;
        double score = 0.0;
        emkit_ranked_list_get(list, i, &id, &score);
        printf("%zu\t%s\t%.6f\n", i + 1, id, score);
    }

    float q[] = {1, 0, 0, 1};
    float d[] = {0.5f, 0.5f, 0, 2, -1, 0};
    double s = 0;
    if (emkit_maxsim(q, 2, d, 3, 2, &s) != EMKIT_STATUS_OK) return fail("maxsim");
    printf("maxsim %.1f\n", s);

    if (emkit_dense_search(idx, emb, "x", 0, &list) == EMKIT_STATUS_OK) return 1;

    emkit_ranked_list_free(list);
    emkit_dense_index_free(idx);
    emkit_embedder_free(emb);
    return 0;
}
