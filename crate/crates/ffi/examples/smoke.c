/* Build: cargo build -p mdcs-ffi --release
 *        cc examples/smoke.c -Iinclude -L../../target/release -lmdcs_ffi -lm -lpthread -ldl -o smoke
 */
#include <stdio.h>

#include "mdcs.h"

static int check(enum MdcsStatus s, const char *what) {
    if (s != MDCS_STATUS_OK) {
        fprintf(stderr, "%s failed (%d): %s\n", what, (int)s, mdcs_last_error());
        return 1;
    }
    return 0;
}

int main(void) {
    MdcsConfig *cfg = NULL;
    MdcsDataset *train = NULL, *test = NULL;
    MdcsModel *model = NULL;
    char *json = NULL;

    if (check(mdcs_config_parse("epochs = 3\n", &cfg), "config")) return 1;
    if (check(mdcs_dataset_prepare(cfg, &train, &test), "prepare")) return 1;
    if (check(mdcs_train(cfg, train, &model), "train")) return 1;
    if (check(mdcs_evaluate_json(model, cfg, train, test, &json), "evaluate")) return 1;
    printf("%s", json);

    mdcs_string_free(json);
    mdcs_model_free(model);
    mdcs_dataset_free(train);
    mdcs_dataset_free(test);
    mdcs_config_free(cfg);
    return 0;
}
