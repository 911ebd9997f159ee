#include <stdio.h>
#include <string.h>

#include "modstan.h"

static const char *source =
    "data { int N; vector[N] x; }\n"
    "model { x ~ normal(Mean(), 1); }\n"
    "module \"zero\" Mean() { return 0; }\n"
    "module \"free\" Mean() { parameters { real mu; } return mu; }\n";

int main(void) {
    ModstanProgram *program = NULL;
    if (modstan_compile(source, &program) != MODSTAN_STATUS_OK) {
        fprintf(stderr, "compile: %s\n", modstan_last_error());
        return 1;
    }
    char *count = NULL;
    if (modstan_model_count(program, 100, &count) != MODSTAN_STATUS_OK || strcmp(count, "2") != 0) {
        return 2;
    }
    modstan_string_free(count);

    char *text = NULL;
    if (modstan_concretize(program, "Mean:free", &text) != MODSTAN_STATUS_OK) {
        return 3;
    }
    printf("%s", text);
    modstan_string_free(text);

    if (modstan_concretize(program, "Mean:none", &text) != MODSTAN_STATUS_INVALID_SELECTION) {
        return 4;
    }
    if (modstan_last_error() == NULL) {
        return 5;
    }
    modstan_program_free(program);
    return 0;
}
